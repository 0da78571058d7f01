#include "ragalign/vec.hpp"

#include <algorithm>
#include <cmath>

#include "ragalign/error.hpp"

namespace ragalign {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

std::vector<double> Matrix::left_multiply(const std::vector<double>& x) const {
  if (x.size() != rows_) fail(Errc::dim_mismatch, "matrix expects input of dim " + std::to_string(rows_));
  std::vector<double> out(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < cols_; ++c) out[c] += xr * data_[r * cols_ + c];
  }
  return out;
}

void check_finite(const std::vector<double>& values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(Errc::non_finite, what + " contains a non-finite entry");
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(Errc::dim_mismatch, "dot of unequal dims");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double l2_norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

Embedding l2_normalize(const FeatureVector& v) {
  check_finite(v.values, "feature vector");
  const double norm = l2_norm(v.values);
  if (norm < 1e-12) fail(Errc::zero_vector, "cannot normalize a (near-)zero vector");
  Embedding out;
  out.values.resize(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out.values[i] = v.values[i] / norm;
  return out;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) fail(Errc::dim_mismatch, "cosine of unequal dims");
  // Unit-norm inputs can still drift past +-1 by an ulp; clamp.
  return std::clamp(dot(a.values, b.values), -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(const std::vector<Embedding>& images,
                                   const std::vector<Embedding>& texts) {
  if (images.empty() || texts.empty()) fail(Errc::empty_batch, "similarity matrix needs N >= 1");
  if (images.size() != texts.size())
    fail(Errc::dim_mismatch, "image and text batches must have equal length");
  const std::size_t n = images.size();
  SimilarityMatrix s(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s.at(i, j) = cosine_similarity(images[i], texts[j]);
  return s;
}

namespace {
double pairwise_sum_range(const double* data, std::size_t n) {
  if (n <= 8) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += data[i];
    return sum;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, n - half);
}
}  // namespace

double pairwise_sum(const std::vector<double>& terms) {
  return pairwise_sum_range(terms.data(), terms.size());
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  // log(1/(1+e^-x)) = -log1p(e^-x), stable on both tails.
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

std::vector<double> linear_ramp(double lo, double hi, std::size_t n) {
  std::vector<double> out(n, lo);
  if (n > 1) {
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  }
  return out;
}

}  // namespace ragalign
