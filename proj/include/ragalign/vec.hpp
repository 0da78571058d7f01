#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ragalign {

// Raw input features; the retrieval-side stand-in for an image or a report.
struct FeatureVector {
  std::vector<double> values;

  FeatureVector() = default;
  explicit FeatureVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dim() const { return values.size(); }
};

// Unit-norm vector produced by l2_normalize or an encoder.
struct Embedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

// Square image-by-text cosine grid; row = image index, column = text index.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& at(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Small dense row-major matrix; enough for linear encoders and classifiers.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // out[c] = sum_r x[r] * M[r][c]
  std::vector<double> left_multiply(const std::vector<double>& x) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void check_finite(const std::vector<double>& values, const std::string& what);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& v);

Embedding l2_normalize(const FeatureVector& v);

double cosine_similarity(const Embedding& a, const Embedding& b);

SimilarityMatrix similarity_matrix(const std::vector<Embedding>& images,
                                   const std::vector<Embedding>& texts);

// Deterministic pairwise-tree summation. Used wherever a sum over many
// terms must not depend on accumulation order.
double pairwise_sum(const std::vector<double>& terms);

double sigmoid(double x);
double log_sigmoid(double x);

std::vector<double> linear_ramp(double lo, double hi, std::size_t n);

}  // namespace ragalign
