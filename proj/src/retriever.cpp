#include "ragalign/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ragalign/error.hpp"
#include "ragalign/rng.hpp"

namespace ragalign {

RetrieverConfig RetrieverConfig::main_preset() {
  RetrieverConfig c;
  c.learning_rate = 1e-3;
  c.weight_decay = 1e-2;
  c.batch_size = 32;
  return c;
}

RetrieverConfig RetrieverConfig::appendix_preset() {
  RetrieverConfig c;
  c.learning_rate = 1e-4;
  c.weight_decay = 1e-2;
  c.batch_size = 512;
  return c;
}

void RetrieverConfig::validate() const {
  if (learning_rate <= 0.0) fail(Errc::config_error, "learning_rate must be positive");
  if (weight_decay < 0.0) fail(Errc::config_error, "weight_decay must be nonnegative");
  if (epochs < 1) fail(Errc::config_error, "epochs must be >= 1");
  if (batch_size < 2) fail(Errc::config_error, "batch_size must be >= 2");
  if (temperature <= 0.0) fail(Errc::config_error, "temperature must be positive");
}

Embedding encode(const EncoderParams& params, Modality modality, const FeatureVector& x) {
  const Matrix& w = modality == Modality::image ? params.image_weights : params.text_weights;
  if (x.dim() != w.rows())
    fail(Errc::dim_mismatch, "encoder expects dim " + std::to_string(w.rows()) + ", got " +
                                 std::to_string(x.dim()));
  return l2_normalize(FeatureVector(w.left_multiply(x.values)));
}

namespace {

struct SoftmaxGrid {
  // row[i][j]: softmax over j of s(i, .)/t; col[i][j]: softmax over i of s(., j)/t.
  std::vector<double> row;
  std::vector<double> col;
};

SoftmaxGrid softmax_both_ways(const SimilarityMatrix& s, double temperature) {
  const std::size_t n = s.size();
  SoftmaxGrid grid;
  grid.row.assign(n * n, 0.0);
  grid.col.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row_max = -1e300;
    for (std::size_t j = 0; j < n; ++j) row_max = std::max(row_max, s.at(i, j) / temperature);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      grid.row[i * n + j] = std::exp(s.at(i, j) / temperature - row_max);
      denom += grid.row[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) grid.row[i * n + j] /= denom;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double col_max = -1e300;
    for (std::size_t i = 0; i < n; ++i) col_max = std::max(col_max, s.at(i, j) / temperature);
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      grid.col[i * n + j] = std::exp(s.at(i, j) / temperature - col_max);
      denom += grid.col[i * n + j];
    }
    for (std::size_t i = 0; i < n; ++i) grid.col[i * n + j] /= denom;
  }
  return grid;
}

}  // namespace

double contrastive_loss(const SimilarityMatrix& s, double temperature) {
  const std::size_t n = s.size();
  if (n == 0) fail(Errc::empty_batch, "contrastive loss over an empty batch");
  if (temperature <= 0.0) fail(Errc::config_error, "temperature must be positive");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!std::isfinite(s.at(i, j))) fail(Errc::non_finite, "similarity matrix entry");

  const SoftmaxGrid grid = softmax_both_ways(s, temperature);
  std::vector<double> terms;
  terms.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    terms.push_back(-std::log(grid.row[i * n + i]));
    terms.push_back(-std::log(grid.col[i * n + i]));
  }
  return pairwise_sum(terms) / (2.0 * static_cast<double>(n));
}

namespace {

struct EncodedBatch {
  std::vector<Embedding> unit;       // normalized embeddings
  std::vector<double> norms;         // pre-normalization norms
};

EncodedBatch encode_batch(const Matrix& w, const std::vector<FeatureVector>& xs) {
  EncodedBatch batch;
  batch.unit.reserve(xs.size());
  batch.norms.reserve(xs.size());
  for (const auto& x : xs) {
    std::vector<double> z = w.left_multiply(x.values);
    const double norm = l2_norm(z);
    if (norm < 1e-12) fail(Errc::zero_vector, "encoder produced a zero embedding");
    Embedding e;
    e.values.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) e.values[i] = z[i] / norm;
    batch.unit.push_back(std::move(e));
    batch.norms.push_back(norm);
  }
  return batch;
}

void validate_batch(const std::vector<FeatureVector>& images,
                    const std::vector<FeatureVector>& texts, const EncoderParams& params) {
  if (images.size() != texts.size()) fail(Errc::dim_mismatch, "image/text batch length mismatch");
  if (images.size() < 2) fail(Errc::insufficient_data, "contrastive batch needs >= 2 pairs");
  for (const auto& x : images)
    if (x.dim() != params.dim_in()) fail(Errc::dim_mismatch, "image feature dim mismatch");
  for (const auto& x : texts)
    if (x.dim() != params.dim_in()) fail(Errc::dim_mismatch, "text feature dim mismatch");
}

}  // namespace

double contrastive_batch_loss(const std::vector<FeatureVector>& images,
                              const std::vector<FeatureVector>& texts,
                              const EncoderParams& params, double temperature) {
  validate_batch(images, texts, params);
  const EncodedBatch img = encode_batch(params.image_weights, images);
  const EncodedBatch txt = encode_batch(params.text_weights, texts);
  return contrastive_loss(similarity_matrix(img.unit, txt.unit), temperature);
}

ContrastiveGrad contrastive_grad(const std::vector<FeatureVector>& images,
                                 const std::vector<FeatureVector>& texts,
                                 const EncoderParams& params, double temperature) {
  validate_batch(images, texts, params);
  const std::size_t n = images.size();
  const std::size_t dim_emb = params.dim_emb();

  const EncodedBatch img = encode_batch(params.image_weights, images);
  const EncodedBatch txt = encode_batch(params.text_weights, texts);
  const SimilarityMatrix s = similarity_matrix(img.unit, txt.unit);
  const SoftmaxGrid grid = softmax_both_ways(s, temperature);

  // dL/dS[i][j]; the diagonal carries both cross-entropy targets.
  std::vector<double> ds(n * n);
  const double scale = 1.0 / (2.0 * static_cast<double>(n) * temperature);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      ds[i * n + j] = scale * ((grid.row[i * n + j] - delta) + (grid.col[i * n + j] - delta));
    }
  }

  ContrastiveGrad grad;
  grad.image_weights = Matrix(params.dim_in(), dim_emb);
  grad.text_weights = Matrix(params.dim_in(), dim_emb);

  // Image side: dL/du_i = sum_j ds[i][j] * v_j, then back through the
  // normalization Jacobian (I - u u^T)/|z| and the linear map.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> gu(dim_emb, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = ds[i * n + j];
      if (g == 0.0) continue;
      for (std::size_t e = 0; e < dim_emb; ++e) gu[e] += g * txt.unit[j].values[e];
    }
    const double radial = dot(gu, img.unit[i].values);
    for (std::size_t e = 0; e < dim_emb; ++e)
      gu[e] = (gu[e] - radial * img.unit[i].values[e]) / img.norms[i];
    for (std::size_t f = 0; f < params.dim_in(); ++f) {
      const double xf = images[i].values[f];
      if (xf == 0.0) continue;
      for (std::size_t e = 0; e < dim_emb; ++e) grad.image_weights.at(f, e) += xf * gu[e];
    }
  }

  // Text side mirrors it with columns of ds.
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> gv(dim_emb, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = ds[i * n + j];
      if (g == 0.0) continue;
      for (std::size_t e = 0; e < dim_emb; ++e) gv[e] += g * img.unit[i].values[e];
    }
    const double radial = dot(gv, txt.unit[j].values);
    for (std::size_t e = 0; e < dim_emb; ++e)
      gv[e] = (gv[e] - radial * txt.unit[j].values[e]) / txt.norms[j];
    for (std::size_t f = 0; f < params.dim_in(); ++f) {
      const double tf = texts[j].values[f];
      if (tf == 0.0) continue;
      for (std::size_t e = 0; e < dim_emb; ++e) grad.text_weights.at(f, e) += tf * gv[e];
    }
  }

  return grad;
}

namespace {

// Decoupled-weight-decay Adam over one flat parameter vector.
class AdamW {
 public:
  AdamW(std::size_t n, double lr, double wd)
      : lr_(lr), wd_(wd), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * params[i]);
    }
  }

 private:
  double lr_;
  double wd_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

}  // namespace

RetrieverTrainResult train_retriever(const PairList& pairs, const RetrieverConfig& config,
                                     std::size_t dim_emb, const std::string& domain) {
  config.validate();
  if (pairs.size() < 2) fail(Errc::insufficient_data, "need at least 2 training pairs");
  const std::size_t dim_in = pairs.front().first.dim();
  for (const auto& [img, txt] : pairs) {
    if (img.dim() != dim_in || txt.dim() != dim_in)
      fail(Errc::dim_mismatch, "training pairs must share one feature dim");
  }

  SeededRng rng(config.seed);
  EncoderParams params;
  params.domain = domain;
  params.image_weights = Matrix(dim_in, dim_emb);
  params.text_weights = Matrix(dim_in, dim_emb);
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(dim_in));
  for (auto& w : params.image_weights.data()) w = init_scale * rng.gaussian();
  for (auto& w : params.text_weights.data()) w = init_scale * rng.gaussian();

  const std::size_t n_params = dim_in * dim_emb;
  AdamW opt_img(n_params, config.learning_rate, config.weight_decay);
  AdamW opt_txt(n_params, config.learning_rate, config.weight_decay);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  RetrieverTrainResult result;
  result.epoch_losses.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<double> batch_losses;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      if (end - start < 2) continue;  // a singleton batch has zero loss and gradient
      std::vector<FeatureVector> imgs, txts;
      imgs.reserve(end - start);
      txts.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        imgs.push_back(pairs[order[i]].first);
        txts.push_back(pairs[order[i]].second);
      }
      batch_losses.push_back(contrastive_batch_loss(imgs, txts, params, config.temperature));
      const ContrastiveGrad grad = contrastive_grad(imgs, txts, params, config.temperature);
      opt_img.step(params.image_weights.data(), grad.image_weights.data());
      opt_txt.step(params.text_weights.data(), grad.text_weights.data());
    }
    result.epoch_losses.push_back(batch_losses.empty()
                                      ? 0.0
                                      : pairwise_sum(batch_losses) /
                                            static_cast<double>(batch_losses.size()));
  }

  result.params = std::move(params);
  return result;
}

double recall_at_k(const EncoderParams& params, const PairList& eval_pairs, std::size_t k) {
  if (eval_pairs.empty()) fail(Errc::empty_eval, "recall over an empty eval set");
  if (k < 1 || k > eval_pairs.size())
    fail(Errc::config_error, "k must lie in [1, corpus size]");

  std::vector<Embedding> imgs, txts;
  imgs.reserve(eval_pairs.size());
  txts.reserve(eval_pairs.size());
  for (const auto& [img, txt] : eval_pairs) {
    imgs.push_back(encode(params, Modality::image, img));
    txts.push_back(encode(params, Modality::text, txt));
  }

  std::size_t hits = 0;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const double own = cosine_similarity(imgs[i], txts[i]);
    // Rank of the paired text: ties broken by text index, lower index first.
    std::size_t rank = 0;
    for (std::size_t j = 0; j < txts.size(); ++j) {
      if (j == i) continue;
      const double other = cosine_similarity(imgs[i], txts[j]);
      if (other > own || (other == own && j < i)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(eval_pairs.size());
}

}  // namespace ragalign
