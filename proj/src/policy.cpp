#include "ragalign/policy.hpp"

#include <algorithm>
#include <cmath>

#include "ragalign/error.hpp"

namespace ragalign {

PolicyInput PolicyInput::with_visual(const std::vector<double>& visual) const {
  if (visual.size() != visual_dim)
    fail(Errc::dim_mismatch, "replacement visual block has the wrong length");
  PolicyInput out = *this;
  std::copy(visual.begin(), visual.end(), out.features.begin());
  return out;
}

namespace {

int require_index(const AnswerValue& y, std::size_t vocab_size) {
  const int* index = std::get_if<int>(&y);
  if (!index) fail(Errc::model_failure, "categorical policy expects an index answer");
  if (*index < 0 || static_cast<std::size_t>(*index) >= vocab_size)
    fail(Errc::model_failure, "answer index out of vocabulary range");
  return *index;
}

double require_scalar(const AnswerValue& y) {
  const double* value = std::get_if<double>(&y);
  if (!value) fail(Errc::model_failure, "linear-Gaussian policy expects a scalar answer");
  return *value;
}

constexpr double kLogTwoPi = 1.8378770664093454836;

}  // namespace

CategoricalPolicy::CategoricalPolicy(std::vector<std::string> vocab, std::size_t feature_dim)
    : vocab_(std::move(vocab)), weights_(feature_dim, vocab_.size()), bias_(vocab_.size(), 0.0) {
  if (vocab_.empty()) fail(Errc::config_error, "vocabulary must be nonempty");
}

CategoricalPolicy CategoricalPolicy::random_init(std::vector<std::string> vocab,
                                                 std::size_t feature_dim, double scale,
                                                 SeededRng& rng) {
  CategoricalPolicy policy(std::move(vocab), feature_dim);
  for (auto& w : policy.weights_.data()) w = scale * rng.gaussian();
  for (auto& b : policy.bias_) b = scale * rng.gaussian();
  return policy;
}

std::vector<double> CategoricalPolicy::logits(const PolicyInput& x) const {
  if (x.features.size() != weights_.rows())
    fail(Errc::dim_mismatch, "policy input dim mismatch");
  std::vector<double> out = weights_.left_multiply(x.features);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += bias_[k];
  return out;
}

std::vector<double> CategoricalPolicy::probabilities(const PolicyInput& x) const {
  std::vector<double> l = logits(x);
  double max_logit = -1e300;
  for (double v : l) max_logit = std::max(max_logit, v);
  double denom = 0.0;
  for (auto& v : l) {
    v = std::exp(v - max_logit);
    denom += v;
  }
  for (auto& v : l) v /= denom;
  return l;
}

double CategoricalPolicy::log_prob(const AnswerValue& y, const PolicyInput& x) const {
  const int index = require_index(y, vocab_.size());
  std::vector<double> l = logits(x);
  double max_logit = -1e300;
  for (double v : l) max_logit = std::max(max_logit, v);
  double denom = 0.0;
  for (double v : l) denom += std::exp(v - max_logit);
  return l[index] - max_logit - std::log(denom);
}

std::vector<double> CategoricalPolicy::param_grad_log_prob(const AnswerValue& y,
                                                           const PolicyInput& x) const {
  const int index = require_index(y, vocab_.size());
  const std::vector<double> probs = probabilities(x);
  const std::size_t dim = weights_.rows();
  const std::size_t k = vocab_.size();
  std::vector<double> grad(dim * k + k, 0.0);
  for (std::size_t f = 0; f < dim; ++f) {
    const double xf = x.features[f];
    if (xf == 0.0) continue;
    for (std::size_t c = 0; c < k; ++c) {
      const double indicator = static_cast<std::size_t>(index) == c ? 1.0 : 0.0;
      grad[f * k + c] = xf * (indicator - probs[c]);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double indicator = static_cast<std::size_t>(index) == c ? 1.0 : 0.0;
    grad[dim * k + c] = indicator - probs[c];
  }
  return grad;
}

std::vector<double> CategoricalPolicy::input_grad_log_prob(const AnswerValue& y,
                                                           const PolicyInput& x) const {
  const int index = require_index(y, vocab_.size());
  const std::vector<double> probs = probabilities(x);
  const std::size_t dim = weights_.rows();
  const std::size_t k = vocab_.size();
  std::vector<double> grad(dim, 0.0);
  for (std::size_t f = 0; f < dim; ++f) {
    double expected = 0.0;
    for (std::size_t c = 0; c < k; ++c) expected += probs[c] * weights_.at(f, c);
    grad[f] = weights_.at(f, static_cast<std::size_t>(index)) - expected;
  }
  return grad;
}

AnswerValue CategoricalPolicy::sample(const PolicyInput& x, SeededRng& rng) const {
  const std::vector<double> probs = probabilities(x);
  const double u = rng.uniform01();
  double cumulative = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    cumulative += probs[c];
    if (u <= cumulative) return static_cast<int>(c);
  }
  return static_cast<int>(probs.size() - 1);
}

std::vector<double> CategoricalPolicy::parameters() const {
  std::vector<double> out = weights_.data();
  out.insert(out.end(), bias_.begin(), bias_.end());
  return out;
}

void CategoricalPolicy::set_parameters(const std::vector<double>& params) {
  const std::size_t expected = weights_.data().size() + bias_.size();
  if (params.size() != expected) fail(Errc::dim_mismatch, "parameter vector length mismatch");
  std::copy(params.begin(), params.begin() + static_cast<long>(weights_.data().size()),
            weights_.data().begin());
  std::copy(params.begin() + static_cast<long>(weights_.data().size()), params.end(),
            bias_.begin());
}

std::unique_ptr<Policy> CategoricalPolicy::clone() const {
  return std::make_unique<CategoricalPolicy>(*this);
}

int CategoricalPolicy::answer_index(const std::string& answer) const {
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    if (vocab_[i] == answer) return static_cast<int>(i);
  return -1;
}

double LinearGaussianPolicy::mean(const PolicyInput& x) const {
  if (x.features.size() != theta_.size())
    fail(Errc::dim_mismatch, "policy input dim mismatch");
  return dot(theta_, x.features);
}

double LinearGaussianPolicy::log_prob(const AnswerValue& y, const PolicyInput& x) const {
  const double value = require_scalar(y);
  const double residual = value - mean(x);
  return -0.5 * (kLogTwoPi + residual * residual);
}

std::vector<double> LinearGaussianPolicy::param_grad_log_prob(const AnswerValue& y,
                                                              const PolicyInput& x) const {
  const double residual = require_scalar(y) - mean(x);
  std::vector<double> grad(theta_.size());
  for (std::size_t i = 0; i < theta_.size(); ++i) grad[i] = residual * x.features[i];
  return grad;
}

std::vector<double> LinearGaussianPolicy::input_grad_log_prob(const AnswerValue& y,
                                                              const PolicyInput& x) const {
  const double residual = require_scalar(y) - mean(x);
  std::vector<double> grad(theta_.size());
  for (std::size_t i = 0; i < theta_.size(); ++i) grad[i] = residual * theta_[i];
  return grad;
}

AnswerValue LinearGaussianPolicy::sample(const PolicyInput& x, SeededRng& rng) const {
  return mean(x) + rng.gaussian();
}

std::unique_ptr<Policy> LinearGaussianPolicy::clone() const {
  return std::make_unique<LinearGaussianPolicy>(*this);
}

}  // namespace ragalign
