#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ragalign/rng.hpp"
#include "ragalign/vec.hpp"

namespace ragalign {

// Flat conditioning input for a toy policy. The first visual_dim entries
// are the image block; the remainder is question/context features.
struct PolicyInput {
  std::vector<double> features;
  std::size_t visual_dim = 0;

  // Same input with the visual block swapped out (noisy-image evaluation).
  PolicyInput with_visual(const std::vector<double>& visual) const;
};

// Response value: a vocabulary index for categorical policies, a real
// scalar for the linear-Gaussian family.
using AnswerValue = std::variant<int, double>;

// Minimal differentiable-policy surface the preference trainer and the
// weight diagnostics need. exp(log_prob) must normalize over responses.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual double log_prob(const AnswerValue& y, const PolicyInput& x) const = 0;
  // d log_prob / d parameters, flattened to match parameters().
  virtual std::vector<double> param_grad_log_prob(const AnswerValue& y,
                                                  const PolicyInput& x) const = 0;
  // d log_prob / d features, over the full input; callers slice the block
  // they care about (the visual block is the leading visual_dim entries).
  virtual std::vector<double> input_grad_log_prob(const AnswerValue& y,
                                                  const PolicyInput& x) const = 0;
  virtual AnswerValue sample(const PolicyInput& x, SeededRng& rng) const = 0;

  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(const std::vector<double>& params) = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;
};

// Softmax-linear policy over a finite answer vocabulary:
// logits = W^T x + b.
class CategoricalPolicy : public Policy {
 public:
  CategoricalPolicy() = default;
  CategoricalPolicy(std::vector<std::string> vocab, std::size_t feature_dim);

  static CategoricalPolicy random_init(std::vector<std::string> vocab, std::size_t feature_dim,
                                       double scale, SeededRng& rng);

  double log_prob(const AnswerValue& y, const PolicyInput& x) const override;
  std::vector<double> param_grad_log_prob(const AnswerValue& y, const PolicyInput& x) const override;
  std::vector<double> input_grad_log_prob(const AnswerValue& y, const PolicyInput& x) const override;
  AnswerValue sample(const PolicyInput& x, SeededRng& rng) const override;

  std::vector<double> parameters() const override;
  void set_parameters(const std::vector<double>& params) override;
  std::unique_ptr<Policy> clone() const override;

  std::vector<double> probabilities(const PolicyInput& x) const;
  int answer_index(const std::string& answer) const;  // -1 when absent

  const std::vector<std::string>& vocab() const { return vocab_; }
  std::size_t feature_dim() const { return weights_.rows(); }
  Matrix& weights() { return weights_; }
  const Matrix& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  std::vector<double> logits(const PolicyInput& x) const;

  std::vector<std::string> vocab_;
  Matrix weights_;  // feature_dim x vocab
  std::vector<double> bias_;
};

// y = theta . x + eps with unit observation noise.
class LinearGaussianPolicy : public Policy {
 public:
  LinearGaussianPolicy() = default;
  explicit LinearGaussianPolicy(std::vector<double> theta) : theta_(std::move(theta)) {}

  double log_prob(const AnswerValue& y, const PolicyInput& x) const override;
  std::vector<double> param_grad_log_prob(const AnswerValue& y, const PolicyInput& x) const override;
  std::vector<double> input_grad_log_prob(const AnswerValue& y, const PolicyInput& x) const override;
  AnswerValue sample(const PolicyInput& x, SeededRng& rng) const override;

  std::vector<double> parameters() const override { return theta_; }
  void set_parameters(const std::vector<double>& params) override { theta_ = params; }
  std::unique_ptr<Policy> clone() const override;

  const std::vector<double>& theta() const { return theta_; }

 private:
  double mean(const PolicyInput& x) const;

  std::vector<double> theta_;
};

}  // namespace ragalign
