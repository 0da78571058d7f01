#include "ragalign/router.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ragalign/error.hpp"

namespace ragalign {

void RouterConfig::validate() const {
  if (learning_rate <= 0.0) fail(Errc::config_error, "learning_rate must be positive");
  if (weight_decay < 0.0) fail(Errc::config_error, "weight_decay must be nonnegative");
  if (epochs < 1) fail(Errc::config_error, "epochs must be >= 1");
}

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
  double max_logit = -1e300;
  for (double l : logits) max_logit = std::max(max_logit, l);
  std::vector<double> probs(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    denom += probs[i];
  }
  for (auto& p : probs) p /= denom;
  return probs;
}

std::size_t domain_index(const std::vector<std::string>& names, const std::string& name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  fail(Errc::missing_domain, "unknown domain label '" + name + "'");
}

}  // namespace

RouterParams train_router(const std::vector<LabeledFeature>& labeled,
                          const std::vector<std::string>& domains, const RouterConfig& config) {
  config.validate();
  if (domains.empty()) fail(Errc::config_error, "router needs at least one domain");
  if (labeled.empty()) fail(Errc::insufficient_data, "router training set is empty");

  std::set<std::string> seen;
  for (const auto& item : labeled) seen.insert(item.domain);
  for (const auto& name : domains)
    if (!seen.count(name)) fail(Errc::missing_domain, "no training sample for domain '" + name + "'");

  const std::size_t dim = labeled.front().features.dim();
  const std::size_t k = domains.size();
  for (const auto& item : labeled)
    if (item.features.dim() != dim) fail(Errc::dim_mismatch, "router features must share one dim");

  RouterParams params;
  params.domain_names = domains;
  params.weights = Matrix(dim, k);  // zero init; the objective is convex
  params.bias.assign(k, 0.0);

  std::vector<std::size_t> targets;
  targets.reserve(labeled.size());
  for (const auto& item : labeled) targets.push_back(domain_index(domains, item.domain));

  const double inv_n = 1.0 / static_cast<double>(labeled.size());
  Matrix grad_w(dim, k);
  std::vector<double> grad_b(k);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad_w.data().begin(), grad_w.data().end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (std::size_t n = 0; n < labeled.size(); ++n) {
      std::vector<double> logits = params.weights.left_multiply(labeled[n].features.values);
      for (std::size_t c = 0; c < k; ++c) logits[c] += params.bias[c];
      std::vector<double> probs = softmax(logits);
      probs[targets[n]] -= 1.0;
      for (std::size_t f = 0; f < dim; ++f) {
        const double xf = labeled[n].features.values[f];
        if (xf == 0.0) continue;
        for (std::size_t c = 0; c < k; ++c) grad_w.at(f, c) += xf * probs[c];
      }
      for (std::size_t c = 0; c < k; ++c) grad_b[c] += probs[c];
    }
    for (std::size_t i = 0; i < grad_w.data().size(); ++i) {
      params.weights.data()[i] -=
          config.learning_rate * (inv_n * grad_w.data()[i] + config.weight_decay * params.weights.data()[i]);
    }
    for (std::size_t c = 0; c < k; ++c) params.bias[c] -= config.learning_rate * inv_n * grad_b[c];
  }

  return params;
}

DomainPrediction identify_domain(const RouterParams& router, const FeatureVector& x) {
  if (x.dim() != router.dim_in()) fail(Errc::dim_mismatch, "router input dim mismatch");
  std::vector<double> logits = router.weights.left_multiply(x.values);
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += router.bias[c];

  DomainPrediction out;
  out.probabilities = softmax(logits);
  std::size_t best = 0;
  for (std::size_t c = 1; c < out.probabilities.size(); ++c)
    if (out.probabilities[c] > out.probabilities[best]) best = c;  // strict: first max wins ties
  out.domain = router.domain_names[best];
  return out;
}

}  // namespace ragalign
