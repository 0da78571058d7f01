#include "ragalign/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ragalign/error.hpp"

namespace ragalign {

const char* pair_category_name(PairCategory category) {
  switch (category) {
    case PairCategory::cm: return "cm";
    case PairCategory::oa1: return "oa1";
    case PairCategory::oa2: return "oa2";
  }
  return "?";
}

PairCategory pair_category_from_name(const std::string& name) {
  if (name == "cm") return PairCategory::cm;
  if (name == "oa1") return PairCategory::oa1;
  if (name == "oa2") return PairCategory::oa2;
  fail(Errc::config_error, "unknown pair category '" + name + "'");
}

void DpoConfig::validate() const {
  if (alpha <= 0.0) fail(Errc::config_error, "alpha must be positive");
  if (learning_rate < 0.0) fail(Errc::config_error, "learning_rate must be nonnegative");
  if (epochs < 1) fail(Errc::config_error, "epochs must be >= 1");
}

double preference_probability(double reward_preferred, double reward_dispreferred) {
  if (!std::isfinite(reward_preferred) || !std::isfinite(reward_dispreferred))
    fail(Errc::non_finite, "rewards must be finite");
  return sigmoid(reward_preferred - reward_dispreferred);
}

double dpo_loss_from_margins(const std::vector<double>& margins, double alpha) {
  if (margins.empty()) fail(Errc::empty_dataset, "no pairs to average over");
  std::vector<double> terms;
  terms.reserve(margins.size());
  for (double margin : margins) {
    if (!std::isfinite(margin)) fail(Errc::non_finite, "non-finite margin");
    terms.push_back(-log_sigmoid(alpha * margin));
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

namespace {

// Input used for the dispreferred term: the noisy visual block when the
// pair carries one (and noisy evaluation is requested), else the clean x.
PolicyInput dispreferred_input(const DpoPair& pair, bool use_noisy) {
  if (pair.category == PairCategory::cm) {
    if (!pair.noisy_visual)
      fail(Errc::missing_noisy_input, "cm pair is missing its noisy visual input");
    if (use_noisy) return pair.input.with_visual(*pair.noisy_visual);
  }
  return pair.input;
}

double pair_margin(const DpoPair& pair, const Policy& policy, const Policy& reference,
                   bool use_noisy) {
  const PolicyInput& x = pair.input;
  const PolicyInput x_l = dispreferred_input(pair, use_noisy);
  const double ratio_w = policy.log_prob(pair.preferred, x) - reference.log_prob(pair.preferred, x);
  const double ratio_l =
      policy.log_prob(pair.dispreferred, x_l) - reference.log_prob(pair.dispreferred, x_l);
  return ratio_w - ratio_l;
}

double loss_impl(const std::vector<DpoPair>& pairs, const Policy& policy, const Policy& reference,
                 double alpha, bool use_noisy) {
  if (alpha <= 0.0) fail(Errc::config_error, "alpha must be positive");
  std::vector<double> margins;
  margins.reserve(pairs.size());
  for (const auto& pair : pairs) margins.push_back(pair_margin(pair, policy, reference, use_noisy));
  return dpo_loss_from_margins(margins, alpha);
}

void accumulate_scaled(std::vector<double>& into, const std::vector<double>& grad, double scale) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * grad[i];
}

}  // namespace

double dpo_loss(const std::vector<DpoPair>& pairs, const Policy& policy, const Policy& reference,
                double alpha) {
  return loss_impl(pairs, policy, reference, alpha, /*use_noisy=*/false);
}

double rag_dpo_loss(const std::vector<DpoPair>& pairs, const Policy& policy,
                    const Policy& reference, double alpha) {
  return loss_impl(pairs, policy, reference, alpha, /*use_noisy=*/true);
}

double subset_loss(SubsetKind kind, const std::vector<DpoPair>& pairs, const Policy& policy,
                   const Policy& reference, double alpha) {
  std::vector<DpoPair> subset;
  for (const auto& pair : pairs) {
    const bool is_cm = pair.category == PairCategory::cm;
    if ((kind == SubsetKind::cm) == is_cm) subset.push_back(pair);
  }
  if (subset.empty())
    fail(Errc::empty_subset, std::string("no ") + (kind == SubsetKind::cm ? "cm" : "oa") + " pairs");
  return rag_dpo_loss(subset, policy, reference, alpha);
}

std::vector<double> rag_dpo_param_grad(const std::vector<DpoPair>& pairs, const Policy& policy,
                                       const Policy& reference, double alpha) {
  if (pairs.empty()) fail(Errc::empty_dataset, "no pairs to differentiate over");
  if (alpha <= 0.0) fail(Errc::config_error, "alpha must be positive");
  std::vector<double> grad(policy.parameters().size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pair : pairs) {
    const double margin = pair_margin(pair, policy, reference, /*use_noisy=*/true);
    // d/dtheta -log sigma(alpha * margin) = -sigma(-alpha*margin) * alpha * dmargin
    const double coeff = -sigmoid(-alpha * margin) * alpha * inv_n;
    const PolicyInput x_l = dispreferred_input(pair, /*use_noisy=*/true);
    accumulate_scaled(grad, policy.param_grad_log_prob(pair.preferred, pair.input), coeff);
    accumulate_scaled(grad, policy.param_grad_log_prob(pair.dispreferred, x_l), -coeff);
  }
  return grad;
}

DpoTrainResult train_preference(Policy& policy, const std::vector<DpoPair>& pairs,
                                const Policy& reference, const DpoConfig& config) {
  config.validate();
  if (pairs.empty()) fail(Errc::empty_dataset, "no preference pairs to train on");
  const std::unique_ptr<Policy> frozen = reference.clone();

  const bool has_cm = std::any_of(pairs.begin(), pairs.end(),
                                  [](const DpoPair& p) { return p.category == PairCategory::cm; });
  const bool has_oa = std::any_of(pairs.begin(), pairs.end(),
                                  [](const DpoPair& p) { return p.category != PairCategory::cm; });

  SeededRng rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = config.batch_size == 0 ? pairs.size() : config.batch_size;

  DpoTrainResult result;
  result.trajectory.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      std::vector<DpoPair> slice;
      slice.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) slice.push_back(pairs[order[i]]);
      const std::vector<double> grad = rag_dpo_param_grad(slice, policy, *frozen, config.alpha);
      std::vector<double> params = policy.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grad[i];
      policy.set_parameters(params);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = rag_dpo_loss(pairs, policy, *frozen, config.alpha);
    if (has_cm) stats.cm_loss = subset_loss(SubsetKind::cm, pairs, policy, *frozen, config.alpha);
    if (has_oa) stats.oa_loss = subset_loss(SubsetKind::oa, pairs, policy, *frozen, config.alpha);
    result.trajectory.push_back(stats);
  }
  return result;
}

}  // namespace ragalign
