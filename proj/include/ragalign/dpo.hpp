#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragalign/policy.hpp"

namespace ragalign {

// Preference-pair category from the dataset-construction branching:
// cm pairs carry a noisy visual input for the dispreferred term, the two
// oa flavors evaluate both terms at the clean input.
enum class PairCategory { cm, oa1, oa2 };

const char* pair_category_name(PairCategory category);
PairCategory pair_category_from_name(const std::string& name);

struct DpoPair {
  PolicyInput input;
  std::optional<std::vector<double>> noisy_visual;  // cm only
  AnswerValue preferred;
  AnswerValue dispreferred;
  PairCategory category = PairCategory::oa1;
};

struct DpoConfig {
  double alpha = 1.0;
  double learning_rate = 0.05;
  std::size_t epochs = 100;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;

  void validate() const;
};

// sigma(r_w - r_l): probability that the preferred response wins under a
// Bradley-Terry comparison of the two rewards.
double preference_probability(double reward_preferred, double reward_dispreferred);

// Mean over pairs of -log sigma(alpha * margin) where margin is the
// difference of policy/reference log-ratios. Exposed so gauge-invariance
// properties can be checked on raw margins.
double dpo_loss_from_margins(const std::vector<double>& margins, double alpha);

// Plain preference loss: both responses scored at the pair's input.
double dpo_loss(const std::vector<DpoPair>& pairs, const Policy& policy, const Policy& reference,
                double alpha);

// Retrieval-aware variant: the dispreferred log-ratio of a cm pair is
// evaluated at the noisy visual input; oa pairs reduce to dpo_loss.
double rag_dpo_loss(const std::vector<DpoPair>& pairs, const Policy& policy,
                    const Policy& reference, double alpha);

enum class SubsetKind { cm, oa };

// rag_dpo_loss restricted to one category family; errors when empty.
double subset_loss(SubsetKind kind, const std::vector<DpoPair>& pairs, const Policy& policy,
                   const Policy& reference, double alpha);

// Analytic parameter gradient of rag_dpo_loss; shape matches
// policy.parameters().
std::vector<double> rag_dpo_param_grad(const std::vector<DpoPair>& pairs, const Policy& policy,
                                       const Policy& reference, double alpha);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> cm_loss;
  std::optional<double> oa_loss;
};

struct DpoTrainResult {
  std::vector<EpochStats> trajectory;
};

// Seeded mini-batch gradient descent on rag_dpo_loss. The reference is
// deep-copied up front, so later mutation of the caller's object cannot
// leak into training.
DpoTrainResult train_preference(Policy& policy, const std::vector<DpoPair>& pairs,
                                const Policy& reference, const DpoConfig& config);

}  // namespace ragalign
