#pragma once

#include <string>
#include <vector>

#include "ragalign/vec.hpp"

namespace ragalign {

// Multinomial logistic classifier that maps an image feature vector to one
// of a closed set of domain labels, so retrieval can pick the matching
// per-domain encoder and index.
struct RouterParams {
  std::vector<std::string> domain_names;
  Matrix weights;  // dim_in x num_domains, columns aligned with domain_names
  std::vector<double> bias;

  std::size_t dim_in() const { return weights.rows(); }
  std::size_t num_domains() const { return domain_names.size(); }
};

struct RouterConfig {
  double learning_rate = 0.5;
  double weight_decay = 0.0;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledFeature {
  FeatureVector features;
  std::string domain;
};

RouterParams train_router(const std::vector<LabeledFeature>& labeled,
                          const std::vector<std::string>& domains, const RouterConfig& config);

struct DomainPrediction {
  std::string domain;
  std::vector<double> probabilities;  // aligned with router.domain_names
};

// Argmax of the softmax scores; ties resolve to the earliest configured name.
DomainPrediction identify_domain(const RouterParams& router, const FeatureVector& x);

}  // namespace ragalign
