#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ragalign/retriever.hpp"
#include "ragalign/rng.hpp"
#include "ragalign/vec.hpp"

namespace ragalign {

// Forward-diffusion schedule. Each control value l_t maps through
//   beta_t = sigmoid(l_t) * (0.5e-2 - 1e-5) + 1e-5
// read as a per-step noise rate; retention[t] = 1 - beta_t and
// signal_fraction is the running product, so a long schedule drifts
// toward pure noise.
struct NoiseSchedule {
  std::size_t steps = 0;
  std::vector<double> l_values;
  std::vector<double> rates;       // beta_t per step
  std::vector<double> retention;   // xi_t = 1 - beta_t per step, each in (0,1)
  double signal_fraction = 1.0;    // cumulative product of retention
};

NoiseSchedule noise_schedule(std::size_t steps, const std::vector<double>& l_values);

// Pool entry with the lowest image-encoder cosine to the query; ties go to
// the lexicographically smallest id. exclude_id drops the query's own entry.
std::pair<std::string, FeatureVector> least_similar_image(
    const FeatureVector& query, const std::vector<std::pair<std::string, FeatureVector>>& pool,
    const EncoderParams& encoder, const std::string* exclude_id = nullptr);

// x* = sqrt(sf) * x + sqrt(1 - sf) * eps, eps i.i.d. standard normal.
// signal_fraction = 1 reproduces the input bit-exactly.
FeatureVector apply_diffusion_noise(const FeatureVector& x, double signal_fraction,
                                    SeededRng& rng);

}  // namespace ragalign
