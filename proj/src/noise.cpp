#include "ragalign/noise.hpp"

#include <cmath>

#include "ragalign/error.hpp"

namespace ragalign {

NoiseSchedule noise_schedule(std::size_t steps, const std::vector<double>& l_values) {
  if (steps < 1) fail(Errc::config_error, "schedule needs at least one step");
  if (l_values.size() != steps)
    fail(Errc::length_mismatch, "expected " + std::to_string(steps) + " control values, got " +
                                    std::to_string(l_values.size()));

  NoiseSchedule schedule;
  schedule.steps = steps;
  schedule.l_values = l_values;
  schedule.rates.reserve(steps);
  schedule.retention.reserve(steps);
  schedule.signal_fraction = 1.0;
  for (double l : l_values) {
    const double beta = sigmoid(l) * (0.5e-2 - 1e-5) + 1e-5;
    const double xi = 1.0 - beta;
    schedule.rates.push_back(beta);
    schedule.retention.push_back(xi);
    schedule.signal_fraction *= xi;
  }
  return schedule;
}

std::pair<std::string, FeatureVector> least_similar_image(
    const FeatureVector& query, const std::vector<std::pair<std::string, FeatureVector>>& pool,
    const EncoderParams& encoder, const std::string* exclude_id) {
  const Embedding query_emb = encode(encoder, Modality::image, query);

  const std::pair<std::string, FeatureVector>* best = nullptr;
  double best_cosine = 2.0;
  for (const auto& candidate : pool) {
    if (exclude_id && candidate.first == *exclude_id) continue;
    const double cosine =
        cosine_similarity(query_emb, encode(encoder, Modality::image, candidate.second));
    if (cosine < best_cosine || (cosine == best_cosine && best && candidate.first < best->first)) {
      best_cosine = cosine;
      best = &candidate;
    }
  }
  if (!best) fail(Errc::empty_pool, "no candidate images to pick from");
  return *best;
}

FeatureVector apply_diffusion_noise(const FeatureVector& x, double signal_fraction,
                                    SeededRng& rng) {
  if (!(signal_fraction > 0.0) || signal_fraction > 1.0)
    fail(Errc::invalid_xi_bar, "signal fraction must lie in (0, 1]");
  const double keep = std::sqrt(signal_fraction);
  const double mix = std::sqrt(1.0 - signal_fraction);
  FeatureVector out;
  out.values.resize(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) out.values[i] = keep * x.values[i] + mix * rng.gaussian();
  return out;
}

}  // namespace ragalign
