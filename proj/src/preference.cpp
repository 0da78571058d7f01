#include "ragalign/preference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "ragalign/error.hpp"

namespace ragalign {

std::optional<PreferenceSample> classify_sample(const AnswerModel& model, const QASample& sample,
                                                const std::vector<std::string>& contexts,
                                                const FeatureVector& noisy_image) {
  if (sample.question.empty() || sample.answer.empty())
    fail(Errc::model_failure, "sample '" + sample.id + "' has an empty question or answer");

  const std::string& truth = sample.answer;
  const std::string rag = model.answer(sample.image, sample.question, &contexts);
  const std::string no_rag = model.answer(sample.image, sample.question, nullptr);
  const std::string noisy_rag = model.answer(noisy_image, sample.question, &contexts);
  const std::string noisy_no_rag = model.answer(noisy_image, sample.question, nullptr);

  PreferenceSample out;
  out.id = sample.id;
  out.image = sample.image;
  out.question = sample.question;
  out.contexts = contexts;
  out.preferred = truth;

  if (rag == truth && noisy_rag == truth && noisy_no_rag != truth) {
    out.category = PairCategory::cm;
    out.dispreferred = noisy_rag;
    out.noisy_image = noisy_image;
    return out;
  }
  if (rag == truth && no_rag != truth) {
    out.category = PairCategory::oa1;
    out.dispreferred = no_rag;
    return out;
  }
  if (no_rag == truth && rag != truth) {
    out.category = PairCategory::oa2;
    out.dispreferred = rag;
    return out;
  }
  return std::nullopt;
}

std::vector<PreferenceSample> build_preference_dataset(const std::vector<QASample>& samples,
                                                       const AnswerModel& model,
                                                       const RetrievalRegistry& registry,
                                                       const RouterParams& router,
                                                       const PreferenceBuildConfig& config) {
  if (samples.empty()) fail(Errc::empty_dataset, "no samples to build preferences from");

  const std::vector<double> l_values =
      config.l_values.empty() ? linear_ramp(-6.0, 6.0, config.noise_steps) : config.l_values;
  const NoiseSchedule schedule = noise_schedule(config.noise_steps, l_values);

  std::vector<std::pair<std::string, FeatureVector>> pool;
  pool.reserve(samples.size());
  for (const auto& sample : samples) pool.emplace_back(sample.id, sample.image);

  SeededRng rng(config.seed);
  std::vector<PreferenceSample> dataset;
  for (const auto& sample : samples) {
    const RetrievalResult retrieval =
        registry.retrieve(router, sample.image, config.k, config.gamma);
    std::vector<std::string> contexts;
    contexts.reserve(retrieval.contexts.size());
    for (const auto& c : retrieval.contexts) contexts.push_back(c.text);

    const auto [unrelated_id, unrelated] = least_similar_image(
        sample.image, pool, registry.encoder(retrieval.domain), &sample.id);
    (void)unrelated_id;
    const FeatureVector noisy = apply_diffusion_noise(unrelated, schedule.signal_fraction, rng);

    if (auto built = classify_sample(model, sample, contexts, noisy)) {
      built->noise = schedule;
      dataset.push_back(std::move(*built));
    }
  }
  return dataset;
}

PartitionStats partition_stats(const std::vector<PreferenceSample>& dataset) {
  PartitionStats stats;
  for (const auto& sample : dataset) {
    switch (sample.category) {
      case PairCategory::cm: ++stats.cm; break;
      case PairCategory::oa1: ++stats.oa1; break;
      case PairCategory::oa2: ++stats.oa2; break;
    }
  }
  return stats;
}

void ScriptedAnswerModel::add(const std::string& question, const FeatureVector& original_image,
                              Answers answers) {
  table_[question] = {original_image.values, std::move(answers)};
}

std::string ScriptedAnswerModel::answer(const FeatureVector& image, const std::string& question,
                                        const std::vector<std::string>* contexts) const {
  auto it = table_.find(question);
  if (it == table_.end()) fail(Errc::model_failure, "no scripted answers for question");
  const bool original = image.values == it->second.first;
  const Answers& answers = it->second.second;
  if (original) return contexts ? answers.with_rag : answers.no_rag;
  return contexts ? answers.noisy_with_rag : answers.noisy_no_rag;
}

namespace {

std::uint64_t fnv1a(const std::string& token) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : token) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::vector<std::string> split_lowercase(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

void hash_into(const std::string& text, double* slots, std::size_t n) {
  if (n == 0) return;
  for (const auto& token : split_lowercase(text)) slots[fnv1a(token) % n] += 1.0;
}

}  // namespace

PolicyInput featurize(const FeatureVector& image, const std::string& question,
                      const std::vector<std::string>* contexts, const FeaturizerSpec& spec) {
  if (image.dim() != spec.visual_dim) fail(Errc::dim_mismatch, "image dim mismatch in featurizer");
  PolicyInput input;
  input.visual_dim = spec.visual_dim;
  input.features.assign(spec.total_dim(), 0.0);
  std::copy(image.values.begin(), image.values.end(), input.features.begin());
  hash_into(question, input.features.data() + spec.visual_dim, spec.text_dim);
  if (contexts && spec.context_dim > 0) {
    double* block = input.features.data() + spec.visual_dim + spec.text_dim;
    block[0] = 1.0;  // retrieval-present flag
    for (const auto& text : *contexts) hash_into(text, block + 1, spec.context_dim - 1);
  }
  return input;
}

PolicyAnswerModel::PolicyAnswerModel(CategoricalPolicy policy, FeaturizerSpec spec)
    : policy_(std::move(policy)), spec_(spec) {
  if (policy_.feature_dim() != spec_.total_dim())
    fail(Errc::dim_mismatch, "policy feature dim does not match featurizer layout");
}

std::string PolicyAnswerModel::answer(const FeatureVector& image, const std::string& question,
                                      const std::vector<std::string>* contexts) const {
  const PolicyInput input = featurize(image, question, contexts, spec_);
  const std::vector<double> probs = policy_.probabilities(input);
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return policy_.vocab()[best];
}

DpoPair to_dpo_pair(const PreferenceSample& sample, const CategoricalPolicy& policy,
                    const FeaturizerSpec& spec) {
  const int preferred = policy.answer_index(sample.preferred);
  const int dispreferred = policy.answer_index(sample.dispreferred);
  if (preferred < 0 || dispreferred < 0)
    fail(Errc::config_error, "answer missing from policy vocabulary in sample '" + sample.id + "'");

  DpoPair pair;
  pair.input = featurize(sample.image, sample.question, &sample.contexts, spec);
  pair.preferred = preferred;
  pair.dispreferred = dispreferred;
  pair.category = sample.category;
  if (sample.category == PairCategory::cm) {
    if (!sample.noisy_image)
      fail(Errc::missing_noisy_input, "cm sample '" + sample.id + "' lacks a noisy image");
    pair.noisy_visual = sample.noisy_image->values;
  }
  return pair;
}

}  // namespace ragalign
