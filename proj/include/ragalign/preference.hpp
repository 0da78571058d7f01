#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragalign/dpo.hpp"
#include "ragalign/index.hpp"
#include "ragalign/noise.hpp"
#include "ragalign/vec.hpp"

namespace ragalign {

struct QASample {
  std::string id;
  FeatureVector image;
  std::string question;
  std::string answer;  // ground truth
  std::optional<std::string> domain;
};

// Answer oracle playing the role of the generative model under study.
// Implementations must be deterministic for fixed inputs.
class AnswerModel {
 public:
  virtual ~AnswerModel() = default;
  // contexts == nullptr means "answer without retrieval".
  virtual std::string answer(const FeatureVector& image, const std::string& question,
                             const std::vector<std::string>* contexts) const = 0;
};

struct PreferenceSample {
  std::string id;
  FeatureVector image;
  std::string question;
  std::vector<std::string> contexts;            // truncated retrieved texts
  std::optional<FeatureVector> noisy_image;     // present iff category == cm
  std::string preferred;                        // always the ground truth
  std::string dispreferred;
  PairCategory category = PairCategory::oa1;
  NoiseSchedule noise;  // schedule provenance recorded per emitted sample
};

// One pass of the branch logic over a single sample. Branches are tested
// cm -> oa1 -> oa2 and the first match wins; no match yields nullopt.
//
// The cm branch keeps the answer the model produced from the noisy image
// with retrieval, which textually equals the ground truth: the pair is
// distinguished by its input (clean versus noisy image), not the response
// text. A cm pair is emitted only when the model's retrieval-free answer
// on the noisy image is wrong, i.e. the retrieved context is what rescued
// it.
std::optional<PreferenceSample> classify_sample(const AnswerModel& model, const QASample& sample,
                                                const std::vector<std::string>& contexts,
                                                const FeatureVector& noisy_image);

struct PreferenceBuildConfig {
  std::size_t k = 5;
  double gamma = 1.0;
  std::size_t noise_steps = 10;
  std::vector<double> l_values;  // empty -> linear ramp -6..6 over noise_steps
  std::uint64_t seed = 0;
};

// Runs retrieval, noisy-image synthesis and classification over the whole
// dataset, in input order, deterministically for a fixed seed.
std::vector<PreferenceSample> build_preference_dataset(const std::vector<QASample>& samples,
                                                       const AnswerModel& model,
                                                       const RetrievalRegistry& registry,
                                                       const RouterParams& router,
                                                       const PreferenceBuildConfig& config);

struct PartitionStats {
  std::size_t cm = 0;
  std::size_t oa1 = 0;
  std::size_t oa2 = 0;

  std::size_t total() const { return cm + oa1 + oa2; }
};

PartitionStats partition_stats(const std::vector<PreferenceSample>& dataset);

// Lookup-table model for exact tests: answers are keyed by question plus
// evaluation mode. The mode is recovered from the call itself - whether
// contexts were passed, and whether the image bytes equal the original
// registered for that question (a noised image never does).
class ScriptedAnswerModel : public AnswerModel {
 public:
  struct Answers {
    std::string with_rag;
    std::string no_rag;
    std::string noisy_with_rag;
    std::string noisy_no_rag;
  };

  void add(const std::string& question, const FeatureVector& original_image, Answers answers);

  std::string answer(const FeatureVector& image, const std::string& question,
                     const std::vector<std::string>* contexts) const override;

  const std::map<std::string, std::pair<std::vector<double>, Answers>>& table() const {
    return table_;
  }

 private:
  std::map<std::string, std::pair<std::vector<double>, Answers>> table_;
};

// Deterministic featurization of (image, question, contexts) into the flat
// policy input: [image | hashed question bag-of-words | context block].
// The context block is a presence flag followed by hashed context tokens.
struct FeaturizerSpec {
  std::size_t visual_dim = 0;
  std::size_t text_dim = 8;
  std::size_t context_dim = 8;

  std::size_t total_dim() const { return visual_dim + text_dim + context_dim; }
};

PolicyInput featurize(const FeatureVector& image, const std::string& question,
                      const std::vector<std::string>* contexts, const FeaturizerSpec& spec);

// Wraps a categorical policy as an answer oracle: argmax vocabulary entry
// on the featurized input, earliest index on ties.
class PolicyAnswerModel : public AnswerModel {
 public:
  PolicyAnswerModel(CategoricalPolicy policy, FeaturizerSpec spec);

  std::string answer(const FeatureVector& image, const std::string& question,
                     const std::vector<std::string>* contexts) const override;

  const CategoricalPolicy& policy() const { return policy_; }
  const FeaturizerSpec& spec() const { return spec_; }

 private:
  CategoricalPolicy policy_;
  FeaturizerSpec spec_;
};

// PreferenceSample -> trainer pair, using the featurizer and the policy's
// vocabulary for answer indices.
DpoPair to_dpo_pair(const PreferenceSample& sample, const CategoricalPolicy& policy,
                    const FeaturizerSpec& spec);

}  // namespace ragalign
