#pragma once

#include <map>
#include <string>
#include <vector>

#include "ragalign/dpo.hpp"
#include "ragalign/index.hpp"
#include "ragalign/preference.hpp"
#include "ragalign/retriever.hpp"
#include "ragalign/rng.hpp"
#include "ragalign/router.hpp"
#include "ragalign/sensitivity.hpp"

namespace ragalign {

// Random orthogonal matrix via Gram-Schmidt on a Gaussian draw.
Matrix random_orthogonal(std::size_t dim, SeededRng& rng);

// Image/text pairs where the text features are a fixed rotation of the
// image features; exactly learnable by a linear encoder pair.
PairList planted_rotation_pairs(std::size_t count, const Matrix& rotation, SeededRng& rng);

// Isotropic Gaussian blob around a planted unit-norm mean per domain.
struct DomainBlob {
  std::string domain;
  std::vector<double> mean;
};

std::vector<DomainBlob> planted_domain_means(const std::vector<std::string>& domains,
                                             std::size_t dim, SeededRng& rng);

std::vector<LabeledFeature> sample_blob_points(const std::vector<DomainBlob>& blobs,
                                               std::size_t per_domain, double sigma,
                                               SeededRng& rng);

// Single-domain retrieval world with identity encoders; handy for tests
// that need a working registry without training anything.
struct MiniWorld {
  RouterParams router;
  RetrievalRegistry registry;
};

MiniWorld make_single_domain_world(const std::string& domain, std::size_t dim,
                                   std::size_t n_contexts, std::uint64_t seed);

// Six QA samples scripted so the preference branching emits exactly two
// samples per category.
struct BranchCorpus {
  std::vector<QASample> samples;
  ScriptedAnswerModel model;
  std::vector<PairCategory> expected;  // per sample, in order
};

BranchCorpus make_branch_corpus(std::size_t dim, std::uint64_t seed);

// Scripted model with independently randomized correctness per evaluation
// mode; used to fuzz the branch logic against an oracle.
ScriptedAnswerModel random_scripted_model(const std::vector<QASample>& samples, double p_correct,
                                          SeededRng& rng);

// Planted setup for the directional weight checks: a reference policy, the
// preference pairs to train on, the probe input the weights are estimated
// at, and the named input blocks.
struct WeightCheckSetup {
  CategoricalPolicy reference;
  std::vector<DpoPair> pairs;
  PolicyInput probe;
  std::vector<VariableSpec> variables;
};

// Reference ignores the visual block; preference pairs contrast clean
// versus noised visual inputs (all category cm).
WeightCheckSetup make_cross_modal_setup(std::size_t n_pairs, SeededRng& rng);

// Reference trusts helpful and harmful retrieval cues alike; pairs reward
// the helpful cue (oa1) and punish the harmful one (oa2).
WeightCheckSetup make_overall_setup(std::size_t n_pairs, SeededRng& rng);

// Full synthetic world the CLI materializes to disk.
struct SynthWorldConfig {
  std::vector<std::string> domains{"radiology", "ophthalmology", "pathology"};
  std::size_t dim_in = 8;
  std::size_t train_pairs_per_domain = 200;
  std::size_t eval_pairs_per_domain = 100;
  std::size_t router_train_per_domain = 100;
  std::size_t router_eval_per_domain = 50;
  std::size_t contexts_per_domain = 40;
  std::size_t qa_per_domain = 8;
  double blob_sigma = 0.1;
  std::uint64_t seed = 0;
};

struct SynthWorld {
  std::map<std::string, PairList> train_pairs;
  std::map<std::string, PairList> eval_pairs;
  std::vector<LabeledFeature> router_train;
  std::vector<LabeledFeature> router_eval;
  std::map<std::string, std::vector<RawRecord>> contexts;
  std::vector<QASample> qa;
  ScriptedAnswerModel scripted;
};

SynthWorld make_synth_world(const SynthWorldConfig& config);

}  // namespace ragalign
