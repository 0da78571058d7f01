#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ragalign/preference.hpp"

namespace ragalign {

struct ClassificationReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> auroc;  // absent when no scores were supplied
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

// Binary yes/no metrics. AUROC ranks scores with half credit for ties and
// requires both classes to be present.
ClassificationReport classification_metrics(const std::vector<bool>& preds,
                                            const std::vector<bool>& labels,
                                            const std::vector<double>* scores = nullptr);

// Lowercase, strip ASCII punctuation, split on whitespace.
std::vector<std::string> tokenize(const std::string& text);

struct BleuReport {
  double bleu = 0.0;                     // mean of the cumulative bleu_n scores
  std::array<double, 4> bleu_n{};        // cumulative n-gram scores, brevity included
  std::array<double, 4> precisions{};    // clipped modified precisions
  double brevity_penalty = 1.0;
};

// Modified n-gram precision with clipping and an epsilon floor (1e-9) for
// zero counts; bleu_n[k-1] = BP * geometric mean of precisions 1..k.
BleuReport bleu(const std::vector<std::string>& candidate,
                const std::vector<std::vector<std::string>>& references, std::size_t max_n = 4);

// LCS F-measure with precision and recall weighted equally.
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference);

struct GenerationReport {
  double bleu = 0.0;
  std::array<double, 4> bleu_n{};
  double rouge_l = 0.0;
};

// Corpus-level convenience: metrics averaged over candidate/reference rows.
GenerationReport generation_metrics(const std::vector<std::string>& candidates,
                                    const std::vector<std::string>& references);

struct AlignmentConfig {
  std::size_t k = 5;
  double gamma = 1.0;
  std::size_t noise_steps = 10;
  std::vector<double> l_values;  // empty -> linear ramp -6..6
  std::uint64_t seed = 0;
};

struct AlignmentReport {
  // Copy-reference rate: among samples the model gets wrong on a noisy
  // replacement image without retrieval, the fraction answered correctly
  // once the original image's retrieved context is attached.
  std::optional<double> cr_rate;
  long cr_numerator = 0;
  long cr_denominator = 0;
  // Over-reliance rate: correct-without-retrieval samples turned wrong by
  // retrieval, relative to everything wrong with retrieval.
  std::optional<double> or_rate;
  long or_numerator = 0;
  long or_denominator = 0;
};

AlignmentReport alignment_rates(const AnswerModel& model, const std::vector<QASample>& eval,
                                const RetrievalRegistry& registry, const RouterParams& router,
                                const AlignmentConfig& config);

}  // namespace ragalign
