#include "ragalign/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include "ragalign/error.hpp"

namespace ragalign {

ClassificationReport classification_metrics(const std::vector<bool>& preds,
                                            const std::vector<bool>& labels,
                                            const std::vector<double>* scores) {
  if (preds.size() != labels.size())
    fail(Errc::length_mismatch, "predictions and labels differ in length");
  if (preds.empty()) fail(Errc::empty_input, "nothing to score");
  if (scores && scores->size() != labels.size())
    fail(Errc::length_mismatch, "scores and labels differ in length");

  ClassificationReport report;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && labels[i]) ++report.tp;
    else if (preds[i] && !labels[i]) ++report.fp;
    else if (!preds[i] && labels[i]) ++report.fn;
    else ++report.tn;
  }
  const double total = static_cast<double>(preds.size());
  report.accuracy = static_cast<double>(report.tp + report.tn) / total;
  const double f1_denom = static_cast<double>(2 * report.tp + report.fp + report.fn);
  report.f1 = f1_denom > 0.0 ? 2.0 * static_cast<double>(report.tp) / f1_denom : 1.0;

  if (scores) {
    const long n_pos = report.tp + report.fn;
    const long n_neg = report.fp + report.tn;
    if (n_pos == 0 || n_neg == 0)
      fail(Errc::single_class, "AUROC is undefined with a single label class");
    // Rank formulation of the pairwise-counting statistic: average ranks
    // for tied scores contribute exactly the 0.5 tie credit.
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return (*scores)[a] < (*scores)[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && (*scores)[order[j + 1]] == (*scores)[order[i]]) ++j;
      const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t t = i; t <= j; ++t)
        if (labels[order[t]]) rank_sum_pos += avg_rank;
      i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    report.auroc = (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
  }
  return report;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                      tokens.begin() + static_cast<long>(i + n))];
  return counts;
}

constexpr double kBleuEpsilon = 1e-9;

}  // namespace

BleuReport bleu(const std::vector<std::string>& candidate,
                const std::vector<std::vector<std::string>>& references, std::size_t max_n) {
  if (candidate.empty()) fail(Errc::empty_input, "empty candidate");
  if (references.empty()) fail(Errc::empty_input, "no references");
  for (const auto& ref : references)
    if (ref.empty()) fail(Errc::empty_input, "empty reference");
  if (max_n < 1 || max_n > 4) fail(Errc::config_error, "max_n must lie in [1, 4]");

  BleuReport report;
  report.precisions.fill(kBleuEpsilon);
  report.bleu_n.fill(0.0);

  for (std::size_t n = 1; n <= max_n; ++n) {
    const NgramCounts cand_counts = count_ngrams(candidate, n);
    long total = 0;
    for (const auto& [ngram, count] : cand_counts) total += count;
    long clipped = 0;
    for (const auto& [ngram, count] : cand_counts) {
      long best_ref = 0;
      for (const auto& ref : references) {
        const NgramCounts ref_counts = count_ngrams(ref, n);
        auto it = ref_counts.find(ngram);
        if (it != ref_counts.end()) best_ref = std::max(best_ref, it->second);
      }
      clipped += std::min(count, best_ref);
    }
    report.precisions[n - 1] =
        (total > 0 && clipped > 0) ? static_cast<double>(clipped) / static_cast<double>(total)
                                   : kBleuEpsilon;
  }

  // Closest reference length; ties resolve to the shorter reference.
  const long cand_len = static_cast<long>(candidate.size());
  long ref_len = static_cast<long>(references.front().size());
  for (const auto& ref : references) {
    const long len = static_cast<long>(ref.size());
    if (std::abs(len - cand_len) < std::abs(ref_len - cand_len) ||
        (std::abs(len - cand_len) == std::abs(ref_len - cand_len) && len < ref_len))
      ref_len = len;
  }
  report.brevity_penalty =
      cand_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    log_sum += std::log(report.precisions[n - 1]);
    report.bleu_n[n - 1] = report.brevity_penalty * std::exp(log_sum / static_cast<double>(n));
  }
  double total_bleu = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) total_bleu += report.bleu_n[n - 1];
  report.bleu = total_bleu / static_cast<double>(max_n);
  return report;
}

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) fail(Errc::empty_input, "empty token list");
  const std::size_t n = candidate.size();
  const std::size_t m = reference.size();
  std::vector<std::size_t> previous(m + 1, 0), current(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      current[j] = candidate[i - 1] == reference[j - 1]
                       ? previous[j - 1] + 1
                       : std::max(previous[j], current[j - 1]);
    }
    std::swap(previous, current);
  }
  const double lcs = static_cast<double>(previous[m]);
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(n);
  const double recall = lcs / static_cast<double>(m);
  return 2.0 * precision * recall / (precision + recall);
}

GenerationReport generation_metrics(const std::vector<std::string>& candidates,
                                    const std::vector<std::string>& references) {
  if (candidates.size() != references.size())
    fail(Errc::length_mismatch, "candidates and references differ in length");
  if (candidates.empty()) fail(Errc::empty_input, "nothing to score");

  GenerationReport report;
  std::vector<double> bleus, rouges;
  std::array<std::vector<double>, 4> per_n;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::vector<std::string> cand = tokenize(candidates[i]);
    const std::vector<std::string> ref = tokenize(references[i]);
    const BleuReport b = bleu(cand, {ref});
    bleus.push_back(b.bleu);
    for (std::size_t n = 0; n < 4; ++n) per_n[n].push_back(b.bleu_n[n]);
    rouges.push_back(rouge_l(cand, ref));
  }
  const double count = static_cast<double>(candidates.size());
  report.bleu = pairwise_sum(bleus) / count;
  for (std::size_t n = 0; n < 4; ++n) report.bleu_n[n] = pairwise_sum(per_n[n]) / count;
  report.rouge_l = pairwise_sum(rouges) / count;
  return report;
}

AlignmentReport alignment_rates(const AnswerModel& model, const std::vector<QASample>& eval,
                                const RetrievalRegistry& registry, const RouterParams& router,
                                const AlignmentConfig& config) {
  if (eval.empty()) fail(Errc::empty_eval, "alignment rates over an empty eval set");

  const std::vector<double> l_values =
      config.l_values.empty() ? linear_ramp(-6.0, 6.0, config.noise_steps) : config.l_values;
  const NoiseSchedule schedule = noise_schedule(config.noise_steps, l_values);

  std::vector<std::pair<std::string, FeatureVector>> pool;
  pool.reserve(eval.size());
  for (const auto& sample : eval) pool.emplace_back(sample.id, sample.image);

  SeededRng rng(config.seed);
  AlignmentReport report;
  for (const auto& sample : eval) {
    const RetrievalResult retrieval =
        registry.retrieve(router, sample.image, config.k, config.gamma);
    std::vector<std::string> contexts;
    for (const auto& c : retrieval.contexts) contexts.push_back(c.text);

    const auto [unrelated_id, unrelated] =
        least_similar_image(sample.image, pool, registry.encoder(retrieval.domain), &sample.id);
    (void)unrelated_id;
    const FeatureVector noisy = apply_diffusion_noise(unrelated, schedule.signal_fraction, rng);

    const std::string& truth = sample.answer;
    // Copy-reference: wrong on the noisy image alone, rescued by attaching
    // the original image's retrieved context to that same noisy image.
    if (model.answer(noisy, sample.question, nullptr) != truth) {
      ++report.cr_denominator;
      if (model.answer(noisy, sample.question, &contexts) == truth) ++report.cr_numerator;
    }
    // Over-reliance: knew the answer, lost it once retrieval was added.
    const bool correct_plain = model.answer(sample.image, sample.question, nullptr) == truth;
    const bool wrong_rag = model.answer(sample.image, sample.question, &contexts) != truth;
    if (wrong_rag) {
      ++report.or_denominator;
      if (correct_plain) ++report.or_numerator;
    }
  }

  if (report.cr_denominator > 0)
    report.cr_rate = static_cast<double>(report.cr_numerator) /
                     static_cast<double>(report.cr_denominator);
  if (report.or_denominator > 0)
    report.or_rate = static_cast<double>(report.or_numerator) /
                     static_cast<double>(report.or_denominator);
  return report;
}

}  // namespace ragalign
