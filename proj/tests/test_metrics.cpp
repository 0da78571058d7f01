#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ragalign/error.hpp"
#include "ragalign/metrics.hpp"
#include "ragalign/synth.hpp"

using namespace ragalign;

namespace {

// O(n^2) pairwise probability with half credit for ties.
double auroc_oracle(const std::vector<bool>& labels, const std::vector<double>& scores) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("classification worked examples") {
  const ClassificationReport perfect =
      classification_metrics({true, false, true}, {true, false, true});
  CHECK(perfect.accuracy == doctest::Approx(1.0));
  CHECK(perfect.f1 == doctest::Approx(1.0));
  CHECK_FALSE(perfect.auroc.has_value());

  const std::vector<bool> labels{false, false, true, true};
  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
  const ClassificationReport scored =
      classification_metrics({false, false, true, true}, labels, &scores);
  REQUIRE(scored.auroc.has_value());
  CHECK(*scored.auroc == doctest::Approx(0.75).epsilon(1e-12));

  const std::vector<double> any_scores{0.5, 0.5};
  CHECK_THROWS_WITH_AS(classification_metrics({true, true}, {true, true}, &any_scores),
                       doctest::Contains("SingleClass"), Error);
  CHECK_THROWS_WITH_AS(classification_metrics({true}, {true, false}),
                       doctest::Contains("LengthMismatch"), Error);
  CHECK_THROWS_AS(classification_metrics({}, {}), Error);
}

TEST_CASE("auroc equals the pairwise oracle on random inputs") {
  SeededRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(499);
    std::vector<bool> labels(n), preds(n);
    std::vector<double> scores(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.uniform01() < 0.5;
      preds[i] = rng.uniform01() < 0.5;
      // Quantized scores force plenty of ties.
      scores[i] = std::floor(rng.uniform01() * 8.0) / 8.0;
      has_pos = has_pos || labels[i];
      has_neg = has_neg || !labels[i];
    }
    if (!has_pos) labels[0] = true;
    if (!has_neg) labels[n - 1] = false;
    const ClassificationReport report = classification_metrics(preds, labels, &scores);
    REQUIRE(report.auroc.has_value());
    CHECK(*report.auroc == auroc_oracle(labels, scores));  // exact
  }
}

TEST_CASE("f1 from counts matches the closed form on random confusion matrices") {
  SeededRng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const long tp = static_cast<long>(rng.uniform_below(30));
    const long fp = static_cast<long>(rng.uniform_below(30));
    const long fn = static_cast<long>(rng.uniform_below(30));
    const long tn = 1 + static_cast<long>(rng.uniform_below(30));
    std::vector<bool> preds, labels;
    for (long i = 0; i < tp; ++i) { preds.push_back(true); labels.push_back(true); }
    for (long i = 0; i < fp; ++i) { preds.push_back(true); labels.push_back(false); }
    for (long i = 0; i < fn; ++i) { preds.push_back(false); labels.push_back(true); }
    for (long i = 0; i < tn; ++i) { preds.push_back(false); labels.push_back(false); }
    const ClassificationReport report = classification_metrics(preds, labels);
    const double denom = static_cast<double>(2 * tp + fp + fn);
    const double expected = denom > 0.0 ? 2.0 * tp / denom : 1.0;
    CHECK(report.f1 == doctest::Approx(expected).epsilon(1e-12));
    CHECK(report.tp == tp);
    CHECK(report.fp == fp);
    CHECK(report.fn == fn);
    CHECK(report.tn == tn);
  }
}

TEST_CASE("tokenizer lowercases and strips punctuation") {
  const std::vector<std::string> tokens = tokenize("The cat, the CAT; sat!");
  REQUIRE(tokens.size() == 5);
  CHECK(tokens[0] == "the");
  CHECK(tokens[1] == "cat");
  CHECK(tokens[3] == "cat");
  CHECK(tokenize("   ").empty());
}

TEST_CASE("bleu worked examples") {
  const std::vector<std::string> reference{"the", "cat", "sat", "on", "the", "mat"};
  const BleuReport identical = bleu(reference, {reference});
  for (double value : identical.bleu_n) CHECK(value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(identical.bleu == doctest::Approx(1.0).epsilon(1e-12));

  // Clipped unigram counting.
  const BleuReport clipped = bleu({"the", "the", "the"}, {{"the", "cat"}});
  CHECK(clipped.precisions[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(clipped.bleu_n[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(clipped.brevity_penalty == doctest::Approx(1.0));

  const BleuReport disjoint = bleu({"aa", "bb"}, {{"cc", "dd"}});
  CHECK(disjoint.bleu < 1e-6);

  CHECK_THROWS_WITH_AS(bleu({}, {{"a"}}), doctest::Contains("EmptyInput"), Error);
  CHECK_THROWS_AS(bleu({"a"}, {}), Error);
}

TEST_CASE("bleu brevity penalty fires for short candidates") {
  const BleuReport report = bleu({"the", "cat"}, {{"the", "cat", "sat", "on"}});
  CHECK(report.brevity_penalty == doctest::Approx(std::exp(1.0 - 4.0 / 2.0)).epsilon(1e-12));
  CHECK(report.precisions[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.bleu_n[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("rouge-l worked examples") {
  CHECK(rouge_l({"a", "b", "c"}, {"a", "b", "c"}) == doctest::Approx(1.0));
  // LCS 3 of candidate 4 / reference 3: F = 2 * (3/4 * 1) / (3/4 + 1) = 6/7.
  CHECK(rouge_l({"a", "b", "c", "d"}, {"a", "c", "d"}) ==
        doctest::Approx(6.0 / 7.0).epsilon(1e-9));
  CHECK(rouge_l({"x"}, {"y"}) == 0.0);
  CHECK_THROWS_AS(rouge_l({}, {"a"}), Error);
}

TEST_CASE("generation metrics aggregate per-row values") {
  const GenerationReport report = generation_metrics(
      {"the cat sat down", "a full match here"}, {"the cat sat down", "a full match here"});
  CHECK(report.bleu == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.rouge_l == doctest::Approx(1.0).epsilon(1e-9));
}

namespace {

struct AlignmentWorld {
  std::vector<QASample> samples;
  ScriptedAnswerModel model;
  MiniWorld world;
};

// Plants: `qualifying` samples wrong on the noisy image without retrieval,
// of which `rescued` flip correct with contexts; plus planted over-reliance
// behavior on the clean image.
AlignmentWorld make_alignment_world(int total, int qualifying, int rescued, int rag_wrong,
                                    int rag_wrong_was_right) {
  AlignmentWorld out{std::vector<QASample>{}, ScriptedAnswerModel{},
                     make_single_domain_world("radiology", 4, 10, 91)};
  SeededRng rng(17);
  for (int i = 0; i < total; ++i) {
    QASample sample;
    sample.id = "a" + std::to_string(i);
    sample.image = FeatureVector(rng.gaussian_vector(4));
    sample.question = "alignment question " + std::to_string(i);
    sample.answer = "yes";
    ScriptedAnswerModel::Answers answers;
    // Noisy-image behavior drives CR.
    if (i < qualifying) {
      answers.noisy_no_rag = "no";
      answers.noisy_with_rag = i < rescued ? "yes" : "no";
    } else {
      answers.noisy_no_rag = "yes";
      answers.noisy_with_rag = "yes";
    }
    // Clean-image behavior drives OR.
    if (i < rag_wrong) {
      answers.with_rag = "no";
      answers.no_rag = i < rag_wrong_was_right ? "yes" : "no";
    } else {
      answers.with_rag = "yes";
      answers.no_rag = "yes";
    }
    out.model.add(sample.question, sample.image, answers);
    out.samples.push_back(std::move(sample));
  }
  return out;
}

}  // namespace

TEST_CASE("alignment rates match planted values exactly") {
  const AlignmentWorld planted = make_alignment_world(12, 10, 3, 4, 2);
  AlignmentConfig config;
  config.k = 3;
  config.gamma = 2.0;
  config.noise_steps = 4;
  config.seed = 21;
  const AlignmentReport report = alignment_rates(planted.model, planted.samples,
                                                 planted.world.registry, planted.world.router,
                                                 config);
  REQUIRE(report.cr_rate.has_value());
  CHECK(report.cr_denominator == 10);
  CHECK(report.cr_numerator == 3);
  CHECK(*report.cr_rate == doctest::Approx(0.3));
  REQUIRE(report.or_rate.has_value());
  CHECK(report.or_denominator == 4);
  CHECK(report.or_numerator == 2);
  CHECK(*report.or_rate == doctest::Approx(0.5));
}

TEST_CASE("alignment rates: unaffected model and empty denominators") {
  // Retrieval never changes anything: OR numerator is zero.
  const AlignmentWorld stable = make_alignment_world(6, 6, 0, 0, 0);
  AlignmentConfig config;
  config.k = 2;
  config.gamma = 2.0;
  config.noise_steps = 3;
  config.seed = 23;
  const AlignmentReport report = alignment_rates(stable.model, stable.samples,
                                                 stable.world.registry, stable.world.router,
                                                 config);
  CHECK_FALSE(report.or_rate.has_value());  // nothing wrong with retrieval
  CHECK(report.or_denominator == 0);
  REQUIRE(report.cr_rate.has_value());
  CHECK(*report.cr_rate == doctest::Approx(0.0));

  // No qualifying noisy failures: CR denominator is zero.
  const AlignmentWorld no_cr = make_alignment_world(5, 0, 0, 2, 1);
  const AlignmentReport second = alignment_rates(no_cr.model, no_cr.samples,
                                                 no_cr.world.registry, no_cr.world.router, config);
  CHECK_FALSE(second.cr_rate.has_value());
  CHECK(second.cr_denominator == 0);
  REQUIRE(second.or_rate.has_value());
  CHECK(*second.or_rate == doctest::Approx(0.5));

  CHECK_THROWS_WITH_AS(alignment_rates(stable.model, {}, stable.world.registry,
                                       stable.world.router, config),
                       doctest::Contains("EmptyEval"), Error);
}

TEST_CASE("alignment rates are invariant under permutation of the eval set") {
  AlignmentWorld planted = make_alignment_world(9, 6, 2, 3, 1);
  AlignmentConfig config;
  config.k = 2;
  config.gamma = 2.0;
  config.noise_steps = 3;
  config.seed = 29;
  const AlignmentReport base = alignment_rates(planted.model, planted.samples,
                                               planted.world.registry, planted.world.router,
                                               config);
  std::reverse(planted.samples.begin(), planted.samples.end());
  const AlignmentReport reversed = alignment_rates(planted.model, planted.samples,
                                                   planted.world.registry, planted.world.router,
                                                   config);
  CHECK(base.cr_numerator == reversed.cr_numerator);
  CHECK(base.cr_denominator == reversed.cr_denominator);
  CHECK(base.or_numerator == reversed.or_numerator);
  CHECK(base.or_denominator == reversed.or_denominator);
}
