#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ragalign/dpo.hpp"
#include "ragalign/error.hpp"
#include "ragalign/sensitivity.hpp"

using namespace ragalign;

namespace {

PolicyInput make_input(std::vector<double> features, std::size_t visual_dim = 1) {
  PolicyInput x;
  x.features = std::move(features);
  x.visual_dim = visual_dim;
  return x;
}

CategoricalPolicy random_categorical(std::size_t dim, std::size_t vocab, SeededRng& rng) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < vocab; ++i) names.push_back("w" + std::to_string(i));
  return CategoricalPolicy::random_init(std::move(names), dim, 0.5, rng);
}

std::vector<DpoPair> random_pairs(std::size_t count, std::size_t dim, std::size_t vocab,
                                  SeededRng& rng, bool with_noisy) {
  std::vector<DpoPair> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    DpoPair pair;
    pair.input = make_input(rng.gaussian_vector(dim), 1);
    pair.preferred = static_cast<int>(rng.uniform_below(vocab));
    int dis = static_cast<int>(rng.uniform_below(vocab));
    if (dis == std::get<int>(pair.preferred)) dis = (dis + 1) % static_cast<int>(vocab);
    pair.dispreferred = dis;
    if (with_noisy && i % 2 == 0) {
      pair.category = PairCategory::cm;
      pair.noisy_visual = {rng.gaussian()};
    } else {
      pair.category = i % 3 == 0 ? PairCategory::oa2 : PairCategory::oa1;
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace

TEST_CASE("preference probability") {
  CHECK(preference_probability(1.3, 1.3) == doctest::Approx(0.5));
  CHECK(preference_probability(std::log(3.0), 0.0) == doctest::Approx(0.75).epsilon(1e-12));
  SeededRng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.gaussian(), b = rng.gaussian();
    const double p = preference_probability(a, b);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p + preference_probability(b, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(preference_probability(std::nan(""), 0.0), Error);
}

TEST_CASE("identical policies give log 2 per pair") {
  SeededRng rng(5);
  const CategoricalPolicy policy = random_categorical(4, 3, rng);
  const std::vector<DpoPair> pairs = random_pairs(17, 4, 3, rng, false);
  CHECK(dpo_loss(pairs, policy, policy, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(rag_dpo_loss(pairs, policy, policy, 2.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("margin-level worked values and monotonicity") {
  CHECK(dpo_loss_from_margins({2.0}, 1.0) ==
        doctest::Approx(-std::log(1.0 / (1.0 + std::exp(-2.0)))).epsilon(1e-12));
  CHECK(dpo_loss_from_margins({2.0}, 1.0) == doctest::Approx(0.126928).epsilon(1e-5));
  CHECK(dpo_loss_from_margins({0.0}, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  double previous = 1e9;
  for (double margin : {-2.0, -1.0, 0.0, 1.0, 2.0, 5.0}) {
    const double value = dpo_loss_from_margins({margin}, 1.0);
    CHECK(value < previous);
    previous = value;
  }
}

TEST_CASE("gauge freedom: shifting both log-ratios by g(x) cancels") {
  SeededRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> margins, shifted;
    for (int i = 0; i < 9; ++i) {
      const double rw = rng.gaussian(), rl = rng.gaussian();
      const double g = rng.gaussian();  // same input-dependent shift on both sides
      margins.push_back(rw - rl);
      shifted.push_back((rw + g) - (rl + g));
    }
    CHECK(dpo_loss_from_margins(margins, 1.3) ==
          doctest::Approx(dpo_loss_from_margins(shifted, 1.3)).epsilon(1e-12));
  }
}

TEST_CASE("swap identity: loss(margin) + loss(-margin) >= 2 log 2") {
  SeededRng rng(9);
  for (int i = 0; i < 200; ++i) {
    const double margin = 4.0 * rng.gaussian();
    const double total =
        dpo_loss_from_margins({margin}, 1.0) + dpo_loss_from_margins({-margin}, 1.0);
    CHECK(total >= 2.0 * std::log(2.0) - 1e-12);
  }
  CHECK(dpo_loss_from_margins({0.0}, 1.0) * 2.0 ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("noisy-input loss reduces to the plain loss when x* is absent or equal") {
  SeededRng rng(11);
  const CategoricalPolicy policy = random_categorical(3, 2, rng);
  const CategoricalPolicy reference = random_categorical(3, 2, rng);

  std::vector<DpoPair> oa_pairs = random_pairs(10, 3, 2, rng, false);
  CHECK(rag_dpo_loss(oa_pairs, policy, reference, 1.0) ==
        doctest::Approx(dpo_loss(oa_pairs, policy, reference, 1.0)).epsilon(1e-12));

  // cm pair whose noisy visual equals the clean one.
  DpoPair cm;
  cm.input = make_input({0.4, -0.2, 0.9}, 1);
  cm.category = PairCategory::cm;
  cm.preferred = 0;
  cm.dispreferred = 1;
  cm.noisy_visual = {0.4};
  const std::vector<DpoPair> pairs{cm};
  CHECK(rag_dpo_loss(pairs, policy, reference, 1.0) ==
        doctest::Approx(dpo_loss(pairs, policy, reference, 1.0)).epsilon(1e-12));

  DpoPair missing = cm;
  missing.noisy_visual.reset();
  CHECK_THROWS_WITH_AS(rag_dpo_loss({missing}, policy, reference, 1.0),
                       doctest::Contains("MissingNoisyInput"), Error);
}

TEST_CASE("mixed batch equals the hand mean of per-pair terms") {
  SeededRng rng(13);
  const CategoricalPolicy policy = random_categorical(4, 3, rng);
  const CategoricalPolicy reference = random_categorical(4, 3, rng);
  const std::vector<DpoPair> pairs = random_pairs(12, 4, 3, rng, true);

  const double alpha = 1.7;
  double manual = 0.0;
  for (const auto& pair : pairs)
    manual += rag_dpo_loss({pair}, policy, reference, alpha);
  manual /= static_cast<double>(pairs.size());
  CHECK(rag_dpo_loss(pairs, policy, reference, alpha) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("subset losses partition the total") {
  SeededRng rng(15);
  const CategoricalPolicy policy = random_categorical(4, 3, rng);
  const CategoricalPolicy reference = random_categorical(4, 3, rng);
  const std::vector<DpoPair> pairs = random_pairs(20, 4, 3, rng, true);

  std::size_t n_cm = 0;
  for (const auto& pair : pairs)
    if (pair.category == PairCategory::cm) ++n_cm;
  const std::size_t n_oa = pairs.size() - n_cm;
  REQUIRE(n_cm > 0);
  REQUIRE(n_oa > 0);

  const double alpha = 0.8;
  const double total = rag_dpo_loss(pairs, policy, reference, alpha);
  const double cm = subset_loss(SubsetKind::cm, pairs, policy, reference, alpha);
  const double oa = subset_loss(SubsetKind::oa, pairs, policy, reference, alpha);
  CHECK((cm * n_cm + oa * n_oa) / pairs.size() == doctest::Approx(total).epsilon(1e-12));

  std::vector<DpoPair> cm_only;
  for (const auto& pair : pairs)
    if (pair.category == PairCategory::cm) cm_only.push_back(pair);
  CHECK(subset_loss(SubsetKind::cm, cm_only, policy, reference, alpha) ==
        doctest::Approx(rag_dpo_loss(cm_only, policy, reference, alpha)).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(subset_loss(SubsetKind::oa, cm_only, policy, reference, alpha),
                       doctest::Contains("EmptySubset"), Error);
}

TEST_CASE("analytic parameter gradient matches central differences") {
  SeededRng rng(17);
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t dim = 3;
    const std::size_t vocab = 2 + instance % 2;
    CategoricalPolicy policy = random_categorical(dim, vocab, rng);
    const CategoricalPolicy reference = random_categorical(dim, vocab, rng);
    const std::vector<DpoPair> pairs = random_pairs(6, dim, vocab, rng, instance % 2 == 0);
    const double alpha = instance % 3 == 0 ? 0.5 : 1.5;

    const std::vector<double> analytic = rag_dpo_param_grad(pairs, policy, reference, alpha);
    std::vector<double> params = policy.parameters();
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double original = params[i];
      params[i] = original + h;
      policy.set_parameters(params);
      const double hi = rag_dpo_loss(pairs, policy, reference, alpha);
      params[i] = original - h;
      policy.set_parameters(params);
      const double lo = rag_dpo_loss(pairs, policy, reference, alpha);
      params[i] = original;
      policy.set_parameters(params);
      const double numeric = (hi - lo) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("categorical policy normalizes exactly and samples deterministically") {
  SeededRng rng(19);
  const CategoricalPolicy policy = random_categorical(5, 4, rng);
  const PolicyInput x = make_input(rng.gaussian_vector(5), 2);
  const std::vector<double> probs = policy.probabilities(x);
  double sum = 0.0;
  for (double p : probs) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  double log_sum = 0.0;
  for (int y = 0; y < 4; ++y) log_sum += std::exp(policy.log_prob(y, x));
  CHECK(log_sum == doctest::Approx(1.0).epsilon(1e-12));

  SeededRng s1(7), s2(7);
  for (int i = 0; i < 100; ++i)
    CHECK(std::get<int>(policy.sample(x, s1)) == std::get<int>(policy.sample(x, s2)));
}

TEST_CASE("linear-Gaussian policy density and gradients") {
  const LinearGaussianPolicy policy({2.0, -1.0});
  const PolicyInput x = make_input({0.5, 1.5}, 1);
  const double mean = 2.0 * 0.5 - 1.0 * 1.5;
  const double y = 0.7;
  CHECK(policy.log_prob(y, x) ==
        doctest::Approx(-0.5 * std::log(2.0 * 3.14159265358979323846) -
                        0.5 * (y - mean) * (y - mean))
            .epsilon(1e-12));

  const std::vector<double> pg = policy.param_grad_log_prob(y, x);
  CHECK(pg[0] == doctest::Approx((y - mean) * 0.5).epsilon(1e-12));
  CHECK(pg[1] == doctest::Approx((y - mean) * 1.5).epsilon(1e-12));

  const std::vector<double> ig = policy.input_grad_log_prob(y, x);
  CHECK(ig[0] == doctest::Approx((y - mean) * 2.0).epsilon(1e-12));
  CHECK(ig[1] == doctest::Approx((y - mean) * -1.0).epsilon(1e-12));
}

TEST_CASE("zero learning rate leaves the policy unchanged") {
  SeededRng rng(21);
  CategoricalPolicy policy = random_categorical(3, 2, rng);
  const std::vector<double> before = policy.parameters();
  const std::vector<DpoPair> pairs = random_pairs(8, 3, 2, rng, false);

  DpoConfig config;
  config.learning_rate = 0.0;
  config.epochs = 3;
  train_preference(policy, pairs, policy, config);
  CHECK(policy.parameters() == before);
}

TEST_CASE("training recovers the linear-Gaussian closed form") {
  // Planted preference pairs on a shared scalar input; the fitted slope
  // should land on theta_ref + (beta - beta_tilde) / alpha.
  const double beta = 1.0, beta_tilde = 0.5;
  for (double alpha : {1.0, 2.0}) {
    SeededRng rng(23);
    std::vector<DpoPair> pairs;
    for (int i = 0; i < 20000; ++i) {
      const double x = rng.gaussian();
      DpoPair pair;
      pair.input = make_input({x}, 1);
      pair.preferred = beta * x + rng.gaussian();
      pair.dispreferred = beta_tilde * x + rng.gaussian();
      pair.category = PairCategory::oa1;
      pairs.push_back(std::move(pair));
    }

    LinearGaussianPolicy policy({0.0});
    const LinearGaussianPolicy reference({0.0});
    DpoConfig config;
    config.alpha = alpha;
    config.learning_rate = 0.5;
    config.epochs = 60;
    config.batch_size = 0;  // full batch
    config.seed = 1;
    const DpoTrainResult result = train_preference(policy, pairs, reference, config);

    const double expected = linear_dpo_closed_form(0.0, beta, beta_tilde, alpha);
    CHECK(std::abs(policy.theta()[0] - expected) <= 0.05);

    // Smoothed loss trajectory does not increase.
    for (std::size_t i = 0; i + 5 < result.trajectory.size(); ++i) {
      double early = 0.0, late = 0.0;
      for (std::size_t w = 0; w < 5; ++w) {
        early += result.trajectory[i + w].loss;
        late += result.trajectory[i + w + 1].loss;
      }
      CHECK(late <= early + 1e-9);
    }
  }
}

TEST_CASE("training twice with one seed is bitwise identical") {
  SeededRng rng(31);
  const std::vector<DpoPair> pairs = random_pairs(30, 3, 2, rng, true);
  DpoConfig config;
  config.learning_rate = 0.1;
  config.epochs = 10;
  config.batch_size = 8;
  config.seed = 77;

  SeededRng init(1);
  CategoricalPolicy a = CategoricalPolicy::random_init({"x", "y"}, 3, 0.3, init);
  CategoricalPolicy b = a;
  const CategoricalPolicy reference = a;
  train_preference(a, pairs, reference, config);
  train_preference(b, pairs, reference, config);
  CHECK(a.parameters() == b.parameters());
}
