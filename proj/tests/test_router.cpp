#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ragalign/error.hpp"
#include "ragalign/router.hpp"
#include "ragalign/synth.hpp"

using namespace ragalign;

TEST_CASE("separable blobs reach near-perfect held-out accuracy") {
  SeededRng rng(17);
  const std::vector<std::string> domains{"radiology", "ophthalmology", "pathology"};
  const std::vector<DomainBlob> blobs = planted_domain_means(domains, 6, rng);
  const std::vector<LabeledFeature> train = sample_blob_points(blobs, 100, 0.1, rng);
  const std::vector<LabeledFeature> held_out = sample_blob_points(blobs, 50, 0.1, rng);

  RouterConfig config;
  const RouterParams params = train_router(train, domains, config);

  std::size_t correct = 0;
  for (const auto& item : held_out) {
    const DomainPrediction pred = identify_domain(params, item.features);
    if (pred.domain == item.domain) ++correct;
    double sum = 0.0;
    for (double p : pred.probabilities) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(static_cast<double>(correct) / held_out.size() >= 0.99);

  // A point sitting exactly on a planted mean routes to that domain.
  for (const auto& blob : blobs)
    CHECK(identify_domain(params, FeatureVector(blob.mean)).domain == blob.domain);
}

TEST_CASE("single-domain config routes everything to it") {
  SeededRng rng(19);
  std::vector<LabeledFeature> train;
  for (int i = 0; i < 10; ++i) train.push_back({FeatureVector(rng.gaussian_vector(4)), "only"});
  const RouterParams params = train_router(train, {"only"}, RouterConfig{});
  for (int i = 0; i < 10; ++i)
    CHECK(identify_domain(params, FeatureVector(rng.gaussian_vector(4))).domain == "only");
}

TEST_CASE("zero parameters give uniform probabilities and the first domain") {
  RouterParams params;
  params.domain_names = {"a", "b", "c"};
  params.weights = Matrix(2, 3);
  params.bias = {0.0, 0.0, 0.0};
  const DomainPrediction pred = identify_domain(params, FeatureVector({0.3, -0.7}));
  CHECK(pred.domain == "a");
  for (double p : pred.probabilities) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("prediction is invariant under a constant logit shift") {
  SeededRng rng(23);
  RouterParams params;
  params.domain_names = {"a", "b"};
  params.weights = Matrix(3, 2);
  for (auto& w : params.weights.data()) w = rng.gaussian();
  params.bias = {0.1, -0.4};

  RouterParams shifted = params;
  for (auto& b : shifted.bias) b += 11.5;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) shifted.weights.at(r, c) += 0.0;

  for (int i = 0; i < 20; ++i) {
    const FeatureVector x(rng.gaussian_vector(3));
    const DomainPrediction base = identify_domain(params, x);
    const DomainPrediction moved = identify_domain(shifted, x);
    CHECK(base.domain == moved.domain);
    for (std::size_t c = 0; c < 2; ++c)
      CHECK(base.probabilities[c] == doctest::Approx(moved.probabilities[c]).epsilon(1e-9));
  }
}

TEST_CASE("training determinism and error paths") {
  SeededRng rng(29);
  const std::vector<std::string> domains{"a", "b"};
  const std::vector<DomainBlob> blobs = planted_domain_means(domains, 4, rng);
  const std::vector<LabeledFeature> train = sample_blob_points(blobs, 20, 0.2, rng);

  const RouterParams once = train_router(train, domains, RouterConfig{});
  const RouterParams twice = train_router(train, domains, RouterConfig{});
  CHECK(once.weights.data() == twice.weights.data());
  CHECK(once.bias == twice.bias);

  CHECK_THROWS_WITH_AS(train_router({}, domains, RouterConfig{}),
                       doctest::Contains("InsufficientData"), Error);

  std::vector<LabeledFeature> missing = train;
  std::erase_if(missing, [](const LabeledFeature& f) { return f.domain == "b"; });
  CHECK_THROWS_WITH_AS(train_router(missing, domains, RouterConfig{}),
                       doctest::Contains("MissingDomain"), Error);

  CHECK_THROWS_AS(identify_domain(once, FeatureVector({1.0})), Error);
}
