#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ragalign/error.hpp"
#include "ragalign/rng.hpp"
#include "ragalign/vec.hpp"

using namespace ragalign;

TEST_CASE("l2_normalize worked examples") {
  const Embedding e = l2_normalize(FeatureVector({3.0, 4.0}));
  CHECK(e.values[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(e.values[1] == doctest::Approx(0.8).epsilon(1e-12));

  const Embedding unit = l2_normalize(FeatureVector({1.0, 0.0, 0.0}));
  CHECK(unit.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(unit.values[1] == 0.0);

  CHECK_THROWS_WITH_AS(l2_normalize(FeatureVector({0.0, 0.0})), doctest::Contains("ZeroVector"),
                       Error);
}

TEST_CASE("l2_normalize is idempotent and scale invariant") {
  SeededRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    FeatureVector v(rng.gaussian_vector(6));
    const Embedding once = l2_normalize(v);
    const Embedding twice = l2_normalize(FeatureVector(once.values));
    const double scale = rng.uniform01() * 10.0 + 0.01;
    FeatureVector scaled = v;
    for (auto& value : scaled.values) value *= scale;
    const Embedding from_scaled = l2_normalize(scaled);
    for (std::size_t i = 0; i < v.dim(); ++i) {
      CHECK(once.values[i] == doctest::Approx(twice.values[i]).epsilon(1e-12));
      CHECK(once.values[i] == doctest::Approx(from_scaled.values[i]).epsilon(1e-12));
    }
    CHECK(l2_norm(once.values) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cosine similarity basics") {
  const Embedding a = l2_normalize(FeatureVector({1.0, 2.0}));
  const Embedding b = l2_normalize(FeatureVector({2.0, 1.0}));
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  const Embedding x = l2_normalize(FeatureVector({1.0, 0.0}));
  const Embedding y = l2_normalize(FeatureVector({0.0, 1.0}));
  CHECK(cosine_similarity(x, y) == doctest::Approx(0.0).epsilon(1e-12));

  Embedding short_one;
  short_one.values = {1.0};
  CHECK_THROWS_AS(cosine_similarity(a, short_one), Error);
}

TEST_CASE("cosine similarity is symmetric") {
  SeededRng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Embedding a = l2_normalize(FeatureVector(rng.gaussian_vector(5)));
    const Embedding b = l2_normalize(FeatureVector(rng.gaussian_vector(5)));
    CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-12));
    CHECK(cosine_similarity(a, b) <= 1.0);
    CHECK(cosine_similarity(a, b) >= -1.0);
  }
}

TEST_CASE("similarity matrix") {
  const Embedding e0 = l2_normalize(FeatureVector({1.0, 0.0}));
  const Embedding e1 = l2_normalize(FeatureVector({0.0, 1.0}));
  const SimilarityMatrix s = similarity_matrix({e0, e1}, {e0, e1});
  CHECK(s.at(0, 0) == doctest::Approx(1.0));
  CHECK(s.at(0, 1) == doctest::Approx(0.0));
  CHECK(s.at(1, 0) == doctest::Approx(0.0));
  CHECK(s.at(1, 1) == doctest::Approx(1.0));

  const SimilarityMatrix single = similarity_matrix({e0}, {e1});
  CHECK(single.size() == 1);
  CHECK(single.at(0, 0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(similarity_matrix({}, {}), Error);
  CHECK_THROWS_AS(similarity_matrix({e0}, {e0, e1}), Error);
}

TEST_CASE("self similarity matrix is symmetric with unit diagonal") {
  SeededRng rng(3);
  std::vector<Embedding> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(l2_normalize(FeatureVector(rng.gaussian_vector(4))));
  const SimilarityMatrix s = similarity_matrix(batch, batch);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.at(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < s.size(); ++j)
      CHECK(s.at(i, j) == doctest::Approx(s.at(j, i)).epsilon(1e-12));
  }
}

TEST_CASE("seeded rng is reproducible and well behaved") {
  SeededRng a(42), b(42), c(43);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  CHECK(a.next_u64() != c.next_u64());

  SeededRng g(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = g.uniform01();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }

  // Gaussian moments over a large sample.
  SeededRng n(5);
  const std::size_t count = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double z = n.gaussian();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(count)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(count)));
}

TEST_CASE("uniform_below is unbiased across small bounds") {
  SeededRng rng(9);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.uniform_below(5)];
  for (int count : counts) CHECK(std::abs(count - 10000) < 500);
}

TEST_CASE("pairwise_sum matches sequential on random data") {
  SeededRng rng(13);
  std::vector<double> terms = rng.gaussian_vector(1234);
  double sequential = 0.0;
  for (double t : terms) sequential += t;
  CHECK(pairwise_sum(terms) == doctest::Approx(sequential).epsilon(1e-12));
  CHECK(pairwise_sum({}) == 0.0);
}

TEST_CASE("matrix helpers") {
  Matrix m(2, 2);
  m.at(0, 0) = 1.0;
  m.at(1, 1) = 2.0;
  const std::vector<double> out = m.left_multiply({1.0, 1.0});
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(m.left_multiply({1.0}), Error);

  const Matrix eye = Matrix::identity(3);
  CHECK(eye.at(2, 2) == 1.0);
  CHECK(eye.at(0, 2) == 0.0);
}

TEST_CASE("logistic helpers") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(log_sigmoid(0.0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(log_sigmoid(-745.0) == doctest::Approx(-745.0).epsilon(1e-9));

  const std::vector<double> ramp = linear_ramp(-6.0, 6.0, 5);
  CHECK(ramp.front() == doctest::Approx(-6.0));
  CHECK(ramp[2] == doctest::Approx(0.0));
  CHECK(ramp.back() == doctest::Approx(6.0));
}
