#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ragalign/error.hpp"
#include "ragalign/index.hpp"
#include "ragalign/serde.hpp"
#include "ragalign/synth.hpp"

using namespace ragalign;

namespace {

// Independent first-drop scan used as the truncation oracle.
std::size_t oracle_kept(const std::vector<double>& scores, double gamma) {
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    if (std::log(scores[i] / scores[i + 1]) > gamma) return i + 1;
  }
  return scores.size();
}

std::vector<double> random_sorted_scores(SeededRng& rng, std::size_t max_len = 12) {
  const std::size_t len = 1 + rng.uniform_below(max_len);
  std::vector<double> scores(len);
  for (auto& s : scores) s = rng.uniform01();
  std::sort(scores.rbegin(), scores.rend());
  return scores;
}

EncoderParams identity_params(const std::string& domain, std::size_t dim) {
  EncoderParams p;
  p.domain = domain;
  p.image_weights = Matrix::identity(dim);
  p.text_weights = Matrix::identity(dim);
  return p;
}

}  // namespace

TEST_CASE("adaptive truncation worked example") {
  const TruncationDecision d = adaptive_truncate({0.9, 0.8, 0.2, 0.1}, 1.0);
  REQUIRE(d.ratios.size() == 3);
  CHECK(d.ratios[0] == doctest::Approx(std::log(0.9 / 0.8)).epsilon(1e-9));
  CHECK(d.ratios[1] == doctest::Approx(std::log(0.8 / 0.2)).epsilon(1e-9));
  CHECK(d.ratios[2] == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(d.kept_k == 2);
  REQUIRE(d.cut_index.has_value());
  CHECK(*d.cut_index == 2);
  CHECK(d.original_k == 4);
}

TEST_CASE("adaptive truncation edge cases") {
  const TruncationDecision equal = adaptive_truncate({0.5, 0.5, 0.5}, 0.1);
  CHECK(equal.kept_k == 3);
  CHECK_FALSE(equal.cut_index.has_value());
  for (double u : equal.ratios) CHECK(u == doctest::Approx(0.0));

  const TruncationDecision single = adaptive_truncate({0.9}, 0.5);
  CHECK(single.kept_k == 1);
  CHECK(single.ratios.empty());

  const TruncationDecision huge_gamma = adaptive_truncate({0.9, 1e-6}, 1e18);
  CHECK(huge_gamma.kept_k == 2);

  CHECK_THROWS_WITH_AS(adaptive_truncate({0.5, 0.0}, 1.0), doctest::Contains("NonPositiveScore"),
                       Error);
  CHECK_THROWS_WITH_AS(adaptive_truncate({0.2, 0.5}, 1.0), doctest::Contains("UnsortedScores"),
                       Error);
  CHECK_THROWS_AS(adaptive_truncate({}, 1.0), Error);
}

TEST_CASE("adaptive truncation matches the oracle on 1000 random vectors") {
  SeededRng rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<double> scores = random_sorted_scores(rng);
    const double gamma = rng.uniform01() * 2.0 + 1e-6;
    const TruncationDecision d = adaptive_truncate(scores, gamma);
    CHECK(d.kept_k == oracle_kept(scores, gamma));
    CHECK(d.kept_k >= 1);
    CHECK(d.ratios.size() == scores.size() - 1);
  }
}

TEST_CASE("truncation is monotone in gamma and scale invariant") {
  SeededRng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> scores = random_sorted_scores(rng);
    std::size_t previous = 1;
    for (int g = 1; g <= 10; ++g) {
      const double gamma = 0.25 * g;
      const std::size_t kept = adaptive_truncate(scores, gamma).kept_k;
      CHECK(kept >= previous);
      previous = kept;
    }

    const double scale = 0.01 + rng.uniform01() * 10.0;
    std::vector<double> scaled = scores;
    for (auto& s : scaled) s *= scale;
    const TruncationDecision a = adaptive_truncate(scores, 0.8);
    const TruncationDecision b = adaptive_truncate(scaled, 0.8);
    CHECK(a.kept_k == b.kept_k);
    for (std::size_t i = 0; i < a.ratios.size(); ++i)
      CHECK(a.ratios[i] == doctest::Approx(b.ratios[i]).epsilon(1e-9));
  }
}

TEST_CASE("top_k agrees with an exhaustive scan") {
  SeededRng rng(47);
  const std::size_t dim = 5;
  const EncoderParams params = identity_params("d", dim);
  std::vector<RawRecord> records;
  for (int i = 0; i < 200; ++i)
    records.push_back({"r" + std::to_string(i), "text " + std::to_string(i),
                       FeatureVector(rng.gaussian_vector(dim))});
  const ContextIndex index = ContextIndex::build("d", records, params);

  for (int trial = 0; trial < 10; ++trial) {
    const Embedding query = l2_normalize(FeatureVector(rng.gaussian_vector(dim)));

    // Exhaustive oracle: mapped score, then full stable ordering.
    struct Row {
      std::string id;
      double score;
    };
    std::vector<Row> oracle;
    for (const auto& record : index.records()) {
      const double cosine = cosine_similarity(query, record.embedding);
      oracle.push_back({record.id, std::max((cosine + 1.0) / 2.0, 1e-9)});
    }
    std::sort(oracle.begin(), oracle.end(), [](const Row& a, const Row& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });

    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{50}, std::size_t{400}}) {
      const std::vector<ScoredContext> got = index.top_k(query, k);
      const std::size_t expect = std::min(k, oracle.size());
      REQUIRE(got.size() == expect);
      for (std::size_t i = 0; i < expect; ++i) {
        CHECK(got[i].id == oracle[i].id);
        CHECK(got[i].score == oracle[i].score);
      }
      for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i].score <= got[i - 1].score);
    }
  }
}

TEST_CASE("top_k basics and errors") {
  const EncoderParams params = identity_params("d", 2);
  std::vector<RawRecord> records{{"a", "alpha", FeatureVector({1.0, 0.0})},
                                 {"b", "beta", FeatureVector({0.0, 1.0})}};
  const ContextIndex index = ContextIndex::build("d", records, params);

  const Embedding query = l2_normalize(FeatureVector({1.0, 0.0}));
  const std::vector<ScoredContext> hits = index.top_k(query, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].id == "a");
  CHECK(hits[0].score == doctest::Approx(1.0));

  CHECK(index.top_k(query, 10).size() == 2);

  const ContextIndex empty = ContextIndex::build("d", {}, params);
  CHECK(empty.empty());
  CHECK_THROWS_WITH_AS(empty.top_k(query, 1), doctest::Contains("EmptyIndex"), Error);

  std::vector<RawRecord> dupes{{"a", "x", FeatureVector({1.0, 0.0})},
                               {"a", "y", FeatureVector({0.0, 1.0})}};
  CHECK_THROWS_WITH_AS(ContextIndex::build("d", dupes, params),
                       doctest::Contains("DuplicateId"), Error);

  CHECK_THROWS_WITH_AS(ContextIndex::build("other", records, params),
                       doctest::Contains("DomainMismatch"), Error);
}

TEST_CASE("self retrieval ranks each record first") {
  SeededRng rng(53);
  const std::size_t dim = 6;
  const Matrix rotation = random_orthogonal(dim, rng);
  EncoderParams params;
  params.domain = "d";
  params.image_weights = Matrix::identity(dim);
  params.text_weights = Matrix(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) params.text_weights.at(r, c) = rotation.at(c, r);

  std::vector<RawRecord> records;
  std::vector<FeatureVector> images;
  for (int i = 0; i < 100; ++i) {
    FeatureVector image(rng.gaussian_vector(dim));
    records.push_back({"r" + std::to_string(i), "t" + std::to_string(i),
                       FeatureVector(rotation.left_multiply(image.values))});
    images.push_back(std::move(image));
  }
  const ContextIndex index = ContextIndex::build("d", records, params);
  for (int i = 0; i < 100; ++i) {
    const Embedding query = encode(params, Modality::image, images[i]);
    CHECK(index.top_k(query, 1)[0].id == "r" + std::to_string(i));
  }
}

TEST_CASE("index JSON round-trip preserves retrieval bit-exactly") {
  SeededRng rng(59);
  const EncoderParams params = identity_params("d", 4);
  std::vector<RawRecord> records;
  for (int i = 0; i < 30; ++i)
    records.push_back({"r" + std::to_string(i), "text " + std::to_string(i),
                       FeatureVector(rng.gaussian_vector(4))});
  const ContextIndex index = ContextIndex::build("d", records, params);

  const nlohmann::json j = index_to_json(index, Provenance{});
  const ContextIndex loaded = index_from_json(nlohmann::json::parse(j.dump()));

  const Embedding query = l2_normalize(FeatureVector(rng.gaussian_vector(4)));
  const auto a = index.top_k(query, 7);
  const auto b = loaded.top_k(query, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].score == b[i].score);  // exact, not approximate
  }
}

TEST_CASE("registry retrieve composes routing, top-k and truncation") {
  SeededRng rng(61);
  const std::vector<std::string> domains{"left", "right"};
  const std::vector<DomainBlob> blobs = planted_domain_means(domains, 4, rng);
  const std::vector<LabeledFeature> train = sample_blob_points(blobs, 40, 0.05, rng);
  const RouterParams router = train_router(train, domains, RouterConfig{});

  RetrievalRegistry registry;
  for (const auto& blob : blobs) {
    std::vector<RawRecord> records;
    for (int i = 0; i < 20; ++i) {
      std::vector<double> values = blob.mean;
      for (auto& v : values) v += 0.05 * rng.gaussian();
      records.push_back({blob.domain + std::to_string(i), blob.domain + " report",
                         FeatureVector(std::move(values))});
    }
    registry.add(identity_params(blob.domain, 4),
                 ContextIndex::build(blob.domain, records, identity_params(blob.domain, 4)));
  }

  for (const auto& blob : blobs) {
    std::vector<double> probe = blob.mean;
    for (auto& v : probe) v += 0.05 * rng.gaussian();
    const RetrievalResult result = registry.retrieve(router, FeatureVector(probe), 5, 5.0);
    CHECK(result.domain == blob.domain);
    CHECK(result.contexts.size() == result.truncation.kept_k);
    CHECK(result.truncation.original_k == 5);
    for (const auto& context : result.contexts)
      CHECK(context.id.substr(0, blob.domain.size()) == blob.domain);
  }

  // Deterministic: identical inputs give identical results.
  const FeatureVector probe(blobs[0].mean);
  const RetrievalResult r1 = registry.retrieve(router, probe, 3, 1.0);
  const RetrievalResult r2 = registry.retrieve(router, probe, 3, 1.0);
  REQUIRE(r1.contexts.size() == r2.contexts.size());
  for (std::size_t i = 0; i < r1.contexts.size(); ++i) {
    CHECK(r1.contexts[i].id == r2.contexts[i].id);
    CHECK(r1.contexts[i].score == r2.contexts[i].score);
  }

  CHECK_THROWS_WITH_AS(registry.encoder("absent"), doctest::Contains("MissingDomain"), Error);
}
