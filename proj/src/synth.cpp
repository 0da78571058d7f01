#include "ragalign/synth.hpp"

#include <cmath>

#include "ragalign/error.hpp"

namespace ragalign {

Matrix random_orthogonal(std::size_t dim, SeededRng& rng) {
  Matrix m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    std::vector<double> row = rng.gaussian_vector(dim);
    // Project out the rows already accepted, then normalize.
    for (std::size_t prev = 0; prev < r; ++prev) {
      double overlap = 0.0;
      for (std::size_t c = 0; c < dim; ++c) overlap += row[c] * m.at(prev, c);
      for (std::size_t c = 0; c < dim; ++c) row[c] -= overlap * m.at(prev, c);
    }
    double norm = l2_norm(row);
    while (norm < 1e-8) {  // pathological draw; retry the row
      row = rng.gaussian_vector(dim);
      for (std::size_t prev = 0; prev < r; ++prev) {
        double overlap = 0.0;
        for (std::size_t c = 0; c < dim; ++c) overlap += row[c] * m.at(prev, c);
        for (std::size_t c = 0; c < dim; ++c) row[c] -= overlap * m.at(prev, c);
      }
      norm = l2_norm(row);
    }
    for (std::size_t c = 0; c < dim; ++c) m.at(r, c) = row[c] / norm;
  }
  return m;
}

PairList planted_rotation_pairs(std::size_t count, const Matrix& rotation, SeededRng& rng) {
  PairList pairs;
  pairs.reserve(count);
  const std::size_t dim = rotation.rows();
  for (std::size_t i = 0; i < count; ++i) {
    FeatureVector image(rng.gaussian_vector(dim));
    FeatureVector text(rotation.left_multiply(image.values));
    pairs.emplace_back(std::move(image), std::move(text));
  }
  return pairs;
}

std::vector<DomainBlob> planted_domain_means(const std::vector<std::string>& domains,
                                             std::size_t dim, SeededRng& rng) {
  std::vector<DomainBlob> blobs;
  blobs.reserve(domains.size());
  for (const auto& domain : domains) {
    const Embedding mean = l2_normalize(FeatureVector(rng.gaussian_vector(dim)));
    blobs.push_back({domain, mean.values});
  }
  return blobs;
}

std::vector<LabeledFeature> sample_blob_points(const std::vector<DomainBlob>& blobs,
                                               std::size_t per_domain, double sigma,
                                               SeededRng& rng) {
  std::vector<LabeledFeature> points;
  points.reserve(blobs.size() * per_domain);
  for (const auto& blob : blobs) {
    for (std::size_t i = 0; i < per_domain; ++i) {
      std::vector<double> values = blob.mean;
      for (auto& v : values) v += sigma * rng.gaussian();
      points.push_back({FeatureVector(std::move(values)), blob.domain});
    }
  }
  return points;
}

MiniWorld make_single_domain_world(const std::string& domain, std::size_t dim,
                                   std::size_t n_contexts, std::uint64_t seed) {
  SeededRng rng(seed);

  EncoderParams encoder;
  encoder.domain = domain;
  encoder.image_weights = Matrix::identity(dim);
  encoder.text_weights = Matrix::identity(dim);

  std::vector<RawRecord> records;
  records.reserve(n_contexts);
  for (std::size_t i = 0; i < n_contexts; ++i) {
    RawRecord record;
    record.id = domain + ":ctx" + std::to_string(i);
    record.text = "report " + std::to_string(i) + " for " + domain;
    record.text_features = FeatureVector(rng.gaussian_vector(dim));
    records.push_back(std::move(record));
  }

  MiniWorld world;
  world.registry.add(encoder, ContextIndex::build(domain, records, encoder));

  RouterConfig router_config;
  router_config.epochs = 1;
  std::vector<LabeledFeature> labeled{{FeatureVector(rng.gaussian_vector(dim)), domain},
                                      {FeatureVector(rng.gaussian_vector(dim)), domain}};
  world.router = train_router(labeled, {domain}, router_config);
  return world;
}

BranchCorpus make_branch_corpus(std::size_t dim, std::uint64_t seed) {
  SeededRng rng(seed);
  BranchCorpus corpus;
  corpus.expected = {PairCategory::cm,  PairCategory::cm,  PairCategory::oa1,
                     PairCategory::oa1, PairCategory::oa2, PairCategory::oa2};
  for (std::size_t i = 0; i < 6; ++i) {
    QASample sample;
    sample.id = "q" + std::to_string(i + 1);
    sample.image = FeatureVector(rng.gaussian_vector(dim));
    sample.question = "is finding " + std::to_string(i + 1) + " present";
    sample.answer = "yes";
    corpus.samples.push_back(sample);

    ScriptedAnswerModel::Answers answers;
    switch (corpus.expected[i]) {
      case PairCategory::cm:
        answers = {"yes", "yes", "yes", "no"};
        break;
      case PairCategory::oa1:
        // noisy_with_rag wrong, so the cm condition cannot fire first
        answers = {"yes", "no", "no", "no"};
        break;
      case PairCategory::oa2:
        answers = {"no", "yes", "no", "no"};
        break;
    }
    corpus.model.add(sample.question, sample.image, answers);
  }
  return corpus;
}

ScriptedAnswerModel random_scripted_model(const std::vector<QASample>& samples, double p_correct,
                                          SeededRng& rng) {
  ScriptedAnswerModel model;
  for (const auto& sample : samples) {
    auto roll = [&]() { return rng.uniform01() <= p_correct ? sample.answer : "wrong-" + sample.id; };
    ScriptedAnswerModel::Answers answers{roll(), roll(), roll(), roll()};
    model.add(sample.question, sample.image, answers);
  }
  return model;
}

namespace {

constexpr std::size_t kVisualDim = 2;
constexpr std::size_t kTextDim = 2;

PolicyInput pack_input(const std::vector<double>& visual, const std::vector<double>& text,
                       const std::vector<double>& retrieval) {
  PolicyInput input;
  input.visual_dim = visual.size();
  input.features = visual;
  input.features.insert(input.features.end(), text.begin(), text.end());
  input.features.insert(input.features.end(), retrieval.begin(), retrieval.end());
  return input;
}

}  // namespace

WeightCheckSetup make_cross_modal_setup(std::size_t n_pairs, SeededRng& rng) {
  WeightCheckSetup setup;
  const std::vector<std::string> vocab{"no", "yes"};
  const std::size_t total_dim = kVisualDim + kTextDim;

  // Reference answers from the text block only.
  setup.reference = CategoricalPolicy(vocab, total_dim);
  for (std::size_t f = kVisualDim; f < total_dim; ++f) {
    const double w = 0.3 * rng.gaussian();
    setup.reference.weights().at(f, 0) = -w;
    setup.reference.weights().at(f, 1) = w;
  }

  for (std::size_t i = 0; i < n_pairs; ++i) {
    std::vector<double> visual = rng.gaussian_vector(kVisualDim);
    std::vector<double> text = rng.gaussian_vector(kTextDim);
    const int label = visual[0] + visual[1] > 0.0 ? 1 : 0;

    DpoPair pair;
    pair.input = pack_input(visual, text, {});
    pair.category = PairCategory::cm;
    pair.preferred = label;
    pair.dispreferred = label;  // same text, scored at the noised image
    pair.noisy_visual = rng.gaussian_vector(kVisualDim);
    setup.pairs.push_back(std::move(pair));
  }

  setup.probe = pack_input({0.8, 0.6}, {0.2, -0.1}, {});
  setup.variables = {{"x_v", 0, kVisualDim}, {"x_t", kVisualDim, kTextDim}};
  return setup;
}

WeightCheckSetup make_overall_setup(std::size_t n_pairs, SeededRng& rng) {
  WeightCheckSetup setup;
  const std::vector<std::string> vocab{"no", "yes"};
  const std::size_t helpful = kVisualDim + kTextDim;
  const std::size_t harmful = helpful + 1;
  const std::size_t total_dim = harmful + 1;

  // Reference trusts any retrieval cue with the same moderate weight and
  // cannot tell the helpful one from the harmful one.
  setup.reference = CategoricalPolicy(vocab, total_dim);
  setup.reference.weights().at(helpful, 1) = 0.3;
  setup.reference.weights().at(helpful, 0) = -0.3;
  setup.reference.weights().at(harmful, 1) = 0.7;
  setup.reference.weights().at(harmful, 0) = -0.7;

  for (std::size_t i = 0; i < n_pairs; ++i) {
    std::vector<double> visual = rng.gaussian_vector(kVisualDim);
    for (auto& v : visual) v *= 0.1;
    std::vector<double> text = rng.gaussian_vector(kTextDim);
    for (auto& v : text) v *= 0.1;
    const int label = rng.uniform01() < 0.5 ? 1 : 0;
    const double direction = label == 1 ? 1.0 : -1.0;

    DpoPair pair;
    pair.preferred = label;
    pair.dispreferred = 1 - label;
    if (i % 2 == 0) {
      // Helpful cue active and asserting the truth.
      pair.input = pack_input(visual, text, {direction, 0.0});
      pair.category = PairCategory::oa1;
    } else {
      // Harmful cue active and asserting the wrong answer.
      pair.input = pack_input(visual, text, {0.0, -direction});
      pair.category = PairCategory::oa2;
    }
    setup.pairs.push_back(std::move(pair));
  }

  setup.probe = pack_input({0.05, -0.05}, {0.1, 0.05}, {1.0, -1.0});
  setup.variables = {{"x_v", 0, kVisualDim},
                     {"x_r", helpful, 1},
                     {"x_tilde_r", harmful, 1}};
  return setup;
}

SynthWorld make_synth_world(const SynthWorldConfig& config) {
  if (config.domains.empty()) fail(Errc::config_error, "need at least one domain");
  SeededRng rng(config.seed);
  SynthWorld world;

  const std::vector<DomainBlob> blobs = planted_domain_means(config.domains, config.dim_in, rng);

  std::map<std::string, Matrix> rotations;
  for (const auto& domain : config.domains) rotations.emplace(domain, random_orthogonal(config.dim_in, rng));

  for (const auto& domain : config.domains) {
    world.train_pairs[domain] =
        planted_rotation_pairs(config.train_pairs_per_domain, rotations.at(domain), rng);
    world.eval_pairs[domain] =
        planted_rotation_pairs(config.eval_pairs_per_domain, rotations.at(domain), rng);
  }

  world.router_train = sample_blob_points(blobs, config.router_train_per_domain,
                                          config.blob_sigma, rng);
  world.router_eval = sample_blob_points(blobs, config.router_eval_per_domain,
                                         config.blob_sigma, rng);

  for (const auto& blob : blobs) {
    std::vector<RawRecord> records;
    records.reserve(config.contexts_per_domain);
    for (std::size_t i = 0; i < config.contexts_per_domain; ++i) {
      std::vector<double> image = blob.mean;
      for (auto& v : image) v += config.blob_sigma * rng.gaussian();
      const bool positive = i % 2 == 0;
      RawRecord record;
      record.id = blob.domain + ":ctx" + std::to_string(i);
      record.text = "study " + std::to_string(i) + " of " + blob.domain + " shows a " +
                    (positive ? "positive" : "negative") + " finding";
      record.text_features = FeatureVector(rotations.at(blob.domain).left_multiply(image));
      records.push_back(std::move(record));
    }
    world.contexts[blob.domain] = std::move(records);
  }

  // QA samples cycle through the branch patterns so every preference
  // category is represented, with a few unclassifiable leftovers.
  std::size_t sample_counter = 0;
  for (const auto& blob : blobs) {
    for (std::size_t i = 0; i < config.qa_per_domain; ++i) {
      QASample sample;
      sample.id = blob.domain + ":qa" + std::to_string(i);
      std::vector<double> image = blob.mean;
      for (auto& v : image) v += config.blob_sigma * rng.gaussian();
      sample.image = FeatureVector(std::move(image));
      sample.question = "is the finding in study " + std::to_string(i) + " of " + blob.domain +
                        " present";
      sample.answer = sample_counter % 2 == 0 ? "yes" : "no";
      sample.domain = blob.domain;

      const std::string truth = sample.answer;
      const std::string wrong = truth == "yes" ? "no" : "yes";
      ScriptedAnswerModel::Answers answers;
      switch (sample_counter % 4) {
        case 0: answers = {truth, truth, truth, wrong}; break;  // cm
        case 1: answers = {truth, wrong, wrong, wrong}; break;  // oa1
        case 2: answers = {wrong, truth, wrong, wrong}; break;  // oa2
        default: answers = {wrong, wrong, wrong, wrong}; break; // unclassifiable
      }
      world.scripted.add(sample.question, sample.image, answers);
      world.qa.push_back(std::move(sample));
      ++sample_counter;
    }
  }

  return world;
}

}  // namespace ragalign
