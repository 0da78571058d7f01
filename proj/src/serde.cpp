#include "ragalign/serde.hpp"

#include <fstream>

#include "ragalign/error.hpp"

namespace ragalign {

using nlohmann::json;

json provenance_to_json(const Provenance& p) {
  return json{{"tool_version", p.tool_version},
              {"config_hash", p.config_hash},
              {"seed", p.seed}};
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  p.tool_version = j.at("tool_version").get<std::string>();
  p.config_hash = j.at("config_hash").get<std::uint64_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

std::uint64_t hash_json(const json& j) {
  const std::string dumped = j.dump();
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : dumped) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) fail(Errc::io_error, "matrix must be a nonempty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) fail(Errc::io_error, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = j[r][c].get<double>();
  }
  return m;
}

json encoder_to_json(const EncoderParams& params, const Provenance& p) {
  return json{{"provenance", provenance_to_json(p)},
              {"version", kFormatVersion},
              {"domain", params.domain},
              {"dim_in", params.dim_in()},
              {"dim_emb", params.dim_emb()},
              {"image_weights", matrix_to_json(params.image_weights)},
              {"text_weights", matrix_to_json(params.text_weights)}};
}

EncoderParams encoder_from_json(const json& j) {
  EncoderParams params;
  params.domain = j.at("domain").get<std::string>();
  params.image_weights = matrix_from_json(j.at("image_weights"));
  params.text_weights = matrix_from_json(j.at("text_weights"));
  if (params.image_weights.rows() != j.at("dim_in").get<std::size_t>() ||
      params.image_weights.cols() != j.at("dim_emb").get<std::size_t>())
    fail(Errc::io_error, "encoder dims disagree with stored weights");
  return params;
}

json router_to_json(const RouterParams& params, const Provenance& p) {
  return json{{"provenance", provenance_to_json(p)},
              {"version", kFormatVersion},
              {"domains", params.domain_names},
              {"weights", matrix_to_json(params.weights)},
              {"bias", params.bias}};
}

RouterParams router_from_json(const json& j) {
  RouterParams params;
  params.domain_names = j.at("domains").get<std::vector<std::string>>();
  params.weights = matrix_from_json(j.at("weights"));
  params.bias = j.at("bias").get<std::vector<double>>();
  if (params.weights.cols() != params.domain_names.size() ||
      params.bias.size() != params.domain_names.size())
    fail(Errc::io_error, "router shape disagrees with the domain list");
  return params;
}

json index_to_json(const ContextIndex& index, const Provenance& p) {
  json records = json::array();
  for (const auto& record : index.records()) {
    records.push_back(json{{"id", record.id},
                           {"text", record.text},
                           {"text_features", record.text_features.values},
                           {"embedding", record.embedding.values}});
  }
  return json{{"provenance", provenance_to_json(p)},
              {"version", kFormatVersion},
              {"domain", index.domain()},
              {"dim_emb", index.dim_emb()},
              {"records", std::move(records)}};
}

ContextIndex index_from_json(const json& j) {
  std::vector<ContextRecord> records;
  for (const auto& row : j.at("records")) {
    ContextRecord record;
    record.id = row.at("id").get<std::string>();
    record.text = row.at("text").get<std::string>();
    if (row.contains("text_features"))
      record.text_features = FeatureVector(row.at("text_features").get<std::vector<double>>());
    record.embedding.values = row.at("embedding").get<std::vector<double>>();
    records.push_back(std::move(record));
  }
  return ContextIndex::from_records(j.at("domain").get<std::string>(),
                                    j.at("dim_emb").get<std::size_t>(), std::move(records));
}

json categorical_policy_to_json(const CategoricalPolicy& policy, const FeaturizerSpec& spec,
                                const Provenance& p) {
  return json{{"provenance", provenance_to_json(p)},
              {"version", kFormatVersion},
              {"type", "categorical"},
              {"vocab", policy.vocab()},
              {"visual_dim", spec.visual_dim},
              {"text_dim", spec.text_dim},
              {"context_dim", spec.context_dim},
              {"weights", matrix_to_json(policy.weights())},
              {"bias", policy.bias()}};
}

std::pair<CategoricalPolicy, FeaturizerSpec> categorical_policy_from_json(const json& j) {
  if (j.at("type").get<std::string>() != "categorical")
    fail(Errc::io_error, "expected a categorical policy file");
  FeaturizerSpec spec;
  spec.visual_dim = j.at("visual_dim").get<std::size_t>();
  spec.text_dim = j.at("text_dim").get<std::size_t>();
  spec.context_dim = j.at("context_dim").get<std::size_t>();
  CategoricalPolicy policy(j.at("vocab").get<std::vector<std::string>>(), spec.total_dim());
  policy.weights() = matrix_from_json(j.at("weights"));
  policy.bias() = j.at("bias").get<std::vector<double>>();
  if (policy.weights().rows() != spec.total_dim() ||
      policy.weights().cols() != policy.vocab().size() ||
      policy.bias().size() != policy.vocab().size())
    fail(Errc::io_error, "policy shape disagrees with its vocabulary/layout");
  return {std::move(policy), spec};
}

json linear_gaussian_to_json(const LinearGaussianPolicy& policy, const Provenance& p) {
  return json{{"provenance", provenance_to_json(p)},
              {"version", kFormatVersion},
              {"type", "linear_gaussian"},
              {"theta", policy.theta()}};
}

LinearGaussianPolicy linear_gaussian_from_json(const json& j) {
  if (j.at("type").get<std::string>() != "linear_gaussian")
    fail(Errc::io_error, "expected a linear-Gaussian policy file");
  return LinearGaussianPolicy(j.at("theta").get<std::vector<double>>());
}

json scripted_model_to_json(const ScriptedAnswerModel& model, const Provenance& p) {
  json entries = json::array();
  for (const auto& [question, entry] : model.table()) {
    entries.push_back(json{{"question", question},
                           {"image_features", entry.first},
                           {"with_rag", entry.second.with_rag},
                           {"no_rag", entry.second.no_rag},
                           {"noisy_with_rag", entry.second.noisy_with_rag},
                           {"noisy_no_rag", entry.second.noisy_no_rag}});
  }
  return json{{"provenance", provenance_to_json(p)},
              {"version", kFormatVersion},
              {"type", "scripted"},
              {"entries", std::move(entries)}};
}

ScriptedAnswerModel scripted_model_from_json(const json& j) {
  if (j.at("type").get<std::string>() != "scripted")
    fail(Errc::io_error, "expected a scripted answer-model file");
  ScriptedAnswerModel model;
  for (const auto& entry : j.at("entries")) {
    ScriptedAnswerModel::Answers answers;
    answers.with_rag = entry.at("with_rag").get<std::string>();
    answers.no_rag = entry.at("no_rag").get<std::string>();
    answers.noisy_with_rag = entry.at("noisy_with_rag").get<std::string>();
    answers.noisy_no_rag = entry.at("noisy_no_rag").get<std::string>();
    model.add(entry.at("question").get<std::string>(),
              FeatureVector(entry.at("image_features").get<std::vector<double>>()),
              std::move(answers));
  }
  return model;
}

json qa_sample_to_json(const QASample& sample) {
  json j{{"id", sample.id},
         {"image_features", sample.image.values},
         {"question", sample.question},
         {"answer", sample.answer}};
  if (sample.domain) j["domain"] = *sample.domain;
  return j;
}

QASample qa_sample_from_json(const json& j) {
  QASample sample;
  sample.id = j.at("id").get<std::string>();
  sample.image = FeatureVector(j.at("image_features").get<std::vector<double>>());
  sample.question = j.at("question").get<std::string>();
  sample.answer = j.at("answer").get<std::string>();
  if (j.contains("domain")) sample.domain = j.at("domain").get<std::string>();
  return sample;
}

json preference_sample_to_json(const PreferenceSample& sample) {
  json j{{"id", sample.id},
         {"category", pair_category_name(sample.category)},
         {"image_features", sample.image.values},
         {"question", sample.question},
         {"contexts", sample.contexts},
         {"y_w", sample.preferred},
         {"y_l", sample.dispreferred},
         {"noise",
          json{{"s", sample.noise.steps},
               {"l_values", sample.noise.l_values},
               {"xi_bar", sample.noise.signal_fraction}}}};
  if (sample.noisy_image) j["x_star_features"] = sample.noisy_image->values;
  return j;
}

PreferenceSample preference_sample_from_json(const json& j) {
  PreferenceSample sample;
  sample.id = j.at("id").get<std::string>();
  sample.category = pair_category_from_name(j.at("category").get<std::string>());
  sample.image = FeatureVector(j.at("image_features").get<std::vector<double>>());
  sample.question = j.at("question").get<std::string>();
  sample.contexts = j.at("contexts").get<std::vector<std::string>>();
  sample.preferred = j.at("y_w").get<std::string>();
  sample.dispreferred = j.at("y_l").get<std::string>();
  if (j.contains("x_star_features"))
    sample.noisy_image = FeatureVector(j.at("x_star_features").get<std::vector<double>>());
  const json& noise = j.at("noise");
  sample.noise.steps = noise.at("s").get<std::size_t>();
  sample.noise.l_values = noise.at("l_values").get<std::vector<double>>();
  sample.noise.signal_fraction = noise.at("xi_bar").get<double>();
  return sample;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) fail(Errc::io_error, "short write to '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::io_error, "bad JSON in '" + path + "': " + e.what());
  }
  return j;
}

void write_jsonl(const std::string& path, const Provenance& p, const std::vector<json>& rows) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot open '" + path + "' for writing");
  out << json{{"provenance", provenance_to_json(p)}}.dump() << "\n";
  for (const auto& row : rows) out << row.dump() << "\n";
  if (!out) fail(Errc::io_error, "short write to '" + path + "'");
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open '" + path + "'");
  std::vector<json> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::io_error, "bad JSONL line in '" + path + "': " + e.what());
    }
    if (j.contains("provenance") && j.size() == 1) continue;  // header line
    rows.push_back(std::move(j));
  }
  return rows;
}

std::vector<QASample> read_qa_jsonl(const std::string& path) {
  std::vector<QASample> samples;
  for (const auto& row : read_jsonl(path)) samples.push_back(qa_sample_from_json(row));
  return samples;
}

void write_qa_jsonl(const std::string& path, const Provenance& p,
                    const std::vector<QASample>& samples) {
  std::vector<json> rows;
  rows.reserve(samples.size());
  for (const auto& sample : samples) rows.push_back(qa_sample_to_json(sample));
  write_jsonl(path, p, rows);
}

std::vector<PreferenceSample> read_preference_jsonl(const std::string& path) {
  std::vector<PreferenceSample> samples;
  for (const auto& row : read_jsonl(path)) samples.push_back(preference_sample_from_json(row));
  return samples;
}

void write_preference_jsonl(const std::string& path, const Provenance& p,
                            const std::vector<PreferenceSample>& samples) {
  std::vector<json> rows;
  rows.reserve(samples.size());
  for (const auto& sample : samples) rows.push_back(preference_sample_to_json(sample));
  write_jsonl(path, p, rows);
}

}  // namespace ragalign
