#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragalign/index.hpp"
#include "ragalign/metrics.hpp"
#include "ragalign/policy.hpp"
#include "ragalign/preference.hpp"
#include "ragalign/retriever.hpp"
#include "ragalign/router.hpp"

namespace ragalign {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kFormatVersion = 1;

// Stamp embedded in every artifact so a byte-identical rerun is checkable.
struct Provenance {
  std::string tool_version = kToolVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

nlohmann::json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j);

// FNV-1a over the canonical dump of a JSON document.
std::uint64_t hash_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json encoder_to_json(const EncoderParams& params, const Provenance& p);
EncoderParams encoder_from_json(const nlohmann::json& j);

nlohmann::json router_to_json(const RouterParams& params, const Provenance& p);
RouterParams router_from_json(const nlohmann::json& j);

nlohmann::json index_to_json(const ContextIndex& index, const Provenance& p);
ContextIndex index_from_json(const nlohmann::json& j);

nlohmann::json categorical_policy_to_json(const CategoricalPolicy& policy,
                                          const FeaturizerSpec& spec, const Provenance& p);
std::pair<CategoricalPolicy, FeaturizerSpec> categorical_policy_from_json(const nlohmann::json& j);

nlohmann::json linear_gaussian_to_json(const LinearGaussianPolicy& policy, const Provenance& p);
LinearGaussianPolicy linear_gaussian_from_json(const nlohmann::json& j);

nlohmann::json scripted_model_to_json(const ScriptedAnswerModel& model, const Provenance& p);
ScriptedAnswerModel scripted_model_from_json(const nlohmann::json& j);

nlohmann::json qa_sample_to_json(const QASample& sample);
QASample qa_sample_from_json(const nlohmann::json& j);

nlohmann::json preference_sample_to_json(const PreferenceSample& sample);
PreferenceSample preference_sample_from_json(const nlohmann::json& j);

// JSONL with a leading provenance-only line; readers skip it.
void write_jsonl(const std::string& path, const Provenance& p,
                 const std::vector<nlohmann::json>& rows);
std::vector<nlohmann::json> read_jsonl(const std::string& path);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

std::vector<QASample> read_qa_jsonl(const std::string& path);
void write_qa_jsonl(const std::string& path, const Provenance& p,
                    const std::vector<QASample>& samples);

std::vector<PreferenceSample> read_preference_jsonl(const std::string& path);
void write_preference_jsonl(const std::string& path, const Provenance& p,
                            const std::vector<PreferenceSample>& samples);

}  // namespace ragalign
