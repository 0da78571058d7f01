#include "ragalign/index.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ragalign/error.hpp"

namespace ragalign {

TruncationDecision adaptive_truncate(const std::vector<double>& scores, double gamma) {
  if (scores.empty()) fail(Errc::empty_input, "truncation needs at least one score");
  if (gamma <= 0.0) fail(Errc::config_error, "gamma must be positive");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] > 0.0)) fail(Errc::non_positive_score, "scores must be strictly positive");
    if (i > 0 && scores[i] > scores[i - 1])
      fail(Errc::unsorted_scores, "scores must be nonincreasing");
  }

  TruncationDecision decision;
  decision.original_k = scores.size();
  decision.gamma = gamma;
  decision.kept_k = scores.size();
  decision.ratios.reserve(scores.size() > 0 ? scores.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    const double ratio = std::log(scores[i] / scores[i + 1]);
    decision.ratios.push_back(ratio);
    if (!decision.cut_index && ratio > gamma) {
      decision.cut_index = i + 1;  // 1-based position of the drop
      decision.kept_k = i + 1;
    }
  }
  return decision;
}

ContextIndex ContextIndex::build(const std::string& domain, const std::vector<RawRecord>& records,
                                 const EncoderParams& params) {
  if (!params.domain.empty() && params.domain != domain)
    fail(Errc::domain_mismatch,
         "encoder is for domain '" + params.domain + "', index wants '" + domain + "'");

  ContextIndex index;
  index.domain_ = domain;
  index.dim_emb_ = params.dim_emb();
  std::set<std::string> ids;
  index.records_.reserve(records.size());
  for (const auto& raw : records) {
    if (!ids.insert(raw.id).second) fail(Errc::duplicate_id, "duplicate record id '" + raw.id + "'");
    ContextRecord record;
    record.id = raw.id;
    record.text = raw.text;
    record.text_features = raw.text_features;
    record.embedding = encode(params, Modality::text, raw.text_features);
    index.records_.push_back(std::move(record));
  }
  return index;
}

ContextIndex ContextIndex::from_records(const std::string& domain, std::size_t dim_emb,
                                        std::vector<ContextRecord> records) {
  ContextIndex index;
  index.domain_ = domain;
  index.dim_emb_ = dim_emb;
  std::set<std::string> ids;
  for (const auto& record : records) {
    if (!ids.insert(record.id).second)
      fail(Errc::duplicate_id, "duplicate record id '" + record.id + "'");
    if (record.embedding.dim() != dim_emb)
      fail(Errc::dim_mismatch, "stored embedding dim mismatch for '" + record.id + "'");
  }
  index.records_ = std::move(records);
  return index;
}

std::vector<ScoredContext> ContextIndex::top_k(const Embedding& query, std::size_t k) const {
  if (records_.empty()) fail(Errc::empty_index, "retrieval from an empty index");
  if (k < 1) fail(Errc::config_error, "k must be >= 1");

  std::vector<ScoredContext> scored;
  scored.reserve(records_.size());
  for (const auto& record : records_) {
    const double cosine = cosine_similarity(query, record.embedding);
    scored.push_back({record.id, record.text, std::max((cosine + 1.0) / 2.0, 1e-9)});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredContext& a, const ScoredContext& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

void RetrievalRegistry::add(EncoderParams encoder, ContextIndex index) {
  if (encoder.domain != index.domain())
    fail(Errc::domain_mismatch, "encoder/index domain disagree for '" + index.domain() + "'");
  const std::string domain = index.domain();
  entries_[domain] = Entry{std::move(encoder), std::move(index)};
}

bool RetrievalRegistry::has(const std::string& domain) const { return entries_.count(domain) > 0; }

const EncoderParams& RetrievalRegistry::encoder(const std::string& domain) const {
  auto it = entries_.find(domain);
  if (it == entries_.end()) fail(Errc::missing_domain, "no encoder for domain '" + domain + "'");
  return it->second.encoder;
}

const ContextIndex& RetrievalRegistry::index(const std::string& domain) const {
  auto it = entries_.find(domain);
  if (it == entries_.end()) fail(Errc::missing_domain, "no index for domain '" + domain + "'");
  return it->second.index;
}

std::vector<std::string> RetrievalRegistry::domains() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) names.push_back(name);
  return names;
}

RetrievalResult RetrievalRegistry::retrieve(const RouterParams& router, const FeatureVector& image,
                                            std::size_t k, double gamma) const {
  const DomainPrediction routed = identify_domain(router, image);
  const Entry& entry = [&]() -> const Entry& {
    auto it = entries_.find(routed.domain);
    if (it == entries_.end())
      fail(Errc::missing_domain, "routed to domain '" + routed.domain + "' with no index");
    return it->second;
  }();

  const Embedding query = encode(entry.encoder, Modality::image, image);
  std::vector<ScoredContext> contexts = entry.index.top_k(query, k);

  std::vector<double> scores;
  scores.reserve(contexts.size());
  for (const auto& c : contexts) scores.push_back(c.score);

  RetrievalResult result;
  result.domain = routed.domain;
  result.truncation = adaptive_truncate(scores, gamma);
  contexts.resize(result.truncation.kept_k);
  result.contexts = std::move(contexts);
  return result;
}

}  // namespace ragalign
