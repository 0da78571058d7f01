#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragalign/retriever.hpp"
#include "ragalign/router.hpp"
#include "ragalign/vec.hpp"

namespace ragalign {

struct RawRecord {
  std::string id;
  std::string text;
  FeatureVector text_features;
};

struct ContextRecord {
  std::string id;
  std::string text;
  FeatureVector text_features;
  Embedding embedding;  // cached encode(params, text, text_features)
};

// One retrieved report. Scores live in (0, 1]: the raw cosine is mapped
// through (s+1)/2 and floored at 1e-9 so the downstream log-ratio
// truncation is always defined.
struct ScoredContext {
  std::string id;
  std::string text;
  double score = 0.0;
};

struct TruncationDecision {
  std::size_t original_k = 0;
  std::size_t kept_k = 0;
  std::vector<double> ratios;  // log(S_i / S_{i+1}) for every consecutive pair
  double gamma = 0.0;
  std::optional<std::size_t> cut_index;  // 1-based ratio index that fired, if any
};

// Cut the sorted score list at the first consecutive log-ratio exceeding
// gamma; the top context always survives.
TruncationDecision adaptive_truncate(const std::vector<double>& scores, double gamma);

// Per-domain store of encoded reports with exhaustive-scan retrieval.
// Immutable after build; concurrent readers are safe.
class ContextIndex {
 public:
  ContextIndex() = default;

  static ContextIndex build(const std::string& domain, const std::vector<RawRecord>& records,
                            const EncoderParams& params);

  // Used when loading a serialized index: embeddings come in precomputed.
  static ContextIndex from_records(const std::string& domain, std::size_t dim_emb,
                                   std::vector<ContextRecord> records);

  const std::string& domain() const { return domain_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t dim_emb() const { return dim_emb_; }
  const std::vector<ContextRecord>& records() const { return records_; }

  // k best records by mapped cosine, score-descending, ties by id ascending.
  std::vector<ScoredContext> top_k(const Embedding& query, std::size_t k) const;

 private:
  std::string domain_;
  std::size_t dim_emb_ = 0;
  std::vector<ContextRecord> records_;
};

struct RetrievalResult {
  std::string domain;
  std::vector<ScoredContext> contexts;  // already truncated
  TruncationDecision truncation;
};

// Domain -> (encoder, index) registry; the retrieve() composition of
// routing, encoding, top-k and truncation lives here.
class RetrievalRegistry {
 public:
  void add(EncoderParams encoder, ContextIndex index);

  bool has(const std::string& domain) const;
  const EncoderParams& encoder(const std::string& domain) const;
  const ContextIndex& index(const std::string& domain) const;
  std::vector<std::string> domains() const;

  RetrievalResult retrieve(const RouterParams& router, const FeatureVector& image, std::size_t k,
                           double gamma) const;

 private:
  struct Entry {
    EncoderParams encoder;
    ContextIndex index;
  };
  std::map<std::string, Entry> entries_;
};

}  // namespace ragalign
