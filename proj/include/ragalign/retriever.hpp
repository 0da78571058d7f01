#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ragalign/vec.hpp"

namespace ragalign {

enum class Modality { image, text };

// One linear encoder pair (image side, text side) for a single domain.
// Encoding is the linear map followed by L2 normalization.
struct EncoderParams {
  std::string domain;
  Matrix image_weights;  // dim_in x dim_emb
  Matrix text_weights;   // dim_in x dim_emb

  std::size_t dim_in() const { return image_weights.rows(); }
  std::size_t dim_emb() const { return image_weights.cols(); }
};

struct RetrieverConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  std::size_t batch_size = 32;
  std::size_t epochs = 360;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  // The two hyperparameter sets reported for retriever training; they
  // disagree, so both ship as named presets and callers pick one.
  static RetrieverConfig main_preset();      // lr 1e-3, wd 1e-2, batch 32
  static RetrieverConfig appendix_preset();  // lr 1e-4, batch 512

  void validate() const;
};

Embedding encode(const EncoderParams& params, Modality modality, const FeatureVector& x);

// Symmetric InfoNCE over a square similarity matrix: mean of the
// image->text and text->image cross-entropies, logits scaled by 1/temperature.
double contrastive_loss(const SimilarityMatrix& s, double temperature);

struct ContrastiveGrad {
  Matrix image_weights;
  Matrix text_weights;
};

// Analytic gradient of contrastive_loss(similarity_matrix(encode(...)), t)
// with respect to both weight matrices.
ContrastiveGrad contrastive_grad(const std::vector<FeatureVector>& images,
                                 const std::vector<FeatureVector>& texts,
                                 const EncoderParams& params, double temperature);

// Forward pass matching contrastive_grad, for gradient checks and training.
double contrastive_batch_loss(const std::vector<FeatureVector>& images,
                              const std::vector<FeatureVector>& texts,
                              const EncoderParams& params, double temperature);

struct RetrieverTrainResult {
  EncoderParams params;
  std::vector<double> epoch_losses;
};

using PairList = std::vector<std::pair<FeatureVector, FeatureVector>>;

// AdamW over seeded mini-batches; bitwise deterministic for a fixed config.
RetrieverTrainResult train_retriever(const PairList& pairs, const RetrieverConfig& config,
                                     std::size_t dim_emb, const std::string& domain = "default");

// Fraction of images whose paired text lands in the cosine top-k.
double recall_at_k(const EncoderParams& params, const PairList& eval_pairs, std::size_t k);

}  // namespace ragalign
