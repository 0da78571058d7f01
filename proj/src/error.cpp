#include "ragalign/error.hpp"

namespace ragalign {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::zero_vector: return "ZeroVector";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::non_finite: return "NonFinite";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::empty_eval: return "EmptyEval";
    case Errc::missing_domain: return "MissingDomain";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::domain_mismatch: return "DomainMismatch";
    case Errc::empty_index: return "EmptyIndex";
    case Errc::non_positive_score: return "NonPositiveScore";
    case Errc::unsorted_scores: return "UnsortedScores";
    case Errc::empty_pool: return "EmptyPool";
    case Errc::invalid_xi_bar: return "InvalidXiBar";
    case Errc::model_failure: return "ModelFailure";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::missing_noisy_input: return "MissingNoisyInput";
    case Errc::empty_subset: return "EmptySubset";
    case Errc::gradient_unavailable: return "GradientUnavailable";
    case Errc::zero_denominator: return "ZeroDenominator";
    case Errc::grid_too_coarse: return "GridTooCoarse";
    case Errc::single_class: return "SingleClass";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_input: return "EmptyInput";
    case Errc::io_error: return "IoError";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace ragalign
