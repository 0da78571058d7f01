#pragma once

#include <stdexcept>
#include <string>

namespace ragalign {

// Every failure mode the library reports. Call sites throw through fail()
// so tests can match on the code instead of parsing messages.
enum class Errc {
  zero_vector,
  dim_mismatch,
  empty_batch,
  non_finite,
  insufficient_data,
  empty_eval,
  missing_domain,
  duplicate_id,
  domain_mismatch,
  empty_index,
  non_positive_score,
  unsorted_scores,
  empty_pool,
  invalid_xi_bar,
  model_failure,
  empty_dataset,
  missing_noisy_input,
  empty_subset,
  gradient_unavailable,
  zero_denominator,
  grid_too_coarse,
  single_class,
  length_mismatch,
  empty_input,
  io_error,
  config_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace ragalign
