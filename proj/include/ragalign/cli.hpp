#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ragalign/dpo.hpp"
#include "ragalign/retriever.hpp"
#include "ragalign/router.hpp"

namespace ragalign {

// Deployment knobs plus stage hyperparameters, loadable from one JSON
// document. Command-line flags override file values; file values override
// the defaults here.
struct PipelineConfig {
  std::vector<std::string> domains{"radiology", "ophthalmology", "pathology"};
  std::size_t dim_in = 8;
  std::size_t dim_emb = 8;
  std::size_t k = 5;
  double gamma = 1.0;
  double alpha = 1.0;
  std::uint64_t seed = 0;

  std::size_t noise_steps = 10;
  double l_from = -6.0;  // default control ramp endpoints
  double l_to = 6.0;
  std::vector<double> l_values;  // explicit schedule, wins over the ramp

  std::string retriever_preset = "main";  // "main" or "appendix"
  RetrieverConfig retriever = RetrieverConfig::main_preset();
  RouterConfig router;
  DpoConfig dpo;

  std::size_t text_dim = 8;
  std::size_t context_dim = 8;

  std::string router_path;
  std::string params_dir;
  std::string index_dir;

  // Planted logistic family for the diagnose constants.
  double diag_slope_pi = 0.8;
  double diag_slope_qw = 1.2;
  double diag_slope_ql = 0.5;
  double diag_center = 0.3;
  double diag_spacing = 1e-3;
  std::size_t diag_samples = 20000;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);

  std::vector<double> schedule_controls() const;
};

namespace cli {

// Entry point behind the binary: args exclude the program name.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int run(const std::vector<std::string>& args);

}  // namespace cli

}  // namespace ragalign
