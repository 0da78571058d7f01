#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ragalign/policy.hpp"
#include "ragalign/rng.hpp"

namespace ragalign {

// wt(x_c, pi) = E_{y~pi(.|x)} [ (d/dx_c log pi(y|x))^2 ], the expected
// squared sensitivity of the log-density to one input component.
struct WeightEstimate {
  double value = 0.0;
  std::size_t n_samples = 0;
  double std_error = 0.0;
};

// Monte Carlo estimate of the weight of input component `component` at x.
WeightEstimate weight_estimate(const Policy& policy, const PolicyInput& x, std::size_t component,
                               std::size_t n_samples, SeededRng& rng);

// Same estimator summed over a contiguous block of components, sharing one
// set of response draws.
WeightEstimate weight_estimate_block(const Policy& policy, const PolicyInput& x,
                                     std::size_t offset, std::size_t length,
                                     std::size_t n_samples, SeededRng& rng);

// For the unit-noise linear family the weight of the first regressor is
// its squared coefficient.
double linear_weight_exact(double theta1);

// Population optimum of preference training in the linear-Gaussian family:
// theta = theta_ref + (beta - beta_tilde) / alpha.
double linear_dpo_closed_form(double theta_ref, double beta, double beta_tilde, double alpha);

// h(y) = (q_w(y)/q_l(y))^(1/alpha), normalized so sum_y pi_ref(y) h(y) = 1.
std::vector<double> compute_h(const std::vector<double>& pi_ref,
                              const std::vector<double>& q_preferred,
                              const std::vector<double>& q_dispreferred, double alpha);

enum class ConstantKind { c, c1, c2 };

// Threshold constants bounding the reference weight. With
//   norm2 = sum_y pi(y) (dh_y)^2   and   curve = sum_y (dh_y)^2 pi(y)/h_y,
// c and c1 are sqrt(norm2 + curve) - sqrt(norm2); c2 adds the density
// sensitivity term sum_y (dpi_y)^2 h_y/pi_y inside the radical and flips
// the outer sign. Derivatives in the scalar variable come from central
// differences; the estimate must be stable under halving the spacing
// (within 1%), otherwise GridTooCoarse.
double assumption_constant(ConstantKind kind,
                           const std::function<std::vector<double>(double)>& pi_of,
                           const std::function<std::vector<double>(double)>& h_of, double at,
                           double spacing);

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Hermite rule for weight exp(-t^2); exact for polynomials of degree
// 2n-1. Nodes ascend.
Quadrature gauss_hermite(std::size_t n);

// Continuous-response variant of assumption_constant for unit-variance
// Gaussian y around mean_of(t); integrals over y use a 64-node
// Gauss-Hermite rule centered at the evaluation point.
double assumption_constant_gaussian(ConstantKind kind,
                                    const std::function<double(double)>& mean_of,
                                    const std::function<double(double, double)>& h_of, double at,
                                    double spacing);

struct VariableSpec {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct WeightShift {
  std::string variable;
  WeightEstimate before;
  WeightEstimate after;
  bool increased = false;
};

// Weight of each named input block under the reference and the trained
// policy, with a per-variable direction flag. Both estimates reuse the
// same derived seed so identical policies report identical weights.
std::vector<WeightShift> verify_weight_shift(const Policy& reference, const Policy& trained,
                                             const PolicyInput& x,
                                             const std::vector<VariableSpec>& variables,
                                             std::size_t n_samples, SeededRng& rng);

}  // namespace ragalign
