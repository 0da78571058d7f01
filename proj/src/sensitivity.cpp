#include "ragalign/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "ragalign/error.hpp"

namespace ragalign {

WeightEstimate weight_estimate_block(const Policy& policy, const PolicyInput& x,
                                     std::size_t offset, std::size_t length,
                                     std::size_t n_samples, SeededRng& rng) {
  if (n_samples < 1000) fail(Errc::config_error, "weight estimation needs >= 1000 samples");
  if (offset + length > x.features.size())
    fail(Errc::dim_mismatch, "component block exceeds the input dimension");

  std::vector<double> draws;
  draws.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const AnswerValue y = policy.sample(x, rng);
    const std::vector<double> grad = policy.input_grad_log_prob(y, x);
    double squared = 0.0;
    for (std::size_t c = offset; c < offset + length; ++c) squared += grad[c] * grad[c];
    draws.push_back(squared);
  }

  WeightEstimate estimate;
  estimate.n_samples = n_samples;
  estimate.value = pairwise_sum(draws) / static_cast<double>(n_samples);
  std::vector<double> centered(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double d = draws[i] - estimate.value;
    centered[i] = d * d;
  }
  const double variance = pairwise_sum(centered) / static_cast<double>(n_samples - 1);
  estimate.std_error = std::sqrt(variance / static_cast<double>(n_samples));
  return estimate;
}

WeightEstimate weight_estimate(const Policy& policy, const PolicyInput& x, std::size_t component,
                               std::size_t n_samples, SeededRng& rng) {
  return weight_estimate_block(policy, x, component, 1, n_samples, rng);
}

double linear_weight_exact(double theta1) { return theta1 * theta1; }

double linear_dpo_closed_form(double theta_ref, double beta, double beta_tilde, double alpha) {
  if (alpha <= 0.0) fail(Errc::config_error, "alpha must be positive");
  return theta_ref + (beta - beta_tilde) / alpha;
}

std::vector<double> compute_h(const std::vector<double>& pi_ref,
                              const std::vector<double>& q_preferred,
                              const std::vector<double>& q_dispreferred, double alpha) {
  if (alpha <= 0.0) fail(Errc::config_error, "alpha must be positive");
  const std::size_t n = pi_ref.size();
  if (q_preferred.size() != n || q_dispreferred.size() != n)
    fail(Errc::length_mismatch, "distributions must share one support");
  if (n == 0) fail(Errc::empty_input, "empty answer space");

  std::vector<double> ratio_pow(n);
  for (std::size_t y = 0; y < n; ++y) {
    if (!(q_dispreferred[y] > 0.0))
      fail(Errc::zero_denominator, "dispreferred density must be positive everywhere");
    ratio_pow[y] = std::pow(q_preferred[y] / q_dispreferred[y], 1.0 / alpha);
  }
  double denom = 0.0;
  for (std::size_t y = 0; y < n; ++y) denom += pi_ref[y] * ratio_pow[y];
  if (!(denom > 0.0)) fail(Errc::zero_denominator, "normalizer vanished");
  for (auto& value : ratio_pow) value /= denom;
  return ratio_pow;
}

namespace {

struct ConstantTerms {
  double norm2 = 0.0;   // sum_y pi (dh)^2
  double curve = 0.0;   // sum_y (dh)^2 pi / h
  double density = 0.0; // sum_y (dpi)^2 h / pi
};

double assemble_constant(ConstantKind kind, const ConstantTerms& t) {
  const double norm = std::sqrt(t.norm2);
  if (kind == ConstantKind::c2) return std::sqrt(t.norm2 + t.curve + t.density) + norm;
  return std::sqrt(t.norm2 + t.curve) - norm;
}

double finite_constant_at(ConstantKind kind,
                          const std::function<std::vector<double>(double)>& pi_of,
                          const std::function<std::vector<double>(double)>& h_of, double at,
                          double spacing) {
  const std::vector<double> pi = pi_of(at);
  const std::vector<double> h = h_of(at);
  const std::vector<double> h_hi = h_of(at + spacing);
  const std::vector<double> h_lo = h_of(at - spacing);
  const std::vector<double> pi_hi = pi_of(at + spacing);
  const std::vector<double> pi_lo = pi_of(at - spacing);
  const std::size_t n = pi.size();
  if (h.size() != n || h_hi.size() != n || h_lo.size() != n)
    fail(Errc::length_mismatch, "pi and h must share one support");

  ConstantTerms terms;
  for (std::size_t y = 0; y < n; ++y) {
    const double dh = (h_hi[y] - h_lo[y]) / (2.0 * spacing);
    const double dpi = (pi_hi[y] - pi_lo[y]) / (2.0 * spacing);
    terms.norm2 += pi[y] * dh * dh;
    if (!(h[y] > 0.0)) fail(Errc::zero_denominator, "h must be positive");
    terms.curve += dh * dh * pi[y] / h[y];
    if (kind == ConstantKind::c2) {
      if (!(pi[y] > 0.0)) fail(Errc::zero_denominator, "pi must be positive");
      terms.density += dpi * dpi * h[y] / pi[y];
    }
  }
  return assemble_constant(kind, terms);
}

void check_grid_convergence(double coarse, double fine) {
  const double scale = std::max({std::abs(coarse), std::abs(fine), 1e-12});
  if (std::abs(coarse - fine) > 0.01 * scale)
    fail(Errc::grid_too_coarse, "finite-difference estimate moved by more than 1% when halving the spacing");
}

}  // namespace

double assumption_constant(ConstantKind kind,
                           const std::function<std::vector<double>(double)>& pi_of,
                           const std::function<std::vector<double>(double)>& h_of, double at,
                           double spacing) {
  if (!(spacing > 0.0)) fail(Errc::config_error, "spacing must be positive");
  const double coarse = finite_constant_at(kind, pi_of, h_of, at, spacing);
  const double fine = finite_constant_at(kind, pi_of, h_of, at, spacing / 2.0);
  check_grid_convergence(coarse, fine);
  return fine;
}

Quadrature gauss_hermite(std::size_t n) {
  if (n < 1) fail(Errc::config_error, "quadrature order must be >= 1");
  // Newton iteration on the Hermite recurrence with standard asymptotic
  // initial guesses; roots found from the largest down to the middle.
  Quadrature q;
  q.nodes.assign(n, 0.0);
  q.weights.assign(n, 0.0);
  const double pi_quarter = std::pow(3.14159265358979323846, -0.25);
  double z = 0.0;
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0) {
      z = std::sqrt(static_cast<double>(2 * n + 1)) -
          1.85575 * std::pow(static_cast<double>(2 * n + 1), -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * q.nodes[n - 1];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * q.nodes[n - 2];
    } else {
      z = 2.0 * z - q.nodes[n - i + 1];
    }
    double pp = 0.0;
    for (int iteration = 0; iteration < 100; ++iteration) {
      double p1 = pi_quarter;
      double p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 -
             std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    q.nodes[n - 1 - i] = z;
    q.nodes[i] = -z;
    q.weights[n - 1 - i] = 2.0 / (pp * pp);
    q.weights[i] = q.weights[n - 1 - i];
  }
  return q;
}

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

double gaussian_constant_at(ConstantKind kind, const std::function<double(double)>& mean_of,
                            const std::function<double(double, double)>& h_of, double at,
                            double spacing, const Quadrature& q) {
  const double mu = mean_of(at);
  const double mu_hi = mean_of(at + spacing);
  const double mu_lo = mean_of(at - spacing);

  ConstantTerms terms;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    // Substitution y = mu + sqrt(2) t against weight exp(-t^2): each
    // integrand below carries one factor of the density pi(y|at).
    const double y = mu + std::sqrt(2.0) * q.nodes[i];
    const double w = q.weights[i] / kSqrtPi;
    const double h = h_of(y, at);
    if (!(h > 0.0)) fail(Errc::zero_denominator, "h must be positive");
    const double dh = (h_of(y, at + spacing) - h_of(y, at - spacing)) / (2.0 * spacing);
    terms.norm2 += w * dh * dh;
    terms.curve += w * dh * dh / h;
    if (kind == ConstantKind::c2) {
      // dpi/dt = pi * (y - mu) * mu'(t), so (dpi)^2 h / pi = pi ((y-mu) mu')^2 h.
      const double dmu = (mu_hi - mu_lo) / (2.0 * spacing);
      const double sensitivity = (y - mu) * dmu;
      terms.density += w * sensitivity * sensitivity * h;
    }
  }
  return assemble_constant(kind, terms);
}

}  // namespace

double assumption_constant_gaussian(ConstantKind kind,
                                    const std::function<double(double)>& mean_of,
                                    const std::function<double(double, double)>& h_of, double at,
                                    double spacing) {
  if (!(spacing > 0.0)) fail(Errc::config_error, "spacing must be positive");
  const Quadrature q = gauss_hermite(64);
  const double coarse = gaussian_constant_at(kind, mean_of, h_of, at, spacing, q);
  const double fine = gaussian_constant_at(kind, mean_of, h_of, at, spacing / 2.0, q);
  check_grid_convergence(coarse, fine);
  return fine;
}

std::vector<WeightShift> verify_weight_shift(const Policy& reference, const Policy& trained,
                                             const PolicyInput& x,
                                             const std::vector<VariableSpec>& variables,
                                             std::size_t n_samples, SeededRng& rng) {
  std::vector<WeightShift> report;
  report.reserve(variables.size());
  for (const auto& variable : variables) {
    // Common random numbers: both policies see the same derived seed, so
    // equal policies report exactly equal weights.
    const std::uint64_t sub_seed = rng.next_u64();
    SeededRng rng_before(sub_seed);
    SeededRng rng_after(sub_seed);
    WeightShift shift;
    shift.variable = variable.name;
    shift.before = weight_estimate_block(reference, x, variable.offset, variable.length,
                                         n_samples, rng_before);
    shift.after =
        weight_estimate_block(trained, x, variable.offset, variable.length, n_samples, rng_after);
    shift.increased = shift.after.value > shift.before.value;
    report.push_back(std::move(shift));
  }
  return report;
}

}  // namespace ragalign
