#pragma once

// Polarization-correlation fringes and the CHSH parameter.
//
// Alice analyzes the + photon, Bob the - photon. Analyzer angles are
// polarization angles in degrees; Bob's fringe is scanned in half-wave-plate
// angle, which turns the polarization by twice as much.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "polent/detection.hpp"
#include "polent/parallel.hpp"
#include "polent/polarization.hpp"
#include "polent/scan.hpp"

namespace polent {

/// CHSH settings (a, a', b, b') in degrees. For |Psi+> in the H/V lab frame
/// the correlation is E(a, b) = -cos 2(a + b), so the optimal set mirrors
/// Bob's textbook angles: (0, 45, -22.5, -67.5).
struct ChshAngles {
  double a = 0.0;
  double a_prime = 45.0;
  double b = -22.5;
  double b_prime = -67.5;
};

struct BellSettings {
  std::array<double, 4> alice_angles{0.0, 90.0, 45.0, -45.0};  ///< H, V, D, A
  std::vector<double> bob_hwp_grid;
  ChshAngles chsh;

  void validate() const {
    if (bob_hwp_grid.empty()) throw std::invalid_argument("BellSettings: empty Bob grid");
    for (double x : alice_angles)
      if (!std::isfinite(x)) throw std::invalid_argument("BellSettings: angles must be finite");
    for (double x : bob_hwp_grid)
      if (!std::isfinite(x)) throw std::invalid_argument("BellSettings: angles must be finite");
  }

  static std::vector<double> hwp_grid(double min_deg, double max_deg, double step_deg) {
    if (!(step_deg > 0.0) || !(max_deg > min_deg)) throw std::invalid_argument("BellSettings: empty Bob grid");
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((max_deg - min_deg) / step_deg + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) g.push_back(min_deg + static_cast<double>(i) * step_deg);
    return g;
  }
};

/// Probability that both photons pass their linear analyzers.
inline double joint_probability(const BiphotonState& state, double a_deg, double b_deg) {
  return apply_elements(state, analyzer_projector(a_deg, b_deg)).norm_squared();
}

/// E(a, b) = P(pass, pass) + P(fail, fail) - P(pass, fail) - P(fail, pass);
/// "fail" is the orthogonal analyzer output.
inline double correlation(const BiphotonState& state, double a_deg, double b_deg) {
  const double pp = joint_probability(state, a_deg, b_deg);
  const double ff = joint_probability(state, a_deg + 90.0, b_deg + 90.0);
  const double pf = joint_probability(state, a_deg, b_deg + 90.0);
  const double fp = joint_probability(state, a_deg + 90.0, b_deg);
  const double total = pp + ff + pf + fp;
  if (!(total > 0.0)) throw std::invalid_argument("correlation: zero-norm state");
  return (pp + ff - pf - fp) / total;
}

struct CorrelationEstimate {
  double value = 0.0;
  double sigma = 0.0;
};

struct ChshResult {
  double S = 0.0;
  double sigma_S = 0.0;
};

/// (S - 2) / sigma
inline double violation_significance(double S, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("violation_significance: sigma must be positive");
  return (S - 2.0) / sigma;
}

/// S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')| from four estimates given in
/// that order; sigma_S is their root-sum-square.
inline ChshResult chsh_S(std::span<const CorrelationEstimate, 4> e) {
  ChshResult r;
  r.S = std::abs(e[0].value - e[1].value + e[2].value + e[3].value);
  r.sigma_S = std::sqrt(e[0].sigma * e[0].sigma + e[1].sigma * e[1].sigma + e[2].sigma * e[2].sigma +
                        e[3].sigma * e[3].sigma);
  return r;
}

inline ChshResult chsh_S(const BiphotonState& state, const ChshAngles& angles = {}) {
  const std::array<CorrelationEstimate, 4> e{{
      {correlation(state, angles.a, angles.b), 0.0},
      {correlation(state, angles.a, angles.b_prime), 0.0},
      {correlation(state, angles.a_prime, angles.b), 0.0},
      {correlation(state, angles.a_prime, angles.b_prime), 0.0},
  }};
  return chsh_S(std::span<const CorrelationEstimate, 4>(e));
}

struct FringeOptions {
  double state_visibility = 1.0;  ///< white-noise admixture: p -> v p + (1 - v) / 4
  bool poisson_noise = true;
  unsigned threads = 1;
  std::uint64_t stream_offset = 0;  ///< separates the streams of different fringes
};

/// Coincidence rate versus Bob's HWP angle for a fixed Alice analyzer,
/// fitted with offset + amplitude cos(4 theta + phase). Without a counting
/// config the points are joint probabilities.
inline ScanResult fringe_scan(const BiphotonState& state, double alice_deg, std::span<const double> bob_hwp_deg,
                              const std::optional<CountingConfig>& counting, const FringeOptions& opts = {}) {
  if (counting) counting->validate();
  if (bob_hwp_deg.empty()) throw std::invalid_argument("fringe_scan: empty Bob grid");
  if (!(opts.state_visibility >= 0.0 && opts.state_visibility <= 1.0))
    throw std::invalid_argument("fringe_scan: state visibility must be in [0, 1]");
  ScanResult result;
  result.control_label = "control_deg";
  result.points.resize(bob_hwp_deg.size());
  parallel_for(bob_hwp_deg.size(), opts.threads, [&](std::size_t i) {
    const double theta = bob_hwp_deg[i];
    const double p = std::clamp(opts.state_visibility * joint_probability(state, alice_deg, 2.0 * theta) +
                                    (1.0 - opts.state_visibility) * 0.25,
                                0.0, 1.0);
    if (!counting) {
      result.points[i] = {theta, p, 0.0};
      return;
    }
    const ExpectedRates rates = expected_rates(*counting, p);
    if (!opts.poisson_noise) {
      result.points[i] = {theta, rates.total_coinc(), 0.0};
      return;
    }
    auto engine = stream_engine(counting->rng_seed, opts.stream_offset + i);
    result.points[i] = count_point(theta, poisson_draw(engine, rates.total_coinc() * counting->integration_time_s),
                                   counting->integration_time_s);
  });
  if (counting) {
    result.accidental_rate = expected_rates(*counting, 0.0).accidental_coinc;
    result.integration_time = counting->integration_time_s;
    if (opts.poisson_noise) result.seed = counting->rng_seed;
  }
  result.fit = fit_fringe(result.points);
  if (!result.fit.converged) throw std::runtime_error("fringe_scan: " + result.fit.diagnostic);
  return result;
}

/// E(a, b) from the fitted fringes of an analyzer and its orthogonal
/// partner, each evaluated at Bob's HWP angles b/2 and (b + 90)/2.
/// The uncertainty propagates both fit covariances.
inline CorrelationEstimate correlation_from_fringes(const FitResult& fringe, const FitResult& orthogonal,
                                                    double b_deg) {
  auto design = [](double theta_deg) {
    const double t = 4.0 * deg_to_rad(theta_deg);
    return Eigen::Vector3d(1.0, std::cos(t), std::sin(t));
  };
  const Eigen::Vector3d u1 = design(0.5 * b_deg);
  const Eigen::Vector3d u2 = design(0.5 * (b_deg + 90.0));
  const Eigen::Vector3d& p = fringe.coeffs;
  const Eigen::Vector3d& q = orthogonal.coeffs;
  const double num = (u1 - u2).dot(p - q);
  const double den = (u1 + u2).dot(p + q);
  if (!(den > 0.0)) throw std::invalid_argument("correlation_from_fringes: no coincidences");
  const Eigen::Vector3d gp = ((u1 - u2) * den - (u1 + u2) * num) / (den * den);
  const Eigen::Vector3d gq = (-(u1 - u2) * den - (u1 + u2) * num) / (den * den);
  const double var = gp.dot(fringe.covariance * gp) + gq.dot(orthogonal.covariance * gq);
  return {num / den, std::sqrt(std::max(0.0, var))};
}

struct ChshFromFringes {
  ChshResult result;
  std::array<CorrelationEstimate, 4> correlations{};
};

/// CHSH from the four analyzer fringes in BellSettings order (H, V, D, A).
/// Requires a = H (0 deg) and a' = D (45 deg), the orthogonal partners being
/// V and A.
inline ChshFromFringes chsh_from_fringes(std::span<const FitResult, 4> fits, const ChshAngles& angles) {
  auto near = [](double x, double y) { return std::abs(std::remainder(x - y, 180.0)) < 1e-9; };
  if (!near(angles.a, 0.0) || !near(angles.a_prime, 45.0))
    throw std::invalid_argument("chsh_from_fringes: a and a' must be the H and D analyzer settings");
  for (const auto& f : fits)
    if (!f.converged || f.model != FitModel::fringe) throw std::invalid_argument("chsh_from_fringes: missing fringe fit");
  ChshFromFringes out;
  out.correlations = {
      correlation_from_fringes(fits[0], fits[1], angles.b),
      correlation_from_fringes(fits[0], fits[1], angles.b_prime),
      correlation_from_fringes(fits[2], fits[3], angles.b),
      correlation_from_fringes(fits[2], fits[3], angles.b_prime),
  };
  out.result = chsh_S(std::span<const CorrelationEstimate, 4>(out.correlations));
  return out;
}

}  // namespace polent
