#pragma once

// Scan records and the two least-squares models used on them: a
// baseline-anchored Gaussian dip/peak for delay scans and an offset
// sinusoid in 4*theta for half-wave-plate fringes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polent/common.hpp"

namespace polent {

struct ScanPoint {
  double control = 0.0;
  double rate = 0.0;
  double uncertainty = 0.0;
};

enum class FitModel { gaussian_dip, fringe };

struct FitResult {
  FitModel model = FitModel::gaussian_dip;
  bool converged = false;
  bool flat = false;
  std::string diagnostic;

  // Gaussian dip: rate = baseline * (1 - visibility * exp(-(x - center)^2 / (2 s^2))).
  // Visibility is negative for a peak.
  double center = 0.0;
  double visibility = 0.0;
  double fwhm = 0.0;
  double baseline = 0.0;
  double center_err = 0.0;
  double visibility_err = 0.0;

  // Fringe: rate = offset + a cos(4 theta) + b sin(4 theta)
  //              = offset + amplitude cos(4 theta + phase).
  Eigen::Vector3d coeffs = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double phase_deg = 0.0;

  double fringe_value(double theta_deg) const {
    const double t = 4.0 * deg_to_rad(theta_deg);
    return coeffs(0) + coeffs(1) * std::cos(t) + coeffs(2) * std::sin(t);
  }
};

struct ScanResult {
  std::vector<ScanPoint> points;
  FitResult fit;
  std::optional<std::uint64_t> seed;
  double accidental_rate = 0.0;   ///< expected accidental coincidences per second
  double integration_time = 0.0;  ///< seconds per point; 0 for probability scans
  std::optional<double> baseline_anchor;  ///< distinguishable-photon level, if known
  std::string control_label = "control_ps";
};

namespace detail {

inline bool has_uncertainties(std::span<const ScanPoint> pts) {
  return std::any_of(pts.begin(), pts.end(), [](const ScanPoint& p) { return p.uncertainty > 0.0; });
}

inline std::vector<double> fit_weights(std::span<const ScanPoint> pts) {
  std::vector<double> w(pts.size(), 1.0);
  if (!has_uncertainties(pts)) return w;
  // Zero-count points get the smallest nonzero sigma in the scan.
  double floor_sigma = 0.0;
  for (const auto& p : pts) {
    if (p.uncertainty > 0.0)
      floor_sigma = floor_sigma == 0.0 ? p.uncertainty : std::min(floor_sigma, p.uncertainty);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double s = std::max(pts[i].uncertainty, floor_sigma);
    w[i] = 1.0 / (s * s);
  }
  return w;
}

}  // namespace detail

/// Least-squares fit of the Gaussian dip (or peak) by Levenberg-Marquardt,
/// started at the scan's extremum. With `anchor` the baseline is held at
/// that value; otherwise it is fitted, starting from the scan wings.
inline FitResult fit_gaussian_dip(std::span<const ScanPoint> pts, std::optional<double> anchor = std::nullopt) {
  FitResult r;
  r.model = FitModel::gaussian_dip;
  const std::size_t n = pts.size();
  if (n < 5) {
    r.diagnostic = "need at least 5 points";
    return r;
  }

  double base0 = 0.0;
  if (anchor) {
    base0 = *anchor;
  } else {
    // Median of the outer 20% of the scan.
    std::vector<double> edge;
    const std::size_t k = std::max<std::size_t>(1, n / 10);
    for (std::size_t i = 0; i < k; ++i) {
      edge.push_back(pts[i].rate);
      edge.push_back(pts[n - 1 - i].rate);
    }
    std::nth_element(edge.begin(), edge.begin() + edge.size() / 2, edge.end());
    base0 = edge[edge.size() / 2];
  }

  double lo = pts[0].rate, hi = pts[0].rate;
  std::size_t ext = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, pts[i].rate);
    hi = std::max(hi, pts[i].rate);
    if (std::abs(pts[i].rate - base0) > std::abs(pts[ext].rate - base0)) ext = i;
  }
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi)) || base0 == 0.0) {
    r.flat = true;
    r.converged = true;
    r.baseline = 0.5 * (hi + lo);
    r.center = pts[n / 2].control;
    r.diagnostic = "flat scan";
    return r;
  }

  // Width guess from the points beyond half depth.
  const double half = 0.5 * (base0 + pts[ext].rate);
  std::size_t a = ext, b = ext;
  const bool dip = pts[ext].rate < base0;
  auto beyond = [&](std::size_t i) { return dip ? pts[i].rate < half : pts[i].rate > half; };
  while (a > 0 && beyond(a - 1)) --a;
  while (b + 1 < n && beyond(b + 1)) ++b;
  const double step = std::abs(pts[1].control - pts[0].control);
  const double width0 = std::max(std::abs(pts[b].control - pts[a].control) + step, 2.0 * step);

  Eigen::Vector4d p(base0, (base0 - pts[ext].rate) / base0, pts[ext].control, width0 / 2.3548200450309493);
  const auto w = detail::fit_weights(pts);

  auto residuals = [&](const Eigen::Vector4d& q, Eigen::VectorXd& res, Eigen::MatrixXd* jac) {
    res.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = pts[i].control - q(2);
      const double g = std::exp(-dx * dx / (2.0 * q(3) * q(3)));
      const double model = q(0) * (1.0 - q(1) * g);
      const double sw = std::sqrt(w[i]);
      const auto ii = static_cast<Eigen::Index>(i);
      res(ii) = sw * (pts[i].rate - model);
      if (jac) {
        (*jac)(ii, 0) = anchor ? 0.0 : sw * (1.0 - q(1) * g);
        (*jac)(ii, 1) = sw * (-q(0) * g);
        (*jac)(ii, 2) = sw * (-q(0) * q(1) * g * dx / (q(3) * q(3)));
        (*jac)(ii, 3) = sw * (-q(0) * q(1) * g * dx * dx / (q(3) * q(3) * q(3)));
      }
    }
  };

  Eigen::VectorXd res;
  Eigen::MatrixXd jac;
  residuals(p, res, &jac);
  double chi2 = res.squaredNorm();
  double lambda = 1e-3;
  int iter = 0;
  for (; iter < 500; ++iter) {
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d jtr = jac.transpose() * res;
    Eigen::Matrix4d damped = jtj;
    for (int d = 0; d < 4; ++d) damped(d, d) += lambda * std::max(jtj(d, d), 1e-300);
    if (anchor) {
      damped.row(0).setZero();
      damped.col(0).setZero();
      damped(0, 0) = 1.0;
    }
    const Eigen::Vector4d delta = damped.ldlt().solve(jtr);
    Eigen::Vector4d trial = p + delta;
    trial(3) = std::abs(trial(3));
    Eigen::VectorXd trial_res;
    residuals(trial, trial_res, nullptr);
    const double trial_chi2 = trial_res.squaredNorm();
    if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
      const bool small = delta.cwiseAbs().maxCoeff() <= 1e-12 * (p.cwiseAbs().maxCoeff() + 1e-12) ||
                         chi2 - trial_chi2 <= 1e-15 * (chi2 + 1e-300);
      p = trial;
      chi2 = trial_chi2;
      residuals(p, res, &jac);
      lambda = std::max(lambda * 0.3, 1e-12);
      if (small) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }

  r.baseline = p(0);
  r.visibility = p(1);
  r.center = p(2);
  r.fwhm = 2.3548200450309493 * std::abs(p(3));
  const Eigen::Matrix4d jtj = jac.transpose() * jac;
  Eigen::Matrix4d cov = jtj.completeOrthogonalDecomposition().pseudoInverse();
  if (!detail::has_uncertainties(pts) && n > 4) cov *= chi2 / static_cast<double>(n - 4);
  r.visibility_err = std::sqrt(std::max(0.0, cov(1, 1)));
  r.center_err = std::sqrt(std::max(0.0, cov(2, 2)));
  r.converged = std::isfinite(chi2) && iter < 500 && std::isfinite(r.center) && r.fwhm > 0.0;
  if (!r.converged) r.diagnostic = "Levenberg-Marquardt did not converge";
  return r;
}

/// Weighted linear fit of offset + a cos(4 theta) + b sin(4 theta) with
/// theta the half-wave-plate angle in degrees.
inline FitResult fit_fringe(std::span<const ScanPoint> pts) {
  FitResult r;
  r.model = FitModel::fringe;
  const std::size_t n = pts.size();
  if (n < 3) {
    r.diagnostic = "need at least 3 points";
    return r;
  }
  const auto w = detail::fit_weights(pts);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  Eigen::VectorXd sw(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double t = 4.0 * deg_to_rad(pts[i].control);
    x(ii, 0) = 1.0;
    x(ii, 1) = std::cos(t);
    x(ii, 2) = std::sin(t);
    y(ii) = pts[i].rate;
    sw(ii) = std::sqrt(w[i]);
  }
  const Eigen::MatrixXd xw = sw.asDiagonal() * x;
  const Eigen::VectorXd yw = sw.asDiagonal() * y;
  const Eigen::Matrix3d xtx = xw.transpose() * xw;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(xtx);
  if (!lu.isInvertible()) {
    r.diagnostic = "fringe design matrix is singular (angle grid too sparse)";
    return r;
  }
  r.coeffs = lu.solve(xw.transpose() * yw);
  r.covariance = lu.inverse();
  if (!detail::has_uncertainties(pts)) {
    const double chi2 = (yw - xw * r.coeffs).squaredNorm();
    r.covariance *= n > 3 ? chi2 / static_cast<double>(n - 3) : 0.0;
  }
  const double amplitude = std::hypot(r.coeffs(1), r.coeffs(2));
  r.baseline = r.coeffs(0);
  r.flat = amplitude <= 1e-12 * std::max(1.0, std::abs(r.coeffs(0)));
  r.visibility = r.coeffs(0) != 0.0 ? amplitude / r.coeffs(0) : 0.0;
  r.phase_deg = rad_to_deg(std::atan2(-r.coeffs(2), r.coeffs(1)));
  if (amplitude > 0.0 && r.coeffs(0) != 0.0) {
    // d V / d(offset, a, b)
    const Eigen::Vector3d g(-amplitude / (r.coeffs(0) * r.coeffs(0)), r.coeffs(1) / (amplitude * r.coeffs(0)),
                            r.coeffs(2) / (amplitude * r.coeffs(0)));
    r.visibility_err = std::sqrt(std::max(0.0, double(g.transpose() * r.covariance * g)));
  }
  r.converged = true;
  return r;
}

inline FitResult fit_scan(std::span<const ScanPoint> pts, FitModel model,
                          std::optional<double> anchor = std::nullopt) {
  return model == FitModel::fringe ? fit_fringe(pts) : fit_gaussian_dip(pts, anchor);
}

/// Scan CSV: comment header with the fit and seed, then control,rate,uncertainty.
inline void write_scan_csv(std::ostream& out, const ScanResult& scan) {
  const auto& f = scan.fit;
  out << "# model=" << (f.model == FitModel::fringe ? "fringe" : "gaussian_dip") << '\n';
  out << "# seed=" << (scan.seed ? std::to_string(*scan.seed) : std::string("none")) << '\n';
  out << "# converged=" << (f.converged ? "true" : "false") << " flat=" << (f.flat ? "true" : "false") << '\n';
  out << "# visibility=" << format_double(f.visibility) << " visibility_err=" << format_double(f.visibility_err)
      << '\n';
  if (f.model == FitModel::fringe) {
    out << "# offset=" << format_double(f.coeffs(0)) << " amplitude=" << format_double(std::hypot(f.coeffs(1), f.coeffs(2)))
        << " phase_deg=" << format_double(f.phase_deg) << '\n';
  } else {
    out << "# center=" << format_double(f.center) << " center_err=" << format_double(f.center_err)
        << " fwhm=" << format_double(f.fwhm) << " baseline=" << format_double(f.baseline)
        << " baseline_anchored=" << (scan.baseline_anchor ? "true" : "false") << '\n';
  }
  out << "# accidental_rate=" << format_double(scan.accidental_rate)
      << " integration_time=" << format_double(scan.integration_time) << '\n';
  out << scan.control_label << ",rate,uncertainty\n";
  for (const auto& p : scan.points)
    out << format_double(p.control) << ',' << format_double(p.rate) << ',' << format_double(p.uncertainty) << '\n';
}

}  // namespace polent
