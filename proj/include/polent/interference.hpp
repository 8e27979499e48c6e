#pragma once

// HOM-type measurement: 45-degree rotation, f-PBS and wavelength
// post-selection, evaluated versus an artificial H/V delay.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "polent/detection.hpp"
#include "polent/parallel.hpp"
#include "polent/polarization.hpp"
#include "polent/scan.hpp"
#include "polent/spectra.hpp"

namespace polent {

/// Emission envelopes and splitting filters on one grid.
struct SpectralSetup {
  SpectralProfile source_h;
  SpectralProfile source_v;
  SpectralProfile filter_plus;
  SpectralProfile filter_minus;
};

/// Per-photon factors fed to interference_kernel.
struct KernelProfiles {
  SpectralProfile plus_h;
  SpectralProfile plus_v;
  SpectralProfile minus_h;
  SpectralProfile minus_v;

  static KernelProfiles from_setup(const SpectralSetup& s) {
    return {photon_factor(s.source_h, s.filter_plus), photon_factor(s.source_v, s.filter_plus),
            photon_factor(s.source_h, s.filter_minus), photon_factor(s.source_v, s.filter_minus)};
  }

  /// No wavelength post-selection: both channels see the whole spectrum.
  static KernelProfiles unfiltered(const SpectralProfile& source_h, const SpectralProfile& source_v) {
    const auto pass = SpectralProfile::constant(source_h.grid(), 1.0);
    return from_setup({source_h, source_v, pass, pass});
  }

  Amplitude kernel(double tau_ps, double channel_delay_ps = 0.0) const {
    return interference_kernel(plus_h, plus_v, minus_h, minus_v, tau_ps, channel_delay_ps);
  }
};

struct DelayRange {
  double min_ps = -10.0;
  double max_ps = 10.0;
  double step_ps = 0.1;

  void validate() const {
    if (!std::isfinite(min_ps) || !std::isfinite(max_ps) || !std::isfinite(step_ps))
      throw std::invalid_argument("DelayRange: bounds must be finite");
    if (!(step_ps > 0.0)) throw std::invalid_argument("DelayRange: step must be positive");
    if (!(max_ps > min_ps)) throw std::invalid_argument("DelayRange: empty scan range");
  }
  std::size_t size() const {
    return static_cast<std::size_t>(std::floor((max_ps - min_ps) / step_ps + 1e-9)) + 1;
  }
  double value(std::size_t i) const { return min_ps + static_cast<double>(i) * step_ps; }
};

struct HomConfig {
  BiphotonState state;
  KernelProfiles kernel;
  DelayRange range;
  double device_visibility = 1.0;  ///< lumps alignment imperfections, in [0, 1]

  void validate() const {
    range.validate();
    if (!(device_visibility >= 0.0 && device_visibility <= 1.0))
      throw std::invalid_argument("HomConfig: device visibility must be in [0, 1]");
    const double stray = std::norm(state.at(Polarization::H, Polarization::H)) +
                         std::norm(state.at(Polarization::V, Polarization::V));
    if (stray > 1e-12)
      throw std::invalid_argument("HomConfig: state has components outside the H+V- / V+H- subspace");
  }
};

/// Probability of a cross-polarized coincidence after the 45-degree
/// rotation and the f-PBS:
///   p = (|a|^2 + |b|^2)/2 - v Re(conj(a) b G(tau + walkoff))
/// with a, b the H+V- and V+H- amplitudes. For |Psi(phi)> this is
/// (1 - v Re(e^{i phi} G)) / 2.
inline double coincidence_probability(const HomConfig& cfg, double tau_ps) {
  cfg.validate();
  const Amplitude a = cfg.state.at(Polarization::H, Polarization::V);
  const Amplitude b = cfg.state.at(Polarization::V, Polarization::H);
  const double tau_total = tau_ps + cfg.state.walkoff_h_minus_v_ps;
  const Amplitude g = cfg.kernel.kernel(tau_total, cfg.state.channel_delay_ps);
  const double p = 0.5 * (std::norm(a) + std::norm(b)) - cfg.device_visibility * std::real(std::conj(a) * b * g);
  return std::clamp(p, 0.0, 1.0);
}

/// Coincidence probability far outside the coherence time, (|a|^2 + |b|^2) / 2.
inline double distinguishable_probability(const BiphotonState& state) {
  return 0.5 * (std::norm(state.at(Polarization::H, Polarization::V)) +
                std::norm(state.at(Polarization::V, Polarization::H)));
}

struct ScanOptions {
  std::optional<CountingConfig> counting;  ///< absent: the scan reports probabilities
  bool poisson_noise = true;
  unsigned threads = 1;
  std::uint64_t stream_offset = 0;  ///< separates the streams of scans sharing a seed
};

/// Coincidence scan over the artificial delay, followed by a Gaussian
/// dip/peak fit anchored at the distinguishable-photon level. With a counting
/// config each point is converted to expected coincidences and, with noise
/// on, Poisson-sampled from its own stream.
inline ScanResult scan(const HomConfig& cfg, const ScanOptions& opts = {}) {
  cfg.validate();
  if (opts.counting) opts.counting->validate();
  const std::size_t n = cfg.range.size();
  ScanResult result;
  result.points.resize(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const double tau = cfg.range.value(i);
    const double p = coincidence_probability(cfg, tau);
    if (!opts.counting) {
      result.points[i] = {tau, p, 0.0};
      return;
    }
    const auto& counting = *opts.counting;
    const ExpectedRates rates = expected_rates(counting, p);
    if (!opts.poisson_noise) {
      result.points[i] = {tau, rates.total_coinc(), 0.0};
      return;
    }
    auto engine = stream_engine(counting.rng_seed, opts.stream_offset + i);
    const auto counts = poisson_draw(engine, rates.total_coinc() * counting.integration_time_s);
    result.points[i] = count_point(tau, counts, counting.integration_time_s);
  });
  const double far = distinguishable_probability(cfg.state);
  result.baseline_anchor = far;
  if (opts.counting) {
    result.accidental_rate = expected_rates(*opts.counting, 0.0).accidental_coinc;
    result.integration_time = opts.counting->integration_time_s;
    result.baseline_anchor = expected_rates(*opts.counting, far).total_coinc();
    if (opts.poisson_noise) result.seed = opts.counting->rng_seed;
  }
  result.fit = fit_gaussian_dip(result.points, result.baseline_anchor);
  return result;
}

/// PMF length that cancels `walkoff_ps` at `rate_ps_per_m`.
inline double pmf_length_for_compensation(double walkoff_ps, double rate_ps_per_m) {
  if (!(rate_ps_per_m > 0.0)) throw std::invalid_argument("pmf_length_for_compensation: rate must be positive");
  return walkoff_ps / rate_ps_per_m;
}

/// Coincidence probability at fixed tau for each extra + channel delay.
inline std::vector<double> channel_delay_sweep(const HomConfig& cfg, double tau_ps, std::span<const double> delays_ps) {
  std::vector<double> out;
  out.reserve(delays_ps.size());
  for (const double d : delays_ps) {
    HomConfig shifted = cfg;
    shifted.state = apply_element(cfg.state, OpticalElement::channel_delay(d));
    out.push_back(coincidence_probability(shifted, tau_ps));
  }
  return out;
}

}  // namespace polent
