#pragma once

// Detector and coincidence statistics: expected singles, true and
// accidental coincidence rates, seeded Poisson sampling, and dark-count
// subtraction for raw vs net visibilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "polent/common.hpp"
#include "polent/rng.hpp"
#include "polent/scan.hpp"

namespace polent {

enum class DetectorMode { free_running, gated };

inline std::string_view to_string(DetectorMode m) {
  return m == DetectorMode::gated ? "gated" : "free_running";
}

struct DetectorParams {
  double efficiency = 1.0;
  double dark_prob_per_ns = 0.0;
  DetectorMode mode = DetectorMode::free_running;
  std::string label;

  /// Dark counts per second of open detector time.
  double dark_rate() const { return dark_prob_per_ns * 1e9; }

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
      throw std::invalid_argument("DetectorParams: efficiency must be in [0, 1]");
    if (!(dark_prob_per_ns >= 0.0) || !std::isfinite(dark_prob_per_ns))
      throw std::invalid_argument("DetectorParams: dark-count probability must be >= 0");
  }

  static DetectorParams idq220() { return {0.20, 1e-6, DetectorMode::free_running, "IDQ-220"}; }
  static DetectorParams idq201() { return {0.25, 1e-5, DetectorMode::gated, "IDQ-201"}; }
  static DetectorParams superconducting() { return {0.20, 1e-9, DetectorMode::free_running, "SC-1e-9"}; }
  static DetectorParams ideal() { return {1.0, 0.0, DetectorMode::free_running, "ideal"}; }
};

struct CountingConfig {
  double coincidence_window_ns = 1.0;
  double integration_time_s = 1.0;
  double pair_rate_at_source = 0.0;      ///< pairs per second
  double per_photon_transmission = 0.5;  ///< identical for both channels
  DetectorParams first = DetectorParams::idq220();
  DetectorParams second = DetectorParams::idq220();
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(coincidence_window_ns > 0.0) || !std::isfinite(coincidence_window_ns))
      throw std::invalid_argument("CountingConfig: coincidence window must be positive");
    if (!(integration_time_s > 0.0) || !std::isfinite(integration_time_s))
      throw std::invalid_argument("CountingConfig: integration time must be positive");
    if (!(pair_rate_at_source >= 0.0) || !std::isfinite(pair_rate_at_source))
      throw std::invalid_argument("CountingConfig: pair rate must be >= 0");
    if (!(per_photon_transmission >= 0.0 && per_photon_transmission <= 1.0))
      throw std::invalid_argument("CountingConfig: transmission must be in [0, 1]");
    first.validate();
    second.validate();
    if (first.mode == DetectorMode::gated)
      throw std::invalid_argument("CountingConfig: the first detector triggers the gate and must be free-running");
  }
};

/// pairs/s = brightness [pairs/s/mW/GHz] * pump [mW] * bandwidth [GHz]
inline double brightness_to_pair_rate(double brightness, double pump_mw, double bandwidth_ghz) {
  if (brightness < 0.0 || pump_mw < 0.0 || bandwidth_ghz < 0.0)
    throw std::invalid_argument("brightness_to_pair_rate: arguments must be >= 0");
  return brightness * pump_mw * bandwidth_ghz;
}

struct ExpectedRates {
  double singles_1 = 0.0;
  double singles_2 = 0.0;
  double true_coinc = 0.0;
  double accidental_coinc = 0.0;
  double total_coinc() const { return true_coinc + accidental_coinc; }
};

/// Expected rates per second for a polarization post-selection probability
/// `prob`. A gated second detector is opened by every click of the first
/// for one coincidence window; its dark counts accrue only inside gates.
inline ExpectedRates expected_rates(const CountingConfig& cfg, double prob) {
  cfg.validate();
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("expected_rates: probability must be in [0, 1]");
  const double window_s = cfg.coincidence_window_ns * 1e-9;
  const double t = cfg.per_photon_transmission;
  const double photons_1 = cfg.pair_rate_at_source * t * cfg.first.efficiency;
  const double photons_2 = cfg.pair_rate_at_source * t * cfg.second.efficiency;

  ExpectedRates r;
  r.singles_1 = photons_1 + cfg.first.dark_rate();
  r.true_coinc = cfg.pair_rate_at_source * t * t * cfg.first.efficiency * cfg.second.efficiency * prob;
  if (cfg.second.mode == DetectorMode::gated) {
    const double gate_rate = r.singles_1;
    const double spurious_per_gate = cfg.second.dark_prob_per_ns * cfg.coincidence_window_ns + photons_2 * window_s;
    r.accidental_coinc = gate_rate * spurious_per_gate;
    r.singles_2 = r.accidental_coinc + r.true_coinc;
  } else {
    r.singles_2 = photons_2 + cfg.second.dark_rate();
    r.accidental_coinc = r.singles_1 * r.singles_2 * window_s;
  }
  return r;
}

struct CountRecord {
  std::uint64_t singles_1 = 0;
  std::uint64_t singles_2 = 0;
  std::uint64_t true_coinc = 0;
  std::uint64_t accidental_coinc = 0;
  std::uint64_t total_coinc() const { return true_coinc + accidental_coinc; }
  bool operator==(const CountRecord&) const = default;
};

/// Poisson counts over the configured integration time, drawn from the
/// stream (rng_seed, stream).
inline CountRecord simulate_counts(const CountingConfig& cfg, const ExpectedRates& expected,
                                   std::uint64_t stream = 0) {
  cfg.validate();
  auto engine = stream_engine(cfg.rng_seed, stream);
  const double t = cfg.integration_time_s;
  CountRecord c;
  c.singles_1 = poisson_draw(engine, expected.singles_1 * t);
  c.singles_2 = poisson_draw(engine, expected.singles_2 * t);
  c.true_coinc = poisson_draw(engine, expected.true_coinc * t);
  c.accidental_coinc = poisson_draw(engine, expected.accidental_coinc * t);
  return c;
}

inline void write_count_record_csv(std::ostream& out, const CountRecord& c) {
  out << "category,count\n";
  out << "singles_1," << c.singles_1 << '\n';
  out << "singles_2," << c.singles_2 << '\n';
  out << "true_coinc," << c.true_coinc << '\n';
  out << "accidental_coinc," << c.accidental_coinc << '\n';
  out << "total_coinc," << c.total_coinc() << '\n';
}

/// Scan point from total coincidence counts; rate in 1/s.
inline ScanPoint count_point(double control, std::uint64_t counts, double integration_time) {
  const auto n = static_cast<double>(counts);
  return {control, n / integration_time, std::sqrt(n) / integration_time};
}

struct VisibilityPair {
  double raw = 0.0;
  double net = 0.0;
  bool clamped = false;  ///< some point went negative after subtraction
  FitResult net_fit;
};

/// Raw visibility from the scan's own fit; net visibility from a refit after
/// removing accidental_rate * integration_time counts from every point. An
/// anchored baseline is lowered by the same amount.
inline VisibilityPair raw_and_net_visibility(const ScanResult& scan, double accidental_rate,
                                             double integration_time) {
  if (!(integration_time > 0.0)) throw std::invalid_argument("raw_and_net_visibility: integration time must be positive");
  if (accidental_rate < 0.0) throw std::invalid_argument("raw_and_net_visibility: negative accidental rate");
  VisibilityPair v;
  v.raw = scan.fit.visibility;
  std::vector<ScanPoint> net(scan.points);
  for (auto& p : net) {
    if (p.rate < 0.0) throw std::invalid_argument("raw_and_net_visibility: negative counts");
    const double counts = p.rate * integration_time - accidental_rate * integration_time;
    if (counts < 0.0) v.clamped = true;
    p.rate = std::max(counts, 0.0) / integration_time;
  }
  std::optional<double> anchor;
  if (scan.baseline_anchor) anchor = *scan.baseline_anchor - accidental_rate;
  v.net_fit = fit_scan(net, scan.fit.model, anchor);
  v.net = v.net_fit.visibility;
  return v;
}

/// Source budget: what the quoted brightness predicts versus the coincidence
/// rate actually observed. The ratio is reported, not absorbed.
struct BudgetReport {
  double brightness = 0.0;
  double pump_mw = 0.0;
  double bandwidth_ghz = 0.0;
  double pair_rate = 0.0;
  double loss_db = 0.0;
  double transmission = 0.0;
  double efficiency_1 = 0.0;
  double efficiency_2 = 0.0;
  double predicted_coincidence_rate = 0.0;
  double observed_coincidence_rate = 0.0;
  double discrepancy_factor = 0.0;
  /// Extra per-photon efficiency that reconciles prediction and observation.
  double unaccounted_efficiency = 1.0;
};

inline BudgetReport source_budget(double brightness, double pump_mw, double bandwidth_ghz, double loss_db,
                                  double efficiency_1, double efficiency_2, double observed_rate) {
  BudgetReport b;
  b.brightness = brightness;
  b.pump_mw = pump_mw;
  b.bandwidth_ghz = bandwidth_ghz;
  b.pair_rate = brightness_to_pair_rate(brightness, pump_mw, bandwidth_ghz);
  b.loss_db = loss_db;
  b.transmission = db_to_transmission(loss_db);
  b.efficiency_1 = efficiency_1;
  b.efficiency_2 = efficiency_2;
  b.predicted_coincidence_rate = b.pair_rate * b.transmission * b.transmission * efficiency_1 * efficiency_2;
  b.observed_coincidence_rate = observed_rate;
  if (observed_rate > 0.0 && b.predicted_coincidence_rate > 0.0) {
    b.discrepancy_factor = b.predicted_coincidence_rate / observed_rate;
    b.unaccounted_efficiency = std::min(1.0, std::sqrt(1.0 / b.discrepancy_factor));
  }
  return b;
}

inline void write_budget_report(std::ostream& out, const BudgetReport& b) {
  out << "brightness_pairs_per_s_mw_ghz=" << format_double(b.brightness) << '\n';
  out << "pump_mw=" << format_double(b.pump_mw) << '\n';
  out << "bandwidth_ghz=" << format_double(b.bandwidth_ghz) << '\n';
  out << "pair_rate_per_s=" << format_double(b.pair_rate) << '\n';
  out << "loss_db=" << format_double(b.loss_db) << '\n';
  out << "per_photon_transmission=" << format_double(b.transmission) << '\n';
  out << "efficiency_1=" << format_double(b.efficiency_1) << '\n';
  out << "efficiency_2=" << format_double(b.efficiency_2) << '\n';
  out << "predicted_coincidence_rate_per_s=" << format_double(b.predicted_coincidence_rate) << '\n';
  out << "observed_coincidence_rate_per_s=" << format_double(b.observed_coincidence_rate) << '\n';
  out << "discrepancy_factor=" << format_double(b.discrepancy_factor) << '\n';
  out << "unaccounted_per_photon_efficiency=" << format_double(b.unaccounted_efficiency) << '\n';
}

}  // namespace polent
