#pragma once

// Scenario execution. Everything is computed in memory first; files are
// only written once the whole scenario has succeeded.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polent/bell.hpp"
#include "polent/detection.hpp"
#include "polent/harness/config.hpp"
#include "polent/interference.hpp"
#include "polent/polarization.hpp"
#include "polent/spectra.hpp"

namespace polent::harness {

struct OutputFile {
  std::string name;
  std::string content;
};

struct RunOutput {
  std::vector<OutputFile> files;

  const std::string* find(std::string_view name) const {
    for (const auto& f : files)
      if (f.name == name) return &f.content;
    return nullptr;
  }
};

/// key=value lines, numbers in shortest round-trip form.
class KeyValueText {
 public:
  void add(std::string_view key, double value) { add(key, format_double(value)); }
  void add(std::string_view key, std::string_view value) {
    text_ += key;
    text_ += '=';
    text_ += value;
    text_ += '\n';
  }
  void add(std::string_view key, bool value) { add(key, std::string_view(value ? "true" : "false")); }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

inline FrequencyGrid build_grid(const ExperimentConfig& c) {
  return FrequencyGrid::around_wavelength(c.source.degeneracy_nm, c.grid.span_nm,
                                          static_cast<std::size_t>(c.grid.points));
}

inline SpectralSetup build_setup(const ExperimentConfig& c, const FrequencyGrid& grid) {
  auto source_h = make_source_spectrum(Polarization::H, c.source.degeneracy_nm, c.source.fwhm_nm, grid, c.source.envelope);
  auto source_v = make_source_spectrum(Polarization::V, c.source.degeneracy_nm, c.source.fwhm_nm, grid, c.source.envelope);
  if (!c.filters.enabled) {
    const auto pass = SpectralProfile::constant(grid, 1.0);
    return {std::move(source_h), std::move(source_v), pass, pass};
  }
  const auto& f = c.filters;
  auto plus = make_dwdm_filter(FilterSpec::itu(static_cast<int>(f.plus_channel), Band::plus, f.fwhm_ghz, f.order), grid);
  auto minus = make_dwdm_filter(FilterSpec::itu(static_cast<int>(f.minus_channel), Band::minus, f.fwhm_ghz, f.order), grid);
  return {std::move(source_h), std::move(source_v), std::move(plus), std::move(minus)};
}

/// |Psi(phase)> prepared by an SB plate, then the waveguide walk-off, the
/// optional PMF compensator and an extra + channel delay.
inline BiphotonState build_state(const ExperimentConfig& c, double phase_deg, double channel_delay_ps) {
  std::vector<OpticalElement> chain{OpticalElement::sb_phase(deg_to_rad(phase_deg)),
                                    OpticalElement::birefringent_delay(c.source.walkoff_ps)};
  if (c.source.pmf_length_m > 0.0)
    chain.push_back(OpticalElement::pmf_compensator(c.source.pmf_length_m, c.source.pmf_rate_ps_per_m));
  if (channel_delay_ps != 0.0) chain.push_back(OpticalElement::channel_delay(channel_delay_ps));
  return apply_elements(make_psi_phi(0.0), chain);
}

inline double pair_rate(const ExperimentConfig& c) {
  return brightness_to_pair_rate(c.source.brightness, c.source.pump_mw, c.source.bandwidth_ghz);
}

inline double per_photon_transmission(const ExperimentConfig& c) {
  return db_to_transmission(c.source.loss_db + c.source.extra_loss_db) * c.source.unaccounted_efficiency;
}

inline CountingConfig build_counting(const ExperimentConfig& c) {
  CountingConfig cc;
  cc.coincidence_window_ns = c.detectors.window_ns;
  cc.integration_time_s = c.detectors.integration_s;
  cc.pair_rate_at_source = pair_rate(c);
  cc.per_photon_transmission = per_photon_transmission(c);
  cc.first = c.detectors.first.params("first");
  cc.second = c.detectors.second.params("second");
  cc.rng_seed = c.seed;
  cc.validate();
  return cc;
}

inline std::vector<double> bob_grid(const ExperimentConfig& c) {
  return BellSettings::hwp_grid(c.bell.hwp_min_deg, c.bell.hwp_max_deg, c.bell.hwp_step_deg);
}

/// Field checks plus construction of every model object the scenario needs,
/// so that a config accepted here cannot fail a module precondition later.
inline void validate(const ExperimentConfig& c) {
  validate_fields(c);
  try {
    const auto grid = build_grid(c);
    build_setup(c, grid);
    build_counting(c);
    bob_grid(c);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace detail {

inline std::string csv_of(const ScanResult& r) {
  std::ostringstream out;
  write_scan_csv(out, r);
  return out.str();
}

inline std::string csv_of(const SpectralProfile& p) {
  std::ostringstream out;
  write_profile_csv(out, p);
  return out.str();
}

inline std::string label_of(double value) {
  std::string s = format_double(value);
  for (char& ch : s)
    if (ch == '.') ch = 'p';
  return s;
}

struct HomRun {
  ScanResult scan;
  std::optional<VisibilityPair> visibilities;
};

inline HomRun run_hom(const ExperimentConfig& c, const KernelProfiles& kernel, const BiphotonState& state,
                      std::uint64_t stream_offset) {
  HomConfig hc{state, kernel, {c.hom.tau_min_ps, c.hom.tau_max_ps, c.hom.tau_step_ps}, c.hom.device_visibility};
  ScanOptions opts;
  if (c.detectors.counting) opts.counting = build_counting(c);
  opts.poisson_noise = c.detectors.poisson_noise;
  opts.threads = c.threads;
  opts.stream_offset = stream_offset;
  HomRun run{scan(hc, opts), std::nullopt};
  if (c.detectors.counting && run.scan.fit.converged && !run.scan.fit.flat)
    run.visibilities = raw_and_net_visibility(run.scan, run.scan.accidental_rate, run.scan.integration_time);
  return run;
}

inline void summarize_hom(KeyValueText& kv, const std::string& prefix, const HomRun& run) {
  const auto& f = run.scan.fit;
  kv.add(prefix + "converged", f.converged);
  kv.add(prefix + "flat", f.flat);
  kv.add(prefix + "center_ps", f.center);
  kv.add(prefix + "center_err_ps", f.center_err);
  kv.add(prefix + "fwhm_ps", f.fwhm);
  kv.add(prefix + "baseline", f.baseline);
  kv.add(prefix + "visibility_raw", f.visibility);
  kv.add(prefix + "visibility_err", f.visibility_err);
  if (run.visibilities) {
    kv.add(prefix + "visibility_net", run.visibilities->net);
    kv.add(prefix + "net_clamped", run.visibilities->clamped);
  }
  if (!f.diagnostic.empty()) kv.add(prefix + "diagnostic", std::string_view(f.diagnostic));
}

inline KernelProfiles build_kernel(const ExperimentConfig& c) {
  const auto grid = build_grid(c);
  return KernelProfiles::from_setup(build_setup(c, grid));
}

inline RunOutput run_spectrum(const ExperimentConfig& c) {
  const auto grid = build_grid(c);
  const auto setup = build_setup(c, grid);
  RunOutput out;
  out.files.push_back({"source_h.csv", csv_of(setup.source_h)});
  out.files.push_back({"source_v.csv", csv_of(setup.source_v)});
  out.files.push_back({"filter_plus.csv", csv_of(setup.filter_plus)});
  out.files.push_back({"filter_minus.csv", csv_of(setup.filter_minus)});
  KeyValueText kv;
  kv.add("degeneracy_thz", grid.center_thz());
  kv.add("measured_fwhm_nm", measure_fwhm_nm(setup.source_h));
  kv.add("filter_overlap", filter_overlap(setup.filter_plus, setup.filter_minus));
  kv.add("same_side_probability",
         same_side_probability(setup.source_h, setup.source_v, setup.filter_plus, setup.filter_minus));
  kv.add("transmitted_fraction_plus", filtered_profile(setup.source_h, setup.filter_plus).intensity_integral());
  kv.add("transmitted_fraction_minus", filtered_profile(setup.source_h, setup.filter_minus).intensity_integral());
  out.files.push_back({"summary.txt", kv.str()});
  return out;
}

inline RunOutput run_hom_scan(const ExperimentConfig& c) {
  const auto kernel = build_kernel(c);
  const auto state = build_state(c, c.hom.phase_deg, c.hom.channel_delay_ps);
  const auto run = run_hom(c, kernel, state, 0);
  RunOutput out;
  out.files.push_back({"scan.csv", csv_of(run.scan)});
  out.files.push_back({"state.csv", "hh_re,hh_im,hv_re,hv_im,vh_re,vh_im,vv_re,vv_im,walkoff_ps,channel_delay_ps\n" +
                                        state_csv_row(state) + '\n'});
  KeyValueText kv;
  kv.add("walkoff_total_ps", state.walkoff_h_minus_v_ps);
  kv.add("expected_center_ps", -state.walkoff_h_minus_v_ps);
  kv.add("pmf_length_for_compensation_m", pmf_length_for_compensation(c.source.walkoff_ps, c.source.pmf_rate_ps_per_m));
  kv.add("accidental_rate", run.scan.accidental_rate);
  summarize_hom(kv, "", run);
  out.files.push_back({"summary.txt", kv.str()});
  return out;
}

inline RunOutput run_phase_scan(const ExperimentConfig& c) {
  const auto kernel = build_kernel(c);
  RunOutput out;
  KeyValueText kv;
  double spread = 0.0;
  for (std::size_t k = 0; k < c.hom.phases_deg.size(); ++k) {
    const double phase = c.hom.phases_deg[k];
    const auto state = build_state(c, phase, c.hom.channel_delay_ps);
    const auto run = run_hom(c, kernel, state, static_cast<std::uint64_t>(k) << 32);
    const std::string label = label_of(phase);
    out.files.push_back({"scan_phase_" + label + ".csv", csv_of(run.scan)});
    summarize_hom(kv, "phase_" + label + ".", run);

    // Same configuration without the channel delay, at the dip/peak center.
    HomConfig hc{state, kernel, {c.hom.tau_min_ps, c.hom.tau_max_ps, c.hom.tau_step_ps}, c.hom.device_visibility};
    const double tau = -state.walkoff_h_minus_v_ps;
    const std::array<double, 2> delays{-state.channel_delay_ps, 0.0};
    const auto p = channel_delay_sweep(hc, tau, delays);
    spread = std::max(spread, std::abs(p[1] - p[0]));
  }
  kv.add("channel_delay_ps", c.hom.channel_delay_ps);
  kv.add("channel_delay_probability_spread", spread);
  out.files.push_back({"summary.txt", kv.str()});
  return out;
}

inline constexpr std::array<std::string_view, 4> kAliceLabels{"H", "V", "D", "A"};

struct FringeSet {
  std::array<ScanResult, 4> raw;
  std::array<VisibilityPair, 4> visibilities;
};

inline FringeSet run_fringes(const ExperimentConfig& c) {
  const BellSettings settings{};
  std::optional<CountingConfig> counting;
  if (c.detectors.counting) counting = build_counting(c);
  const auto state = build_state(c, c.bell.phase_deg, 0.0);
  const auto grid = bob_grid(c);
  FringeSet set;
  for (std::size_t k = 0; k < 4; ++k) {
    FringeOptions opts{c.bell.state_visibility, c.detectors.poisson_noise, c.threads, static_cast<std::uint64_t>(k) << 32};
    set.raw[k] = fringe_scan(state, settings.alice_angles[k], grid, counting, opts);
    if (counting) {
      set.visibilities[k] = raw_and_net_visibility(set.raw[k], set.raw[k].accidental_rate, set.raw[k].integration_time);
    } else {
      set.visibilities[k] = {set.raw[k].fit.visibility, set.raw[k].fit.visibility, false, set.raw[k].fit};
    }
  }
  return set;
}

inline void add_fringes(RunOutput& out, KeyValueText& kv, const FringeSet& set) {
  double mean_raw = 0.0, mean_net = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string label(kAliceLabels[k]);
    out.files.push_back({"fringe_" + label + ".csv", csv_of(set.raw[k])});
    kv.add("visibility_raw_" + label, set.visibilities[k].raw);
    kv.add("visibility_net_" + label, set.visibilities[k].net);
    kv.add("phase_deg_" + label, set.raw[k].fit.phase_deg);
    mean_raw += 0.25 * set.visibilities[k].raw;
    mean_net += 0.25 * set.visibilities[k].net;
  }
  kv.add("mean_visibility_raw", mean_raw);
  kv.add("mean_visibility_net", mean_net);
  kv.add("accidental_rate", set.raw[0].accidental_rate);
}

inline RunOutput run_bell_fringe(const ExperimentConfig& c) {
  RunOutput out;
  KeyValueText kv;
  add_fringes(out, kv, run_fringes(c));
  out.files.push_back({"summary.txt", kv.str()});
  return out;
}

inline void add_chsh(KeyValueText& kv, const std::string& suffix, const ChshFromFringes& r, bool counted) {
  kv.add("S_" + suffix, r.result.S);
  kv.add("sigma_S_" + suffix, r.result.sigma_S);
  // Noiseless fringes carry no counting uncertainty to compare against.
  if (counted && r.result.sigma_S > 0.0)
    kv.add("sigmas_of_violation_" + suffix, violation_significance(r.result.S, r.result.sigma_S));
  else
    kv.add("sigmas_of_violation_" + suffix, std::string_view("n/a"));
  static constexpr std::array<std::string_view, 4> names{"ab", "ab_prime", "a_prime_b", "a_prime_b_prime"};
  for (std::size_t i = 0; i < 4; ++i) kv.add("E_" + std::string(names[i]) + "_" + suffix, r.correlations[i].value);
}

inline RunOutput run_chsh(const ExperimentConfig& c) {
  const auto set = run_fringes(c);
  const ChshAngles angles{c.bell.a_deg, c.bell.a_prime_deg, c.bell.b_deg, c.bell.b_prime_deg};
  std::array<FitResult, 4> raw_fits, net_fits;
  for (std::size_t k = 0; k < 4; ++k) {
    raw_fits[k] = set.raw[k].fit;
    net_fits[k] = set.visibilities[k].net_fit;
  }
  RunOutput out;
  KeyValueText kv;
  add_fringes(out, kv, set);
  KeyValueText chsh;
  const bool counted = c.detectors.counting && c.detectors.poisson_noise;
  add_chsh(chsh, "raw", chsh_from_fringes(std::span<const FitResult, 4>(raw_fits), angles), counted);
  add_chsh(chsh, "net", chsh_from_fringes(std::span<const FitResult, 4>(net_fits), angles), counted);
  // White noise scales every correlation by the state visibility.
  const auto state = build_state(c, c.bell.phase_deg, 0.0);
  chsh.add("S_direct", c.bell.state_visibility * chsh_S(state, angles).S);
  for (std::size_t k = 0; k < 4; ++k)
    chsh.add("visibility_raw_" + std::string(kAliceLabels[k]), set.visibilities[k].raw);
  out.files.push_back({"summary.txt", kv.str()});
  out.files.push_back({"chsh.txt", chsh.str()});
  return out;
}

inline RunOutput run_budget(const ExperimentConfig& c) {
  const auto report = source_budget(c.source.brightness, c.source.pump_mw, c.source.bandwidth_ghz,
                                    c.source.loss_db + c.source.extra_loss_db, c.detectors.first.efficiency,
                                    c.detectors.second.efficiency, c.source.observed_coincidence_rate);
  std::ostringstream budget;
  write_budget_report(budget, report);
  const auto counting = build_counting(c);
  const auto rates = expected_rates(counting, 1.0);
  KeyValueText kv;
  kv.add("expected_singles_1", rates.singles_1);
  kv.add("expected_singles_2", rates.singles_2);
  kv.add("expected_true_coinc", rates.true_coinc);
  kv.add("expected_accidental_coinc", rates.accidental_coinc);
  kv.add("unaccounted_efficiency_used", c.source.unaccounted_efficiency);
  std::ostringstream counts;
  write_count_record_csv(counts, simulate_counts(counting, rates));
  RunOutput out;
  out.files.push_back({"budget.txt", budget.str()});
  out.files.push_back({"counts.csv", counts.str()});
  out.files.push_back({"summary.txt", kv.str()});
  return out;
}

}  // namespace detail

inline std::string manifest_text(const ExperimentConfig& c) {
  return std::string("; polent ") + POLENT_VERSION + " run manifest\n" + serialize_config(c, false);
}

/// Runs the scenario and returns every output file, manifest included.
/// Throws ConfigError for invalid configs; anything else is a runtime failure.
inline RunOutput execute(const ExperimentConfig& c) {
  validate(c);
  RunOutput out;
  switch (c.scenario) {
    case Scenario::spectrum: out = detail::run_spectrum(c); break;
    case Scenario::hom_scan: out = detail::run_hom_scan(c); break;
    case Scenario::phase_scan: out = detail::run_phase_scan(c); break;
    case Scenario::bell_fringe: out = detail::run_bell_fringe(c); break;
    case Scenario::chsh: out = detail::run_chsh(c); break;
    case Scenario::budget: out = detail::run_budget(c); break;
  }
  out.files.push_back({"manifest.ini", manifest_text(c)});
  return out;
}

/// Writes all files to temporaries first and renames them into place only
/// after every write succeeded.
inline void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> staged;
  try {
    for (const auto& f : out.files) {
      const fs::path tmp = dir / (f.name + ".partial");
      std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
      staged.push_back(tmp);
      file << f.content;
      file.close();
      if (!file) throw std::runtime_error("cannot write " + tmp.string());
    }
  } catch (...) {
    for (const auto& p : staged) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw;
  }
  std::size_t done = 0;
  try {
    for (; done < staged.size(); ++done) fs::rename(staged[done], dir / out.files[done].name);
  } catch (...) {
    for (std::size_t i = done; i < staged.size(); ++i) {
      std::error_code ec;
      fs::remove(staged[i], ec);
    }
    throw;
  }
}

}  // namespace polent::harness
