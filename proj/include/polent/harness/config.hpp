#pragma once

// Experiment configuration: an INI file with one section per module.
// Parsing is strict (unknown sections and keys are errors) and every key
// has a default, so a config may be sparse. Serialization writes every key
// and round-trips exactly.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "polent/common.hpp"
#include "polent/detection.hpp"
#include "polent/spectra.hpp"

namespace polent::harness {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Scenario { spectrum, hom_scan, phase_scan, bell_fringe, chsh, budget };

inline constexpr std::string_view kScenarioNames[] = {"spectrum", "hom_scan", "phase_scan",
                                                      "bell_fringe", "chsh", "budget"};

inline std::string_view to_string(Scenario s) { return kScenarioNames[static_cast<int>(s)]; }

struct DetectorConfig {
  double efficiency = 0.20;
  double dark_prob_per_ns = 1e-6;
  DetectorMode mode = DetectorMode::free_running;

  DetectorParams params(std::string label) const { return {efficiency, dark_prob_per_ns, mode, std::move(label)}; }
};

struct ExperimentConfig {
  Scenario scenario = Scenario::hom_scan;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output;  ///< empty: decided by the caller
  std::string preset;  ///< base preset the file was layered on, if any

  struct Source {
    double degeneracy_nm = thz_to_wavelength(194.65);
    double fwhm_nm = 0.85;
    EnvelopeShape envelope = EnvelopeShape::gaussian;
    double walkoff_ps = 4.40;
    double pmf_length_m = 0.0;
    double pmf_rate_ps_per_m = 1.38;
    double brightness = 2e4;  ///< pairs / s / mW / GHz
    double pump_mw = 2.5;
    double bandwidth_ghz = 100.0;
    double loss_db = 3.0;
    double extra_loss_db = 0.0;
    double unaccounted_efficiency = 1.0;  ///< per photon
    double observed_coincidence_rate = 1100.0;
  } source;

  struct Grid {
    double span_nm = 6.0;
    std::uint64_t points = 4096;
  } grid;

  struct Filters {
    bool enabled = true;
    std::int64_t plus_channel = 46;
    std::int64_t minus_channel = 47;
    double fwhm_ghz = 95.0;
    double order = 10.0;
  } filters;

  struct Detectors {
    bool counting = true;
    bool poisson_noise = true;
    double window_ns = 1.0;
    double integration_s = 1.0;
    DetectorConfig first{};
    DetectorConfig second{0.25, 1e-5, DetectorMode::gated};
  } detectors;

  struct Hom {
    double tau_min_ps = -10.0;
    double tau_max_ps = 10.0;
    double tau_step_ps = 0.1;
    double device_visibility = 1.0;
    double phase_deg = 0.0;
    std::vector<double> phases_deg{0.0, 180.0};
    double channel_delay_ps = 0.0;
  } hom;

  struct Bell {
    double hwp_min_deg = 0.0;
    double hwp_max_deg = 180.0;
    double hwp_step_deg = 5.0;
    double state_visibility = 1.0;
    double phase_deg = 0.0;
    double a_deg = 0.0;
    double a_prime_deg = 45.0;
    double b_deg = -22.5;
    double b_prime_deg = -67.5;
  } bell;
};

namespace detail {

template <typename Int>
Int parse_integer(const std::string& text) {
  Int value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || first == last) throw ConfigError("not an integer: '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("not a boolean: '" + text + "'");
}

inline double parse_number(const std::string& text) {
  try {
    return parse_double(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

/// Whitespace- or comma-separated numbers.
inline std::vector<double> parse_list(const std::string& text) {
  std::string normalized = text;
  for (char& c : normalized)
    if (c == ',') c = ' ';
  std::istringstream in(normalized);
  std::vector<double> out;
  for (std::string token; in >> token;) out.push_back(parse_number(token));
  return out;
}

inline std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? " " : "") + format_double(values[i]);
  return out;
}

inline DetectorMode parse_mode(const std::string& text) {
  if (text == "free_running") return DetectorMode::free_running;
  if (text == "gated") return DetectorMode::gated;
  throw ConfigError("unknown detector mode '" + text + "' (free_running | gated)");
}

inline EnvelopeShape parse_envelope(const std::string& text) {
  if (text == "gaussian") return EnvelopeShape::gaussian;
  if (text == "sinc2") return EnvelopeShape::sinc2;
  throw ConfigError("unknown envelope '" + text + "' (gaussian | sinc2)");
}

inline Scenario parse_scenario(const std::string& text) {
  for (int i = 0; i < 6; ++i)
    if (kScenarioNames[i] == text) return static_cast<Scenario>(i);
  throw ConfigError("unknown scenario '" + text + "'");
}

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<void(ExperimentConfig&, const std::string&)> read;
  std::function<std::string(const ExperimentConfig&)> write;
  bool execution = false;  ///< how to run rather than what to compute; left out of manifests
};

template <typename Access>
Field number(std::string_view section, std::string_view key, Access acc) {
  return {section, key, [acc](ExperimentConfig& c, const std::string& v) { acc(c) = parse_number(v); },
          [acc](const ExperimentConfig& c) { return format_double(acc(c)); }};
}

template <typename Int, typename Access>
Field integer(std::string_view section, std::string_view key, Access acc, bool execution = false) {
  return {section, key, [acc](ExperimentConfig& c, const std::string& v) { acc(c) = parse_integer<Int>(v); },
          [acc](const ExperimentConfig& c) { return std::to_string(acc(c)); }, execution};
}

template <typename Access>
Field boolean(std::string_view section, std::string_view key, Access acc) {
  return {section, key, [acc](ExperimentConfig& c, const std::string& v) { acc(c) = parse_bool(v); },
          [acc](const ExperimentConfig& c) { return std::string(acc(c) ? "true" : "false"); }};
}

template <typename Access>
Field detector(std::string_view key, Access acc) {
  return {"detectors", key, [acc](ExperimentConfig& c, const std::string& v) { acc(c) = parse_mode(v); },
          [acc](const ExperimentConfig& c) { return std::string(to_string(acc(c))); }};
}

#define POLENT_ACCESS(expr) [](auto& c) -> auto& { return c.expr; }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"experiment", "scenario",
                 [](ExperimentConfig& c, const std::string& v) { c.scenario = parse_scenario(v); },
                 [](const ExperimentConfig& c) { return std::string(to_string(c.scenario)); }});
    f.push_back({"experiment", "preset", [](ExperimentConfig& c, const std::string& v) { c.preset = v; },
                 [](const ExperimentConfig& c) { return c.preset; }});
    f.push_back(integer<std::uint64_t>("experiment", "seed", POLENT_ACCESS(seed)));
    f.push_back(integer<unsigned>("experiment", "threads", POLENT_ACCESS(threads), true));
    f.push_back({"experiment", "output", [](ExperimentConfig& c, const std::string& v) { c.output = v; },
                 [](const ExperimentConfig& c) { return c.output; }, true});

    f.push_back(number("source", "degeneracy_nm", POLENT_ACCESS(source.degeneracy_nm)));
    f.push_back(number("source", "fwhm_nm", POLENT_ACCESS(source.fwhm_nm)));
    f.push_back({"source", "envelope",
                 [](ExperimentConfig& c, const std::string& v) { c.source.envelope = parse_envelope(v); },
                 [](const ExperimentConfig& c) {
                   return std::string(c.source.envelope == EnvelopeShape::gaussian ? "gaussian" : "sinc2");
                 }});
    f.push_back(number("source", "walkoff_ps", POLENT_ACCESS(source.walkoff_ps)));
    f.push_back(number("source", "pmf_length_m", POLENT_ACCESS(source.pmf_length_m)));
    f.push_back(number("source", "pmf_rate_ps_per_m", POLENT_ACCESS(source.pmf_rate_ps_per_m)));
    f.push_back(number("source", "brightness", POLENT_ACCESS(source.brightness)));
    f.push_back(number("source", "pump_mw", POLENT_ACCESS(source.pump_mw)));
    f.push_back(number("source", "bandwidth_ghz", POLENT_ACCESS(source.bandwidth_ghz)));
    f.push_back(number("source", "loss_db", POLENT_ACCESS(source.loss_db)));
    f.push_back(number("source", "extra_loss_db", POLENT_ACCESS(source.extra_loss_db)));
    f.push_back(number("source", "unaccounted_efficiency", POLENT_ACCESS(source.unaccounted_efficiency)));
    f.push_back(number("source", "observed_coincidence_rate", POLENT_ACCESS(source.observed_coincidence_rate)));

    f.push_back(number("grid", "span_nm", POLENT_ACCESS(grid.span_nm)));
    f.push_back(integer<std::uint64_t>("grid", "points", POLENT_ACCESS(grid.points)));

    f.push_back(boolean("filters", "enabled", POLENT_ACCESS(filters.enabled)));
    f.push_back(integer<std::int64_t>("filters", "plus_channel", POLENT_ACCESS(filters.plus_channel)));
    f.push_back(integer<std::int64_t>("filters", "minus_channel", POLENT_ACCESS(filters.minus_channel)));
    f.push_back(number("filters", "fwhm_ghz", POLENT_ACCESS(filters.fwhm_ghz)));
    f.push_back(number("filters", "order", POLENT_ACCESS(filters.order)));

    f.push_back(boolean("detectors", "counting", POLENT_ACCESS(detectors.counting)));
    f.push_back(boolean("detectors", "poisson_noise", POLENT_ACCESS(detectors.poisson_noise)));
    f.push_back(number("detectors", "window_ns", POLENT_ACCESS(detectors.window_ns)));
    f.push_back(number("detectors", "integration_s", POLENT_ACCESS(detectors.integration_s)));
    f.push_back(number("detectors", "first_efficiency", POLENT_ACCESS(detectors.first.efficiency)));
    f.push_back(number("detectors", "first_dark_per_ns", POLENT_ACCESS(detectors.first.dark_prob_per_ns)));
    f.push_back(detector("first_mode", POLENT_ACCESS(detectors.first.mode)));
    f.push_back(number("detectors", "second_efficiency", POLENT_ACCESS(detectors.second.efficiency)));
    f.push_back(number("detectors", "second_dark_per_ns", POLENT_ACCESS(detectors.second.dark_prob_per_ns)));
    f.push_back(detector("second_mode", POLENT_ACCESS(detectors.second.mode)));

    f.push_back(number("hom", "tau_min_ps", POLENT_ACCESS(hom.tau_min_ps)));
    f.push_back(number("hom", "tau_max_ps", POLENT_ACCESS(hom.tau_max_ps)));
    f.push_back(number("hom", "tau_step_ps", POLENT_ACCESS(hom.tau_step_ps)));
    f.push_back(number("hom", "device_visibility", POLENT_ACCESS(hom.device_visibility)));
    f.push_back(number("hom", "phase_deg", POLENT_ACCESS(hom.phase_deg)));
    f.push_back({"hom", "phases_deg", [](ExperimentConfig& c, const std::string& v) { c.hom.phases_deg = parse_list(v); },
                 [](const ExperimentConfig& c) { return format_list(c.hom.phases_deg); }});
    f.push_back(number("hom", "channel_delay_ps", POLENT_ACCESS(hom.channel_delay_ps)));

    f.push_back(number("bell", "hwp_min_deg", POLENT_ACCESS(bell.hwp_min_deg)));
    f.push_back(number("bell", "hwp_max_deg", POLENT_ACCESS(bell.hwp_max_deg)));
    f.push_back(number("bell", "hwp_step_deg", POLENT_ACCESS(bell.hwp_step_deg)));
    f.push_back(number("bell", "state_visibility", POLENT_ACCESS(bell.state_visibility)));
    f.push_back(number("bell", "phase_deg", POLENT_ACCESS(bell.phase_deg)));
    f.push_back(number("bell", "a_deg", POLENT_ACCESS(bell.a_deg)));
    f.push_back(number("bell", "a_prime_deg", POLENT_ACCESS(bell.a_prime_deg)));
    f.push_back(number("bell", "b_deg", POLENT_ACCESS(bell.b_deg)));
    f.push_back(number("bell", "b_prime_deg", POLENT_ACCESS(bell.b_prime_deg)));
    return f;
  }();
  return table;
}

#undef POLENT_ACCESS

inline const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

}  // namespace detail

/// Keys of `tree` applied on top of `base`. A `preset` key in [experiment]
/// is resolved first through `resolve_preset`.
inline ExperimentConfig apply_tree(const boost::property_tree::ptree& tree, ExperimentConfig base,
                                   const std::function<ExperimentConfig(const std::string&)>& resolve_preset) {
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    const bool known = std::any_of(detail::fields().begin(), detail::fields().end(),
                                   [&](const detail::Field& f) { return f.section == section; });
    if (!known) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!detail::find_field(section, key)) throw ConfigError("unknown key [" + section + "] " + key);
      if (!value.empty()) throw ConfigError("nested value under [" + section + "] " + key);
    }
  }
  if (const auto preset = tree.get_optional<std::string>("experiment.preset"); preset && !preset->empty()) {
    if (!resolve_preset) throw ConfigError("presets are not available here");
    base = resolve_preset(*preset);
    base.preset = *preset;
  }
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      const auto* field = detail::find_field(section, key);
      try {
        field->read(base, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
      }
    }
  }
  return base;
}

inline ExperimentConfig parse_config(std::istream& in,
                                     const std::function<ExperimentConfig(const std::string&)>& resolve_preset = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return apply_tree(tree, ExperimentConfig{}, resolve_preset);
}

/// Full INI text. With `include_execution` false the thread count and
/// output path are omitted, which makes the text depend only on what is
/// computed.
inline std::string serialize_config(const ExperimentConfig& cfg, bool include_execution = true) {
  std::string out;
  std::string_view current;
  for (const auto& f : detail::fields()) {
    if (f.execution && !include_execution) continue;
    if (f.section != current) {
      if (!current.empty()) out += '\n';
      out += '[' + std::string(f.section) + "]\n";
      current = f.section;
    }
    out += std::string(f.key) + " = " + f.write(cfg) + '\n';
  }
  return out;
}

/// Checks every range and cross-field constraint the scenarios rely on.
inline void validate_fields(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  auto finite = [](double x) { return std::isfinite(x); };
  require(c.threads >= 1 && c.threads <= 256, "[experiment] threads must be in [1, 256]");

  const auto& s = c.source;
  require(finite(s.degeneracy_nm) && s.degeneracy_nm > 0.0, "[source] degeneracy_nm must be positive");
  require(finite(s.fwhm_nm) && s.fwhm_nm > 0.0, "[source] fwhm_nm must be positive");
  require(finite(s.walkoff_ps), "[source] walkoff_ps must be finite");
  require(finite(s.pmf_length_m) && s.pmf_length_m >= 0.0, "[source] pmf_length_m must be >= 0");
  require(finite(s.pmf_rate_ps_per_m) && s.pmf_rate_ps_per_m > 0.0, "[source] pmf_rate_ps_per_m must be positive");
  require(finite(s.brightness) && s.brightness >= 0.0, "[source] brightness must be >= 0");
  require(finite(s.pump_mw) && s.pump_mw >= 0.0, "[source] pump_mw must be >= 0");
  require(finite(s.bandwidth_ghz) && s.bandwidth_ghz >= 0.0, "[source] bandwidth_ghz must be >= 0");
  require(finite(s.loss_db) && s.loss_db >= 0.0, "[source] loss_db must be >= 0");
  require(finite(s.extra_loss_db) && s.extra_loss_db >= 0.0, "[source] extra_loss_db must be >= 0");
  require(s.unaccounted_efficiency > 0.0 && s.unaccounted_efficiency <= 1.0,
          "[source] unaccounted_efficiency must be in (0, 1]");
  require(finite(s.observed_coincidence_rate) && s.observed_coincidence_rate >= 0.0,
          "[source] observed_coincidence_rate must be >= 0");

  require(finite(c.grid.span_nm) && c.grid.span_nm > 0.0, "[grid] span_nm must be positive");
  require(c.grid.points >= 16 && c.grid.points <= (1u << 20), "[grid] points must be in [16, 1048576]");

  require(finite(c.filters.fwhm_ghz) && c.filters.fwhm_ghz > 0.0, "[filters] fwhm_ghz must be positive");
  require(finite(c.filters.order) && c.filters.order >= 1.0, "[filters] order must be >= 1");
  require(c.filters.plus_channel < c.filters.minus_channel,
          "[filters] the + (long-wavelength) channel must have the lower ITU number");

  const auto& d = c.detectors;
  require(finite(d.window_ns) && d.window_ns > 0.0, "[detectors] window_ns must be positive");
  require(finite(d.integration_s) && d.integration_s > 0.0, "[detectors] integration_s must be positive");
  for (const auto* det : {&d.first, &d.second}) {
    require(det->efficiency >= 0.0 && det->efficiency <= 1.0, "[detectors] efficiencies must be in [0, 1]");
    require(finite(det->dark_prob_per_ns) && det->dark_prob_per_ns >= 0.0,
            "[detectors] dark-count probabilities must be >= 0");
  }
  require(d.first.mode == DetectorMode::free_running,
          "[detectors] first_mode must be free_running (it triggers the gate)");

  const auto& h = c.hom;
  require(finite(h.tau_min_ps) && finite(h.tau_max_ps) && finite(h.tau_step_ps), "[hom] delays must be finite");
  require(h.tau_step_ps > 0.0, "[hom] tau_step_ps must be positive");
  require(h.tau_max_ps > h.tau_min_ps, "[hom] empty scan range (tau_max_ps <= tau_min_ps)");
  require((h.tau_max_ps - h.tau_min_ps) / h.tau_step_ps <= 1e5, "[hom] scan has more than 100000 points");
  require((h.tau_max_ps - h.tau_min_ps) / h.tau_step_ps >= 4.0, "[hom] scan needs at least 5 points");
  require(h.device_visibility >= 0.0 && h.device_visibility <= 1.0, "[hom] device_visibility must be in [0, 1]");
  require(finite(h.phase_deg) && finite(h.channel_delay_ps), "[hom] phase and channel delay must be finite");
  require(!h.phases_deg.empty() && h.phases_deg.size() <= 64, "[hom] phases_deg needs 1 to 64 entries");
  for (double p : h.phases_deg) require(finite(p), "[hom] phases_deg must be finite");

  const auto& b = c.bell;
  require(finite(b.hwp_min_deg) && finite(b.hwp_max_deg) && finite(b.hwp_step_deg), "[bell] angles must be finite");
  require(b.hwp_step_deg > 0.0 && b.hwp_max_deg > b.hwp_min_deg, "[bell] empty Bob grid");
  require((b.hwp_max_deg - b.hwp_min_deg) / b.hwp_step_deg <= 1e5, "[bell] Bob grid has more than 100000 points");
  require(b.state_visibility >= 0.0 && b.state_visibility <= 1.0, "[bell] state_visibility must be in [0, 1]");
  for (double x : {b.phase_deg, b.a_deg, b.a_prime_deg, b.b_deg, b.b_prime_deg})
    require(finite(x), "[bell] angles must be finite");

  if (c.scenario == Scenario::chsh) {
    auto near = [](double x, double y) { return std::abs(std::remainder(x - y, 180.0)) < 1e-9; };
    require(near(b.a_deg, 0.0) && near(b.a_prime_deg, 45.0),
            "[bell] a_deg and a_prime_deg must be the H (0) and D (45) analyzer settings");
  }
}

}  // namespace polent::harness
