#pragma once

// Two-photon polarization state over the (+, -) channel pair and the optical
// elements acting on it. Temporal walk-off and channel delay travel with the
// state as classical metadata; the spectral consequences are evaluated in
// interference.hpp.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polent/common.hpp"

namespace polent {

using Jones = Eigen::Matrix2cd;

/// Amplitudes over the ordered basis H+H-, H+V-, V+H-, V+V-.
struct BiphotonState {
  std::array<Amplitude, 4> amp{};
  double walkoff_h_minus_v_ps = 0.0;  ///< delay of H relative to V
  double channel_delay_ps = 0.0;      ///< extra delay of the + channel relative to -

  static constexpr std::size_t index(Polarization plus, Polarization minus) {
    return 2 * static_cast<std::size_t>(plus) + static_cast<std::size_t>(minus);
  }
  Amplitude at(Polarization plus, Polarization minus) const { return amp[index(plus, minus)]; }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& a : amp) s += std::norm(a);
    return s;
  }
};

/// (|H>+|V>- + e^{i phi} |V>+|H>-) / sqrt(2)
inline BiphotonState make_psi_phi(double phi) {
  BiphotonState s;
  s.amp[BiphotonState::index(Polarization::H, Polarization::V)] = std::sqrt(0.5);
  s.amp[BiphotonState::index(Polarization::V, Polarization::H)] = std::polar(std::sqrt(0.5), phi);
  return s;
}

inline BiphotonState make_product(Polarization plus, Polarization minus) {
  BiphotonState s;
  s.amp[BiphotonState::index(plus, minus)] = 1.0;
  return s;
}

enum class Channel { plus, minus, both };

enum class ElementKind {
  HWP,
  QWP,
  GeneralUnitary,
  SBPhase,
  BirefringentDelay,
  ChannelDelay,
  PBSProject,
};

/// A parameterized element. `parameter` is an angle in degrees for wave
/// plates, a phase in radians for SBPhase and a delay in ps for the delay
/// kinds; GeneralUnitary carries its Jones matrix, PBSProject its outcome.
struct OpticalElement {
  ElementKind kind = ElementKind::HWP;
  double parameter = 0.0;
  Channel target = Channel::both;
  Jones unitary = Jones::Identity();
  Polarization outcome = Polarization::H;

  static OpticalElement hwp(double angle_deg, Channel target = Channel::both) {
    return {ElementKind::HWP, angle_deg, target, Jones::Identity(), Polarization::H};
  }
  static OpticalElement qwp(double angle_deg, Channel target = Channel::both) {
    return {ElementKind::QWP, angle_deg, target, Jones::Identity(), Polarization::H};
  }
  static OpticalElement unitary_element(const Jones& u, Channel target = Channel::both) {
    if (!(u.adjoint() * u).isApprox(Jones::Identity(), 1e-12))
      throw std::invalid_argument("OpticalElement: matrix is not unitary");
    return {ElementKind::GeneralUnitary, 0.0, target, u, Polarization::H};
  }
  /// Ideal fiber polarization controller: rotation of the polarization
  /// frame by `angle_deg` (H -> cos H + sin V).
  static OpticalElement rotator(double angle_deg, Channel target = Channel::both) {
    const double a = deg_to_rad(angle_deg);
    Jones r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return {ElementKind::GeneralUnitary, angle_deg, target, r, Polarization::H};
  }
  /// Soleil-Babinet plate: phase e^{i phi} on the V component.
  static OpticalElement sb_phase(double phi_rad, Channel target = Channel::plus) {
    return {ElementKind::SBPhase, phi_rad, target, Jones::Identity(), Polarization::H};
  }
  /// Positive values delay H relative to V (waveguide); a PMF rotated by
  /// 90 degrees contributes a negative delay.
  static OpticalElement birefringent_delay(double delay_ps) {
    return {ElementKind::BirefringentDelay, delay_ps, Channel::both, Jones::Identity(), Polarization::H};
  }
  static OpticalElement pmf_compensator(double length_m, double rate_ps_per_m) {
    return birefringent_delay(-length_m * rate_ps_per_m);
  }
  static OpticalElement channel_delay(double delay_ps) {
    return {ElementKind::ChannelDelay, delay_ps, Channel::plus, Jones::Identity(), Polarization::H};
  }
  static OpticalElement pbs_project(Polarization outcome, Channel target) {
    return {ElementKind::PBSProject, 0.0, target, Jones::Identity(), outcome};
  }
};

/// Half-wave plate with fast axis at `angle_deg` from H.
inline Jones hwp_jones(double angle_deg) {
  const double t = 2.0 * deg_to_rad(angle_deg);
  Jones j;
  j << std::cos(t), std::sin(t), std::sin(t), -std::cos(t);
  return j;
}

/// Quarter-wave plate with fast axis at `angle_deg` from H.
inline Jones qwp_jones(double angle_deg) {
  const double t = deg_to_rad(angle_deg);
  const double c = std::cos(t), s = std::sin(t);
  const Amplitude i1{0.0, 1.0};
  Jones j;
  j << c * c + i1 * s * s, (1.0 - i1) * s * c, (1.0 - i1) * s * c, s * s + i1 * c * c;
  return std::exp(-i1 * (kPi / 4.0)) * j;
}

namespace detail {

inline bool targets(Channel target, Channel which) {
  return target == Channel::both || target == which;
}

inline void apply_jones(BiphotonState& s, const Jones& j, Channel target) {
  if (targets(target, Channel::plus)) {
    for (std::size_t m = 0; m < 2; ++m) {
      const Amplitude h = s.amp[m], v = s.amp[2 + m];
      s.amp[m] = j(0, 0) * h + j(0, 1) * v;
      s.amp[2 + m] = j(1, 0) * h + j(1, 1) * v;
    }
  }
  if (targets(target, Channel::minus)) {
    for (std::size_t p = 0; p < 2; ++p) {
      const Amplitude h = s.amp[2 * p], v = s.amp[2 * p + 1];
      s.amp[2 * p] = j(0, 0) * h + j(0, 1) * v;
      s.amp[2 * p + 1] = j(1, 0) * h + j(1, 1) * v;
    }
  }
}

}  // namespace detail

inline BiphotonState apply_element(BiphotonState state, const OpticalElement& element) {
  if (!std::isfinite(element.parameter))
    throw std::invalid_argument("apply_element: parameter must be finite");
  switch (element.kind) {
    case ElementKind::HWP:
      detail::apply_jones(state, hwp_jones(element.parameter), element.target);
      return state;
    case ElementKind::QWP:
      detail::apply_jones(state, qwp_jones(element.parameter), element.target);
      return state;
    case ElementKind::GeneralUnitary:
      detail::apply_jones(state, element.unitary, element.target);
      return state;
    case ElementKind::SBPhase: {
      Jones j = Jones::Identity();
      j(1, 1) = std::polar(1.0, element.parameter);
      detail::apply_jones(state, j, element.target);
      return state;
    }
    case ElementKind::BirefringentDelay:
      state.walkoff_h_minus_v_ps += element.parameter;
      return state;
    case ElementKind::ChannelDelay:
      state.channel_delay_ps += element.parameter;
      return state;
    case ElementKind::PBSProject: {
      Jones j = Jones::Zero();
      const auto k = static_cast<Eigen::Index>(element.outcome);
      j(k, k) = 1.0;
      detail::apply_jones(state, j, element.target);
      return state;
    }
  }
  throw std::invalid_argument("apply_element: unknown element kind");
}

inline BiphotonState apply_elements(BiphotonState state, const std::vector<OpticalElement>& elements) {
  for (const auto& e : elements) state = apply_element(state, e);
  return state;
}

struct Projection {
  double probability = 0.0;
  BiphotonState state;  ///< renormalized post-measurement state (zero if probability is 0)
};

/// Born-rule probability of the joint f-PBS outcome. Temporal
/// distinguishability is not considered here.
inline Projection pbs_project(const BiphotonState& state, Polarization outcome_plus,
                              Polarization outcome_minus) {
  Projection result;
  result.state = state;
  result.state.amp = {};
  const std::size_t k = BiphotonState::index(outcome_plus, outcome_minus);
  result.probability = std::norm(state.amp[k]);
  if (result.probability > 0.0) result.state.amp[k] = state.amp[k] / std::sqrt(result.probability);
  return result;
}

/// Linear-polarization analysis at the given angles: HWP at half the
/// analyzer angle on each channel, then transmission through a fixed PBS.
inline std::vector<OpticalElement> analyzer_projector(double angle_plus_deg, double angle_minus_deg) {
  if (!std::isfinite(angle_plus_deg) || !std::isfinite(angle_minus_deg))
    throw std::invalid_argument("analyzer_projector: angles must be finite");
  return {
      OpticalElement::hwp(0.5 * angle_plus_deg, Channel::plus),
      OpticalElement::hwp(0.5 * angle_minus_deg, Channel::minus),
      OpticalElement::pbs_project(Polarization::H, Channel::plus),
      OpticalElement::pbs_project(Polarization::H, Channel::minus),
  };
}

/// Gauge fix: first nonzero amplitude real and positive.
inline BiphotonState canonical_gauge(BiphotonState state, double zero_tol = 1e-12) {
  for (const auto& a : state.amp) {
    if (std::abs(a) > zero_tol) {
      const Amplitude phase = std::conj(a) / std::abs(a);
      for (auto& b : state.amp) b *= phase;
      break;
    }
  }
  return state;
}

inline bool same_up_to_global_phase(const BiphotonState& a, const BiphotonState& b, double tol = 1e-9) {
  const auto ga = canonical_gauge(a);
  const auto gb = canonical_gauge(b);
  for (std::size_t i = 0; i < 4; ++i)
    if (std::abs(ga.amp[i] - gb.amp[i]) > tol) return false;
  return true;
}

/// One CSV row: re,im for the four amplitudes, then walk-off and channel delay.
inline std::string state_csv_row(const BiphotonState& s) {
  std::string row;
  for (const auto& a : s.amp) row += format_double(a.real()) + ',' + format_double(a.imag()) + ',';
  row += format_double(s.walkoff_h_minus_v_ps) + ',' + format_double(s.channel_delay_ps);
  return row;
}

inline BiphotonState parse_state_csv_row(const std::string& row) {
  std::vector<double> values;
  std::size_t start = 0;
  while (true) {
    const auto comma = row.find(',', start);
    values.push_back(parse_double(std::string_view(row).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.size() != 10) throw std::invalid_argument("parse_state_csv_row: expected 10 fields");
  BiphotonState s;
  for (std::size_t i = 0; i < 4; ++i) s.amp[i] = Amplitude(values[2 * i], values[2 * i + 1]);
  s.walkoff_h_minus_v_ps = values[8];
  s.channel_delay_ps = values[9];
  return s;
}

}  // namespace polent
