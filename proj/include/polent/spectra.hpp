#pragma once

// Source emission spectra, DWDM filter transmissions and the two-photon
// spectral overlap that sets the shape of the HOM dip.
//
// Frequencies are in THz, delays in ps, so a phase is 2*pi*f*tau directly.
// Band labels follow wavelength: `plus` is the long-wavelength window
// (ITU-46, 1540.56 nm), `minus` the short-wavelength one (ITU-47).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polent/common.hpp"

namespace polent {

/// Uniform frequency sampling. The center is the degeneracy frequency of
/// the pair source: the partner of a photon at sample i sits at sample
/// n-1-i (monochromatic pump at twice the center frequency).
class FrequencyGrid {
 public:
  FrequencyGrid(double center_thz, double span_thz, std::size_t n_points)
      : center_thz_(center_thz), span_thz_(span_thz), n_points_(n_points) {
    if (n_points_ < 2) throw std::invalid_argument("FrequencyGrid: need at least 2 points");
    if (!(span_thz_ > 0.0) || !std::isfinite(span_thz_))
      throw std::invalid_argument("FrequencyGrid: span must be positive");
    if (!(center_thz_ - 0.5 * span_thz_ > 0.0) || !std::isfinite(center_thz_))
      throw std::invalid_argument("FrequencyGrid: all sample frequencies must be positive");
  }

  /// Grid spanning `span_nm` of wavelength around `center_nm`.
  static FrequencyGrid around_wavelength(double center_nm, double span_nm = 6.0,
                                         std::size_t n_points = 4096) {
    if (!(span_nm > 0.0) || !(center_nm > 0.5 * span_nm))
      throw std::invalid_argument("FrequencyGrid: invalid wavelength window");
    const double span = wavelength_to_thz(center_nm - 0.5 * span_nm) -
                        wavelength_to_thz(center_nm + 0.5 * span_nm);
    return FrequencyGrid(wavelength_to_thz(center_nm), span, n_points);
  }

  double center_thz() const { return center_thz_; }
  double span_thz() const { return span_thz_; }
  std::size_t size() const { return n_points_; }
  double step() const { return span_thz_ / static_cast<double>(n_points_ - 1); }
  double min_thz() const { return center_thz_ - 0.5 * span_thz_; }
  double max_thz() const { return center_thz_ + 0.5 * span_thz_; }

  /// Offset of sample i from the center; exactly antisymmetric in i.
  double offset(std::size_t i) const {
    return (static_cast<double>(i) - 0.5 * static_cast<double>(n_points_ - 1)) * step();
  }
  double frequency(std::size_t i) const { return center_thz_ + offset(i); }
  std::size_t mirror(std::size_t i) const { return n_points_ - 1 - i; }
  bool contains(double thz) const { return thz >= min_thz() && thz <= max_thz(); }

  bool operator==(const FrequencyGrid&) const = default;

 private:
  double center_thz_;
  double span_thz_;
  std::size_t n_points_;
};

/// Sampled complex spectral amplitude; |amplitude|^2 is a spectral density
/// (per THz) for sources and an intensity transmission for filters.
class SpectralProfile {
 public:
  SpectralProfile(FrequencyGrid grid, std::vector<Amplitude> amplitude)
      : grid_(grid), amplitude_(std::move(amplitude)) {
    if (amplitude_.size() != grid_.size())
      throw std::invalid_argument("SpectralProfile: amplitude count does not match grid");
  }

  static SpectralProfile constant(const FrequencyGrid& grid, Amplitude value) {
    return SpectralProfile(grid, std::vector<Amplitude>(grid.size(), value));
  }

  const FrequencyGrid& grid() const { return grid_; }
  const std::vector<Amplitude>& amplitude() const { return amplitude_; }
  Amplitude operator[](std::size_t i) const { return amplitude_[i]; }
  std::size_t size() const { return amplitude_.size(); }

  double intensity(std::size_t i) const { return std::norm(amplitude_[i]); }

  /// Trapezoidal integral of |amplitude|^2 over the grid.
  double intensity_integral() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < amplitude_.size(); ++i) {
      const double w = (i == 0 || i + 1 == amplitude_.size()) ? 0.5 : 1.0;
      sum += w * std::norm(amplitude_[i]);
    }
    return sum * grid_.step();
  }

  double peak_intensity() const {
    double peak = 0.0;
    for (const auto& a : amplitude_) peak = std::max(peak, std::norm(a));
    return peak;
  }

 private:
  FrequencyGrid grid_;
  std::vector<Amplitude> amplitude_;
};

namespace detail {

inline void require_same_grid(const SpectralProfile& a, const SpectralProfile& b,
                              const char* where) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

inline double trapezoid(const std::vector<double>& values, double step) {
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    sum += ((i == 0 || i + 1 == values.size()) ? 0.5 : 1.0) * values[i];
  return sum * step;
}

}  // namespace detail

enum class EnvelopeShape { gaussian, sinc2 };

/// Normalized emission envelope of one polarization mode. `fwhm_nm` is the
/// full width at half maximum of the intensity |amplitude|^2.
inline SpectralProfile make_source_spectrum(Polarization /*mode*/, double center_nm, double fwhm_nm,
                                            const FrequencyGrid& grid,
                                            EnvelopeShape shape = EnvelopeShape::gaussian) {
  if (!(fwhm_nm > 0.0) || !std::isfinite(fwhm_nm))
    throw std::invalid_argument("make_source_spectrum: fwhm must be positive");
  if (!(center_nm > fwhm_nm)) throw std::invalid_argument("make_source_spectrum: invalid center");
  const double center = wavelength_to_thz(center_nm);
  if (!grid.contains(center))
    throw std::invalid_argument("make_source_spectrum: center outside grid span");
  const double width = wavelength_to_thz(center_nm - 0.5 * fwhm_nm) -
                       wavelength_to_thz(center_nm + 0.5 * fwhm_nm);
  if (width / grid.step() < 8.0) {
    std::ostringstream msg;
    msg << "make_source_spectrum: grid too coarse, " << width / grid.step()
        << " points across the FWHM (need at least 8)";
    throw std::invalid_argument(msg.str());
  }

  // sinc^2(x) falls to one half at x = 1.391557...
  constexpr double kSincHalf = 1.3915573782515103;
  std::vector<Amplitude> amp(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = (grid.frequency(i) - center) / width;
    double a = 0.0;
    if (shape == EnvelopeShape::gaussian) {
      a = std::exp(-2.0 * std::numbers::ln2 * u * u);
    } else {
      const double x = 2.0 * kSincHalf * u;
      a = x == 0.0 ? 1.0 : std::sin(x) / x;
    }
    amp[i] = a;
  }
  SpectralProfile raw(grid, std::move(amp));
  const double norm = std::sqrt(raw.intensity_integral());
  std::vector<Amplitude> scaled(raw.amplitude());
  for (auto& a : scaled) a /= norm;
  return SpectralProfile(grid, std::move(scaled));
}

/// Intensity FWHM of the central lobe in nm, with linear interpolation
/// between samples at the half-maximum crossings.
inline double measure_fwhm_nm(const SpectralProfile& profile) {
  const auto& grid = profile.grid();
  std::size_t peak = 0;
  for (std::size_t i = 1; i < profile.size(); ++i)
    if (profile.intensity(i) > profile.intensity(peak)) peak = i;
  const double half = 0.5 * profile.intensity(peak);
  if (!(half > 0.0)) throw std::invalid_argument("measure_fwhm_nm: zero profile");
  auto crossing = [&](int dir) {
    std::size_t i = peak;
    while (true) {
      if ((dir < 0 && i == 0) || (dir > 0 && i + 1 == profile.size()))
        throw std::invalid_argument("measure_fwhm_nm: half maximum outside grid");
      const std::size_t j = dir < 0 ? i - 1 : i + 1;
      if (profile.intensity(j) < half) {
        const double t = (profile.intensity(i) - half) / (profile.intensity(i) - profile.intensity(j));
        return grid.frequency(i) + t * (grid.frequency(j) - grid.frequency(i));
      }
      i = j;
    }
  };
  const double f_low = crossing(-1);
  const double f_high = crossing(+1);
  return thz_to_wavelength(f_low) - thz_to_wavelength(f_high);
}

/// Channel on the 100 GHz ITU grid: f = 190.0 THz + n * 0.1 THz.
inline double itu_channel_thz(int channel) { return 190.0 + 0.1 * channel; }

struct FilterSpec {
  double itu_center_nm = 0.0;
  double bandwidth_fwhm_ghz = 95.0;
  double shape_order = 10.0;
  Band role = Band::plus;

  static FilterSpec itu(int channel, Band role, double fwhm_ghz = 95.0, double order = 10.0) {
    return FilterSpec{thz_to_wavelength(itu_channel_thz(channel)), fwhm_ghz, order, role};
  }

  void validate() const {
    if (!(itu_center_nm > 0.0) || !std::isfinite(itu_center_nm))
      throw std::invalid_argument("FilterSpec: center wavelength must be positive");
    if (!(bandwidth_fwhm_ghz > 0.0) || !std::isfinite(bandwidth_fwhm_ghz))
      throw std::invalid_argument("FilterSpec: bandwidth must be positive");
    if (!(shape_order >= 1.0) || !std::isfinite(shape_order))
      throw std::invalid_argument("FilterSpec: shape order must be >= 1");
  }
};

/// Flat-top DWDM passband: intensity transmission
/// exp(-ln2 * |2 (f - fc) / FWHM|^(2 * order)), peak 1 at the channel center.
/// Order 1 is a plain Gaussian.
inline SpectralProfile make_dwdm_filter(const FilterSpec& spec, const FrequencyGrid& grid) {
  spec.validate();
  const double center = wavelength_to_thz(spec.itu_center_nm);
  const double fwhm = spec.bandwidth_fwhm_ghz * 1e-3;
  if (!grid.contains(center - fwhm) || !grid.contains(center + fwhm))
    throw std::invalid_argument("make_dwdm_filter: passband partially outside grid");
  std::vector<Amplitude> amp(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = std::abs(2.0 * (grid.frequency(i) - center) / fwhm);
    amp[i] = std::exp(-0.5 * std::numbers::ln2 * std::pow(u, 2.0 * spec.shape_order));
  }
  return SpectralProfile(grid, std::move(amp));
}

/// Pointwise amplitude product; the result is not renormalized.
inline SpectralProfile filtered_profile(const SpectralProfile& source, const SpectralProfile& filter) {
  detail::require_same_grid(source, filter, "filtered_profile");
  std::vector<Amplitude> amp(source.size());
  for (std::size_t i = 0; i < amp.size(); ++i) amp[i] = source[i] * filter[i];
  return SpectralProfile(source.grid(), std::move(amp));
}

namespace detail {

/// Integral of max(d, 0) over the grid, d interpolated by local cubics.
/// Intervals where d changes sign are split at the cubic's root, so the
/// kink of the positive part costs no accuracy.
inline double positive_part_integral(const std::vector<double>& d, double step) {
  const std::size_t n = d.size();
  if (n < 4) throw std::invalid_argument("positive_part_integral: need at least 4 samples");
  // 8-point Gauss-Legendre on [0, 1].
  static constexpr double gx[4] = {0.0198550717512319, 0.1016667612931866, 0.2372337950418355, 0.4082826787521751};
  static constexpr double gw[4] = {0.0506142681451881, 0.1111905172266872, 0.1568533229389436, 0.1813418916891810};
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (d[k] <= 0.0 && d[k + 1] <= 0.0) continue;
    const std::size_t j0 = std::min(k > 0 ? k - 1 : 0, n - 4);
    // Lagrange cubic through samples j0..j0+3, evaluated at k + t.
    auto cubic = [&](double t) {
      const double x = static_cast<double>(k - j0) + t;
      double sum = 0.0;
      for (int a = 0; a < 4; ++a) {
        double w = 1.0;
        for (int b = 0; b < 4; ++b)
          if (b != a) w *= (x - b) / static_cast<double>(a - b);
        sum += w * d[j0 + a];
      }
      return sum;
    };
    double lo = 0.0, hi = 1.0;
    if ((d[k] > 0.0) != (d[k + 1] > 0.0)) {
      double a = 0.0, b = 1.0;
      const bool rising = d[k + 1] > 0.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        ((cubic(mid) > 0.0) == rising ? b : a) = mid;
      }
      (rising ? lo : hi) = 0.5 * (a + b);
    }
    double part = 0.0;
    for (int g = 0; g < 4; ++g) {
      part += gw[g] * std::max(cubic(lo + (hi - lo) * gx[g]), 0.0);
      part += gw[g] * std::max(cubic(hi - (hi - lo) * gx[g]), 0.0);
    }
    total += part * (hi - lo);
  }
  return total * step;
}

}  // namespace detail

/// Shared area of two transmission curves relative to the area of the
/// first: integral of min(|a|^2, |b|^2) over integral of |a|^2.
inline double filter_overlap(const SpectralProfile& a, const SpectralProfile& b) {
  detail::require_same_grid(a, b, "filter_overlap");
  std::vector<double> own(a.size()), excess(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    own[i] = a.intensity(i);
    excess[i] = a.intensity(i) - b.intensity(i);
  }
  const double area = detail::trapezoid(own, a.grid().step());
  if (!(area > 0.0)) throw std::invalid_argument("filter_overlap: zero filter");
  // min(a, b) = a - max(a - b, 0)
  return std::max(area - detail::positive_part_integral(excess, a.grid().step()), 0.0) / area;
}

/// Fraction of pairs routed to the same window (both + or both -), relative
/// to the pairs split correctly between the windows. The H photon at f has
/// its partner at the mirror frequency; the pair density is the geometric
/// mean of the two marginal densities.
inline double same_side_probability(const SpectralProfile& source_h, const SpectralProfile& source_v,
                                    const SpectralProfile& filt_plus,
                                    const SpectralProfile& filt_minus) {
  detail::require_same_grid(source_h, source_v, "same_side_probability");
  detail::require_same_grid(source_h, filt_plus, "same_side_probability");
  detail::require_same_grid(source_h, filt_minus, "same_side_probability");
  const auto& grid = source_h.grid();
  const std::size_t n = grid.size();
  std::vector<double> same(n), split(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = grid.mirror(i);
    const double pair = std::abs(source_h[i]) * std::abs(source_v[m]);
    const double pp = filt_plus.intensity(i) * filt_plus.intensity(m);
    const double mm = filt_minus.intensity(i) * filt_minus.intensity(m);
    const double pm = filt_plus.intensity(i) * filt_minus.intensity(m);
    const double mp = filt_minus.intensity(i) * filt_plus.intensity(m);
    same[i] = pair * (pp + mm);
    split[i] = pair * (pm + mp);
  }
  const double split_total = detail::trapezoid(split, grid.step());
  if (!(split_total > 0.0))
    throw std::domain_error("same_side_probability: filters transmit no split pairs");
  return detail::trapezoid(same, grid.step()) / split_total;
}

/// Per-photon factor of the filtered joint amplitude: sqrt(source) * filter.
/// plus_H(f) * minus_V(mirror f) then carries the source amplitude once and
/// each photon's filter once.
inline SpectralProfile photon_factor(const SpectralProfile& source, const SpectralProfile& filter) {
  detail::require_same_grid(source, filter, "photon_factor");
  std::vector<Amplitude> amp(source.size());
  for (std::size_t i = 0; i < amp.size(); ++i) amp[i] = std::sqrt(source[i]) * filter[i];
  return SpectralProfile(source.grid(), std::move(amp));
}

namespace detail {

/// Filon-trapezoid weights: exact integral of a linear function against
/// e^{i theta s} over s in [0, 1]. Returns (weight of left, weight of right).
inline std::pair<Amplitude, Amplitude> filon_weights(double theta) {
  const Amplitude i1{0.0, 1.0};
  Amplitude w0, w1;
  if (std::abs(theta) < 1e-3) {
    const double t2 = theta * theta;
    w0 = Amplitude(1.0 - t2 / 6.0, theta / 2.0 - t2 * theta / 24.0);
    w1 = Amplitude(0.5 - t2 / 8.0, theta / 3.0 - t2 * theta / 30.0);
  } else {
    const Amplitude e = std::exp(i1 * theta);
    w0 = (e - 1.0) / (i1 * theta);
    w1 = e / (i1 * theta) + (e - 1.0) / (theta * theta);
  }
  return {w0 - w1, w1};
}

}  // namespace detail

/// Integral of g(f) * exp(i * omega * (f - f0)) over the grid. While the
/// phase advances by at most a quarter turn per step the trapezoid sum is
/// used: it converges spectrally for smooth g that vanishes at the window
/// edges. Faster carriers switch to Filon weights (g piecewise linear),
/// which do not alias.
inline Amplitude oscillatory_integral(const FrequencyGrid& grid, const std::vector<Amplitude>& g,
                                      double omega) {
  const double h = grid.step();
  Amplitude sum{0.0, 0.0};
  if (std::abs(omega * h) <= 0.5 * kPi) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double w = (k == 0 || k + 1 == g.size()) ? 0.5 : 1.0;
      sum += w * std::polar(1.0, omega * grid.offset(k)) * g[k];
    }
    return sum * h;
  }
  const auto [left, right] = detail::filon_weights(omega * h);
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    const Amplitude carrier = std::polar(1.0, omega * grid.offset(k));
    sum += carrier * (left * g[k] + right * g[k + 1]);
  }
  return sum * h;
}

/// Normalized overlap G(tau) of the two-photon amplitudes of |H>+|V>- and
/// |V>+|H>- when the H photon is delayed by tau relative to V:
///
///   A1(f) = plus_H(f) minus_V(f'),  A2(f) = plus_V(f) minus_H(f'),  f' = mirror(f)
///   G(tau) = <A1|A2 e^{-i 4 pi (f - f0) tau}> / (|A1| |A2|)
///
/// `channel_delay_ps` delays the whole + channel; it multiplies both terms
/// by the same phase and therefore cancels.
inline Amplitude interference_kernel(const SpectralProfile& plus_h, const SpectralProfile& plus_v,
                                     const SpectralProfile& minus_h, const SpectralProfile& minus_v,
                                     double tau_ps, double channel_delay_ps = 0.0) {
  detail::require_same_grid(plus_h, plus_v, "interference_kernel");
  detail::require_same_grid(plus_h, minus_h, "interference_kernel");
  detail::require_same_grid(plus_h, minus_v, "interference_kernel");
  if (!std::isfinite(tau_ps) || !std::isfinite(channel_delay_ps))
    throw std::invalid_argument("interference_kernel: delay must be finite");
  const auto& grid = plus_h.grid();
  const std::size_t n = grid.size();
  std::vector<Amplitude> overlap(n);
  std::vector<double> n1(n), n2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = grid.mirror(i);
    const Amplitude channel = std::polar(1.0, kTwoPi * grid.frequency(i) * channel_delay_ps);
    const Amplitude a1 = plus_h[i] * minus_v[m] * channel;
    const Amplitude a2 = plus_v[i] * minus_h[m] * channel;
    overlap[i] = std::conj(a1) * a2;
    n1[i] = std::norm(a1);
    n2[i] = std::norm(a2);
  }
  const double norm = std::sqrt(detail::trapezoid(n1, grid.step()) * detail::trapezoid(n2, grid.step()));
  if (!(norm > 0.0)) throw std::invalid_argument("interference_kernel: all-zero two-photon amplitude");
  return oscillatory_integral(grid, overlap, -2.0 * kTwoPi * tau_ps) / norm;
}

// CSV: header line, then frequency_thz,amp_re,amp_im per sample.

inline void write_profile_csv(std::ostream& out, const SpectralProfile& profile) {
  out << "frequency_thz,amp_re,amp_im\n";
  for (std::size_t i = 0; i < profile.size(); ++i) {
    out << format_double(profile.grid().frequency(i)) << ',' << format_double(profile[i].real())
        << ',' << format_double(profile[i].imag()) << '\n';
  }
}

inline SpectralProfile read_profile_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("frequency_thz,amp_re,amp_im", 0) != 0)
    throw std::invalid_argument("read_profile_csv: missing header");
  std::vector<double> freq;
  std::vector<Amplitude> amp;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::invalid_argument("read_profile_csv: malformed row '" + line + "'");
    std::string_view view(line);
    freq.push_back(parse_double(view.substr(0, c1)));
    amp.emplace_back(parse_double(view.substr(c1 + 1, c2 - c1 - 1)), parse_double(view.substr(c2 + 1)));
  }
  if (freq.size() < 2) throw std::invalid_argument("read_profile_csv: need at least 2 rows");
  const double span = freq.back() - freq.front();
  FrequencyGrid grid(0.5 * (freq.front() + freq.back()), span, freq.size());
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (std::abs(freq[i] - grid.frequency(i)) > 1e-9 * grid.center_thz())
      throw std::invalid_argument("read_profile_csv: frequencies are not uniformly spaced");
  }
  return SpectralProfile(grid, std::move(amp));
}

}  // namespace polent
