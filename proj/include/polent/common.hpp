#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

#ifndef POLENT_VERSION
#define POLENT_VERSION "0.3.0"
#endif

namespace polent {

using Amplitude = std::complex<double>;

/// Speed of light expressed so that lambda[nm] * f[THz] = c.
inline constexpr double kSpeedOfLightNmThz = 299792.458;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class Polarization { H, V };

/// Wavelength windows of the splitting filters. `plus` is the long-wavelength
/// (low-frequency) window, `minus` the short-wavelength one.
enum class Band { plus, minus };

inline double wavelength_to_thz(double nm) { return kSpeedOfLightNmThz / nm; }
inline double thz_to_wavelength(double thz) { return kSpeedOfLightNmThz / thz; }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Per-photon power transmission for a loss in dB.
inline double db_to_transmission(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

inline std::string_view to_string(Polarization p) { return p == Polarization::H ? "H" : "V"; }
inline std::string_view to_string(Band b) { return b == Band::plus ? "plus" : "minus"; }

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return value;
}

}  // namespace polent
