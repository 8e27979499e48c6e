#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "polent/bell.hpp"

using namespace polent;

namespace {

constexpr double kTsirelson = 2.0 * std::numbers::sqrt2;

// Born rule by direct contraction with the product of two linear
// polarization vectors.
double contraction(const BiphotonState& s, double a_deg, double b_deg) {
  const double a = deg_to_rad(a_deg), b = deg_to_rad(b_deg);
  const Amplitude amp = std::cos(a) * std::cos(b) * s.amp[0] + std::cos(a) * std::sin(b) * s.amp[1] +
                        std::sin(a) * std::cos(b) * s.amp[2] + std::sin(a) * std::sin(b) * s.amp[3];
  return std::norm(amp);
}

const std::vector<double>& bob_grid() {
  static const std::vector<double> g = BellSettings::hwp_grid(0.0, 180.0, 5.0);
  return g;
}

CountingConfig quiet_counting(std::uint64_t seed) {
  CountingConfig c;
  c.pair_rate_at_source = 1e6;
  c.per_photon_transmission = 0.5;
  c.coincidence_window_ns = 1e-3;
  c.integration_time_s = 5.0;
  c.first = {0.2, 0.0, DetectorMode::free_running, "a"};
  c.second = {0.2, 0.0, DetectorMode::free_running, "b"};
  c.rng_seed = seed;
  return c;
}

// Two free-running IDQ-220 at the lab coincidence level, 5 s per point.
CountingConfig lab_counting(std::uint64_t seed) {
  CountingConfig c;
  c.pair_rate_at_source = brightness_to_pair_rate(2e4, 2.5, 100.0);
  c.per_photon_transmission =
      db_to_transmission(3.0) * source_budget(2e4, 2.5, 100.0, 3.0, 0.2, 0.2, 1100.0).unaccounted_efficiency;
  c.integration_time_s = 5.0;
  c.first = DetectorParams::idq220();
  c.second = DetectorParams::idq220();
  c.rng_seed = seed;
  return c;
}

double wrapped_difference_deg(double a, double b) { return std::remainder(a - b, 360.0); }

}  // namespace

TEST(JointProbability, PsiPlusExamples) {
  const auto psi = make_psi_phi(0.0);
  EXPECT_NEAR(joint_probability(psi, 0.0, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(joint_probability(psi, 45.0, 45.0), 0.5, 1e-15);
  EXPECT_NEAR(joint_probability(psi, 45.0, 45.0), contraction(psi, 45.0, 45.0), 1e-15);
}

TEST(JointProbability, PsiMinusVanishesOnEqualAngles) {
  const auto psi = make_psi_phi(kPi);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  for (int n = 0; n < 10; ++n) {
    const double t = angle(rng);
    EXPECT_NEAR(joint_probability(psi, t, t), 0.0, 1e-15) << t;
    EXPECT_NEAR(contraction(psi, t, t), 0.0, 1e-15) << t;
  }
}

TEST(JointProbability, PsiPlusDependsOnlyOnAngleSum) {
  const auto psi = make_psi_phi(0.0);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  for (int n = 0; n < 50; ++n) {
    const double a = angle(rng), b = angle(rng), shift = angle(rng);
    ASSERT_NEAR(joint_probability(psi, a, b), joint_probability(psi, a + shift, b - shift), 1e-14);
  }
}

TEST(Correlation, ProductStateOracle) {
  const auto hv = make_product(Polarization::H, Polarization::V);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  for (int n = 0; n < 50; ++n) {
    const double a = angle(rng), b = angle(rng);
    ASSERT_NEAR(correlation(hv, a, b), -std::cos(2.0 * deg_to_rad(a)) * std::cos(2.0 * deg_to_rad(b)), 1e-14);
  }
}

TEST(Correlation, SymmetricForPsiPlus) {
  const auto psi = make_psi_phi(0.0);
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  for (int n = 0; n < 50; ++n) {
    const double a = angle(rng), b = angle(rng);
    ASSERT_NEAR(correlation(psi, a, b), correlation(psi, b, a), 1e-14);
    ASSERT_NEAR(correlation(psi, a, b), -std::cos(2.0 * deg_to_rad(a + b)), 1e-14);
  }
}

TEST(Chsh, TsirelsonPointAtDefaultAngles) {
  EXPECT_NEAR(chsh_S(make_psi_phi(0.0)).S, kTsirelson, 1e-9);
  EXPECT_EQ(chsh_S(make_psi_phi(0.0)).sigma_S, 0.0);
}

TEST(Chsh, TextbookAnglesSuitTheSinglet) {
  const ChshAngles textbook{0.0, 45.0, 22.5, 67.5};
  EXPECT_NEAR(chsh_S(make_psi_phi(kPi), textbook).S, kTsirelson, 1e-9);
  EXPECT_NEAR(chsh_S(make_psi_phi(0.0), textbook).S, 0.0, 1e-9);
}

TEST(Chsh, NeverAboveTsirelson) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  for (int n = 0; n < 500; ++n) {
    auto s = make_psi_phi(deg_to_rad(angle(rng)));
    s = apply_element(s, OpticalElement::qwp(angle(rng), Channel::plus));
    s = apply_element(s, OpticalElement::hwp(angle(rng), Channel::minus));
    const ChshAngles a{angle(rng), angle(rng), angle(rng), angle(rng)};
    ASSERT_LE(chsh_S(s, a).S, kTsirelson + 1e-12);
  }
}

TEST(Chsh, LinearInCorrelationScale) {
  const auto psi = make_psi_phi(0.0);
  const ChshAngles a{};
  for (double v : {0.0, 0.3, 0.992, 1.0}) {
    const std::array<CorrelationEstimate, 4> e{{{v * correlation(psi, a.a, a.b), 0.001},
                                                {v * correlation(psi, a.a, a.b_prime), 0.002},
                                                {v * correlation(psi, a.a_prime, a.b), 0.002},
                                                {v * correlation(psi, a.a_prime, a.b_prime), 0.004}}};
    const auto r = chsh_S(std::span<const CorrelationEstimate, 4>(e));
    EXPECT_NEAR(r.S, v * kTsirelson, 1e-12);
    EXPECT_NEAR(r.sigma_S, 0.005, 1e-15);
  }
  EXPECT_NEAR(0.992 * kTsirelson, 2.806, 5e-4);
}

TEST(Chsh, Significance) {
  EXPECT_NEAR(violation_significance(2.824, 0.007), 117.71, 0.01);
  EXPECT_GT(violation_significance(2.806, 0.005), 100.0);
  EXPECT_THROW(violation_significance(2.8, 0.0), std::invalid_argument);
}

TEST(Fringe, IdealDiagonalHasUnitVisibility) {
  const auto r = fringe_scan(make_psi_phi(0.0), 45.0, bob_grid(), std::nullopt);
  ASSERT_TRUE(r.fit.converged);
  EXPECT_NEAR(r.fit.visibility, 1.0, 1e-3);
  EXPECT_EQ(r.control_label, "control_deg");
}

TEST(Fringe, ForwardFitRecoversInjectedVisibility) {
  FringeOptions opts;
  opts.state_visibility = 0.90;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = fringe_scan(make_psi_phi(0.0), 45.0, bob_grid(), quiet_counting(seed), opts);
    EXPECT_NEAR(r.fit.visibility, 0.90, 0.005) << seed;
  }
}

TEST(Fringe, OrthogonalAnalyzersAreAntiphase) {
  const BellSettings settings{};
  std::array<ScanResult, 4> exact, noisy;
  for (std::size_t k = 0; k < 4; ++k) {
    FringeOptions opts;
    opts.stream_offset = static_cast<std::uint64_t>(k) << 32;
    exact[k] = fringe_scan(make_psi_phi(0.0), settings.alice_angles[k], bob_grid(), std::nullopt, opts);
    noisy[k] = fringe_scan(make_psi_phi(0.0), settings.alice_angles[k], bob_grid(), lab_counting(8), opts);
  }
  for (std::size_t k : {0u, 2u}) {
    EXPECT_NEAR(std::abs(wrapped_difference_deg(exact[k].fit.phase_deg, exact[k + 1].fit.phase_deg)), 180.0, 1e-6);
    // Poisson noise moves each fitted phase by a fraction of a degree.
    EXPECT_NEAR(std::abs(wrapped_difference_deg(noisy[k].fit.phase_deg, noisy[k + 1].fit.phase_deg)), 180.0, 2.0);
  }
}

TEST(Fringe, LabNoiseBands) {
  const BellSettings settings{};
  FringeOptions opts;
  opts.state_visibility = 0.995;
  double raw = 0.0, net = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    opts.stream_offset = static_cast<std::uint64_t>(k) << 32;
    const auto r = fringe_scan(make_psi_phi(0.0), settings.alice_angles[k], bob_grid(), lab_counting(3), opts);
    const auto v = raw_and_net_visibility(r, r.accidental_rate, r.integration_time);
    raw += 0.25 * v.raw;
    net += 0.25 * v.net;
  }
  EXPECT_NEAR(raw, 0.973, 0.006);
  EXPECT_NEAR(net, 0.995, 0.008);
  EXPECT_GT(net, raw);
}

TEST(Fringe, RejectsBadInput) {
  EXPECT_THROW(fringe_scan(make_psi_phi(0.0), 0.0, std::vector<double>{}, std::nullopt), std::invalid_argument);
  FringeOptions opts;
  opts.state_visibility = 1.1;
  EXPECT_THROW(fringe_scan(make_psi_phi(0.0), 0.0, bob_grid(), std::nullopt, opts), std::invalid_argument);
  EXPECT_THROW(BellSettings::hwp_grid(0.0, 0.0, 5.0), std::invalid_argument);
}

TEST(FringeChsh, NoiselessFringesReproduceDirectCorrelations) {
  const auto psi = make_psi_phi(0.0);
  const BellSettings settings{};
  std::array<FitResult, 4> fits;
  for (std::size_t k = 0; k < 4; ++k) fits[k] = fringe_scan(psi, settings.alice_angles[k], bob_grid(), std::nullopt).fit;
  const ChshAngles angles{};
  const auto out = chsh_from_fringes(std::span<const FitResult, 4>(fits), angles);
  EXPECT_NEAR(out.correlations[0].value, correlation(psi, angles.a, angles.b), 1e-9);
  EXPECT_NEAR(out.correlations[3].value, correlation(psi, angles.a_prime, angles.b_prime), 1e-9);
  EXPECT_NEAR(out.result.S, kTsirelson, 1e-9);
}

TEST(FringeChsh, CountedFringesViolateWithUncertainty) {
  const BellSettings settings{};
  std::array<FitResult, 4> fits;
  FringeOptions opts;
  opts.state_visibility = 0.995;
  for (std::size_t k = 0; k < 4; ++k) {
    opts.stream_offset = static_cast<std::uint64_t>(k) << 32;
    fits[k] = fringe_scan(make_psi_phi(0.0), settings.alice_angles[k], bob_grid(), lab_counting(4), opts).fit;
  }
  const auto out = chsh_from_fringes(std::span<const FitResult, 4>(fits), ChshAngles{});
  EXPECT_GT(out.result.sigma_S, 0.0);
  EXPECT_GT(violation_significance(out.result.S, out.result.sigma_S), 100.0);
  EXPECT_LT(out.result.S, kTsirelson);
}

TEST(FringeChsh, RequiresHAndDAliceSettings) {
  const BellSettings settings{};
  std::array<FitResult, 4> fits;
  for (std::size_t k = 0; k < 4; ++k)
    fits[k] = fringe_scan(make_psi_phi(0.0), settings.alice_angles[k], bob_grid(), std::nullopt).fit;
  EXPECT_THROW(chsh_from_fringes(std::span<const FitResult, 4>(fits), ChshAngles{10.0, 45.0, -22.5, -67.5}),
               std::invalid_argument);
  fits[2] = FitResult{};
  EXPECT_THROW(chsh_from_fringes(std::span<const FitResult, 4>(fits), ChshAngles{}), std::invalid_argument);
}
