#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "polent/polarization.hpp"

using namespace polent;

namespace {

using Vec4 = Eigen::Vector4cd;
using Mat4 = Eigen::Matrix4cd;
constexpr auto H = Polarization::H;
constexpr auto V = Polarization::V;

// Two-photon operator U+ (x) U- on the ordered basis H+H-, H+V-, V+H-, V+V-.
Mat4 kron(const Jones& plus, const Jones& minus) {
  Mat4 m;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) m(2 * a + c, 2 * b + d) = plus(a, b) * minus(c, d);
  return m;
}

Jones rotation(double deg) {
  const double t = deg_to_rad(deg);
  Jones r;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

Vec4 vec(const BiphotonState& s) { return Vec4(s.amp[0], s.amp[1], s.amp[2], s.amp[3]); }

// Linear polarization at `deg` from H, as a two-photon product vector.
Vec4 linear_pair(double plus_deg, double minus_deg) {
  const double p = deg_to_rad(plus_deg), m = deg_to_rad(minus_deg);
  return Vec4(std::cos(p) * std::cos(m), std::cos(p) * std::sin(m), std::sin(p) * std::cos(m),
              std::sin(p) * std::sin(m));
}

double contraction_probability(const Vec4& bra, const BiphotonState& s) { return std::norm(bra.dot(vec(s))); }

OpticalElement random_unitary_element(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  std::uniform_int_distribution<int> kind(0, 3), target(0, 2);
  const auto ch = static_cast<Channel>(target(rng));
  switch (kind(rng)) {
    case 0: return OpticalElement::hwp(angle(rng), ch);
    case 1: return OpticalElement::qwp(angle(rng), ch);
    case 2: return OpticalElement::sb_phase(deg_to_rad(angle(rng)), ch);
    default: return OpticalElement::rotator(angle(rng), ch);
  }
}

}  // namespace

TEST(PsiPhi, Amplitudes) {
  const auto plus = make_psi_phi(0.0);
  EXPECT_DOUBLE_EQ(plus.at(H, V).real(), std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(plus.at(V, H).real(), std::sqrt(0.5));
  EXPECT_EQ(plus.at(H, H), Amplitude(0.0));
  EXPECT_EQ(plus.at(V, V), Amplitude(0.0));
  const auto minus = make_psi_phi(kPi);
  EXPECT_NEAR(minus.at(V, H).real(), -std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(minus.at(V, H).imag(), 0.0, 1e-15);
  EXPECT_NEAR(plus.norm_squared(), 1.0, 1e-15);
  EXPECT_EQ(plus.walkoff_h_minus_v_ps, 0.0);
  EXPECT_EQ(plus.channel_delay_ps, 0.0);
}

TEST(Elements, HalfWavePlateAtZeroIsIdentityUpToPhase) {
  const auto s = make_psi_phi(0.0);
  EXPECT_TRUE(same_up_to_global_phase(apply_element(s, OpticalElement::hwp(0.0)), s, 1e-15));
}

TEST(Elements, HalfWavePlateSignConvention) {
  // HWP at 22.5 deg turns H into D.
  const auto s = apply_element(make_product(H, H), OpticalElement::hwp(22.5, Channel::plus));
  EXPECT_NEAR(s.at(H, H).real(), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(s.at(V, H).real(), std::sqrt(0.5), 1e-15);
  // Rotator: H -> cos H + sin V.
  const auto r = apply_element(make_product(H, H), OpticalElement::rotator(30.0, Channel::minus));
  EXPECT_NEAR(r.at(H, H).real(), std::cos(deg_to_rad(30.0)), 1e-15);
  EXPECT_NEAR(r.at(H, V).real(), std::sin(deg_to_rad(30.0)), 1e-15);
}

TEST(Elements, FortyFiveDegreeRotationMatchesExpansion) {
  // (|H>+|V>- + |V>+|H>-)/sqrt2 -> (|V>+|V>- - |H>+|H>-)/sqrt2 after collecting
  // the eight product terms.
  const auto out = apply_element(make_psi_phi(0.0), OpticalElement::rotator(45.0));
  EXPECT_NEAR(out.at(H, H).real(), -std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(out.at(V, V).real(), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(std::abs(out.at(H, V)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(out.at(V, H)), 0.0, 1e-15);
  const Vec4 oracle = kron(rotation(45.0), rotation(45.0)) * vec(make_psi_phi(0.0));
  EXPECT_LT((vec(out) - oracle).norm(), 1e-15);
}

TEST(Elements, MatchKroneckerOracleOnRandomSequences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(-90.0, 90.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = angle(rng), b = angle(rng);
    BiphotonState s = make_psi_phi(angle(rng));
    const Vec4 oracle = kron(hwp_jones(a), qwp_jones(b)) * vec(s);
    s = apply_element(s, OpticalElement::hwp(a, Channel::plus));
    s = apply_element(s, OpticalElement::qwp(b, Channel::minus));
    ASSERT_LT((vec(s) - oracle).norm(), 1e-14);
  }
}

TEST(Elements, WalkoffArithmetic) {
  BiphotonState s = make_psi_phi(0.0);
  s = apply_element(s, OpticalElement::birefringent_delay(4.40));
  s = apply_element(s, OpticalElement::pmf_compensator(3.2, 1.38));
  EXPECT_NEAR(s.walkoff_h_minus_v_ps, -0.016, 1e-12);
  s = apply_element(s, OpticalElement::channel_delay(22000.0));
  s = apply_element(s, OpticalElement::channel_delay(-2000.0));
  EXPECT_DOUBLE_EQ(s.channel_delay_ps, 20000.0);
  EXPECT_NEAR(s.walkoff_h_minus_v_ps, -0.016, 1e-12);
}

TEST(Elements, SoleilBabinetActsOnPlusVertical) {
  const auto s = apply_element(make_psi_phi(0.0), OpticalElement::sb_phase(kPi / 3));
  EXPECT_TRUE(same_up_to_global_phase(s, make_psi_phi(kPi / 3)));
}

TEST(Elements, RejectsNonUnitaryAndNonFinite) {
  Jones m;
  m << 1.0, 1.0, 0.0, 1.0;
  EXPECT_THROW(OpticalElement::unitary_element(m), std::invalid_argument);
  EXPECT_THROW(apply_element(make_psi_phi(0.0), OpticalElement::hwp(std::nan(""))), std::invalid_argument);
}

TEST(Projection, PsiPlusHasNoParallelComponent) {
  EXPECT_EQ(pbs_project(make_psi_phi(0.0), H, H).probability, 0.0);
  const auto hv = pbs_project(make_psi_phi(0.0), H, V);
  EXPECT_NEAR(hv.probability, 0.5, 1e-15);
  EXPECT_NEAR(hv.state.norm_squared(), 1.0, 1e-15);
}

TEST(Projection, RotatedPsiPlusCoalesces) {
  const auto out = apply_element(make_psi_phi(0.0), OpticalElement::rotator(45.0));
  const double cross = pbs_project(out, H, V).probability + pbs_project(out, V, H).probability;
  const double parallel = pbs_project(out, H, H).probability + pbs_project(out, V, V).probability;
  EXPECT_NEAR(cross, 0.0, 1e-15);
  EXPECT_NEAR(parallel, 1.0, 1e-15);
}

TEST(Projection, RotatedPsiMinusAntiCoalesces) {
  const auto out = apply_element(make_psi_phi(kPi), OpticalElement::rotator(45.0));
  const double cross = pbs_project(out, H, V).probability + pbs_project(out, V, H).probability;
  Vec4 singlet(0.0, std::sqrt(0.5), -std::sqrt(0.5), 0.0);
  const Vec4 oracle = kron(rotation(45.0), rotation(45.0)) * singlet;
  EXPECT_NEAR(cross, 1.0, 1e-15);
  EXPECT_NEAR(cross, std::norm(oracle(1)) + std::norm(oracle(2)), 1e-15);
}

TEST(Projection, OutcomesSumToOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    BiphotonState s = make_psi_phi(0.0);
    for (int k = 0; k < 6; ++k) s = apply_element(s, random_unitary_element(rng));
    double total = 0.0;
    for (auto p : {H, V})
      for (auto m : {H, V}) total += pbs_project(s, p, m).probability;
    ASSERT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Projection, PbsElementIsIdempotent) {
  const auto s = apply_element(make_psi_phi(0.4), OpticalElement::rotator(30.0));
  const auto once = apply_element(s, OpticalElement::pbs_project(H, Channel::plus));
  const auto twice = apply_element(once, OpticalElement::pbs_project(H, Channel::plus));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(once.amp[i], twice.amp[i]);
  EXPECT_LE(once.norm_squared(), 1.0);
}

TEST(Analyzer, ContractionOracle) {
  const auto psi = make_psi_phi(0.0);
  auto joint = [&](double a, double b) { return apply_elements(psi, analyzer_projector(a, b)).norm_squared(); };
  EXPECT_NEAR(joint(0.0, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(joint(45.0, 45.0), 0.5, 1e-15);
  EXPECT_NEAR(joint(45.0, 45.0), contraction_probability(linear_pair(45.0, 45.0), psi), 1e-15);
  EXPECT_NEAR(joint(45.0, -45.0), 0.0, 1e-15);
  EXPECT_NEAR(joint(45.0, -45.0), contraction_probability(linear_pair(45.0, -45.0), psi), 1e-15);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = angle(rng), b = angle(rng);
    const auto state = make_psi_phi(deg_to_rad(angle(rng)));
    ASSERT_NEAR(apply_elements(state, analyzer_projector(a, b)).norm_squared(),
                contraction_probability(linear_pair(a, b), state), 1e-14);
  }
}

TEST(Properties, UnitarySequencesPreserveNorm) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    BiphotonState s = make_psi_phi(0.3 * trial);
    for (int k = 0; k < 20; ++k) s = apply_element(s, random_unitary_element(rng));
    ASSERT_NEAR(s.norm_squared(), 1.0, 1e-9);
  }
}

TEST(Properties, SoleilBabinetPhasesAdd) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> phase(-10.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double p1 = phase(rng), p2 = phase(rng);
    const auto start = apply_element(make_psi_phi(phase(rng)), OpticalElement::rotator(17.0, Channel::minus));
    const auto split = apply_elements(start, {OpticalElement::sb_phase(p1), OpticalElement::sb_phase(p2)});
    const auto joined = apply_element(start, OpticalElement::sb_phase(p1 + p2));
    ASSERT_TRUE(same_up_to_global_phase(split, joined, 1e-12));
  }
}

TEST(Properties, ChannelDelayLeavesProbabilitiesAlone) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> delay(-3e4, 3e4);
  for (int trial = 0; trial < 100; ++trial) {
    BiphotonState s = make_psi_phi(0.1 * trial);
    for (int k = 0; k < 4; ++k) s = apply_element(s, random_unitary_element(rng));
    const auto delayed = apply_element(s, OpticalElement::channel_delay(delay(rng)));
    for (auto p : {H, V})
      for (auto m : {H, V}) ASSERT_EQ(pbs_project(s, p, m).probability, pbs_project(delayed, p, m).probability);
  }
}

TEST(Properties, BirefringentDelayCommutesWithSoleilBabinet) {
  const auto s = make_psi_phi(0.2);
  const auto a = apply_elements(s, {OpticalElement::birefringent_delay(3.1), OpticalElement::sb_phase(1.3)});
  const auto b = apply_elements(s, {OpticalElement::sb_phase(1.3), OpticalElement::birefringent_delay(3.1)});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.amp[i], b.amp[i]);
  EXPECT_EQ(a.walkoff_h_minus_v_ps, b.walkoff_h_minus_v_ps);
}

TEST(StateCsv, RoundTrip) {
  auto s = apply_element(make_psi_phi(0.7), OpticalElement::qwp(12.0));
  s.walkoff_h_minus_v_ps = -0.016;
  s.channel_delay_ps = 22000.0;
  const auto back = parse_state_csv_row(state_csv_row(s));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(back.amp[i], s.amp[i]);
  EXPECT_EQ(back.walkoff_h_minus_v_ps, s.walkoff_h_minus_v_ps);
  EXPECT_EQ(back.channel_delay_ps, s.channel_delay_ps);
  EXPECT_THROW(parse_state_csv_row("1,2,3"), std::invalid_argument);
}
