// Prints the HOM dip of the filtered source with and without the PMF
// compensator, then the CHSH value of the ideal state.

#include <cstdio>

#include "polent/bell.hpp"
#include "polent/interference.hpp"

using namespace polent;

int main() {
  const double center_nm = thz_to_wavelength(194.65);
  const auto grid = FrequencyGrid::around_wavelength(center_nm);
  const auto source = make_source_spectrum(Polarization::H, center_nm, 0.85, grid);
  const auto plus = make_dwdm_filter(FilterSpec::itu(46, Band::plus), grid);
  const auto minus = make_dwdm_filter(FilterSpec::itu(47, Band::minus), grid);
  const auto kernel = KernelProfiles::from_setup({source, source, plus, minus});

  std::printf("same-side probability: %.4f %%\n", 100.0 * same_side_probability(source, source, plus, minus));

  for (const double pmf_m : {0.0, 3.2}) {
    auto state = apply_element(make_psi_phi(0.0), OpticalElement::birefringent_delay(4.40));
    state = apply_element(state, OpticalElement::pmf_compensator(pmf_m, 1.38));
    const auto result = scan(HomConfig{state, kernel, {-10.0, 10.0, 0.1}, 1.0});
    std::printf("PMF %.1f m: dip center %+.3f ps, FWHM %.2f ps, p(center) = %.4f\n", pmf_m, result.fit.center,
                result.fit.fwhm, coincidence_probability(HomConfig{state, kernel, {}, 1.0}, result.fit.center));
  }

  std::printf("CHSH S for |Psi+>: %.6f\n", chsh_S(make_psi_phi(0.0)).S);
}
