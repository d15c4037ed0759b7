// Friction kernels at a single nuclear configuration, evaluated over the
// excitation spectrum of the reference state.
#pragma once

#include <optional>

#include "efric/models.hpp"

namespace efric::kernels {

enum class DeltaKind { gaussian, lorentzian, resolvent };

std::string to_string(DeltaKind k);
std::optional<DeltaKind> delta_kind_from_string(const std::string& s);

// eta <= 0 selects floor_factor x spacing. When floor_factor > 0 the width is
// never below floor_factor x spacing. omega defaults to eta, epsilon to eta.
struct BroadeningScheme {
  DeltaKind kind = DeltaKind::gaussian;
  double eta = 0.0;
  std::optional<double> omega;
  std::optional<double> epsilon;
  double floor_factor = 5.0;
};

struct Broadening {
  DeltaKind kind = DeltaKind::gaussian;
  double eta = 0.0;
  double omega = 0.0;
  double epsilon = 0.0;
  double spacing = 0.0;
  std::vector<std::string> warnings;
};

Broadening resolve(const BroadeningScheme& s, double spacing);

// Broadened delta(E_0 + omega - E_m) as a function of de = E_m - E_0. Real for
// gaussian and lorentzian. The resolvent weight -i z / (pi de (de - z)),
// z = omega + i eta, is the finite-width form for which the bare kernel
// splits exactly into -2i q plus the Markov kernel.
cplx delta_weight(const Broadening& b, double de);
double real_delta(const Broadening& b, double x);

// Excitations out of a reference state: de[m] = E_m - E_0 > 0 and
// coupling(k, m) = <m|d_k H|0>.
struct Excitations {
  int dim_nuc = 0;
  double e0 = 0.0;
  RVec de;
  CMat coupling;
  double spacing = 0.0;

  // c(k, m) = <m|d_k u_0> = coupling / (E_0 - E_m)
  CMat derivative_couplings() const;
};

// Reference state n of H(x): the excitations are all other eigenstates.
Excitations single_reference(const models::ParametricHamiltonian& h, const RVec& x, int n = 0,
                             double gap_tol = 1e-8);
Excitations excitations_from(const RVec& energies, const CMat& vectors, const std::vector<CMat>& dh, int n,
                             const RVec& x, double gap_tol = 1e-8);

// Filled Fermi sea of a single-particle model: single excitations a -> b with
// e_a < e_F < e_b.
Excitations fermi_sea(const models::ParametricHamiltonian& band, const RVec& x,
                      std::optional<double> fermi_level = std::nullopt);

// q_kj = sum_m conj(c_km) c_jm
CMat geometric_tensor(const Excitations& ex);

struct KernelSamples {
  RVec tau;
  std::vector<CMat> values;
};

// Gamma_kj(tau) = sum_m conj(c_km) c_jm de_m exp(-i de_m tau)
KernelSamples memory_kernel(const Excitations& ex, const RVec& tau);
KernelSamples memory_kernel(const models::ParametricHamiltonian& h, const RVec& x, const RVec& tau);

// 2 int_0^inf exp(-eps tau + i omega tau) Gamma(tau) dtau in closed form.
CMat bare_kernel(const Excitations& ex, const Broadening& b);
CMat bare_kernel(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s);

// 2 pi sum_m conj(c_km) c_jm de_m w(de_m).
CMat markov_friction(const Excitations& ex, const Broadening& b);
CMat markov_friction(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s);

// -2 pi Re <u_0| d_k H  w(H - E_0) |d_j u_0>, with |d_j u_0> from a linear
// solve in the full electronic space.
RMat markov_friction_alt(const models::ParametricHamiltonian& h, const RVec& x, const Broadening& b);
RMat markov_friction_alt(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s);

// Same form for the filled Fermi sea, written in single-particle orbitals:
// 2 pi Re sum_{a occ, b empty} D^k_ab D^j_ba w(e_b - e_a) / (e_b - e_a).
RMat markov_friction_alt_fermi_sea(const models::ParametricHamiltonian& band, const RVec& x,
                                   const Broadening& b, std::optional<double> fermi_level = std::nullopt);

// -2 Re int_0^inf <u_0| d_k H exp(-i (H' - omega) tau - eps tau) |d_j u_0> dtau,
// resolvent applied by a complex linear solve.
RMat energy_form_friction(const models::ParametricHamiltonian& h, const RVec& x, const Broadening& b);
// Spectral form, usable on any excitation set.
RMat energy_form_friction(const Excitations& ex, const Broadening& b);

// pi Re sum_ab D^k_ab D^j_ba delta(e_a - e_F) delta(e_b - e_F); the
// resolvent kind falls back to its Lorentzian part.
RMat orbital_friction(const models::ParametricHamiltonian& band, const RVec& x, const Broadening& b,
                  std::optional<double> fermi_level = std::nullopt);

// Term 2i omega <d_k u_0|Q G+(E_0 + omega)|d_j u_0> that separates the bare
// kernel from -2i q + gamma at finite omega.
CMat frequency_term(const Excitations& ex, const Broadening& b);

struct SymmetryReport {
  double norm = 0.0;
  double re_asymmetry = 0.0;  // ||Re g - Re g^T|| / ||g||
  double im_symmetry = 0.0;   // ||Im g + Im g^T|| / ||g||
  double min_eig_rel = 0.0;   // min eigenvalue of sym(Re g) / ||g||
};
SymmetryReport symmetry_report(const CMat& gamma);

struct FrictionTensorSet {
  RVec x;
  KernelSamples memory;
  CMat gamma_bar;
  CMat gamma;
  RMat gamma_alt;
  RMat gamma_energy;
  std::optional<RMat> gamma_orbital;
  Broadening broadening;
  std::vector<std::string> warnings;
};

FrictionTensorSet evaluate(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s,
                           const RVec& tau);

double relative_difference(const CMat& a, const CMat& b, double scale);

}  // namespace efric::kernels
