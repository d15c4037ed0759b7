// Nuclear-only propagation on the reference surface, dressed by electronic
// friction through a vector potential (Markov or with memory) or through the
// Kostin phase potential.
#pragma once

#include <deque>
#include <optional>

#include "efric/geometry.hpp"
#include "efric/models.hpp"

namespace efric::friction {

using geometry::Axis;

enum class FrictionMode { markov_deltaA, kostin, non_markov };

std::string to_string(FrictionMode m);
std::optional<FrictionMode> mode_from_string(const std::string& s);

// Reference surface data on the grid: E_0, A^0 and phi^0 = 1/(2M) g.
struct Surface {
  RVec e0, a0, phi0;
};

Surface surface_from_model(const models::ParametricHamiltonian& h, const Axis& grid, int n, double mass);
Surface surface_from_potential(const Axis& grid, const std::function<double(double)>& v);

struct NuclearState {
  Axis grid;
  double mass = 1.0;
  double t = 0.0;
  CVec psi;
  CVec X;  // accumulated velocity field, zero at t = 0
};

NuclearState make_state(const Axis& grid, double mass, const CVec& psi);

struct FrictionRunConfig {
  FrictionMode mode = FrictionMode::markov_deltaA;
  double gamma = 0.0;              // constant scalar friction
  std::optional<RVec> gamma_field;  // per-point friction, overrides gamma
  double floor = 1e-10;
  double dt = 1.0;
  long n_steps = 0;
  long store_every = 1;
  long snapshot_every = 0;  // 0 keeps no wavefunction snapshots
  double edge_tol = 1e-12;
  int edge_points = 16;
  // Memory kernel Gamma(j dt), j = 0..L-1, and the static q for non_markov.
  std::vector<cplx> kernel;
  double kernel_q = 0.0;
  // Constant added to the Kostin potential (observables must not change).
  double kostin_offset = 0.0;
};

void validate(const FrictionRunConfig& c);

// Support mask |psi|^2 >= floor * max.
std::vector<unsigned char> support(const CVec& psi, double floor);

// Re V = (d_x theta - A) / M and the full complex V = (-i psi'/psi - A) / M
// on support; zero elsewhere.
CVec velocity(const NuclearState& s, const RVec& a, const std::vector<unsigned char>& mask);

// X += dt/2 (v_old + v_new) where both are on support.
void accumulate_X(CVec& X, const CVec& v_old, const CVec& v_new, double dt,
                  const std::vector<unsigned char>& mask);

// gamma Re X on support, held constant outside.
RVec delta_A(const CVec& X, const RVec& gamma, const std::vector<unsigned char>& mask);

struct KostinResult {
  RVec phi;
  bool near_node = false;
};

// gamma / M times the phase of psi, unwrapped from the density maximum where it
// is zero; held constant outside the support.
KostinResult kostin_potential(const CVec& psi, const RVec& gamma, double mass, double floor);

struct MemoryForce {
  RVec force;
  bool history_too_short = false;
};

// -2 Re int_0^T Gamma(tau) V(t - tau) dtau by trapezoid; history[j] holds
// V(t - j dt).
MemoryForce non_markov_force(const std::vector<cplx>& kernel, const std::vector<CVec>& history, double dt);

// 2 Re int Gamma(tau) X(t - tau) dtau - 2 q Im X(t); history[j] = X(t - j dt).
RVec delta_A_memory(const std::vector<cplx>& kernel, double q, const std::deque<CVec>& history, double dt,
                    const std::vector<unsigned char>& mask);

struct FrictionObservables {
  std::vector<double> t, norm, energy, x, p;
};

struct FrictionTrajectory {
  FrictionObservables obs;
  std::vector<double> snapshot_times;
  std::vector<CVec> snapshots;
  NuclearState final_state;
  std::vector<std::string> warnings;
  double max_masked_density = 0.0;
};

// Mechanical energy <psi| pi^2/2M + E_0 + phi^0 |psi> with pi = p - A^0 - dA.
double mechanical_energy(const NuclearState& s, const Surface& surf, const RVec& da);

FrictionTrajectory propagate_friction(const NuclearState& s0, const Surface& surf, const FrictionRunConfig& c);

struct EnergyAudit {
  double e0 = 0.0;
  double max_increase = 0.0;       // largest E(t_{i+1}) - E(t_i)
  double max_relative_drift = 0.0;  // max |E - E(0)| / |E(0)|
  double initial_rate = 0.0;       // -(dE/dt) from the first stored interval
  bool monotone = true;            // within 1e-9 |E(0)| per interval
};

EnergyAudit energy_audit(const FrictionObservables& obs, double tol = 1e-9);

}  // namespace efric::friction
