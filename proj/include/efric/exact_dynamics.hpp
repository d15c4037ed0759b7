// Exact electron-nuclear propagation on a 1-D periodic nuclear grid, the exact
// factorization of its snapshots and the force analyses built on it.
#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "efric/geometry.hpp"
#include "efric/models.hpp"
#include "efric/spectral.hpp"

namespace efric::exact {

using geometry::Axis;

// amp(i, m) = Psi_m(x_i).
struct FullWavefunction {
  Axis grid;
  double mass = 1.0;
  double t = 0.0;
  CMat amp;

  int dim_el() const { return int(amp.cols()); }
  double norm2() const;
};

// exp(i p0 (x - x0) - (x - x0)^2 / (4 sigma^2)), normalized on the grid.
CVec gaussian_packet(const Axis& grid, double x0, double sigma, double p0);

// Psi = psi(x) u_n(x) with u_n the transport-gauged eigenvector of level n.
FullWavefunction adiabatic_state(const models::ParametricHamiltonian& h, const Axis& grid, int n,
                                 const CVec& psi, double mass);

// Psi = psi(x) e_m (diabatic basis vector m).
FullWavefunction diabatic_state(const Axis& grid, int dim_el, int m, const CVec& psi, double mass);

class SplitOperator {
 public:
  SplitOperator(const models::ParametricHamiltonian& h, const Axis& grid, double mass, double dt);

  // Strang step: half kinetic, full potential, half kinetic.
  void step(FullWavefunction& psi) const;
  double dt() const { return dt_; }

 private:
  Axis grid_;
  double mass_, dt_;
  int dim_el_;
  std::vector<CMat> expv_;
  CVec kin_half_;
  std::unique_ptr<spectral::Fft1d> fft_;
};

struct PropagationOptions {
  double dt = 1.0;
  long n_steps = 0;
  long store_every = 1;
  double edge_tol = 1e-12;
  int edge_points = 16;
};

struct Trajectory {
  std::vector<FullWavefunction> snapshots;
  std::vector<double> times;
  std::vector<double> norm;
  std::vector<double> energy;
  double snapshot_dt = 0.0;
};

Trajectory propagate_exact(const FullWavefunction& psi0, const models::ParametricHamiltonian& h,
                           const PropagationOptions& opt);

double edge_density(const FullWavefunction& psi, int edge_points);

// Observables of the full wavefunction.
double total_energy(const FullWavefunction& psi, const models::ParametricHamiltonian& h);
double mean_position(const FullWavefunction& psi);
double mean_momentum(const FullWavefunction& psi);
// <Psi| -d_x H_el |Psi>
double mean_force(const FullWavefunction& psi, const models::ParametricHamiltonian& h);
// Populations of the adiabatic levels.
RVec adiabatic_populations(const FullWavefunction& psi, const models::ParametricHamiltonian& h);

// psi(x) |u(x)>, u transported along x from the density maximum. Derivatives
// of psi and u come from spectral derivatives of Psi. Points below
// floor * max density are masked and hold zeros.
struct FactorizedState {
  Axis grid;
  double mass = 1.0;
  double t = 0.0;
  int dim_el = 0;
  CVec psi, dpsi;
  CMat u, du, d2u;  // dim_el x n_grid
  RVec rho;
  std::vector<unsigned char> mask;
  long anchor = 0;
  double floor = 1e-10;
  double masked_density = 0.0;

  // i <u|d_x u> at every grid point (zero off support).
  RVec connection() const;
};

FactorizedState factorize(const FullWavefunction& psi, double floor = 1e-10);

// Rebuilds Psi = psi u on the grid.
FullWavefunction recompose(const FactorizedState& s);

struct VelocityField {
  CVec V;
  std::vector<unsigned char> mask;
};

// (v psi) / psi with v = (p - A) / M.
VelocityField velocity_field(const FactorizedState& s, const RVec& a);
VelocityField velocity_field(const FactorizedState& s);

struct ForceBreakdown {
  RVec f_bo, f_el, f_el_c, f_mag_c, f_nbo, f_ed, f_ed_fd;
  RVec delta_e, g;
  std::vector<unsigned char> mask;
  bool has_fd = false;
};

// F_ED is always computed from the electronic equation of motion; when both
// neighbor snapshots are supplied the time-difference estimate is added.
ForceBreakdown force_breakdown(const FactorizedState& s, const models::ParametricHamiltonian& h,
                               const FactorizedState* prev = nullptr, const FactorizedState* next = nullptr,
                               double dt = 0.0);

struct AverageForceReport {
  double f_el_c = 0.0;
  double f_mag_c = 0.0;
  double abs_f_bo = 0.0;
  double ratio = 0.0;
  double masked_density = 0.0;
  double f_tot = 0.0;
  std::vector<std::string> warnings;
};

AverageForceReport averaged_force_check(const ForceBreakdown& f, const FactorizedState& s);

struct NboBoundReport {
  double max_violation = 0.0;  // max over support of |F_NBO| - 2 dE sqrt(g)
  double max_ratio = 0.0;      // max of |F_NBO| / (2 dE sqrt(g))
  long points = 0;
};

NboBoundReport nbo_bound_check(const ForceBreakdown& f);

struct EhrenfestReport {
  double max_residual = 0.0;
  double max_factorized_residual = 0.0;
  std::vector<double> times, dpdt, force, factorized_force;
};

EhrenfestReport ehrenfest_check(const Trajectory& traj, const models::ParametricHamiltonian& h,
                                bool factorized = false);

struct MomentumIdentityReport {
  double max_residual = 0.0;  // max |psi| |lhs - rhs|
  double scale = 0.0;         // max |psi| max(|lhs|, |rhs|)
  double relative = 0.0;
  double unweighted_relative = 0.0;
  long points = 0;
  long unresolved = 0;            // support points where 6th and 8th order disagree
  double excluded_density = 0.0;  // density share of skipped support points
  long worst = -1;
};

// Acts with the momentum-form operator on u after the gauge change
// u -> exp(-i chi) u and compares with K[psi] u + 1/(2M) g u. Derivatives on
// the left side use 8th-order finite differences of the stored frame; points
// where the 6th-order estimate differs by more than resolve_tol (relative)
// are counted as unresolved and skipped. Residuals are weighted by |psi|.
MomentumIdentityReport momentum_identity_check(const FactorizedState& s,
                                    const std::function<double(double)>& chi = nullptr,
                                    double resolve_tol = 1e-4);

struct LiteReport {
  double eps2_qgt = 0.0;
  double eps2_exact = 0.0;
  double eps2_classical = 0.0;
  double mean_x = 0.0;
  double mean_v = 0.0;
};

LiteReport lite_error(const FullWavefunction& psi, const models::ParametricHamiltonian& h, int n);

struct SpawnReport {
  std::vector<double> dts, prob;
  double eps2 = 0.0;
  double coefficient = 0.0;
  double ratio = 0.0;
  std::vector<double> quad_residual;  // |P - eps2 dt^2| at each dt
  double residual_shrink = 0.0;       // smallest ratio of residuals at dt and dt/2
  std::vector<std::string> warnings;
};

// Population leaving level n after free exact evolution for each dt.
SpawnReport spawn_probability_check(const FullWavefunction& psi0, const models::ParametricHamiltonian& h, int n,
                                    const std::vector<double>& dts, int substeps = 64);

// Population outside the adiabatic manifold of level n.
double nonadiabatic_population(const FullWavefunction& psi, const models::ParametricHamiltonian& h, int n);

}  // namespace efric::exact
