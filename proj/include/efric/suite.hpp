// Built-in invariant suite on the reference models. Each check carries the
// measured value, the tolerance it is judged against and a short detail line.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "efric/exact_dynamics.hpp"

namespace efric::suite {

struct Check {
  int id = 0;
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  bool quick = false;  // fewer samples and shorter propagations, same tolerances
  std::uint64_t seed = 0;
};

// Random complex Hermitian testbed H0 + x.V + 1/2 sum x_k^2 W_k.
models::ParametricHamiltonian random_testbed(int dim_el, int dim_nuc, std::uint64_t seed);

// Two-level collision on the avoided crossing shared by the exact-dynamics checks.
struct CollisionRun {
  models::ParametricHamiltonian h;
  exact::Trajectory traj;
  double seconds = 0.0;
};
CollisionRun collision_run(int grid_points, long n_steps, long store_every);

Check models_consistency(const Options& o);
Check qgt_cross_validation(const Options& o);
Check berry_phases(const Options& o);
Check kernel_equivalences(const Options& o);
Check orbital_reduction(const Options& o);
Check tensor_symmetries(const Options& o);
Check vanishing_average(const CollisionRun& run, double t_max);
// Saturation is exact in a two-level space, so the bound is judged to 1e-12 relative.
Check nbo_bound(const CollisionRun& run, double t_max);
Check momentum_identity(const CollisionRun& run, double t_max);
Check lite_spawning(const Options& o);
Check friction_propagator(const Options& o);
Check ehrenfest_consistency(const CollisionRun& run);

// Checks 1 to 11 in order, preceded by the model check (id 0).
std::vector<Check> run_all(const Options& o);

}  // namespace efric::suite
