// Binary snapshot store for exact runs.
//
// Layout (all integers and floats little-endian):
//   8 bytes   magic "EFTRJ001"
//   uint64    metadata length L
//   L bytes   UTF-8 JSON metadata (grid, mass, dim_el, snapshot count, manifest hash)
//   per snapshot: float64 t, then n_grid * dim_el complex128 values (re, im),
//   grid index major, electronic index minor.
#pragma once

#include <string>

#include "efric/exact_dynamics.hpp"

namespace efric::cli {

struct StoredTrajectory {
  std::string manifest_sha256;
  std::string model_label;
  std::vector<exact::FullWavefunction> snapshots;
};

void write_trajectory(const std::string& path, const exact::Trajectory& traj, const std::string& manifest_sha256,
                      const std::string& model_label);
StoredTrajectory read_trajectory(const std::string& path);

}  // namespace efric::cli
