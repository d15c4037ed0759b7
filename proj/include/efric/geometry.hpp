// Gauged eigenframes on nuclear grids and the geometric fields built on them.
#pragma once

#include <optional>

#include "efric/models.hpp"

namespace efric::geometry {

struct Axis {
  double start = 0.0;
  double step = 1.0;
  int n = 0;
  double at(int i) const { return start + step * i; }
  double length() const { return step * n; }
};

// Points are ordered row-major: the last axis varies fastest.
struct NuclearGrid {
  std::vector<Axis> axes;

  int dim() const { return int(axes.size()); }
  long size() const;
  std::vector<int> multi_index(long flat) const;
  long flat_index(const std::vector<int>& idx) const;
  RVec point(long flat) const;
  // Neighbor along axis k, or -1 outside the grid.
  long neighbor(long flat, int k, int offset) const;
  void validate() const;
};

NuclearGrid make_grid(const std::vector<Axis>& axes);

struct EigenFrame {
  int level = 0;
  std::vector<RVec> energies;
  std::vector<CVec> vectors;
  std::vector<double> gap;
  // Phase factor multiplied onto the raw eigenvector at each point, and the
  // transport parent (-1 for the root).
  std::vector<cplx> gauge_log;
  std::vector<long> parent;
};

EigenFrame diagonalize_grid(const models::ParametricHamiltonian& h, const NuclearGrid& grid, int n,
                            double gap_tol = 1e-8);

// Re-applies the transport pass to the stored vectors.
EigenFrame regauge(const EigenFrame& frame, const NuclearGrid& grid);

// Multiplies u(x) by exp(-i chi(x)).
EigenFrame apply_gauge(const EigenFrame& frame, const std::vector<double>& chi);

// Elementary plaquette phases -arg(prod of overlaps) in the (a, b) plane.
std::vector<double> plaquette_phases(const EigenFrame& frame, const NuclearGrid& grid, int a, int b);

struct GeometricField {
  int dim_nuc = 0;
  std::vector<RVec> A;
  std::vector<CMat> q;
  std::vector<RMat> g;
  std::vector<RMat> B;
  std::vector<double> phi;
  RMat xi;
  // Points where at least one one-sided difference was used.
  std::vector<unsigned char> boundary;
  // Largest |Re <u|d_j u>| seen; A_j is the real part of i<u|d_j u>.
  double a_imag_residue = 0.0;
};

// Central differences in the interior, second-order one-sided stencils on the
// boundary (flagged). xi defaults to the identity.
GeometricField qgt_fd(const EigenFrame& frame, const NuclearGrid& grid,
                      const std::optional<RMat>& xi = std::nullopt);

// Sum over states at a single point.
CMat qgt_sos(const models::ParametricHamiltonian& h, const RVec& x, int n, double gap_tol = 1e-8);

// -arg prod <u(x_i)|u(x_{i+1})>, closed loop, result in (-pi, pi].
double berry_phase_loop(const models::ParametricHamiltonian& h, const std::vector<RVec>& loop, int n,
                        double gap_tol = 1e-8);

// phi = 1/2 sum xi^{ij} g_ij at every point.
std::vector<double> scalar_potential(const GeometricField& field);

// Re <d_k u| D_ij u> at an interior point from finite differences of the frame.
double connection_term(const EigenFrame& frame, const NuclearGrid& grid, long p, int k, int i, int j);

// 1/2 (d_j g_ik + d_i g_kj - d_k g_ij) from finite differences of g.
double christoffel_from_metric(const GeometricField& field, const NuclearGrid& grid, long p, int k,
                               int i, int j);

// Smallest nonzero |E_m - E_n| of a Hermitian matrix spectrum.
double level_gap(const RVec& e, int n);

}  // namespace efric::geometry
