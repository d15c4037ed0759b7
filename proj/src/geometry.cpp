#include "efric/geometry.hpp"

#include <cmath>
#include <limits>

#include "efric/parallel.hpp"

namespace efric::geometry {

long NuclearGrid::size() const {
  long s = 1;
  for (const auto& a : axes) s *= a.n;
  return axes.empty() ? 0 : s;
}

std::vector<int> NuclearGrid::multi_index(long flat) const {
  std::vector<int> idx(axes.size());
  for (int k = dim() - 1; k >= 0; --k) {
    idx[k] = int(flat % axes[k].n);
    flat /= axes[k].n;
  }
  return idx;
}

long NuclearGrid::flat_index(const std::vector<int>& idx) const {
  long f = 0;
  for (int k = 0; k < dim(); ++k) f = f * axes[k].n + idx[k];
  return f;
}

RVec NuclearGrid::point(long flat) const {
  auto idx = multi_index(flat);
  RVec x(dim());
  for (int k = 0; k < dim(); ++k) x[k] = axes[k].at(idx[k]);
  return x;
}

long NuclearGrid::neighbor(long flat, int k, int offset) const {
  auto idx = multi_index(flat);
  int j = idx[k] + offset;
  if (j < 0 || j >= axes[k].n) return -1;
  idx[k] = j;
  return flat_index(idx);
}

void NuclearGrid::validate() const {
  if (axes.empty()) throw ConfigError("grid needs at least one axis");
  for (size_t k = 0; k < axes.size(); ++k) {
    if (!(axes[k].step > 0.0)) throw ConfigError("grid axis " + std::to_string(k) + ": spacing must be > 0");
    if (axes[k].n < 3) throw ConfigError("grid axis " + std::to_string(k) + ": need at least 3 points");
  }
}

NuclearGrid make_grid(const std::vector<Axis>& axes) {
  NuclearGrid g{axes};
  g.validate();
  return g;
}

double level_gap(const RVec& e, int n) {
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < e.size(); ++m)
    if (m != n) gap = std::min(gap, std::abs(e[m] - e[n]));
  return gap;
}

namespace {

// Parent in the row-major transport tree: step back along the last axis with
// a nonzero index.
long transport_parent(const NuclearGrid& grid, long p) {
  auto idx = grid.multi_index(p);
  for (int k = grid.dim() - 1; k >= 0; --k)
    if (idx[k] > 0) return grid.neighbor(p, k, -1);
  return -1;
}

cplx root_phase(const CVec& u) {
  Eigen::Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  cplx c = u[imax];
  return std::abs(c) > 0.0 ? std::conj(c) / std::abs(c) : cplx(1.0);
}

void transport(EigenFrame& f, const NuclearGrid& grid) {
  long np = grid.size();
  f.gauge_log.assign(np, cplx(1.0));
  f.parent.assign(np, -1);
  for (long p = 0; p < np; ++p) {
    long par = transport_parent(grid, p);
    f.parent[p] = par;
    cplx ph;
    if (par < 0) {
      ph = root_phase(f.vectors[p]);
    } else {
      cplx ov = f.vectors[par].dot(f.vectors[p]);
      if (std::abs(ov) < 1e-12)
        throw NumericalError("parallel transport failed: neighbor overlap vanishes at x = " +
                             format_point(grid.point(p)) + "; refine the grid");
      ph = std::conj(ov) / std::abs(ov);
    }
    f.vectors[p] *= ph;
    f.gauge_log[p] = ph;
  }
}

CVec fd_derivative(const EigenFrame& f, const NuclearGrid& grid, long p, int k, bool& one_sided) {
  double h = grid.axes[k].step;
  long pp = grid.neighbor(p, k, +1), pm = grid.neighbor(p, k, -1);
  if (pp >= 0 && pm >= 0) return (f.vectors[pp] - f.vectors[pm]) / (2.0 * h);
  one_sided = true;
  if (pp >= 0) {
    long pp2 = grid.neighbor(p, k, +2);
    return (-3.0 * f.vectors[p] + 4.0 * f.vectors[pp] - f.vectors[pp2]) / (2.0 * h);
  }
  long pm2 = grid.neighbor(p, k, -2);
  return (3.0 * f.vectors[p] - 4.0 * f.vectors[pm] + f.vectors[pm2]) / (2.0 * h);
}

}  // namespace

EigenFrame diagonalize_grid(const models::ParametricHamiltonian& h, const NuclearGrid& grid, int n,
                            double gap_tol) {
  grid.validate();
  if (grid.dim() != h.dim_nuc)
    throw ConfigError("grid dimension " + std::to_string(grid.dim()) + " does not match model (" +
                      std::to_string(h.dim_nuc) + ")");
  if (n < 0 || n >= h.dim_el) throw ConfigError("level index out of range");
  long np = grid.size();
  EigenFrame f;
  f.level = n;
  f.energies.resize(np);
  f.vectors.resize(np);
  f.gap.resize(np);
  parallel_for(np, [&](long p) {
    Eigen::SelfAdjointEigenSolver<CMat> es(h.eval(grid.point(p)));
    f.energies[p] = es.eigenvalues();
    f.vectors[p] = es.eigenvectors().col(n);
    f.gap[p] = level_gap(f.energies[p], n);
  });
  for (long p = 0; p < np; ++p)
    if (f.gap[p] <= gap_tol) throw DegeneracyError(grid.point(p), f.gap[p]);
  transport(f, grid);
  return f;
}

EigenFrame regauge(const EigenFrame& frame, const NuclearGrid& grid) {
  EigenFrame f = frame;
  transport(f, grid);
  return f;
}

EigenFrame apply_gauge(const EigenFrame& frame, const std::vector<double>& chi) {
  EigenFrame f = frame;
  for (size_t p = 0; p < f.vectors.size(); ++p) {
    cplx ph = std::exp(-I * chi[p]);
    f.vectors[p] *= ph;
    f.gauge_log[p] *= ph;
  }
  return f;
}

std::vector<double> plaquette_phases(const EigenFrame& frame, const NuclearGrid& grid, int a, int b) {
  std::vector<double> out;
  for (long p = 0; p < grid.size(); ++p) {
    long pa = grid.neighbor(p, a, 1), pb = grid.neighbor(p, b, 1);
    if (pa < 0 || pb < 0) continue;
    long pab = grid.neighbor(pa, b, 1);
    const auto& v = frame.vectors;
    cplx w = v[p].dot(v[pa]) * v[pa].dot(v[pab]) * v[pab].dot(v[pb]) * v[pb].dot(v[p]);
    out.push_back(-std::arg(w));
  }
  return out;
}

GeometricField qgt_fd(const EigenFrame& frame, const NuclearGrid& grid, const std::optional<RMat>& xi) {
  int d = grid.dim();
  long np = grid.size();
  GeometricField gf;
  gf.dim_nuc = d;
  gf.xi = xi ? *xi : RMat::Identity(d, d);
  if (gf.xi.rows() != d || gf.xi.cols() != d) throw ConfigError("inverse mass tensor has wrong shape");
  gf.A.assign(np, RVec::Zero(d));
  gf.q.assign(np, CMat::Zero(d, d));
  gf.g.assign(np, RMat::Zero(d, d));
  gf.B.assign(np, RMat::Zero(d, d));
  gf.phi.assign(np, 0.0);
  gf.boundary.assign(np, 0);
  std::vector<double> residue(np, 0.0);
  parallel_for(np, [&](long p) {
    const CVec& u = frame.vectors[p];
    std::vector<CVec> du(d);
    bool one_sided = false;
    for (int k = 0; k < d; ++k) du[k] = fd_derivative(frame, grid, p, k, one_sided);
    gf.boundary[p] = one_sided;
    std::vector<CVec> qdu(d);
    for (int k = 0; k < d; ++k) {
      cplx c = u.dot(du[k]);
      gf.A[p][k] = (I * c).real();
      residue[p] = std::max(residue[p], std::abs(c.real()));
      qdu[k] = du[k] - u * c;
    }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) gf.q[p](i, j) = qdu[i].dot(qdu[j]);
    gf.g[p] = gf.q[p].real();
    gf.B[p] = -2.0 * gf.q[p].imag();
  });
  for (long p = 0; p < np; ++p) gf.a_imag_residue = std::max(gf.a_imag_residue, residue[p]);
  gf.phi = scalar_potential(gf);
  return gf;
}

CMat qgt_sos(const models::ParametricHamiltonian& h, const RVec& x, int n, double gap_tol) {
  Eigen::SelfAdjointEigenSolver<CMat> es(h.eval(x));
  const RVec& e = es.eigenvalues();
  const CMat& U = es.eigenvectors();
  double gap = level_gap(e, n);
  if (gap <= gap_tol) throw DegeneracyError(x, gap);
  int d = h.dim_nuc;
  CMat M(d, h.dim_el);
  for (int k = 0; k < d; ++k) M.row(k) = (U.adjoint() * (h.grad(x, k) * U.col(n))).transpose();
  CMat q = CMat::Zero(d, d);
  for (int m = 0; m < h.dim_el; ++m) {
    if (m == n) continue;
    double de = e[n] - e[m];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) q(i, j) += std::conj(M(i, m)) * M(j, m) / (de * de);
  }
  return q;
}

double berry_phase_loop(const models::ParametricHamiltonian& h, const std::vector<RVec>& loop, int n,
                        double gap_tol) {
  if (loop.size() < 3) throw ConfigError("loop needs at least 3 points");
  std::vector<CVec> u(loop.size());
  for (size_t i = 0; i < loop.size(); ++i) {
    Eigen::SelfAdjointEigenSolver<CMat> es(h.eval(loop[i]));
    double gap = level_gap(es.eigenvalues(), n);
    if (gap <= gap_tol) throw DegeneracyError(loop[i], gap);
    u[i] = es.eigenvectors().col(n);
  }
  cplx w = 1.0;
  for (size_t i = 0; i < u.size(); ++i) {
    w *= u[i].dot(u[(i + 1) % u.size()]);
    w /= std::abs(w);
  }
  double phase = -std::arg(w);
  if (phase <= -pi) phase += 2.0 * pi;
  return phase;
}

std::vector<double> scalar_potential(const GeometricField& field) {
  std::vector<double> phi(field.g.size(), 0.0);
  for (size_t p = 0; p < field.g.size(); ++p) phi[p] = 0.5 * (field.xi.cwiseProduct(field.g[p])).sum();
  return phi;
}

double connection_term(const EigenFrame& frame, const NuclearGrid& grid, long p, int k, int i, int j) {
  const auto& v = frame.vectors;
  auto nb = [&](long q, int ax, int off) {
    long r = grid.neighbor(q, ax, off);
    if (r < 0) throw ConfigError("connection_term needs an interior point");
    return r;
  };
  auto d1 = [&](int ax) {
    return CVec((v[nb(p, ax, 1)] - v[nb(p, ax, -1)]) / (2.0 * grid.axes[ax].step));
  };
  const CVec& u = v[p];
  auto proj = [&](const CVec& w) { return CVec(w - u * u.dot(w)); };
  CVec dk = d1(k), di = d1(i), dj = d1(j);
  double hi = grid.axes[i].step, hj = grid.axes[j].step;
  CVec dij;
  if (i == j) {
    dij = (v[nb(p, i, 1)] - 2.0 * u + v[nb(p, i, -1)]) / (hi * hi);
  } else {
    dij = (v[nb(nb(p, i, 1), j, 1)] - v[nb(nb(p, i, 1), j, -1)] - v[nb(nb(p, i, -1), j, 1)] +
           v[nb(nb(p, i, -1), j, -1)]) /
          (4.0 * hi * hj);
  }
  double ai = (I * u.dot(di)).real(), aj = (I * u.dot(dj)).real();
  CVec D = I * ai * proj(dj) + I * aj * proj(di) + proj(dij);
  return dk.dot(D).real();
}

double christoffel_from_metric(const GeometricField& field, const NuclearGrid& grid, long p, int k,
                               int i, int j) {
  auto dg = [&](int ax, int r, int c) {
    long pp = grid.neighbor(p, ax, 1), pm = grid.neighbor(p, ax, -1);
    if (pp < 0 || pm < 0) throw ConfigError("christoffel_from_metric needs an interior point");
    return (field.g[pp](r, c) - field.g[pm](r, c)) / (2.0 * grid.axes[ax].step);
  };
  return 0.5 * (dg(j, i, k) + dg(i, k, j) - dg(k, i, j));
}

}  // namespace efric::geometry
