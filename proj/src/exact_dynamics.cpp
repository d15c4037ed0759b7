#include "efric/exact_dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "efric/parallel.hpp"

namespace efric::exact {

namespace {

geometry::NuclearGrid grid1d(const Axis& a) { return geometry::make_grid({a}); }

CVec column(const CMat& m, int c) { return m.col(c); }

CMat spectral_columns(const spectral::Fft1d& fft, const RVec& k, const CMat& amp, int order) {
  CMat out(amp.rows(), amp.cols());
  for (int m = 0; m < amp.cols(); ++m) out.col(m) = spectral::derivative(fft, k, column(amp, m), order);
  return out;
}

// Centered stencil weights for orders 6 and 8, indexed by offset.
struct Stencil {
  int r;
  double d1[5], d2[5];
};
constexpr Stencil kS6{3, {0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0, 0.0},
                      {-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0, 0.0}};
constexpr Stencil kS8{4, {0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0},
                      {-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0}};

template <class Get>
auto fd_first(const Stencil& st, Get f, long i, double h) {
  using T = std::decay_t<decltype(f(i))>;
  T s = (f(i + 1) - f(i - 1)) * st.d1[1];
  for (int j = 2; j <= st.r; ++j) s += (f(i + j) - f(i - j)) * st.d1[j];
  return T(s / h);
}

template <class Get>
auto fd_second(const Stencil& st, Get f, long i, double h) {
  using T = std::decay_t<decltype(f(i))>;
  T s = f(i) * st.d2[0];
  for (int j = 1; j <= st.r; ++j) s += (f(i + j) + f(i - j)) * st.d2[j];
  return T(s / (h * h));
}

CVec proj_q(const CVec& u, const CVec& v) { return v - u * u.dot(v); }

}  // namespace

double FullWavefunction::norm2() const { return amp.squaredNorm() * grid.step; }

CVec gaussian_packet(const Axis& grid, double x0, double sigma, double p0) {
  if (sigma <= 0) throw ConfigError("packet width must be positive");
  CVec psi(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    double y = grid.at(i) - x0;
    psi[i] = std::exp(I * p0 * y - y * y / (4.0 * sigma * sigma));
  }
  psi /= std::sqrt(psi.squaredNorm() * grid.step);
  return psi;
}

FullWavefunction adiabatic_state(const models::ParametricHamiltonian& h, const Axis& grid, int n,
                                 const CVec& psi, double mass) {
  if (h.dim_nuc != 1) throw ConfigError("exact dynamics needs a model with one nuclear coordinate");
  if (psi.size() != grid.n) throw ConfigError("nuclear amplitude does not match the grid");
  auto frame = geometry::diagonalize_grid(h, grid1d(grid), n);
  FullWavefunction w{grid, mass, 0.0, CMat(grid.n, h.dim_el)};
  for (int i = 0; i < grid.n; ++i) w.amp.row(i) = psi[i] * frame.vectors[i].transpose();
  return w;
}

FullWavefunction diabatic_state(const Axis& grid, int dim_el, int m, const CVec& psi, double mass) {
  if (m < 0 || m >= dim_el) throw ConfigError("diabatic index out of range");
  if (psi.size() != grid.n) throw ConfigError("nuclear amplitude does not match the grid");
  FullWavefunction w{grid, mass, 0.0, CMat::Zero(grid.n, dim_el)};
  w.amp.col(m) = psi;
  return w;
}

SplitOperator::SplitOperator(const models::ParametricHamiltonian& h, const Axis& grid, double mass, double dt)
    : grid_(grid), mass_(mass), dt_(dt), dim_el_(h.dim_el) {
  if (h.dim_nuc != 1) throw ConfigError("exact dynamics needs a model with one nuclear coordinate");
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  if (!(mass > 0)) throw ConfigError("mass must be positive");
  geometry::make_grid({grid}).validate();
  fft_ = std::make_unique<spectral::Fft1d>(grid.n);
  RVec k = spectral::wavenumbers(grid.n, grid.step);
  kin_half_.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) kin_half_[i] = std::exp(-I * k[i] * k[i] / (2.0 * mass) * (dt / 2.0));
  expv_.resize(grid.n);
  parallel_for(grid.n, [&](long i) {
    RVec x(1);
    x[0] = grid.at(int(i));
    Eigen::SelfAdjointEigenSolver<CMat> es(h.eval(x));
    CVec ph(dim_el_);
    for (int m = 0; m < dim_el_; ++m) ph[m] = std::exp(-I * es.eigenvalues()[m] * dt);
    expv_[i] = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
  });
}

void SplitOperator::step(FullWavefunction& psi) const {
  auto kinetic = [&]() {
    for (int m = 0; m < dim_el_; ++m) {
      CVec c = psi.amp.col(m);
      fft_->forward(c);
      c.array() *= kin_half_.array();
      fft_->backward(c);
      psi.amp.col(m) = c;
    }
  };
  kinetic();
  for (int i = 0; i < grid_.n; ++i) {
    CVec r = psi.amp.row(i).transpose();
    psi.amp.row(i) = (expv_[i] * r).transpose();
  }
  kinetic();
  psi.t += dt_;
}

double edge_density(const FullWavefunction& psi, int edge_points) {
  int n = int(psi.amp.rows());
  int e = std::min(edge_points, n / 2);
  double s = 0.0;
  for (int i = 0; i < e; ++i) s += psi.amp.row(i).squaredNorm() + psi.amp.row(n - 1 - i).squaredNorm();
  return s * psi.grid.step;
}

Trajectory propagate_exact(const FullWavefunction& psi0, const models::ParametricHamiltonian& h,
                           const PropagationOptions& opt) {
  if (opt.n_steps < 0) throw ConfigError("number of steps must be >= 0");
  if (opt.store_every < 1) throw ConfigError("store_every must be >= 1");
  if (psi0.amp.cols() != h.dim_el || psi0.amp.rows() != psi0.grid.n)
    throw ConfigError("wavefunction shape does not match model and grid");
  SplitOperator op(h, psi0.grid, psi0.mass, opt.dt);
  Trajectory tr;
  tr.snapshot_dt = opt.dt * double(opt.store_every);
  FullWavefunction psi = psi0;
  auto store = [&]() {
    tr.snapshots.push_back(psi);
    tr.times.push_back(psi.t);
    tr.norm.push_back(psi.norm2());
    tr.energy.push_back(total_energy(psi, h));
  };
  double e0 = edge_density(psi, opt.edge_points);
  if (e0 > opt.edge_tol) throw EdgeLeakError(e0);
  store();
  for (long s = 1; s <= opt.n_steps; ++s) {
    op.step(psi);
    double e = edge_density(psi, opt.edge_points);
    if (e > opt.edge_tol) throw EdgeLeakError(e);
    if (s % opt.store_every == 0) store();
  }
  return tr;
}

double total_energy(const FullWavefunction& psi, const models::ParametricHamiltonian& h) {
  int n = psi.grid.n;
  spectral::Fft1d fft(n);
  RVec k = spectral::wavenumbers(n, psi.grid.step);
  double kin = 0.0;
  for (int m = 0; m < psi.dim_el(); ++m) {
    CVec c = psi.amp.col(m);
    fft.forward(c);
    for (int i = 0; i < n; ++i) kin += std::norm(c[i]) * k[i] * k[i];
  }
  kin *= psi.grid.step / n / (2.0 * psi.mass);
  std::vector<double> pot(n);
  parallel_for(n, [&](long i) {
    RVec x(1);
    x[0] = psi.grid.at(int(i));
    CVec r = psi.amp.row(i).transpose();
    pot[i] = r.dot(h.eval(x) * r).real();
  });
  double v = 0.0;
  for (double p : pot) v += p;
  return kin + v * psi.grid.step;
}

double mean_position(const FullWavefunction& psi) {
  double s = 0.0;
  for (int i = 0; i < psi.grid.n; ++i) s += psi.grid.at(i) * psi.amp.row(i).squaredNorm();
  return s * psi.grid.step;
}

double mean_momentum(const FullWavefunction& psi) {
  int n = psi.grid.n;
  spectral::Fft1d fft(n);
  RVec k = spectral::wavenumbers(n, psi.grid.step);
  double s = 0.0;
  for (int m = 0; m < psi.dim_el(); ++m) {
    CVec c = psi.amp.col(m);
    fft.forward(c);
    for (int i = 0; i < n; ++i)
      if (!(n % 2 == 0 && i == n / 2)) s += std::norm(c[i]) * k[i];
  }
  return s * psi.grid.step / n;
}

double mean_force(const FullWavefunction& psi, const models::ParametricHamiltonian& h) {
  int n = psi.grid.n;
  std::vector<double> f(n);
  parallel_for(n, [&](long i) {
    RVec x(1);
    x[0] = psi.grid.at(int(i));
    CVec r = psi.amp.row(i).transpose();
    f[i] = -r.dot(h.grad(x, 0) * r).real();
  });
  double s = 0.0;
  for (double v : f) s += v;
  return s * psi.grid.step;
}

RVec adiabatic_populations(const FullWavefunction& psi, const models::ParametricHamiltonian& h) {
  int n = psi.grid.n, d = psi.dim_el();
  std::vector<RVec> per(n);
  parallel_for(n, [&](long i) {
    RVec x(1);
    x[0] = psi.grid.at(int(i));
    Eigen::SelfAdjointEigenSolver<CMat> es(h.eval(x));
    CVec r = psi.amp.row(i).transpose();
    per[i] = (es.eigenvectors().adjoint() * r).cwiseAbs2();
  });
  RVec pop = RVec::Zero(d);
  for (const auto& p : per) pop += p;
  return pop * psi.grid.step;
}

double nonadiabatic_population(const FullWavefunction& psi, const models::ParametricHamiltonian& h, int n) {
  RVec pop = adiabatic_populations(psi, h);
  if (n < 0 || n >= pop.size()) throw ConfigError("level index out of range");
  // Sum the complement directly; 1 - pop[n] would lose digits at small leakage.
  double s = 0.0;
  for (int m = 0; m < pop.size(); ++m)
    if (m != n) s += pop[m];
  return s;
}

RVec FactorizedState::connection() const {
  RVec a = RVec::Zero(grid.n);
  for (int i = 0; i < grid.n; ++i)
    if (mask[i]) a[i] = -u.col(i).dot(du.col(i)).imag();
  return a;
}

FactorizedState factorize(const FullWavefunction& w, double floor) {
  int n = w.grid.n, d = w.dim_el();
  double h = w.grid.step;
  FactorizedState s;
  s.grid = w.grid;
  s.mass = w.mass;
  s.t = w.t;
  s.dim_el = d;
  s.floor = floor;
  s.rho = w.amp.rowwise().squaredNorm();
  double rmax = s.rho.maxCoeff();
  if (!(rmax > 0)) throw EmptySupportError();
  s.anchor = 0;
  for (int i = 1; i < n; ++i)
    if (s.rho[i] > s.rho[s.anchor]) s.anchor = i;
  s.mask.assign(n, 0);
  double total = 0.0, masked = 0.0;
  for (int i = 0; i < n; ++i) {
    s.mask[i] = s.rho[i] >= floor * rmax;
    total += s.rho[i];
    if (!s.mask[i]) masked += s.rho[i];
  }
  s.masked_density = masked / total;

  spectral::Fft1d fft(n);
  RVec k = spectral::wavenumbers(n, h);
  CMat d1 = spectral_columns(fft, k, w.amp, 1);
  CMat d2 = spectral_columns(fft, k, w.amp, 2);

  // Pointwise invariants of Psi and its derivatives.
  RVec n2(n), th1 = RVec::Zero(n), th2 = RVec::Zero(n);
  CVec alpha = CVec::Zero(n), dalpha = CVec::Zero(n);
  for (int i = 0; i < n; ++i) {
    n2[i] = s.rho[i];
    if (!s.mask[i]) continue;
    CVec p = w.amp.row(i).transpose(), p1 = d1.row(i).transpose(), p2 = d2.row(i).transpose();
    cplx s1 = p.dot(p1), s2 = p.dot(p2);
    double t11 = p1.squaredNorm();
    double dn2 = 2.0 * s1.real();
    alpha[i] = -s1 / n2[i];
    dalpha[i] = -((t11 + s2) * n2[i] - s1 * dn2) / (n2[i] * n2[i]);
    th1[i] = s1.imag() / n2[i];
    th2[i] = (s2.imag() * n2[i] - s1.imag() * dn2) / (n2[i] * n2[i]);
  }

  // Phase of psi: Euler-Maclaurin corrected trapezoid along x from the
  // anchor; across masked gaps the discrete transport condition is used.
  RVec theta = RVec::Zero(n);
  s.psi = CVec::Zero(n);
  s.dpsi = CVec::Zero(n);
  s.u = CMat::Zero(d, n);
  s.du = CMat::Zero(d, n);
  s.d2u = CMat::Zero(d, n);
  auto fill = [&](int i) {
    double nn = std::sqrt(n2[i]);
    cplx wgt = std::exp(-I * theta[i]) / nn;
    CVec p = w.amp.row(i).transpose(), p1 = d1.row(i).transpose(), p2 = d2.row(i).transpose();
    s.u.col(i) = wgt * p;
    s.du.col(i) = wgt * (p1 + alpha[i] * p);
    s.d2u.col(i) = wgt * (p2 + 2.0 * alpha[i] * p1 + (dalpha[i] + alpha[i] * alpha[i]) * p);
    s.psi[i] = nn * std::exp(I * theta[i]);
    s.dpsi[i] = -alpha[i] * s.psi[i];
  };
  auto jump = [&](int from, int to) {
    CVec p = w.amp.row(to).transpose();
    theta[to] = std::arg(s.u.col(from).dot(p));
  };
  fill(int(s.anchor));
  int last = int(s.anchor);
  for (int i = int(s.anchor) + 1; i < n; ++i) {
    if (!s.mask[i]) continue;
    if (last == i - 1)
      theta[i] = theta[i - 1] + 0.5 * h * (th1[i - 1] + th1[i]) - h * h / 12.0 * (th2[i] - th2[i - 1]);
    else
      jump(last, i);
    fill(i);
    last = i;
  }
  last = int(s.anchor);
  for (int i = int(s.anchor) - 1; i >= 0; --i) {
    if (!s.mask[i]) continue;
    if (last == i + 1)
      theta[i] = theta[i + 1] - (0.5 * h * (th1[i] + th1[i + 1]) - h * h / 12.0 * (th2[i + 1] - th2[i]));
    else
      jump(last, i);
    fill(i);
    last = i;
  }
  return s;
}

FullWavefunction recompose(const FactorizedState& s) {
  FullWavefunction w{s.grid, s.mass, s.t, CMat::Zero(s.grid.n, s.dim_el)};
  for (int i = 0; i < s.grid.n; ++i)
    if (s.mask[i]) w.amp.row(i) = s.psi[i] * s.u.col(i).transpose();
  return w;
}

VelocityField velocity_field(const FactorizedState& s, const RVec& a) {
  if (a.size() != s.grid.n) throw ConfigError("connection field does not match the grid");
  VelocityField v{CVec::Zero(s.grid.n), s.mask};
  for (int i = 0; i < s.grid.n; ++i)
    if (s.mask[i]) v.V[i] = (-I * s.dpsi[i] / s.psi[i] - a[i]) / s.mass;
  return v;
}

VelocityField velocity_field(const FactorizedState& s) { return velocity_field(s, s.connection()); }

namespace {

// Q d_t u from finite differences of neighbor snapshots, after removing the
// global phase offset between their gauges.
CMat time_derivative_fd(const FactorizedState& s, const FactorizedState& prev, const FactorizedState& next,
                        double dt) {
  auto aligned = [&](const FactorizedState& o) {
    cplx ov = 0.0;
    for (int i = 0; i < s.grid.n; ++i)
      if (s.mask[i] && o.mask[i]) ov += s.rho[i] * s.u.col(i).dot(o.u.col(i));
    return CMat(o.u * (std::conj(ov) / std::abs(ov)));
  };
  CMat up = aligned(next), um = aligned(prev);
  return (up - um) / (2.0 * dt);
}

}  // namespace

ForceBreakdown force_breakdown(const FactorizedState& s, const models::ParametricHamiltonian& h,
                               const FactorizedState* prev, const FactorizedState* next, double dt) {
  int n = s.grid.n;
  double m = s.mass;
  ForceBreakdown f;
  for (RVec* v : {&f.f_bo, &f.f_el, &f.f_el_c, &f.f_mag_c, &f.f_nbo, &f.f_ed, &f.f_ed_fd, &f.delta_e, &f.g})
    *v = RVec::Zero(n);
  f.mask = s.mask;
  VelocityField vf = velocity_field(s);
  RVec a = s.connection();
  CMat dtu;
  f.has_fd = prev && next && dt > 0;
  if (f.has_fd) dtu = time_derivative_fd(s, *prev, *next, dt);
  parallel_for(n, [&](long i) {
    if (!s.mask[i]) return;
    RVec x(1);
    x[0] = s.grid.at(int(i));
    CMat hm = h.eval(x), hg = h.grad(x, 0);
    CVec u = s.u.col(i), u1 = s.du.col(i), u2 = s.d2u.col(i);
    CVec hu = hm * u;
    CVec qu1 = proj_q(u, u1);
    CVec qhu = proj_q(u, hu);
    double g = qu1.squaredNorm();
    f.g[i] = g;
    f.delta_e[i] = qhu.norm();
    f.f_bo[i] = -(2.0 * u1.dot(hu).real() + u.dot(hg * u).real());
    f.f_nbo[i] = 2.0 * qu1.dot(qhu).real();
    CVec du = 2.0 * I * a[i] * qu1 + proj_q(u, u2);
    double rdu = u1.dot(du).real();
    f.f_el[i] = -rdu / m;
    f.f_el_c[i] = 2.0 * g * vf.V[i].imag() - 2.0 * rdu / m;
    f.f_mag_c[i] = 0.0;
    CVec ku = -I * vf.V[i] * qu1 - du / (2.0 * m);
    CVec qdt = -I * (qhu + proj_q(u, ku));
    f.f_ed[i] = -2.0 * u1.dot(qdt).imag();
    if (f.has_fd) f.f_ed_fd[i] = -2.0 * u1.dot(proj_q(u, dtu.col(i))).imag();
  });
  return f;
}

AverageForceReport averaged_force_check(const ForceBreakdown& f, const FactorizedState& s) {
  AverageForceReport r;
  for (int i = 0; i < s.grid.n; ++i) {
    if (!s.mask[i]) continue;
    double rho = s.rho[i];
    r.f_el_c += rho * f.f_el_c[i];
    r.f_mag_c += rho * f.f_mag_c[i];
    r.abs_f_bo += rho * std::abs(f.f_bo[i]);
    r.f_tot += rho * (f.f_bo[i] + f.f_el_c[i] + f.f_mag_c[i] + f.f_nbo[i]);
  }
  double tot = s.rho.sum();
  r.f_el_c /= tot;
  r.f_mag_c /= tot;
  r.abs_f_bo /= tot;
  r.f_tot /= tot;
  r.masked_density = s.masked_density;
  r.ratio = r.abs_f_bo > 0 ? std::abs(r.f_el_c) / r.abs_f_bo : std::abs(r.f_el_c);
  if (r.masked_density > 1e-6)
    r.warnings.push_back("masked density " + std::to_string(r.masked_density) +
                         " exceeds 1e-6; the averages cover only the support");
  return r;
}

NboBoundReport nbo_bound_check(const ForceBreakdown& f) {
  NboBoundReport r;
  r.max_violation = -INFINITY;
  for (long i = 0; i < f.f_nbo.size(); ++i) {
    if (!f.mask[i]) continue;
    double bound = 2.0 * f.delta_e[i] * std::sqrt(f.g[i]);
    r.max_violation = std::max(r.max_violation, std::abs(f.f_nbo[i]) - bound);
    if (bound > 0) r.max_ratio = std::max(r.max_ratio, std::abs(f.f_nbo[i]) / bound);
    ++r.points;
  }
  if (r.points == 0) r.max_violation = 0.0;
  return r;
}

EhrenfestReport ehrenfest_check(const Trajectory& traj, const models::ParametricHamiltonian& h, bool factorized) {
  EhrenfestReport r;
  size_t ns = traj.snapshots.size();
  if (ns < 3) throw ConfigError("Ehrenfest check needs at least 3 stored times");
  double dt = traj.snapshot_dt;
  std::vector<double> p(ns);
  for (size_t i = 0; i < ns; ++i) p[i] = mean_momentum(traj.snapshots[i]);
  for (size_t i = 1; i + 1 < ns; ++i) {
    double dpdt = (p[i + 1] - p[i - 1]) / (2.0 * dt);
    double f = mean_force(traj.snapshots[i], h);
    r.times.push_back(traj.times[i]);
    r.dpdt.push_back(dpdt);
    r.force.push_back(f);
    r.max_residual = std::max(r.max_residual, std::abs(dpdt - f));
    if (factorized) {
      auto s = factorize(traj.snapshots[i]);
      auto fb = force_breakdown(s, h);
      double ff = 0.0;
      for (int j = 0; j < s.grid.n; ++j)
        if (s.mask[j]) ff += s.rho[j] * (fb.f_bo[j] + fb.f_el[j] + fb.f_mag_c[j] + fb.f_ed[j]);
      ff *= s.grid.step;
      r.factorized_force.push_back(ff);
      r.max_factorized_residual = std::max(r.max_factorized_residual, std::abs(dpdt - ff));
    }
  }
  return r;
}

MomentumIdentityReport momentum_identity_check(const FactorizedState& s, const std::function<double(double)>& chi,
                                    double resolve_tol) {
  int n = s.grid.n, d = s.dim_el;
  double h = s.grid.step, m = s.mass;
  std::vector<cplx> ph(n, 1.0);
  if (chi)
    for (int i = 0; i < n; ++i) ph[i] = std::exp(I * chi(s.grid.at(i)));
  // Gauge-changed fields: u -> exp(-i chi) u, psi -> exp(i chi) psi.
  CMat ut(d, n);
  CVec pt(n);
  for (int i = 0; i < n; ++i) {
    ut.col(i) = std::conj(ph[i]) * s.u.col(i);
    pt[i] = ph[i] * s.psi[i];
  }
  auto inside = [&](long i, int r) {
    if (i - r < 0 || i + r >= n) return false;
    for (long j = i - r; j <= i + r; ++j)
      if (!s.mask[j]) return false;
    return true;
  };
  auto getu = [&](long j) { return CVec(ut.col(j)); };
  auto getp = [&](long j) { return pt[j]; };
  // Left side at every point whose nested stencils stay on the support.
  auto left_side = [&](const Stencil& st, std::vector<CVec>& out, std::vector<unsigned char>& ok) {
    RVec at = RVec::Zero(n);
    std::vector<CVec> u1(n);
    out.assign(n, CVec());
    ok.assign(n, 0);
    for (long i = 0; i < n; ++i) {
      if (!inside(i, st.r)) continue;
      u1[i] = fd_first(st, getu, i, h);
      at[i] = -ut.col(i).dot(u1[i]).imag();
    }
    auto geta = [&](long j) { return at[j]; };
    for (long i = 0; i < n; ++i) {
      if (!inside(i, 2 * st.r)) continue;
      double da = fd_first(st, geta, i, h);
      CVec u = ut.col(i);
      CVec u2 = fd_second(st, getu, i, h);
      cplx lp = fd_first(st, getp, i, h) / pt[i];
      out[i] = (-u2 - I * da * u - at[i] * at[i] * u) / (2.0 * m) + (-I * lp) * (-I * u1[i] + at[i] * u) / m;
      ok[i] = 1;
    }
  };
  std::vector<CVec> l6, l8;
  std::vector<unsigned char> ok6, ok8;
  left_side(kS6, l6, ok6);
  left_side(kS8, l8, ok8);

  MomentumIdentityReport r;
  std::vector<double> res(n, 0.0), mag(n, 0.0);
  std::vector<unsigned char> used(n, 0);
  double support_density = 0.0, excluded_density = 0.0, raw_res = 0.0, raw_scale = 0.0;
  for (long i = 0; i < n; ++i) {
    if (!s.mask[i]) continue;
    support_density += s.rho[i];
    if (!ok8[i] || !ok6[i]) {
      excluded_density += s.rho[i];
      continue;
    }
    // Right side from the transported frame, carried over by the phase
    // factor since every term is gauge tensorial.
    CVec v = s.u.col(i), v1 = s.du.col(i), v2 = s.d2u.col(i);
    double a0 = -v.dot(v1).imag();
    CVec qv1 = proj_q(v, v1);
    double g = qv1.squaredNorm();
    cplx vel = (-I * s.dpsi[i] / s.psi[i] - a0) / m;
    CVec du = 2.0 * I * a0 * qv1 + proj_q(v, v2);
    CVec rhs = std::conj(ph[i]) * (CVec(-I * vel * qv1 - du / (2.0 * m)) + g / (2.0 * m) * v);
    double local = std::max(l8[i].norm(), rhs.norm());
    // Two stencil orders disagreeing means the frame is not resolved here.
    if ((l8[i] - l6[i]).norm() > resolve_tol * local) {
      ++r.unresolved;
      excluded_density += s.rho[i];
      continue;
    }
    res[i] = (l8[i] - rhs).norm();
    mag[i] = local;
    used[i] = 1;
    raw_res = std::max(raw_res, res[i]);
    raw_scale = std::max(raw_scale, local);
    ++r.points;
  }
  // Weighting by |psi| measures the residual of psi times the electronic
  // equation, which removes the 1/|psi| amplification of derivative roundoff
  // in the tails.
  for (int i = 0; i < n; ++i) {
    if (!used[i]) continue;
    double a = std::abs(s.psi[i]);
    if (a * res[i] > r.max_residual) r.worst = i;
    r.max_residual = std::max(r.max_residual, a * res[i]);
    r.scale = std::max(r.scale, a * mag[i]);
  }
  r.relative = r.scale > 0 ? r.max_residual / r.scale : r.max_residual;
  r.unweighted_relative = raw_scale > 0 ? raw_res / raw_scale : raw_res;
  r.excluded_density = support_density > 0 ? excluded_density / support_density : 0.0;
  return r;
}

LiteReport lite_error(const FullWavefunction& w, const models::ParametricHamiltonian& h, int lvl) {
  int n = w.grid.n;
  double dx = w.grid.step, m = w.mass;
  auto grid = grid1d(w.grid);
  auto frame = geometry::diagonalize_grid(h, grid, lvl);
  auto field = geometry::qgt_fd(frame, grid);
  spectral::Fft1d fft(n);
  RVec k = spectral::wavenumbers(n, dx);
  CVec psi(n);
  for (int i = 0; i < n; ++i) psi[i] = frame.vectors[i].dot(w.amp.row(i).transpose());
  CVec dpsi = spectral::derivative(fft, k, psi, 1);
  CMat t_psi = spectral_columns(fft, k, w.amp, 2) * (-1.0 / (2.0 * m));
  std::vector<double> gq(n), ge(n);
  parallel_for(n, [&](long i) {
    RVec x(1);
    x[0] = w.grid.at(int(i));
    double g = geometry::qgt_sos(h, x, lvl)(0, 0).real();
    cplx v = (-I * dpsi[i] - field.A[i][0] * psi[i]) / m;
    gq[i] = g * std::norm(v);
    const CVec& u = frame.vectors[i];
    CVec tp = t_psi.row(i).transpose();
    ge[i] = proj_q(u, tp).squaredNorm();
  });
  LiteReport r;
  for (int i = 0; i < n; ++i) {
    r.eps2_qgt += gq[i] * dx;
    r.eps2_exact += ge[i] * dx;
  }
  r.mean_x = mean_position(w);
  r.mean_v = mean_momentum(w) / m;
  RVec xc(1);
  xc[0] = r.mean_x;
  r.eps2_classical = r.mean_v * r.mean_v * geometry::qgt_sos(h, xc, lvl)(0, 0).real();
  return r;
}

SpawnReport spawn_probability_check(const FullWavefunction& psi0, const models::ParametricHamiltonian& h, int lvl,
                                    const std::vector<double>& dts, int substeps) {
  if (dts.empty()) throw ConfigError("empty time-step list");
  if (substeps < 1) throw ConfigError("substeps must be >= 1");
  SpawnReport r;
  r.dts = dts;
  r.eps2 = lite_error(psi0, h, lvl).eps2_exact;
  r.prob.resize(dts.size());
  parallel_for(long(dts.size()), [&](long j) {
    if (!(dts[j] > 0)) throw ConfigError("time steps must be positive");
    SplitOperator op(h, psi0.grid, psi0.mass, dts[j] / substeps);
    FullWavefunction w = psi0;
    for (int s = 0; s < substeps; ++s) op.step(w);
    r.prob[j] = nonadiabatic_population(w, h, lvl);
  });
  // Least squares P / dt^2 = a + b dt.
  double s0 = 0, s1 = 0, s2 = 0, y0 = 0, y1 = 0;
  for (size_t j = 0; j < dts.size(); ++j) {
    double t = dts[j], y = r.prob[j] / (t * t);
    s0 += 1;
    s1 += t;
    s2 += t * t;
    y0 += y;
    y1 += y * t;
  }
  double det = s0 * s2 - s1 * s1;
  r.coefficient = dts.size() >= 2 && det > 0 ? (y0 * s2 - y1 * s1) / det : y0 / s0;
  r.ratio = r.eps2 > 0 ? r.coefficient / r.eps2 : 0.0;
  for (size_t j = 0; j < dts.size(); ++j)
    r.quad_residual.push_back(std::abs(r.prob[j] - r.eps2 * dts[j] * dts[j]));
  r.residual_shrink = INFINITY;
  for (size_t a = 0; a < dts.size(); ++a)
    for (size_t b = 0; b < dts.size(); ++b)
      if (std::abs(dts[b] * 2.0 - dts[a]) < 1e-12 * dts[a] && r.quad_residual[b] > 0)
        r.residual_shrink = std::min(r.residual_shrink, r.quad_residual[a] / r.quad_residual[b]);
  double eps = std::sqrt(r.eps2);
  double tmax = *std::max_element(dts.begin(), dts.end());
  if (tmax * eps > 0.1)
    r.warnings.push_back("largest dt exceeds 0.1/eps; the quadratic regime may not be resolved");
  return r;
}

}  // namespace efric::exact
