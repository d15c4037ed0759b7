#include "efric/friction_dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "efric/parallel.hpp"
#include "efric/spectral.hpp"

namespace efric::friction {

std::string to_string(FrictionMode m) {
  switch (m) {
    case FrictionMode::markov_deltaA: return "markov_deltaA";
    case FrictionMode::kostin: return "kostin";
    case FrictionMode::non_markov: return "non_markov";
  }
  return "unknown";
}

std::optional<FrictionMode> mode_from_string(const std::string& s) {
  for (auto m : {FrictionMode::markov_deltaA, FrictionMode::kostin, FrictionMode::non_markov})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

Surface surface_from_model(const models::ParametricHamiltonian& h, const Axis& grid, int n, double mass) {
  if (h.dim_nuc != 1) throw ConfigError("friction propagation needs a model with one nuclear coordinate");
  auto g = geometry::make_grid({grid});
  auto frame = geometry::diagonalize_grid(h, g, n);
  auto field = geometry::qgt_fd(frame, g);
  Surface s{RVec(grid.n), RVec(grid.n), RVec(grid.n)};
  for (int i = 0; i < grid.n; ++i) {
    s.e0[i] = frame.energies[i][n];
    s.a0[i] = field.A[i][0];
    s.phi0[i] = field.g[i](0, 0) / (2.0 * mass);
  }
  return s;
}

Surface surface_from_potential(const Axis& grid, const std::function<double(double)>& v) {
  Surface s{RVec(grid.n), RVec::Zero(grid.n), RVec::Zero(grid.n)};
  for (int i = 0; i < grid.n; ++i) s.e0[i] = v(grid.at(i));
  return s;
}

NuclearState make_state(const Axis& grid, double mass, const CVec& psi) {
  if (psi.size() != grid.n) throw ConfigError("nuclear amplitude does not match the grid");
  if (!(mass > 0)) throw ConfigError("mass must be positive");
  return NuclearState{grid, mass, 0.0, psi, CVec::Zero(grid.n)};
}

void validate(const FrictionRunConfig& c) {
  if (!(c.dt > 0)) throw ConfigError("friction: dt must be positive");
  if (c.n_steps < 0) throw ConfigError("friction: n_steps must be >= 0");
  if (c.store_every < 1) throw ConfigError("friction: store_every must be >= 1");
  if (c.snapshot_every < 0) throw ConfigError("friction: snapshot_every must be >= 0");
  if (c.gamma < 0) throw ConfigError("friction: gamma must be >= 0");
  if (c.gamma_field && c.gamma_field->minCoeff() < 0) throw ConfigError("friction: gamma field must be >= 0");
  if (!(c.floor > 0 && c.floor < 1)) throw ConfigError("friction: floor must lie in (0, 1)");
  if (c.mode == FrictionMode::non_markov && c.kernel.empty())
    throw ConfigError("friction: non_markov mode needs memory kernel samples");
}

std::vector<unsigned char> support(const CVec& psi, double floor) {
  RVec rho = psi.cwiseAbs2();
  double m = rho.maxCoeff();
  std::vector<unsigned char> mask(psi.size());
  for (long i = 0; i < psi.size(); ++i) mask[i] = m > 0 && rho[i] >= floor * m;
  return mask;
}

namespace {

struct Workspace {
  spectral::Fft1d fft;
  RVec k;
  explicit Workspace(const Axis& g) : fft(g.n), k(spectral::wavenumbers(g.n, g.step)) {}
};

// chi(x) = int_{x_0}^x A, trapezoid.
RVec cumulative(const RVec& a, double h) {
  RVec c(a.size());
  c[0] = 0.0;
  for (long i = 1; i < a.size(); ++i) c[i] = c[i - 1] + 0.5 * h * (a[i - 1] + a[i]);
  return c;
}

// Extends a field defined on the support by holding the nearest support
// value; interior gaps keep the value on their left.
void hold_outside(RVec& f, const std::vector<unsigned char>& mask) {
  long n = f.size(), first = -1, last = -1;
  for (long i = 0; i < n; ++i)
    if (mask[i]) {
      if (first < 0) first = i;
      last = i;
    }
  if (first < 0) {
    f.setZero();
    return;
  }
  for (long i = 0; i < first; ++i) f[i] = f[first];
  for (long i = first + 1; i < n; ++i)
    if (!mask[i]) f[i] = f[i - 1];
  for (long i = last + 1; i < n; ++i) f[i] = f[last];
}

// exp(-i (p - A)^2 dt / 2M) through the gauge factor exp(i chi).
void kinetic(CVec& psi, const RVec& chi, double dt, double mass, const Workspace& w) {
  psi.array() *= (-I * chi.array()).exp();
  w.fft.forward(psi);
  for (long i = 0; i < psi.size(); ++i) psi[i] *= std::exp(-I * w.k[i] * w.k[i] * dt / (2.0 * mass));
  w.fft.backward(psi);
  psi.array() *= (I * chi.array()).exp();
}

void strang(CVec& psi, const RVec& a, const RVec& v, double dt, double mass, double h, const Workspace& w) {
  RVec chi = cumulative(a, h);
  kinetic(psi, chi, dt / 2.0, mass, w);
  psi.array() *= (-I * v.array() * dt).exp();
  kinetic(psi, chi, dt / 2.0, mass, w);
}

double edge_density(const CVec& psi, int e, double h) {
  long n = psi.size();
  e = std::min<int>(e, int(n / 2));
  double s = 0.0;
  for (int i = 0; i < e; ++i) s += std::norm(psi[i]) + std::norm(psi[n - 1 - i]);
  return s * h;
}

double masked_fraction(const CVec& psi, const std::vector<unsigned char>& mask) {
  double tot = 0.0, off = 0.0;
  for (long i = 0; i < psi.size(); ++i) {
    double r = std::norm(psi[i]);
    tot += r;
    if (!mask[i]) off += r;
  }
  return tot > 0 ? off / tot : 0.0;
}

CVec gauged(const CVec& psi, const RVec& a, double h) {
  RVec chi = cumulative(a, h);
  return CVec(psi.array() * (-I * chi.array()).exp());
}

}  // namespace

CVec velocity(const NuclearState& s, const RVec& a, const std::vector<unsigned char>& mask) {
  spectral::Fft1d fft(s.grid.n);
  RVec k = spectral::wavenumbers(s.grid.n, s.grid.step);
  CVec d = spectral::derivative(fft, k, s.psi, 1);
  CVec v = CVec::Zero(s.grid.n);
  for (int i = 0; i < s.grid.n; ++i)
    if (mask[i]) v[i] = (-I * d[i] / s.psi[i] - a[i]) / s.mass;
  return v;
}

void accumulate_X(CVec& X, const CVec& v_old, const CVec& v_new, double dt, const std::vector<unsigned char>& mask) {
  for (long i = 0; i < X.size(); ++i)
    if (mask[i]) X[i] += 0.5 * dt * (v_old[i] + v_new[i]);
}

RVec delta_A(const CVec& X, const RVec& gamma, const std::vector<unsigned char>& mask) {
  RVec da = RVec::Zero(X.size());
  for (long i = 0; i < X.size(); ++i)
    if (mask[i]) da[i] = gamma[i] * X[i].real();
  hold_outside(da, mask);
  return da;
}

KostinResult kostin_potential(const CVec& psi, const RVec& gamma, double mass, double floor) {
  long n = psi.size();
  auto mask = support(psi, floor);
  KostinResult r{RVec::Zero(n), false};
  long anchor = 0;
  for (long i = 1; i < n; ++i)
    if (std::norm(psi[i]) > std::norm(psi[anchor])) anchor = i;
  RVec theta = RVec::Zero(n);
  auto unwrap = [&](long from, long to) {
    double d = std::arg(psi[to] * std::conj(psi[from]));
    if (std::abs(d) > pi / 2) r.near_node = true;
    theta[to] = theta[from] + d;
  };
  long last = anchor;
  for (long i = anchor + 1; i < n; ++i)
    if (mask[i]) {
      if (last != i - 1) r.near_node = true;
      unwrap(last, i);
      last = i;
    }
  last = anchor;
  for (long i = anchor - 1; i >= 0; --i)
    if (mask[i]) {
      if (last != i + 1) r.near_node = true;
      unwrap(last, i);
      last = i;
    }
  for (long i = 0; i < n; ++i)
    if (mask[i]) r.phi[i] = gamma[i] / mass * theta[i];
  hold_outside(r.phi, mask);
  return r;
}

MemoryForce non_markov_force(const std::vector<cplx>& kernel, const std::vector<CVec>& history, double dt) {
  MemoryForce out;
  if (history.empty()) throw ConfigError("memory force needs at least one velocity sample");
  long n = history[0].size();
  size_t len = std::min(kernel.size(), history.size());
  CVec acc = CVec::Zero(n);
  for (size_t j = 0; j < len; ++j) {
    double w = (j == 0 || j + 1 == kernel.size()) ? 0.5 : 1.0;
    acc += w * kernel[j] * history[j];
  }
  out.force = -2.0 * (acc * dt).real();
  double kmax = 0.0;
  for (auto g : kernel) kmax = std::max(kmax, std::abs(g));
  out.history_too_short = history.size() < kernel.size() || (kmax > 0 && std::abs(kernel.back()) > 1e-3 * kmax);
  return out;
}

RVec delta_A_memory(const std::vector<cplx>& kernel, double q, const std::deque<CVec>& history, double dt,
                    const std::vector<unsigned char>& mask) {
  long n = history.front().size();
  size_t len = std::min(kernel.size(), history.size());
  CVec acc = CVec::Zero(n);
  for (size_t j = 0; j < len; ++j) {
    double w = (j == 0 || j + 1 == kernel.size()) ? 0.5 : 1.0;
    acc += w * kernel[j] * history[j];
  }
  RVec da = RVec::Zero(n);
  for (long i = 0; i < n; ++i)
    if (mask[i]) da[i] = 2.0 * (acc[i] * dt).real() - 2.0 * q * history.front()[i].imag();
  hold_outside(da, mask);
  return da;
}

double mechanical_energy(const NuclearState& s, const Surface& surf, const RVec& da) {
  double h = s.grid.step;
  int n = s.grid.n;
  CVec phi = gauged(s.psi, surf.a0 + da, h);
  spectral::Fft1d fft(n);
  RVec k = spectral::wavenumbers(n, h);
  fft.forward(phi);
  double kin = 0.0;
  for (int i = 0; i < n; ++i) kin += std::norm(phi[i]) * k[i] * k[i];
  kin *= h / n / (2.0 * s.mass);
  double pot = 0.0;
  for (int i = 0; i < n; ++i) pot += std::norm(s.psi[i]) * (surf.e0[i] + surf.phi0[i]);
  return kin + pot * h;
}

namespace {

double mechanical_momentum(const NuclearState& s, const RVec& a, const Workspace& w) {
  int n = s.grid.n;
  CVec phi = gauged(s.psi, a, s.grid.step);
  w.fft.forward(phi);
  double p = 0.0;
  for (int i = 0; i < n; ++i)
    if (!(n % 2 == 0 && i == n / 2)) p += std::norm(phi[i]) * w.k[i];
  return p * s.grid.step / n;
}

}  // namespace

FrictionTrajectory propagate_friction(const NuclearState& s0, const Surface& surf, const FrictionRunConfig& c) {
  validate(c);
  const int n = s0.grid.n;
  const double h = s0.grid.step, m = s0.mass, dt = c.dt;
  if (surf.e0.size() != n || surf.a0.size() != n || surf.phi0.size() != n)
    throw ConfigError("surface data does not match the grid");
  RVec gamma = c.gamma_field ? *c.gamma_field : RVec::Constant(n, c.gamma);
  if (gamma.size() != n) throw ConfigError("gamma field does not match the grid");
  Workspace ws(s0.grid);
  FrictionTrajectory tr;
  NuclearState s = s0;
  std::deque<CVec> xhist;  // X(t - j dt), newest first
  const size_t hist_len = c.kernel.size();
  bool node_warned = false, leak_warned = false;

  auto vector_field = [&](const NuclearState& st, const std::vector<unsigned char>& mask) -> RVec {
    switch (c.mode) {
      case FrictionMode::markov_deltaA: return delta_A(st.X, gamma, mask);
      case FrictionMode::non_markov: return delta_A_memory(c.kernel, c.kernel_q, xhist, dt, mask);
      case FrictionMode::kostin: return RVec::Zero(n);
    }
    return RVec::Zero(n);
  };
  auto scalar_field = [&](const CVec& psi) -> RVec {
    RVec v = surf.e0 + surf.phi0;
    if (c.mode == FrictionMode::kostin) {
      auto k = kostin_potential(psi, gamma, m, c.floor);
      if (k.near_node && !node_warned) {
        tr.warnings.push_back("NodeWarning: phase unwrapping crossed a near-node region");
        node_warned = true;
      }
      v += k.phi + RVec::Constant(n, c.kostin_offset);
    }
    return v;
  };

  auto mask = support(s.psi, c.floor);
  if (c.mode == FrictionMode::non_markov) xhist.push_front(s.X);
  RVec da = vector_field(s, mask);
  auto record = [&](long step) {
    if (step % c.store_every == 0) {
      tr.obs.t.push_back(s.t);
      tr.obs.norm.push_back(s.psi.squaredNorm() * h);
      tr.obs.energy.push_back(mechanical_energy(s, surf, da));
      double x = 0.0;
      for (int i = 0; i < n; ++i) x += s.grid.at(i) * std::norm(s.psi[i]);
      tr.obs.x.push_back(x * h);
      tr.obs.p.push_back(mechanical_momentum(s, surf.a0 + da, ws));
    }
    if (c.snapshot_every > 0 && step % c.snapshot_every == 0) {
      tr.snapshot_times.push_back(s.t);
      tr.snapshots.push_back(s.psi);
    }
  };
  double e = edge_density(s.psi, c.edge_points, h);
  if (e > c.edge_tol) throw EdgeLeakError(e);
  record(0);

  for (long step = 1; step <= c.n_steps; ++step) {
    RVec a_n = surf.a0 + da;
    RVec v_n = scalar_field(s.psi);
    CVec vel_n = velocity(s, a_n, mask);

    // Predictor with the fields at t_n.
    NuclearState sp = s;
    strang(sp.psi, a_n, v_n, dt, m, h, ws);
    auto mask_p = support(sp.psi, c.floor);
    CVec vel_p = velocity(sp, a_n, mask_p);
    std::vector<unsigned char> both(n);
    for (int i = 0; i < n; ++i) both[i] = mask[i] && mask_p[i];
    accumulate_X(sp.X, vel_n, vel_p, dt, both);
    if (c.mode == FrictionMode::non_markov) xhist.push_front(sp.X);
    RVec da_p = vector_field(sp, mask_p);
    if (c.mode == FrictionMode::non_markov) xhist.pop_front();
    RVec v_p = scalar_field(sp.psi);

    // Corrector with midpoint fields.
    RVec a_mid = surf.a0 + 0.5 * (da + da_p);
    RVec v_mid = 0.5 * (v_n + v_p);
    strang(s.psi, a_mid, v_mid, dt, m, h, ws);
    s.t += dt;
    auto mask_new = support(s.psi, c.floor);
    CVec vel_new = velocity(s, surf.a0 + da_p, mask_new);
    for (int i = 0; i < n; ++i) both[i] = mask[i] && mask_new[i];
    accumulate_X(s.X, vel_n, vel_new, dt, both);
    mask = mask_new;
    if (c.mode == FrictionMode::non_markov) {
      xhist.push_front(s.X);
      while (xhist.size() > hist_len) xhist.pop_back();
    }
    da = vector_field(s, mask);

    e = edge_density(s.psi, c.edge_points, h);
    if (e > c.edge_tol) throw EdgeLeakError(e);
    double mf = masked_fraction(s.psi, mask);
    tr.max_masked_density = std::max(tr.max_masked_density, mf);
    if (mf > 1e-6 && !leak_warned) {
      tr.warnings.push_back("NodeWarning: masked density exceeded 1e-6");
      leak_warned = true;
    }
    record(step);
  }
  if (c.mode == FrictionMode::non_markov) {
    double kmax = 0.0;
    for (auto g : c.kernel) kmax = std::max(kmax, std::abs(g));
    if (kmax > 0 && std::abs(c.kernel.back()) > 1e-3 * kmax)
      tr.warnings.push_back("HistoryTooShortWarning: memory kernel has not decayed within the buffer");
  }
  tr.final_state = s;
  return tr;
}

EnergyAudit energy_audit(const FrictionObservables& obs, double tol) {
  EnergyAudit a;
  if (obs.energy.empty()) return a;
  a.e0 = obs.energy[0];
  double scale = std::abs(a.e0) > 0 ? std::abs(a.e0) : 1.0;
  a.max_increase = -INFINITY;
  for (size_t i = 0; i < obs.energy.size(); ++i) {
    a.max_relative_drift = std::max(a.max_relative_drift, std::abs(obs.energy[i] - a.e0) / scale);
    if (i > 0) {
      double inc = obs.energy[i] - obs.energy[i - 1];
      a.max_increase = std::max(a.max_increase, inc);
      if (inc > tol * scale) a.monotone = false;
    }
  }
  if (obs.energy.size() < 2) a.max_increase = 0.0;
  if (obs.energy.size() >= 2) a.initial_rate = -(obs.energy[1] - obs.energy[0]) / (obs.t[1] - obs.t[0]);
  return a;
}

}  // namespace efric::friction
