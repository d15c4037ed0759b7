#include "efric/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "efric/friction_dynamics.hpp"
#include "efric/geometry.hpp"
#include "efric/kernels.hpp"
#include "efric/parallel.hpp"

namespace efric::suite {

namespace {

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Check make(int id, std::string name, double value, double tol, bool pass, std::string detail) {
  Check c;
  c.id = id;
  c.name = std::move(name);
  c.value = value;
  c.tolerance = tol;
  c.pass = pass && std::isfinite(value);
  c.detail = std::move(detail);
  return c;
}

CMat random_hermitian(int n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = {g(rng), g(rng)};
  return 0.5 * (m + m.adjoint());
}

// Distance of a from b on the circle.
double angle_distance(double a, double b) {
  double d = std::remainder(a - b, 2.0 * pi);
  return std::abs(d);
}

// Phase-space distance between two orbits relative to the orbit size.
double orbit_mismatch(const friction::FrictionObservables& a, const friction::FrictionObservables& b, double mw) {
  double diff = 0.0, size = 0.0;
  for (std::size_t i = 0; i < std::min(a.x.size(), b.x.size()); ++i) {
    diff = std::max(diff, std::hypot(a.x[i] - b.x[i], (a.p[i] - b.p[i]) / mw));
    size = std::max(size, std::hypot(a.x[i], a.p[i] / mw));
  }
  return size > 0 ? diff / size : 0.0;
}

models::ParametricHamiltonian band_model(int n, double w, int dim_nuc) {
  models::PolyField eps, d;
  eps.c0 = 0.1;
  d.c0 = 0.12;
  eps.lin = {0.4, -0.25, 0.15};
  eps.quad = {0.3, 0.2, 0.1};
  d.lin = {0.05, 0.08, -0.03};
  eps.lin.resize(dim_nuc), eps.quad.resize(dim_nuc), d.lin.resize(dim_nuc);
  return models::build_independent_band(n, w, dim_nuc, eps.field(), d.field(), 0.0);
}

}  // namespace

models::ParametricHamiltonian random_testbed(int dim_el, int dim_nuc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CMat h0 = random_hermitian(dim_el, rng, 1.0);
  std::vector<CMat> v, w;
  for (int k = 0; k < dim_nuc; ++k) v.push_back(random_hermitian(dim_el, rng, 0.3));
  for (int k = 0; k < dim_nuc; ++k) w.push_back(random_hermitian(dim_el, rng, 0.1));
  auto eval = [=](const RVec& x) {
    CMat m = h0;
    for (int k = 0; k < dim_nuc; ++k) m += x[k] * v[k] + 0.5 * x[k] * x[k] * w[k];
    return m;
  };
  auto grad = [=](const RVec& x, int k) -> CMat { return v[k] + x[k] * w[k]; };
  return models::from_functions("random_testbed", dim_el, dim_nuc, eval, grad);
}

CollisionRun collision_run(int grid_points, long n_steps, long store_every) {
  auto t0 = clock_type::now();
  CollisionRun r{models::build_avoided_crossing(0.02, 1.0, 0.0, 0.01), {}, 0.0};
  geometry::Axis ax{-7.0, 14.0 / grid_points, grid_points};
  auto psi = exact::gaussian_packet(ax, -1.0, 0.4, 7.7);
  auto w = exact::adiabatic_state(r.h, ax, 0, psi, 2000.0);
  exact::PropagationOptions opt;
  opt.dt = 0.1;
  opt.n_steps = n_steps;
  opt.store_every = store_every;
  r.traj = exact::propagate_exact(w, r.h, opt);
  r.seconds = since(t0);
  return r;
}

Check models_consistency(const Options& o) {
  auto t0 = clock_type::now();
  std::mt19937_64 rng(o.seed + 11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<models::ParametricHamiltonian> hs = {
      models::build_spin_monopole(1.0), models::build_conical(1.0, 0.7),
      models::build_avoided_crossing(0.02, 1.0, 0.003, 0.01), band_model(32, 2.0, 2),
      random_testbed(8, 3, o.seed + 5)};
  double herm = 0.0, grad = 0.0;
  int samples = o.quick ? 10 : 100;
  for (const auto& h : hs)
    for (int s = 0; s < samples; ++s) {
      RVec x(h.dim_nuc);
      for (int k = 0; k < h.dim_nuc; ++k) x[k] = u(rng);
      herm = std::max(herm, models::hermiticity_error(h.eval(x)));
      for (int k = 0; k < h.dim_nuc; ++k) {
        CMat g = h.grad(x, k);
        herm = std::max(herm, models::hermiticity_error(g));
        double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
        grad = std::max(grad, (g - models::fd_gradient(h, x, k, 1e-4)).cwiseAbs().maxCoeff() / scale);
      }
    }
  Check c = make(0, "model hermiticity and analytic gradients", std::max(herm / 1e-13, grad / 1e-6), 1.0,
                 herm < 1e-13 && grad < 1e-6, fmt("max |H - H^+| = %.2e, max grad error vs FD = %.2e", herm, grad));
  c.seconds = since(t0);
  return c;
}

Check qgt_cross_validation(const Options& o) {
  std::mt19937_64 rng(o.seed + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Case {
    models::ParametricHamiltonian h;
    double lo, hi;
  };
  std::vector<Case> cases = {{models::build_spin_monopole(1.0), 0.4, 1.2},
                             {models::build_conical(1.0, 0.7), 0.4, 1.2},
                             {models::build_avoided_crossing(0.02, 1.0, 0.0, 0.01), 0.0, 2.0}};
  const double step = 1e-3;
  int samples = o.quick ? 3 : 10;
  double worst = 0.0, slowest = 0.0;
  std::string detail;
  for (auto& cs : cases) {
    auto t0 = clock_type::now();
    double err = 0.0;
    for (int s = 0; s < samples; ++s) {
      RVec x(cs.h.dim_nuc);
      do {
        for (int k = 0; k < cs.h.dim_nuc; ++k) x[k] = cs.hi * u(rng);
      } while (x.norm() < cs.lo);
      std::vector<geometry::Axis> axes;
      for (int k = 0; k < cs.h.dim_nuc; ++k) axes.push_back({x[k] - step, step, 3});
      auto grid = geometry::make_grid(axes);
      auto frame = geometry::diagonalize_grid(cs.h, grid, 0);
      auto field = geometry::qgt_fd(frame, grid);
      long centre = grid.size() / 2;
      CMat sos = geometry::qgt_sos(cs.h, grid.point(centre), 0);
      err = std::max(err, (field.q[centre] - sos).norm() / sos.norm());
    }
    double sec = since(t0);
    slowest = std::max(slowest, sec);
    worst = std::max(worst, err);
    detail += (detail.empty() ? "" : ", ") + cs.h.label + fmt(" %.2e (%.2fs)", err, sec);
  }
  Check c = make(1, "QGT finite differences vs sum over states", worst, 1e-5, worst < 1e-5 && slowest < 10.0,
                 "max rel err: " + detail);
  c.seconds = slowest;
  return c;
}

Check berry_phases(const Options& o) {
  auto t0 = clock_type::now();
  auto circle = [](const RVec& c, double r, int a, int b, int n) {
    std::vector<RVec> loop;
    for (int i = 0; i < n; ++i) {
      RVec x = c;
      double t = 2.0 * pi * i / n;
      x[a] += r * std::cos(t);
      x[b] += r * std::sin(t);
      loop.push_back(x);
    }
    return loop;
  };
  auto con = models::build_conical(1.0, 0.7);
  double around = angle_distance(geometry::berry_phase_loop(con, circle(RVec::Zero(2), 0.5, 0, 1, 256), 0), pi);
  double empty = angle_distance(geometry::berry_phase_loop(con, circle(RVec::Constant(2, 1.5), 0.5, 0, 1, 256), 0), 0.0);

  // Latitude loops on the unit sphere around the monopole.
  auto mono = models::build_spin_monopole(1.0);
  double lat = 0.0;
  const int n_lat = o.quick ? 512 : 2048;
  for (double theta : {0.4, 1.0, 2.0, 2.6}) {
    std::vector<RVec> loop;
    for (int i = 0; i < n_lat; ++i) {
      double p = 2.0 * pi * i / n_lat;
      RVec x(3);
      x << std::sin(theta) * std::cos(p), std::sin(theta) * std::sin(p), std::cos(theta);
      loop.push_back(x);
    }
    double cap = pi * (1.0 - std::cos(theta));
    lat = std::max(lat, angle_distance(geometry::berry_phase_loop(mono, loop, 1), -cap));
    lat = std::max(lat, angle_distance(geometry::berry_phase_loop(mono, loop, 0), cap));
  }
  bool pass = around < 1e-6 && empty < 1e-6 && lat < 1e-4;
  Check c = make(2, "Berry phases of closed loops", std::max({around / 1e-6, empty / 1e-6, lat / 1e-4}), 1.0, pass,
                 fmt("conical |phase - pi| = %.2e, empty loop %.2e, monopole latitudes max %.2e", around, empty, lat));
  c.seconds = since(t0);
  return c;
}

Check kernel_equivalences(const Options& o) {
  auto t0 = clock_type::now();
  std::vector<models::ParametricHamiltonian> hs = {band_model(o.quick ? 199 : 499, 2.0, 2),
                                                   random_testbed(40, 3, o.seed + 2)};
  std::mt19937_64 rng(o.seed + 3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double eform = 0.0, split = 0.0, forms = 0.0;
  for (const auto& h : hs)
    for (int s = 0; s < 3; ++s) {
      RVec x(h.dim_nuc);
      for (int k = 0; k < h.dim_nuc; ++k) x[k] = u(rng);
      auto ex = kernels::single_reference(h, x);
      kernels::BroadeningScheme g;
      g.kind = kernels::DeltaKind::gaussian;
      auto bg = kernels::resolve(g, ex.spacing);
      CMat bare = kernels::bare_kernel(ex, bg);
      double nb = bare.norm();
      eform = std::max(eform, (RMat(bare.real()) - kernels::energy_form_friction(h, x, bg)).norm() / nb);
      forms = std::max(forms, (RMat(kernels::markov_friction(ex, bg).real()) - kernels::markov_friction_alt(h, x, bg)).norm() /
                                  kernels::markov_friction(ex, bg).norm());
      kernels::BroadeningScheme rs = g;
      rs.kind = kernels::DeltaKind::resolvent;
      auto br = kernels::resolve(rs, ex.spacing);
      CMat bare_r = kernels::bare_kernel(ex, br);
      CMat rhs = -2.0 * I * kernels::geometric_tensor(ex) + kernels::markov_friction(ex, br);
      split = std::max(split, (bare_r - rhs).norm() / bare_r.norm());
    }
  double sec = since(t0);
  bool pass = eform < 1e-9 && split < 1e-8 && forms < 1e-10 && sec < 30.0;
  Check c = make(3, "kernel equivalences at matched broadening", std::max({eform / 1e-9, split / 1e-8, forms / 1e-10}),
                 1.0, pass,
                 fmt("Re bare vs energy form %.2e, bare vs -2iq+gamma %.2e, two Markov forms %.2e, %.1fs", eform, split, forms, sec));
  c.seconds = sec;
  return c;
}

Check orbital_reduction(const Options& o) {
  auto t0 = clock_type::now();
  const int n = 400;
  auto h = band_model(n, 2.0, 2);
  double spacing = 2.0 / (n - 1);
  kernels::Broadening b;
  b.kind = kernels::DeltaKind::gaussian;
  b.eta = 16.0 * spacing;
  b.omega = 0.0;
  b.epsilon = b.eta;
  b.spacing = spacing;
  double worst = 0.0;
  std::mt19937_64 rng(o.seed + 4);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int s = 0; s < (o.quick ? 2 : 5); ++s) {
    RVec x(2);
    x << u(rng), u(rng);
    RMat alt = kernels::markov_friction_alt_fermi_sea(h, x, b);
    RMat orb = kernels::orbital_friction(h, x, b);
    worst = std::max(worst, (alt - orb).norm() / orb.norm());
  }
  Check c = make(4, "independent-electron reduction to the orbital-sum kernel", worst, 0.05, worst < 0.05,
                 fmt("max rel diff %.3f at eta = 16 spacings, omega = 0, N = 400", worst));
  c.seconds = since(t0);
  return c;
}

Check tensor_symmetries(const Options& o) {
  auto t0 = clock_type::now();
  auto h = random_testbed(30, 3, o.seed + 6);
  std::mt19937_64 rng(o.seed + 7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double asym = 0.0, psd = INFINITY;
  for (int s = 0; s < 50; ++s) {
    RVec x(3);
    for (int k = 0; k < 3; ++k) x[k] = u(rng);
    kernels::BroadeningScheme sc;
    for (kernels::DeltaKind kind : {kernels::DeltaKind::gaussian, kernels::DeltaKind::lorentzian}) {
      sc.kind = kind;
      auto r = kernels::symmetry_report(kernels::markov_friction(h, x, sc));
      asym = std::max({asym, r.re_asymmetry, r.im_symmetry});
      psd = std::min(psd, r.min_eig_rel);
    }
  }
  Check c = make(5, "friction tensor symmetries and positivity", std::max(asym / 1e-10, -psd / 1e-9), 1.0,
                 asym < 1e-10 && psd >= -1e-9,
                 fmt("max asymmetry %.2e, min eigenvalue / norm %.2e over 50 configurations", asym, psd));
  c.seconds = since(t0);
  return c;
}

namespace {

std::vector<std::size_t> analysis_indices(const exact::Trajectory& t, double t_max, std::size_t count) {
  std::vector<std::size_t> in;
  for (std::size_t i = 1; i + 1 < t.snapshots.size(); ++i)
    if (t.times[i] <= t_max) in.push_back(i);
  std::vector<std::size_t> out;
  std::size_t stride = std::max<std::size_t>(1, in.size() / count);
  for (std::size_t i = 0; i < in.size(); i += stride) out.push_back(in[i]);
  return out;
}

}  // namespace

Check vanishing_average(const CollisionRun& run, double t_max) {
  auto t0 = clock_type::now();
  auto idx = analysis_indices(run.traj, t_max, 16);
  double ratio = 0.0, masked = 0.0;
  for (std::size_t i : idx) {
    auto s = exact::factorize(run.traj.snapshots[i]);
    auto f = exact::force_breakdown(s, run.h);
    auto a = exact::averaged_force_check(f, s);
    ratio = std::max(ratio, a.ratio);
    masked = std::max(masked, a.masked_density);
  }
  bool pass = idx.size() >= 3 && ratio < 1e-4 && masked < 1e-6 && run.seconds < 120.0;
  Check c = make(6, "vanishing average of the corrected pseudo-Lorentz force", ratio, 1e-4, pass,
                 fmt("max |<F_el,c>| / <|F_BO|> = %.2e, masked density %.1e, %g snapshots, run %.1fs", ratio, masked,
                     double(idx.size()), run.seconds));
  c.seconds = since(t0) + run.seconds;
  return c;
}

Check nbo_bound(const CollisionRun& run, double t_max) {
  auto t0 = clock_type::now();
  auto idx = analysis_indices(run.traj, t_max, 1u << 30);
  double violation = -INFINITY, ratio = 0.0;
  long points = 0;
  for (std::size_t i : idx) {
    auto s = exact::factorize(run.traj.snapshots[i]);
    auto r = exact::nbo_bound_check(exact::force_breakdown(s, run.h));
    violation = std::max(violation, r.max_violation);
    ratio = std::max(ratio, r.max_ratio);
    points += r.points;
  }
  Check c = make(7, "NBO force bounded by local energy fluctuation", ratio, 1.0 + 1e-12,
                 ratio <= 1.0 + 1e-12 && points > 0,
                 fmt("max |F_NBO| / (2 dE sqrt g) = %.6f, max excess %.2e over %g support points", ratio, violation,
                     double(points)));
  c.seconds = since(t0);
  return c;
}

Check momentum_identity(const CollisionRun& run, double t_max) {
  auto t0 = clock_type::now();
  auto idx = analysis_indices(run.traj, t_max, 16);
  auto chi = [](double x) { return 0.3 * std::sin(1.3 * x) + 0.1 * x * x; };
  double rel = 0.0, excluded = 0.0;
  for (std::size_t i : idx) {
    auto s = exact::factorize(run.traj.snapshots[i]);
    auto r = exact::momentum_identity_check(s, chi);
    rel = std::max(rel, r.relative);
    excluded = std::max(excluded, r.excluded_density);
  }
  Check c = make(8, "momentum-form identity for the electronic drag", rel, 1e-6, rel < 1e-6 && !idx.empty(),
                 fmt("max relative residual %.2e, max unresolved density share %.1e, %g snapshots", rel, excluded,
                     double(idx.size())));
  c.seconds = since(t0);
  return c;
}

Check lite_spawning(const Options& o) {
  auto t0 = clock_type::now();
  // Narrow fast packet: the exact local error approaches the classical-velocity form.
  auto h = models::build_avoided_crossing(0.02, 1.0, 0.0, 0.01);
  geometry::Axis narrow{-3.0, 6.0 / 1024, 1024};
  auto w = exact::adiabatic_state(h, narrow, 0, exact::gaussian_packet(narrow, 0.0, 0.04, 120.0), 2000.0);
  auto lite = exact::lite_error(w, h, 0);
  double classical = std::abs(lite.eps2_exact / lite.eps2_classical - 1.0);

  geometry::Axis ax{-7.0, 14.0 / 1024, 1024};
  auto w0 = exact::adiabatic_state(h, ax, 0, exact::gaussian_packet(ax, 0.0, 0.4, 7.7), 2000.0);
  double eps = std::sqrt(exact::lite_error(w0, h, 0).eps2_exact);
  std::vector<double> dts;
  for (int k = 0; k < (o.quick ? 4 : 6); ++k) dts.push_back(0.1 / eps / std::pow(2.0, k));
  auto sp = exact::spawn_probability_check(w0, h, 0, dts, 64);
  double quad = std::abs(sp.ratio - 1.0);
  Check c = make(9, "local-in-time error and spawning probability", std::max(quad / 0.1, classical / 0.05), 1.0,
                 quad < 0.1 && classical < 0.05,
                 fmt("fitted P/dt^2 over eps^2 = %.4f, narrow packet eps^2 over classical form = %.4f", sp.ratio,
                     lite.eps2_exact / lite.eps2_classical));
  c.seconds = since(t0);
  return c;
}

Check friction_propagator(const Options& o) {
  auto t0 = clock_type::now();
  const double mass = 2000.0, omega = 0.005, k = mass * omega * omega;
  geometry::Axis ax{-4.0, 8.0 / 512, 512};
  auto surf = friction::surface_from_potential(ax, [&](double x) { return 0.5 * k * x * x; });
  auto psi = exact::gaussian_packet(ax, 1.0, std::sqrt(1.0 / (2.0 * mass * omega)), 0.0);
  auto s0 = friction::make_state(ax, mass, psi);
  const long steps = o.quick ? 2000 : 10000;
  auto run = [&](friction::FrictionMode mode, double gamma, double dt) {
    friction::FrictionRunConfig c;
    c.mode = mode;
    c.gamma = gamma;
    c.dt = dt;
    c.n_steps = steps;
    c.store_every = 1;
    return friction::propagate_friction(s0, surf, c);
  };
  auto drift = [](const friction::FrictionTrajectory& t) {
    double d = 0.0;
    for (double n : t.obs.norm) d = std::max(d, std::abs(n - t.obs.norm.front()));
    return d;
  };
  auto damped = run(friction::FrictionMode::markov_deltaA, 0.5, 0.5);
  auto kostin = run(friction::FrictionMode::kostin, 0.5, 0.5);
  auto free_run = run(friction::FrictionMode::markov_deltaA, 0.0, 0.025);
  auto ad = friction::energy_audit(damped.obs), ak = friction::energy_audit(kostin.obs);
  auto af = friction::energy_audit(free_run.obs);
  double norm = std::max({drift(damped), drift(kostin), drift(free_run)});
  double mismatch = orbit_mismatch(damped.obs, kostin.obs, mass * omega);
  double dissipated = (damped.obs.energy.front() - damped.obs.energy.back()) / damped.obs.energy.front();
  bool pass = norm < 1e-8 && ad.monotone && ak.monotone && dissipated > 0 && af.max_relative_drift < 1e-8 &&
              mismatch < 0.05;
  Check c = make(10, "friction propagator norm, energy and mode agreement",
                 std::max({norm / 1e-8, af.max_relative_drift / 1e-8, mismatch / 0.05}), 1.0, pass,
                 fmt("norm drift %.1e; gamma>0 monotone, largest rise %.1e; gamma=0 drift %.1e; Kostin vs dA %.1e",
                     norm, std::max(ad.max_increase, ak.max_increase), af.max_relative_drift, mismatch));
  c.seconds = since(t0);
  return c;
}

Check ehrenfest_consistency(const CollisionRun& run) {
  auto t0 = clock_type::now();
  auto r = exact::ehrenfest_check(run.traj, run.h);
  Check c = make(11, "Ehrenfest consistency of the exact run", r.max_residual, 1e-5, r.max_residual < 1e-5,
                 fmt("max |d<p>/dt - <-dH>| = %.2e au over %g times, snapshot spacing %g", r.max_residual,
                     double(r.times.size()), run.traj.snapshot_dt));
  c.seconds = since(t0);
  return c;
}

std::vector<Check> run_all(const Options& o) {
  std::vector<Check> out;
  out.push_back(models_consistency(o));
  out.push_back(qgt_cross_validation(o));
  out.push_back(berry_phases(o));
  out.push_back(kernel_equivalences(o));
  out.push_back(orbital_reduction(o));
  out.push_back(tensor_symmetries(o));
  const long steps = o.quick ? 4000 : 10000;
  const double window = o.quick ? 400.0 : 800.0;
  auto run = collision_run(1024, steps, 10);
  out.push_back(vanishing_average(run, window));
  out.push_back(nbo_bound(run, INFINITY));
  auto fine = collision_run(2048, steps, 100);
  out.push_back(momentum_identity(fine, window));
  out.push_back(lite_spawning(o));
  out.push_back(friction_propagator(o));
  out.push_back(ehrenfest_consistency(run));
  return out;
}

}  // namespace efric::suite
