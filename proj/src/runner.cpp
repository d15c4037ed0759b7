#include "efric/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "efric/exact_dynamics.hpp"
#include "efric/friction_dynamics.hpp"
#include "efric/geometry.hpp"
#include "efric/kernels.hpp"
#include "efric/parallel.hpp"
#include "efric/plot.hpp"
#include "efric/series.hpp"
#include "efric/suite.hpp"
#include "efric/trajectory_store.hpp"

namespace efric::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kGammaUnit = "hartree*au_time/bohr^2";

struct Context {
  const Manifest& m;
  fs::path out;
  bool plot = false;
  json checks = json::array();
  json outputs = json::array();
  std::vector<std::string> warnings;
  std::ostringstream& diag;
  bool hard_failure = false;

  void check(const std::string& name, double value, double tol, bool pass, bool hard, const std::string& detail = "") {
    pass = pass && std::isfinite(value);
    checks.push_back({{"name", name},
                      {"value", std::isfinite(value) ? json(value) : json(nullptr)},
                      {"tolerance", tol},
                      {"pass", pass},
                      {"hard", hard},
                      {"detail", detail}});
    diag << (pass ? "PASS " : (hard ? "FAIL " : "SOFT-FAIL ")) << name << ": value " << value << " tolerance " << tol
         << (detail.empty() ? "" : " (" + detail + ")") << "\n";
    if (hard && !pass) hard_failure = true;
  }

  void warn(const std::string& w) {
    if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
    diag << "warning: " << w << "\n";
  }

  SeriesFile series(std::vector<Column> cols) const {
    SeriesFile s;
    s.manifest_sha256 = m.sha256;
    s.columns = std::move(cols);
    return s;
  }

  void record(const std::string& name) {
    std::ifstream f(out / name, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    outputs.push_back({{"file", name}, {"sha256", sha256_hex(ss.str())}});
    diag << "wrote " << (out / name).string() << "\n";
  }

  void write(const SeriesFile& s, const std::string& name) {
    write_series(s, (out / name).string());
    record(name);
  }

  void figure(const SeriesFile& s, const PlotSpec& p, const std::string& name) {
    if (!plot) return;
    emit_plot(s, p, (out / name).string());
    diag << "wrote " << (out / name).string() << "\n";
  }
};

std::string ij(const std::string& base, int i, int j) { return base + "_" + std::to_string(i) + std::to_string(j); }

// Fermi-sea excitations for band models, the single reference otherwise.
kernels::Excitations reference_excitations(const models::ParametricHamiltonian& h, const RVec& x, int level) {
  return h.band ? kernels::fermi_sea(h, x) : kernels::single_reference(h, x, level);
}

double relative_max_deviation(const std::vector<double>& v) {
  double d = 0.0;
  for (double x : v) d = std::max(d, std::abs(x - v.front()));
  return v.front() != 0.0 ? d / std::abs(v.front()) : d;
}

// ---------------------------------------------------------------- geometry

void run_geometry(Context& cx) {
  const Manifest& m = cx.m;
  auto h = models::build(*m.model);
  auto grid = geometry::make_grid(m.grid);
  grid.validate();
  if (m.level >= h.dim_el) throw ConfigError("level " + std::to_string(m.level) + " exceeds the model dimension");
  auto frame = geometry::diagonalize_grid(h, grid, m.level);
  auto field = geometry::qgt_fd(frame, grid);
  const int d = grid.dim();
  const long n = grid.size();

  std::vector<CMat> sos(n);
  std::vector<double> herm(n, 0.0);
  parallel_for(n, [&](long p) {
    RVec x = grid.point(p);
    herm[p] = models::hermiticity_error(h.eval(x));
    for (int k = 0; k < d; ++k) herm[p] = std::max(herm[p], models::hermiticity_error(h.grad(x, k)));
    sos[p] = geometry::qgt_sos(h, x, m.level);
  });

  std::vector<Column> cols;
  for (int k = 0; k < d; ++k) cols.push_back({"x" + std::to_string(k), "bohr"});
  cols.push_back({"E", "hartree"});
  cols.push_back({"gap", "hartree"});
  for (int k = 0; k < d; ++k) cols.push_back({"A_" + std::to_string(k), "1/bohr"});
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) cols.push_back({ij("g", i, j), "1/bohr^2"});
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) cols.push_back({ij("B", i, j), "1/bohr^2"});
  cols.push_back({"phi", "1/bohr^2"});
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) cols.push_back({ij("g_sos", i, j), "1/bohr^2"});
  cols.push_back({"boundary", "1"});
  SeriesFile s = cx.series(cols);

  double fd_err = 0.0, min_eig = 0.0, gscale = 0.0;
  auto phi = geometry::scalar_potential(field);
  for (long p = 0; p < n; ++p) {
    std::vector<double> row;
    RVec x = grid.point(p);
    for (int k = 0; k < d; ++k) row.push_back(x[k]);
    row.push_back(frame.energies[p][m.level]);
    row.push_back(frame.gap[p]);
    for (int k = 0; k < d; ++k) row.push_back(field.A[p][k]);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) row.push_back(field.g[p](i, j));
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) row.push_back(field.B[p](i, j));
    row.push_back(phi[p]);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) row.push_back(sos[p](i, j).real());
    row.push_back(field.boundary[p] ? 1.0 : 0.0);
    s.add_row(std::move(row));
    Eigen::SelfAdjointEigenSolver<RMat> es(field.g[p]);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    gscale = std::max(gscale, field.g[p].norm());
    if (!field.boundary[p] && sos[p].norm() > 0)
      fd_err = std::max(fd_err, (field.q[p] - sos[p]).norm() / sos[p].norm());
  }
  cx.write(s, "geometry.tsv");

  double herm_max = *std::max_element(herm.begin(), herm.end());
  cx.check("hamiltonian hermiticity", herm_max, 1e-13, herm_max < 1e-13, true);
  cx.check("metric positive semidefinite", gscale > 0 ? -min_eig / gscale : 0.0, 1e-9,
           min_eig >= -1e-9 * std::max(gscale, 1e-300), true);
  cx.check("finite-difference QGT vs sum over states (interior)", fd_err, 1e-5, fd_err < 1e-5, false,
           "agreement is limited by the grid spacing");

  if (m.loop) {
    const LoopSpec& l = *m.loop;
    std::vector<RVec> pts;
    for (int i = 0; i < l.points; ++i) {
      RVec x = l.center;
      double t = 2.0 * pi * i / l.points;
      x[l.plane_a] += l.radius * std::cos(t);
      x[l.plane_b] += l.radius * std::sin(t);
      pts.push_back(x);
    }
    double phase = geometry::berry_phase_loop(h, pts, m.level);
    SeriesFile ls = cx.series({{"radius", "bohr"}, {"points", "1"}, {"phase", "rad"}});
    ls.add_row({l.radius, double(l.points), phase});
    cx.write(ls, "loop.tsv");
    if (l.expected) {
      double dev = std::abs(std::remainder(phase - *l.expected, 2.0 * pi));
      cx.check("loop phase vs expected", dev, l.tolerance, dev <= l.tolerance, true);
    }
  }

  if (d == 1) {
    cx.figure(s, {PlotKind::line, "level energy", "x0", {"E"}}, "energy.svg");
    cx.figure(s, {PlotKind::line, "quantum metric", "x0", {"g_00", "g_sos_00"}}, "metric.svg");
  } else {
    // Slice through the middle of the remaining axes.
    SeriesFile sl = cx.series({{"x0", "bohr"}, {"x1", "bohr"}, {"B_01", "1/bohr^2"}, {"A_0", "1/bohr"},
                               {"A_1", "1/bohr"}, {"g_00", "1/bohr^2"}});
    for (long p = 0; p < n; ++p) {
      auto idx = grid.multi_index(p);
      bool mid = true;
      for (int k = 2; k < d; ++k) mid = mid && idx[k] == grid.axes[k].n / 2;
      if (!mid) continue;
      RVec x = grid.point(p);
      sl.add_row({x[0], x[1], field.B[p](0, 1), field.A[p][0], field.A[p][1], field.g[p](0, 0)});
    }
    cx.write(sl, "geometry_slice.tsv");
    cx.figure(sl, {PlotKind::heatmap, "curvature B_01", "x0", {"x1", "B_01"}}, "curvature.svg");
    cx.figure(sl, {PlotKind::quiver, "connection", "x0", {"x1", "A_0", "A_1"}}, "connection.svg");
  }
}

// ---------------------------------------------------------------- kernels

void run_kernels(Context& cx) {
  const Manifest& m = cx.m;
  auto h = models::build(*m.model);
  const long np = long(m.points.size());
  const int d = h.dim_nuc;
  RVec tau = m.tau_points > 0 ? RVec(RVec::LinSpaced(m.tau_points, 0.0, m.tau_max)) : RVec(0);
  std::vector<kernels::FrictionTensorSet> sets(np);
  std::vector<CMat> q(np);
  const std::vector<double> mults = {1.0, 2.0, 4.0, 8.0};
  std::vector<std::vector<CMat>> conv(np);
  std::vector<std::vector<RMat>> conv_alt(np);
  std::vector<std::vector<std::optional<RMat>>> conv_orbital(np);
  parallel_for(np, [&](long p) {
    sets[p] = kernels::evaluate(h, m.points[p], m.broadening, tau);
    auto ex = kernels::single_reference(h, m.points[p]);
    q[p] = kernels::geometric_tensor(ex);
    for (double f : mults) {
      kernels::BroadeningScheme sc = m.broadening;
      sc.eta = f * sets[p].broadening.eta;
      sc.floor_factor = 0.0;
      conv[p].push_back(kernels::markov_friction(ex, kernels::resolve(sc, ex.spacing)));
      conv_alt[p].push_back(kernels::markov_friction_alt(h, m.points[p], sc));
      conv_orbital[p].push_back(h.band ? std::optional<RMat>(kernels::orbital_friction(
                                         h, m.points[p], kernels::resolve(sc, kernels::fermi_sea(h, m.points[p]).spacing)))
                                   : std::nullopt);
    }
  });

  std::vector<Column> cols = {{"point", "1"}};
  for (int k = 0; k < d; ++k) cols.push_back({"x" + std::to_string(k), "bohr"});
  for (const char* c : {"eta", "omega", "epsilon", "spacing"}) cols.push_back({c, "hartree"});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      for (const char* c : {"bare_re", "bare_im", "gamma_re", "gamma_im", "gamma_alt", "gamma_energy"})
        cols.push_back({ij(c, i, j), kGammaUnit});
      if (h.band) cols.push_back({ij("gamma_orbital", i, j), kGammaUnit});
      cols.push_back({ij("q_re", i, j), "1/bohr^2"});
      cols.push_back({ij("q_im", i, j), "1/bohr^2"});
    }
  SeriesFile s = cx.series(cols);
  double asym = 0.0, psd = INFINITY, eform = 0.0, alt = 0.0;
  for (long p = 0; p < np; ++p) {
    const auto& t = sets[p];
    for (const auto& w : t.warnings) cx.warn(w);
    std::vector<double> row = {double(p)};
    for (int k = 0; k < d; ++k) row.push_back(m.points[p][k]);
    row.insert(row.end(), {t.broadening.eta, t.broadening.omega, t.broadening.epsilon, t.broadening.spacing});
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        row.insert(row.end(), {t.gamma_bar(i, j).real(), t.gamma_bar(i, j).imag(), t.gamma(i, j).real(),
                               t.gamma(i, j).imag(), t.gamma_alt(i, j), t.gamma_energy(i, j)});
        if (h.band) row.push_back((*t.gamma_orbital)(i, j));
        row.push_back(q[p](i, j).real());
        row.push_back(q[p](i, j).imag());
      }
    s.add_row(std::move(row));
    auto r = kernels::symmetry_report(t.gamma);
    asym = std::max({asym, r.re_asymmetry, r.im_symmetry});
    psd = std::min(psd, r.min_eig_rel);
    double nb = t.gamma_bar.norm(), ng = t.gamma.norm();
    if (nb > 0) eform = std::max(eform, (RMat(t.gamma_bar.real()) - t.gamma_energy).norm() / nb);
    if (ng > 0) alt = std::max(alt, (RMat(t.gamma.real()) - t.gamma_alt).norm() / ng);
  }
  cx.write(s, "kernels.tsv");

  std::vector<Column> cc = {{"point", "1"}, {"eta_factor", "1"}, {"eta", "hartree"}};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      cc.push_back({ij("gamma_re", i, j), kGammaUnit});
      cc.push_back({ij("gamma_alt", i, j), kGammaUnit});
      if (h.band) cc.push_back({ij("gamma_orbital", i, j), kGammaUnit});
    }
  SeriesFile cs = cx.series(cc);
  for (long p = 0; p < np; ++p)
    for (std::size_t f = 0; f < mults.size(); ++f) {
      std::vector<double> row = {double(p), mults[f], mults[f] * sets[p].broadening.eta};
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          row.push_back(conv[p][f](i, j).real());
          row.push_back(conv_alt[p][f](i, j));
          if (h.band) row.push_back((*conv_orbital[p][f])(i, j));
        }
      cs.add_row(std::move(row));
    }
  cx.write(cs, "kernels_convergence.tsv");

  if (tau.size() > 0) {
    std::vector<Column> mc = {{"point", "1"}, {"tau", "au_time"}};
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        mc.push_back({ij("Gamma_re", i, j), "hartree/bohr^2"});
        mc.push_back({ij("Gamma_im", i, j), "hartree/bohr^2"});
      }
    SeriesFile ms = cx.series(mc);
    for (long p = 0; p < np; ++p)
      for (Eigen::Index t = 0; t < tau.size(); ++t) {
        std::vector<double> row = {double(p), tau[t]};
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            row.push_back(sets[p].memory.values[t](i, j).real());
            row.push_back(sets[p].memory.values[t](i, j).imag());
          }
        ms.add_row(std::move(row));
      }
    cx.write(ms, "kernels_memory.tsv");
    cx.figure(ms, {PlotKind::line, "memory kernel at point 0", "tau", {"Gamma_re_00", "Gamma_im_00"}},
              "memory.svg");
  }

  cx.check("Re gamma symmetric and Im gamma antisymmetric", asym, 1e-10, asym < 1e-10, true);
  cx.check("Re gamma positive semidefinite", -psd, 1e-9, psd >= -1e-9, true);
  cx.check("Re bare kernel vs energy-domain form", eform, 1e-9, eform < 1e-9, false);
  cx.check("Markov friction, spectral vs linear-solve form", alt, 1e-10, alt < 1e-10, false);
  cx.figure(s, {PlotKind::line, "Markov friction along the sweep", "point", {"gamma_re_00", "gamma_energy_00"}},
            "kernels.svg");
}

// ---------------------------------------------------------------- exact propagation

std::vector<std::size_t> pick(const std::vector<double>& times, std::optional<double> t_max, std::size_t count) {
  std::vector<std::size_t> in;
  for (std::size_t i = 1; i + 1 < times.size(); ++i)
    if (!t_max || times[i] <= *t_max) in.push_back(i);
  std::vector<std::size_t> out;
  if (in.empty()) return out;
  std::size_t stride = std::max<std::size_t>(1, (in.size() + count - 1) / count);
  for (std::size_t i = 0; i < in.size(); i += stride) out.push_back(in[i]);
  return out;
}

SeriesFile density_series(const Context& cx, const geometry::Axis& ax, const std::vector<double>& times,
                          const std::function<double(std::size_t, int)>& rho) {
  SeriesFile s = cx.series({{"t", "au_time"}, {"x", "bohr"}, {"rho", "1/bohr"}});
  std::size_t ts = std::max<std::size_t>(1, (times.size() + 99) / 100);
  int xs = std::max(1, (ax.n + 255) / 256);
  for (std::size_t k = 0; k < times.size(); k += ts)
    for (int i = 0; i < ax.n; i += xs) s.add_row({times[k], ax.at(i), rho(k, i)});
  return s;
}

void run_exact(Context& cx) {
  const Manifest& m = cx.m;
  auto h = models::build(*m.model);
  const auto& ax = m.grid[0];
  const PacketSpec& pk = *m.packet;
  auto psi = exact::gaussian_packet(ax, pk.x0, pk.sigma, pk.p0);
  if (pk.diabat && *pk.diabat >= h.dim_el) throw ConfigError("packet.diabat exceeds the model dimension");
  if (pk.level >= h.dim_el) throw ConfigError("packet.level exceeds the model dimension");
  auto w0 = pk.diabat ? exact::diabatic_state(ax, h.dim_el, *pk.diabat, psi, m.mass)
                      : exact::adiabatic_state(h, ax, pk.level, psi, m.mass);
  const PropagationSpec& pr = *m.propagation;
  exact::PropagationOptions opt{pr.dt, pr.n_steps, pr.store_every, pr.edge_tol, pr.edge_points};
  auto t0 = std::chrono::steady_clock::now();
  auto traj = exact::propagate_exact(w0, h, opt);
  cx.diag << "propagation: " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
          << " s for " << pr.n_steps << " steps\n";
  const std::size_t ns = traj.snapshots.size();

  write_trajectory((cx.out / "trajectory.eftrj").string(), traj, m.sha256, h.label);
  cx.record("trajectory.eftrj");

  std::vector<Column> cols = {{"t", "au_time"},       {"norm", "1"},       {"energy", "hartree"},
                              {"x", "bohr"},          {"p", "au_momentum"}, {"force", "hartree/bohr"}};
  for (int k = 0; k < h.dim_el; ++k) cols.push_back({"pop_" + std::to_string(k), "1"});
  cols.push_back({"nonadiabatic", "1"});
  SeriesFile s = cx.series(cols);
  std::vector<RVec> pops(ns);
  std::vector<double> nad(ns), force(ns), xs(ns), ps(ns);
  parallel_for(long(ns), [&](long i) {
    const auto& w = traj.snapshots[i];
    pops[i] = exact::adiabatic_populations(w, h);
    nad[i] = exact::nonadiabatic_population(w, h, pk.level);
    force[i] = exact::mean_force(w, h);
    xs[i] = exact::mean_position(w);
    ps[i] = exact::mean_momentum(w);
  });
  for (std::size_t i = 0; i < ns; ++i) {
    std::vector<double> row = {traj.times[i], traj.norm[i], traj.energy[i], xs[i], ps[i], force[i]};
    for (int k = 0; k < h.dim_el; ++k) row.push_back(pops[i][k]);
    row.push_back(nad[i]);
    s.add_row(std::move(row));
  }
  cx.write(s, "exact.tsv");

  double norm_drift = 0.0;
  for (double v : traj.norm) norm_drift = std::max(norm_drift, std::abs(v - traj.norm.front()));
  cx.check("norm conservation", norm_drift, 1e-8, norm_drift < 1e-8, true);
  double e_drift = relative_max_deviation(traj.energy);
  cx.check("energy conservation (relative)", e_drift, 1e-6, e_drift < 1e-6, false, "split-operator error, O(dt^2)");

  auto idx = pick(traj.times, m.analysis.t_max, std::size_t(m.analysis.max_snapshots));
  if (idx.empty()) {
    cx.warn("fewer than 3 stored snapshots in the analysis window; force analyses skipped");
  } else {
    struct Row {
      double t, elc, magc, fbo, ratio, masked, nbo, momentum, unresolved, ed;
    };
    std::vector<Row> rows(idx.size());
    std::vector<std::string> warn(idx.size());
    parallel_for(long(idx.size()), [&](long k) {
      std::size_t i = idx[k];
      auto s0 = exact::factorize(traj.snapshots[i], m.analysis.floor);
      auto sp = exact::factorize(traj.snapshots[i - 1], m.analysis.floor);
      auto sn = exact::factorize(traj.snapshots[i + 1], m.analysis.floor);
      auto f = exact::force_breakdown(s0, h, &sp, &sn, traj.snapshot_dt);
      auto a = exact::averaged_force_check(f, s0);
      auto b = exact::nbo_bound_check(f);
      auto ab = exact::momentum_identity_check(s0, nullptr, m.analysis.resolve_tol);
      double ed = 0.0, scale = 0.0;
      for (int j = 0; j < s0.grid.n; ++j)
        if (f.mask[j]) {
          ed = std::max(ed, std::sqrt(s0.rho[j]) * std::abs(f.f_ed[j] - f.f_ed_fd[j]));
          scale = std::max(scale, std::sqrt(s0.rho[j]) * std::abs(f.f_ed[j]));
        }
      rows[k] = {traj.times[i], a.f_el_c, a.f_mag_c, a.abs_f_bo, a.ratio, a.masked_density, b.max_ratio,
                 ab.relative,   ab.excluded_density, scale > 0 ? ed / scale : 0.0};
      for (const auto& w : a.warnings) warn[k] += w;
    });
    SeriesFile fs = cx.series({{"t", "au_time"},
                               {"f_el_c", "hartree/bohr"},
                               {"f_mag_c", "hartree/bohr"},
                               {"abs_f_bo", "hartree/bohr"},
                               {"ratio", "1"},
                               {"masked_density", "1"},
                               {"nbo_ratio", "1"},
                               {"momentum_relative", "1"},
                               {"momentum_unresolved", "1"},
                               {"f_ed_fd_mismatch", "1"}});
    double ratio = 0, masked = 0, nbo = 0, momentum = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Row& r = rows[k];
      fs.add_row({r.t, r.elc, r.magc, r.fbo, r.ratio, r.masked, r.nbo, r.momentum, r.unresolved, r.ed});
      ratio = std::max(ratio, r.ratio), masked = std::max(masked, r.masked);
      nbo = std::max(nbo, r.nbo), momentum = std::max(momentum, r.momentum);
      if (!warn[k].empty()) cx.warn(warn[k]);
    }
    cx.write(fs, "forces.tsv");
    cx.check("averaged corrected pseudo-electric force / <|F_BO|>", ratio, 1e-4, ratio < 1e-4, true);
    cx.check("masked density", masked, 1e-6, masked < 1e-6, true);
    cx.check("NBO bound |F_NBO| <= 2 dE sqrt(g)", nbo, 1.0 + 1e-12, nbo <= 1.0 + 1e-12, true);
    cx.check("momentum-form drag identity (relative)", momentum, 1e-6, momentum < 1e-6, false,
             "limited by grid resolution of near-node regions");
    cx.figure(fs, {PlotKind::line, "averaged forces", "t", {"f_el_c", "abs_f_bo"}}, "forces.svg");
  }

  if (ns >= 3) {
    auto er = exact::ehrenfest_check(traj, h);
    SeriesFile es = cx.series({{"t", "au_time"}, {"dpdt", "hartree/bohr"}, {"force", "hartree/bohr"}});
    for (std::size_t i = 0; i < er.times.size(); ++i) es.add_row({er.times[i], er.dpdt[i], er.force[i]});
    cx.write(es, "ehrenfest.tsv");
    cx.check("Ehrenfest d<p>/dt vs <-dH>", er.max_residual, 1e-5, er.max_residual < 1e-5, false,
             "central difference over the stored spacing " + std::to_string(traj.snapshot_dt));
  }

  SeriesFile ds = density_series(cx, ax, traj.times, [&](std::size_t k, int i) {
    return traj.snapshots[k].amp.row(i).squaredNorm();
  });
  cx.write(ds, "density.tsv");
  cx.figure(ds, {PlotKind::heatmap, "nuclear density", "x", {"t", "rho"}}, "density.svg");
  std::vector<std::string> pcols;
  for (int k = 0; k < h.dim_el; ++k) pcols.push_back("pop_" + std::to_string(k));
  cx.figure(s, {PlotKind::line, "adiabatic populations", "t", pcols}, "populations.svg");
  cx.figure(s, {PlotKind::line, "total energy", "t", {"energy"}}, "energy.svg");
}

// ---------------------------------------------------------------- friction propagation

void run_friction(Context& cx) {
  const Manifest& m = cx.m;
  const auto& ax = m.grid[0];
  const FrictionSpec& fr = *m.friction;
  const SurfaceSpec& su = *m.surface;
  std::optional<models::ParametricHamiltonian> h;
  if (m.model) {
    h = models::build(*m.model);
    if (h->dim_nuc != 1) throw ConfigError("friction runs need a model with one nuclear coordinate");
  }

  friction::Surface surf =
      su.kind == "model"
          ? friction::surface_from_model(*h, ax, m.level, m.mass)
          : friction::surface_from_potential(ax, [&](double x) { return 0.5 * su.k * (x - su.center) * (x - su.center) + su.offset; });

  friction::FrictionRunConfig c;
  c.mode = fr.mode;
  c.floor = fr.floor;
  c.dt = m.propagation->dt;
  c.n_steps = m.propagation->n_steps;
  c.store_every = m.propagation->store_every;
  c.snapshot_every = fr.snapshot_every;
  c.edge_tol = m.propagation->edge_tol;
  c.edge_points = m.propagation->edge_points;
  c.kostin_offset = fr.kostin_offset;
  c.gamma = fr.gamma;
  RVec xp = RVec::Constant(1, fr.gamma_point);
  if (fr.gamma_source == "kernel_point") {
    auto ex = reference_excitations(*h, xp, m.level);
    c.gamma = kernels::markov_friction(ex, kernels::resolve(m.broadening, ex.spacing))(0, 0).real();
    cx.diag << "gamma from kernel at x = " << fr.gamma_point << ": " << c.gamma << "\n";
  } else if (fr.gamma_source == "kernel_field") {
    RVec g(ax.n);
    std::vector<std::string> w(ax.n);
    parallel_for(ax.n, [&](long i) {
      RVec x = RVec::Constant(1, ax.at(int(i)));
      auto ex = reference_excitations(*h, x, m.level);
      auto b = kernels::resolve(m.broadening, ex.spacing);
      g[i] = kernels::markov_friction(ex, b)(0, 0).real();
      if (!b.warnings.empty()) w[i] = b.warnings.front();
    });
    for (const auto& s : w)
      if (!s.empty()) {
        cx.warn(s);
        break;
      }
    c.gamma_field = g;
    SeriesFile gs = cx.series({{"x", "bohr"}, {"gamma", kGammaUnit}});
    for (int i = 0; i < ax.n; ++i) gs.add_row({ax.at(i), g[i]});
    cx.write(gs, "gamma_field.tsv");
  }
  if (fr.mode == friction::FrictionMode::non_markov) {
    auto ex = reference_excitations(*h, xp, m.level);
    RVec tau = RVec::LinSpaced(fr.memory_length, 0.0, c.dt * (fr.memory_length - 1));
    auto ks = kernels::memory_kernel(ex, tau);
    for (const auto& v : ks.values) c.kernel.push_back(v(0, 0));
    c.kernel_q = kernels::geometric_tensor(ex)(0, 0).real();
  }
  friction::validate(c);

  const PacketSpec& pk = *m.packet;
  auto s0 = friction::make_state(ax, m.mass, exact::gaussian_packet(ax, pk.x0, pk.sigma, pk.p0));
  auto tr = friction::propagate_friction(s0, surf, c);
  for (const auto& w : tr.warnings) cx.warn(w);

  SeriesFile s = cx.series({{"t", "au_time"}, {"norm", "1"}, {"energy", "hartree"}, {"x", "bohr"}, {"p", "au_momentum"}});
  for (std::size_t i = 0; i < tr.obs.t.size(); ++i)
    s.add_row({tr.obs.t[i], tr.obs.norm[i], tr.obs.energy[i], tr.obs.x[i], tr.obs.p[i]});
  cx.write(s, "friction.tsv");

  double drift = 0.0;
  for (double v : tr.obs.norm) drift = std::max(drift, std::abs(v - tr.obs.norm.front()));
  cx.check("norm conservation without renormalisation", drift, 1e-8, drift < 1e-8, true);
  auto au = friction::energy_audit(tr.obs);
  bool dissipative = c.gamma > 0.0 || (c.gamma_field && c.gamma_field->maxCoeff() > 0.0);
  if (fr.mode == friction::FrictionMode::non_markov) {
    cx.check("energy nonincreasing (memory kernel, informative)", au.max_increase, 1e-9 * std::abs(au.e0),
             au.monotone, false);
  } else if (dissipative) {
    cx.check("energy nonincreasing", au.max_increase, 1e-9 * std::abs(au.e0), au.monotone, true);
  } else {
    cx.check("energy constant without friction (relative)", au.max_relative_drift, 1e-8, au.max_relative_drift < 1e-8,
             false, "time-step error of the split-operator step");
  }
  cx.diag << "initial dissipation rate -dE/dt = " << au.initial_rate << "\n";
  cx.check("masked density", tr.max_masked_density, 1e-6, tr.max_masked_density < 1e-6, false);

  if (!tr.snapshots.empty())
    cx.write(density_series(cx, ax, tr.snapshot_times, [&](std::size_t k, int i) { return std::norm(tr.snapshots[k][i]); }),
             "friction_density.tsv");
  cx.figure(s, {PlotKind::line, "mechanical energy", "t", {"energy"}}, "energy.svg");
  cx.figure(s, {PlotKind::line, "mean position", "t", {"x"}}, "position.svg");
}

// ---------------------------------------------------------------- lite

void run_lite(Context& cx) {
  const Manifest& m = cx.m;
  auto h = models::build(*m.model);
  const auto& ax = m.grid[0];
  const PacketSpec& pk = *m.packet;
  if (pk.level >= h.dim_el) throw ConfigError("packet.level exceeds the model dimension");
  auto w = exact::adiabatic_state(h, ax, pk.level, exact::gaussian_packet(ax, pk.x0, pk.sigma, pk.p0), m.mass);
  auto le = exact::lite_error(w, h, pk.level);
  SeriesFile ls = cx.series({{"eps2_qgt", "1/au_time^2"},
                             {"eps2_exact", "1/au_time^2"},
                             {"eps2_classical", "1/au_time^2"},
                             {"mean_x", "bohr"},
                             {"mean_v", "bohr/au_time"}});
  ls.add_row({le.eps2_qgt, le.eps2_exact, le.eps2_classical, le.mean_x, le.mean_v});
  cx.write(ls, "lite.tsv");

  std::vector<double> dts = m.lite->dts;
  if (dts.empty()) {
    double eps = std::sqrt(le.eps2_exact);
    if (!(eps > 0)) throw NumericalError("local error is zero; no spawning time scale");
    for (int k = 0; k < m.lite->n_dts; ++k) dts.push_back(0.1 / eps / std::pow(2.0, k));
  }
  auto sp = exact::spawn_probability_check(w, h, pk.level, dts, m.lite->substeps);
  for (const auto& x : sp.warnings) cx.warn(x);
  SeriesFile ss = cx.series({{"dt", "au_time"}, {"P", "1"}, {"eps2_dt2", "1"}, {"residual", "1"}});
  for (std::size_t j = 0; j < dts.size(); ++j)
    ss.add_row({dts[j], sp.prob[j], sp.eps2 * dts[j] * dts[j], sp.quad_residual[j]});
  cx.write(ss, "spawn.tsv");
  cx.check("quadratic spawning coefficient / eps^2", std::abs(sp.ratio - 1.0), 0.1, std::abs(sp.ratio - 1.0) < 0.1,
           false);
  double qg = le.eps2_exact > 0 ? std::abs(le.eps2_qgt / le.eps2_exact - 1.0) : 0.0;
  cx.check("metric form of the local error vs exact", qg, 0.05, qg < 0.05, false, "exact for narrow packets only");
  double cl = le.eps2_exact > 0 ? std::abs(le.eps2_classical / le.eps2_exact - 1.0) : 0.0;
  cx.check("classical-velocity form of the local error vs exact", cl, 0.05, cl < 0.05, false,
           "exact for narrow packets only");
  cx.figure(ss, {PlotKind::line, "spawning probability", "dt", {"P", "eps2_dt2"}}, "spawn.svg");
}

// ---------------------------------------------------------------- validate

void run_validate(Context& cx) {
  suite::Options o;
  o.quick = cx.m.quick_suite;
  o.seed = cx.m.seed;
  auto checks = suite::run_all(o);
  SeriesFile s = cx.series({{"id", "1"}, {"value", "1"}, {"tolerance", "1"}, {"pass", "1"}});
  for (const auto& c : checks) {
    cx.check(std::to_string(c.id) + " " + c.name, c.value, c.tolerance, c.pass, true, c.detail);
    cx.diag << "  time " << c.seconds << " s\n";
  }
  // Timings stay in the report and diagnostics.
  for (const auto& c : checks) s.add_row({double(c.id), c.value, c.tolerance, c.pass ? 1.0 : 0.0});
  cx.write(s, "validate.tsv");
}

void dispatch(Context& cx) {
  switch (cx.m.command) {
    case Command::geometry: run_geometry(cx); break;
    case Command::kernels: run_kernels(cx); break;
    case Command::propagate_exact: run_exact(cx); break;
    case Command::propagate_friction: run_friction(cx); break;
    case Command::lite: run_lite(cx); break;
    case Command::validate: run_validate(cx); break;
  }
}

}  // namespace

int resolve_threads(const RunRequest& r, const Manifest* m) {
  if (r.threads) return std::max(1, *r.threads);
  if (m && m->threads) return *m->threads;
  if (const char* e = std::getenv("EFRIC_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(e, &end, 10);
    if (end != e && *end == '\0' && v > 0) return int(v);
  }
  return 1;
}

int run(const RunRequest& req) {
  std::ostringstream diag;
  std::optional<Manifest> m;
  int code = exit_ok;
  std::string status = "ok", error;
  json issues = json::array();
  fs::path out = req.out ? fs::path(*req.out) : fs::path("efric_out");
  json report;
  auto t0 = std::chrono::steady_clock::now();
  diag << "efric " << (req.command ? to_string(*req.command) : std::string("?")) << " --manifest "
       << req.manifest_path << "\n";

  try {
    m = load_manifest(req.manifest_path, req.command);
    if (!req.out) out = m->output_directory;
  } catch (const ParseError& e) {
    code = exit_config, status = "parse_error", error = e.what();
    issues.push_back({{"line", e.line}, {"column", e.column}, {"message", e.what()}});
  } catch (const ValidationError& e) {
    code = exit_config, status = "validation_error", error = e.what();
    for (const auto& i : e.issues) issues.push_back(i);
  } catch (const ConfigError& e) {
    code = exit_config, status = "config_error", error = e.what();
  }

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    std::fprintf(stderr, "efric: cannot create output directory '%s': %s\n", out.string().c_str(),
                 ec.message().c_str());
    return code == exit_ok ? exit_numerical : code;
  }

  json checks = json::array(), outputs = json::array(), warnings = json::array();
  int threads = resolve_threads(req, m ? &*m : nullptr);
  if (m) {
    set_thread_count(threads);
    diag << "threads: " << threads << "\nmanifest sha256: " << m->sha256 << "\n";
    Context cx{*m, out, req.plot || m->plot, json::array(), json::array(), {}, diag};
    try {
      dispatch(cx);
      if (cx.hard_failure) code = exit_invariant, status = "invariant_failure";
    } catch (const ConfigError& e) {
      code = exit_config, status = "config_error", error = e.what();
    } catch (const NumericalError& e) {
      code = exit_numerical, status = "numerical_error", error = e.what();
    } catch (const std::exception& e) {
      code = exit_numerical, status = "runtime_error", error = e.what();
    }
    checks = cx.checks, outputs = cx.outputs;
    for (const auto& w : cx.warnings) warnings.push_back(w);
  }

  report["command"] = m ? to_string(m->command) : (req.command ? to_string(*req.command) : "");
  report["manifest"] = req.manifest_path;
  report["manifest_sha256"] = m ? m->sha256 : "";
  report["schema_version"] = kSchemaVersion;
  report["status"] = status;
  report["exit_code"] = code;
  report["threads"] = threads;
  report["checks"] = checks;
  report["warnings"] = warnings;
  report["outputs"] = outputs;
  if (!error.empty()) report["error"] = error;
  if (!issues.empty()) report["issues"] = issues;
  {
    std::ofstream f(out / "run_report.json");
    f << report.dump(2) << "\n";
  }
  if (!error.empty()) diag << "error: " << error << "\n";
  diag << "status: " << status << " (exit " << code << ")\nelapsed: "
       << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  {
    std::ofstream f(out / "diagnostics.txt");
    f << diag.str();
  }
  if (!error.empty()) std::fprintf(stderr, "efric: %s\n", error.c_str());
  return code;
}

}  // namespace efric::cli
