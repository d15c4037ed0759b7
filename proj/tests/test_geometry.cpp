#include <doctest.h>

#include <cmath>

#include "efric/geometry.hpp"

using namespace efric;
using namespace efric::geometry;

namespace {

models::ParametricHamiltonian spherical_monopole(double b0) {
  auto sph = [](const RVec& y) {
    RVec x(3);
    x << std::sin(y[0]) * std::cos(y[1]), std::sin(y[0]) * std::sin(y[1]), std::cos(y[0]);
    return x;
  };
  auto jac = [](const RVec& y) {
    RMat j(3, 2);
    j << std::cos(y[0]) * std::cos(y[1]), -std::sin(y[0]) * std::sin(y[1]),
        std::cos(y[0]) * std::sin(y[1]), std::sin(y[0]) * std::cos(y[1]), -std::sin(y[0]), 0.0;
    return j;
  };
  return models::reparametrize(models::build_spin_monopole(b0), 2, sph, jac);
}

std::vector<RVec> circle(const RVec& c, double r, int n) {
  std::vector<RVec> loop;
  for (int i = 0; i < n; ++i) {
    double t = 2 * pi * i / n;
    RVec x = c;
    x[0] += r * std::cos(t);
    x[1] += r * std::sin(t);
    loop.push_back(x);
  }
  return loop;
}

double wrap(double a) { return std::remainder(a, 2 * pi); }

}  // namespace

TEST_CASE("grid indexing round trips and neighbours stop at the edges") {
  auto g = make_grid({{0.0, 0.5, 4}, {-1.0, 0.25, 3}});
  CHECK(g.size() == 12);
  for (long p = 0; p < g.size(); ++p) CHECK(g.flat_index(g.multi_index(p)) == p);
  CHECK(g.point(1)[1] == doctest::Approx(-0.75));
  CHECK(g.neighbor(0, 0, -1) == -1);
  CHECK(g.neighbor(0, 1, 1) == 1);
  CHECK(g.neighbor(0, 0, 1) == 3);
  CHECK_THROWS_AS(make_grid({{0.0, 0.0, 10}}), ConfigError);
  CHECK_THROWS_AS(make_grid({{0.0, 1.0, 2}}), ConfigError);
}

TEST_CASE("monopole ground energy is -b0 |x| / 2") {
  auto h = models::build_spin_monopole(1.6);
  auto grid = make_grid({{-1.05, 0.3, 8}, {-0.95, 0.3, 7}, {0.2, 0.4, 4}});
  auto f = diagonalize_grid(h, grid, 0);
  for (long p = 0; p < grid.size(); ++p) CHECK(f.energies[p][0] == doctest::Approx(-0.8 * grid.point(p).norm()));
}

TEST_CASE("a grid point on the conical intersection raises DegeneracyError") {
  auto h = models::build_conical(1.0, 1.0);
  auto grid = make_grid({{-1.0, 0.5, 5}, {-1.0, 0.5, 5}});
  CHECK_THROWS_AS(diagonalize_grid(h, grid, 0), DegeneracyError);
  CHECK_THROWS_AS(qgt_sos(h, RVec::Zero(2), 0), DegeneracyError);
  try {
    diagonalize_grid(h, grid, 0);
  } catch (const DegeneracyError& e) {
    CHECK(e.point.norm() < 1e-15);
  }
}

TEST_CASE("transport gauge: unit norm, real positive neighbour overlaps, idempotent regauge") {
  auto h = spherical_monopole(1.0);
  auto grid = make_grid({{0.5, 0.05, 20}, {0.0, 0.05, 25}});
  auto f = diagonalize_grid(h, grid, 0);
  for (long p = 0; p < grid.size(); ++p) {
    CHECK(f.vectors[p].norm() == doctest::Approx(1.0).epsilon(1e-14));
    if (f.parent[p] >= 0) {
      cplx ov = f.vectors[f.parent[p]].dot(f.vectors[p]);
      CHECK(std::abs(ov.imag()) < 1e-14);
      CHECK(ov.real() > 0.0);
    }
  }
  auto r = regauge(f, grid);
  double diff = 0.0;
  for (long p = 0; p < grid.size(); ++p) diff = std::max(diff, (r.vectors[p] - f.vectors[p]).norm());
  CHECK(diff < 1e-12);
}

TEST_CASE("monopole on the equator: metric 1/4 and curvature of magnitude 1/2 in (theta, phi)") {
  // With A = i<u|du> and B = dA the ground level carries +1/2 and the upper
  // level -1/2; the sign agrees with the loop phases through Stokes.
  auto h = spherical_monopole(1.0);
  RVec y(2);
  y << pi / 2, 0.3;
  for (int level : {0, 1}) {
    CAPTURE(level);
    CMat q = qgt_sos(h, y, level);
    CHECK(q.real()(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(q.real()(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::abs(q.real()(0, 1)) < 1e-12);
    CHECK(-2.0 * q.imag()(0, 1) == doctest::Approx(level == 0 ? 0.5 : -0.5).epsilon(1e-12));
  }

  auto grid = make_grid({{pi / 2 - 1e-3, 1e-3, 3}, {0.3 - 1e-3, 1e-3, 3}});
  auto field = qgt_fd(diagonalize_grid(h, grid, 1), grid);
  CHECK(field.g[4](0, 0) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(field.B[4](0, 1) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(field.B[4](1, 0) == doctest::Approx(0.5).epsilon(1e-6));

  // Flux through the cap theta < 1 equals the latitude loop phase.
  auto mono = models::build_spin_monopole(1.0);
  std::vector<RVec> loop;
  for (int i = 0; i < 2048; ++i) {
    double p = 2 * pi * i / 2048;
    RVec x(3);
    x << std::sin(1.0) * std::cos(p), std::sin(1.0) * std::sin(p), std::cos(1.0);
    loop.push_back(x);
  }
  double flux = 0.0;
  const int nt = 400;
  for (int i = 0; i < nt; ++i) {
    RVec yy(2);
    yy << (i + 0.5) / nt, 0.0;
    flux += -2.0 * qgt_sos(h, yy, 1).imag()(0, 1) * (1.0 / nt) * 2 * pi;
  }
  CHECK(std::abs(wrap(berry_phase_loop(mono, loop, 1) - flux)) < 1e-5);
}

TEST_CASE("real conical model has zero curvature away from the intersection") {
  auto h = models::build_conical(1.0, 0.7);
  auto grid = make_grid({{0.2, 0.05, 12}, {0.3, 0.05, 12}});
  auto field = qgt_fd(diagonalize_grid(h, grid, 0), grid);
  for (long p = 0; p < grid.size(); ++p) {
    CHECK(field.B[p].norm() < 1e-13);
    CHECK(std::abs(field.A[p].norm()) < 1e-13);
  }
}

TEST_CASE("x-independent and scalar Hamiltonians have no geometry") {
  CMat h0(3, 3);
  h0 << 0.0, 0.2, cplx(0, 0.1), 0.2, 1.0, 0.3, cplx(0, -0.1), 0.3, 2.0;
  auto flat = models::from_functions(
      "flat", 3, 2, [h0](const RVec&) { return h0; }, [](const RVec&, int) { return CMat::Zero(3, 3); });
  RVec x(2);
  x << 0.4, -0.2;
  CHECK(qgt_sos(flat, x, 0).norm() == 0.0);
  auto grid = make_grid({{0.0, 0.1, 5}, {0.0, 0.1, 5}});
  auto field = qgt_fd(diagonalize_grid(flat, grid, 1), grid);
  for (long p = 0; p < grid.size(); ++p) CHECK(field.q[p].norm() < 1e-14);

  models::ScalarField v{[](const RVec& y) { return y.squaredNorm(); }, [](const RVec& y, int k) { return 2 * y[k]; }};
  auto scalar = models::single_surface("scalar", 2, v);
  auto sfield = qgt_fd(diagonalize_grid(scalar, grid, 0), grid);
  for (long p = 0; p < grid.size(); ++p) CHECK(sfield.q[p].norm() == 0.0);
}

TEST_CASE("two-level metric matches the Bloch-vector form (1/4) dn.dn") {
  // H = d.sigma with d = (c y, 0, a x); n = d / |d|.
  double a = 1.0, c = 0.7;
  auto h = models::build_conical(a, c);
  for (auto [x0, y0] : {std::pair{0.4, 0.3}, {-0.7, 0.9}, {0.1, -1.2}}) {
    RVec x(2);
    x << x0, y0;
    RVec d(3);
    d << c * y0, 0.0, a * x0;
    double r = d.norm();
    RMat dd(3, 2);
    dd << 0.0, c, 0.0, 0.0, a, 0.0;
    RMat dn(3, 2);
    for (int k = 0; k < 2; ++k) dn.col(k) = dd.col(k) / r - d * d.dot(dd.col(k)) / (r * r * r);
    RMat g = 0.25 * dn.transpose() * dn;
    CHECK((qgt_sos(h, x, 0).real() - g).norm() < 1e-13);
  }
}

TEST_CASE("finite-difference tensor converges to the sum over states") {
  auto h = models::build_conical(1.0, 0.7);
  RVec x(2);
  x << 0.45, 0.35;
  CMat exact = qgt_sos(h, x, 0);
  double prev = 0.0;
  for (double s : {4e-3, 2e-3}) {
    auto grid = make_grid({{x[0] - s, s, 3}, {x[1] - s, s, 3}});
    double err = (qgt_fd(diagonalize_grid(h, grid, 0), grid).q[4] - exact).norm();
    if (prev > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("Berry phases of loops") {
  auto con = models::build_conical(1.0, 0.7);
  CHECK(std::abs(wrap(berry_phase_loop(con, circle(RVec::Zero(2), 0.5, 256), 0) - pi)) < 1e-6);
  CHECK(std::abs(wrap(berry_phase_loop(con, circle(RVec::Constant(2, 1.5), 0.5, 256), 0))) < 1e-6);

  auto mono = models::build_spin_monopole(1.0);
  for (double theta : {0.4, 1.0, 2.0}) {
    std::vector<RVec> loop;
    for (int i = 0; i < 512; ++i) {
      double p = 2 * pi * i / 512;
      RVec x(3);
      x << std::sin(theta) * std::cos(p), std::sin(theta) * std::sin(p), std::cos(theta);
      loop.push_back(x);
    }
    double cap = pi * (1 - std::cos(theta));
    CHECK(std::abs(wrap(berry_phase_loop(mono, loop, 1) + cap)) < 1e-4);
    CHECK(std::abs(wrap(berry_phase_loop(mono, loop, 0) - cap)) < 1e-4);
  }
  CHECK_THROWS_AS(berry_phase_loop(con, {RVec::Ones(2), RVec::Zero(2) + RVec::Ones(2) * 2}, 0), ConfigError);
}

TEST_CASE("plaquette sums reproduce the enclosed phase and sharpen under refinement") {
  auto h = spherical_monopole(1.0);
  // Cap theta < 1 approximated by the band [0.2, 1] x [0, 2 pi); the polar
  // cap theta < 0.2 contributes its own flux.
  double prev_err = 0.0;
  for (int n : {20, 40}) {
    auto grid = make_grid({{0.2, 0.8 / n, n + 1}, {0.0, 2 * pi / (4 * n), 4 * n + 1}});
    auto f = diagonalize_grid(h, grid, 0);
    double total = 0.0;
    for (double ph : plaquette_phases(f, grid, 0, 1)) total += ph;
    double expected = pi * (std::cos(0.2) - std::cos(1.0));
    double err = std::abs(std::abs(total) - expected);
    CHECK(err < 1e-2);
    if (prev_err > 0) CHECK(err < prev_err);
    prev_err = err;
  }
}

TEST_CASE("gauge covariance: A shifts by the gradient, q and g do not change") {
  auto h = spherical_monopole(1.0);
  double s = 2e-3;
  auto grid = make_grid({{0.9, s, 21}, {0.2, s, 21}});
  auto f = diagonalize_grid(h, grid, 0);
  std::vector<double> chi(grid.size());
  auto chi_f = [](const RVec& y) { return 0.7 * std::sin(2 * y[0]) + y[1] * y[1]; };
  for (long p = 0; p < grid.size(); ++p) chi[p] = chi_f(grid.point(p));
  auto g0 = qgt_fd(f, grid);
  auto g1 = qgt_fd(apply_gauge(f, chi), grid);
  double da = 0.0, dq = 0.0;
  for (long p = 0; p < grid.size(); ++p) {
    if (g0.boundary[p]) continue;
    RVec y = grid.point(p);
    RVec grad(2);
    grad << 1.4 * std::cos(2 * y[0]), 2 * y[1];
    da = std::max(da, (g1.A[p] - g0.A[p] - grad).norm());
    dq = std::max(dq, (g1.q[p] - g0.q[p]).norm());
  }
  CHECK(da < 1e-5);
  CHECK(dq < 1e-5);
}

TEST_CASE("scalar potential is g / 2M for an isotropic inverse mass") {
  auto h = models::build_conical(1.0, 0.7);
  auto grid = make_grid({{0.3, 0.05, 6}, {0.3, 0.05, 6}});
  double mass = 1836.0;
  auto field = qgt_fd(diagonalize_grid(h, grid, 0), grid, RMat::Identity(2, 2) / mass);
  for (long p = 0; p < grid.size(); ++p)
    CHECK(field.phi[p] == doctest::Approx(field.g[p].trace() / (2 * mass)).epsilon(1e-14));
}

TEST_CASE("connection term reproduces the Christoffel symbols of the metric") {
  auto h = spherical_monopole(1.0);
  double s = 1e-3;
  auto grid = make_grid({{1.0 - 2 * s, s, 5}, {0.4 - 2 * s, s, 5}});
  auto f = diagonalize_grid(h, grid, 0);
  auto field = qgt_fd(f, grid);
  long p = grid.size() / 2;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        CAPTURE(k);
        CAPTURE(i);
        CAPTURE(j);
        CHECK(std::abs(connection_term(f, grid, p, k, i, j) - christoffel_from_metric(field, grid, p, k, i, j)) <
              1e-5);
      }
}
