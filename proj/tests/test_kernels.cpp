#include <doctest.h>

#include <random>

#include "efric/geometry.hpp"
#include "efric/kernels.hpp"
#include "efric/suite.hpp"

using namespace efric;
using namespace efric::kernels;

namespace {

Broadening make(DeltaKind kind, double eta, double omega, double eps) {
  BroadeningScheme s;
  s.kind = kind;
  s.eta = eta;
  s.omega = omega;
  s.epsilon = eps;
  s.floor_factor = 0.0;
  return resolve(s, 1.0);
}

// H = diag(0, gap) + x sigma_x at x = 0.
models::ParametricHamiltonian two_level(double gap) {
  return models::from_functions(
      "two_level", 2, 1,
      [gap](const RVec& x) {
        CMat m(2, 2);
        m << 0.0, x[0], x[0], gap;
        return m;
      },
      [](const RVec&, int) {
        CMat m(2, 2);
        m << 0.0, 1.0, 1.0, 0.0;
        return m;
      });
}

models::ParametricHamiltonian band(int n, double w, double d0, double eps0) {
  models::PolyField e{eps0, {0.4, -0.25}, {0.3, 0.2}};
  models::PolyField d{d0, {0.05, 0.08}, {}};
  return models::build_independent_band(n, w, 2, e.field(), d.field());
}

models::ParametricHamiltonian rotated(const models::ParametricHamiltonian& h, const CMat& u) {
  auto e = h.eval;
  auto g = h.grad;
  return models::from_functions(
      "rotated", h.dim_el, h.dim_nuc, [e, u](const RVec& x) { return CMat(u * e(x) * u.adjoint()); },
      [g, u](const RVec& x, int k) { return CMat(u * g(x, k) * u.adjoint()); });
}

}  // namespace

TEST_CASE("x-independent Hamiltonian has no friction") {
  CMat h0 = CMat::Zero(3, 3);
  h0.diagonal() << 0.0, 0.5, 1.2;
  auto h = models::from_functions(
      "flat", 3, 2, [h0](const RVec&) { return h0; }, [](const RVec&, int) { return CMat::Zero(3, 3); });
  auto b = make(DeltaKind::lorentzian, 0.1, 0.0, 0.1);
  RVec x = RVec::Zero(2);
  auto ex = single_reference(h, x);
  CHECK(bare_kernel(ex, b).norm() == 0.0);
  CHECK(markov_friction(ex, b).norm() == 0.0);
  CHECK(markov_friction_alt(h, x, b).norm() == 0.0);
  CHECK(energy_form_friction(h, x, b).norm() == 0.0);
  CHECK(memory_kernel(ex, RVec::LinSpaced(5, 0.0, 4.0)).values[3].norm() == 0.0);
}

TEST_CASE("two-level memory kernel is a single frequency") {
  double gap = 0.7;
  auto ex = single_reference(two_level(gap), RVec::Zero(1));
  RVec tau = RVec::LinSpaced(9, 0.0, 20.0);
  auto k = memory_kernel(ex, tau);
  for (int t = 0; t < tau.size(); ++t) {
    cplx expect = std::exp(-I * gap * tau[t]) / gap;
    CHECK(std::abs(k.values[t](0, 0) - expect) < 1e-14);
  }
  auto b = make(DeltaKind::resolvent, 0.05, 0.3, 0.05);
  cplx z(0.3, 0.05);
  CHECK(std::abs(bare_kernel(ex, b)(0, 0) - (-2.0 * I / (gap * (gap - z)))) < 1e-14);
}

TEST_CASE("bare kernel equals the Laplace transform of the memory kernel") {
  auto h = suite::random_testbed(5, 2, 11);
  RVec x(2);
  x << 0.2, -0.1;
  auto ex = single_reference(h, x);
  double eps = 0.2, omega = 0.15;
  int n = 40000;
  double dt = 120.0 / n;
  RVec tau = RVec::LinSpaced(n + 1, 0.0, n * dt);
  auto k = memory_kernel(ex, tau);
  CMat integral = CMat::Zero(2, 2);
  for (int t = 0; t <= n; ++t) {
    double w = (t == 0 || t == n) ? 0.5 : 1.0;
    integral += w * dt * std::exp(cplx(-eps, omega) * tau[t]) * k.values[t];
  }
  integral *= 2.0;
  CMat exact = bare_kernel(ex, make(DeltaKind::resolvent, eps, omega, eps));
  CHECK((integral - exact).norm() / exact.norm() < 1e-4);
}

TEST_CASE("memory kernel at zero delay is positive semidefinite") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto h = suite::random_testbed(8, 3, seed);
    auto k = memory_kernel(h, RVec::Constant(3, 0.3), RVec::Zero(1));
    CMat g0 = k.values[0];
    CHECK((g0 - g0.adjoint()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<CMat> es(g0);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    for (int i = 0; i < 3; ++i) CHECK(g0(i, i).real() >= 0.0);
  }
}

TEST_CASE("real part of the bare kernel equals the energy-domain kernel") {
  for (auto kind : {DeltaKind::gaussian, DeltaKind::lorentzian, DeltaKind::resolvent}) {
    auto h = suite::random_testbed(12, 3, 5);
    RVec x = RVec::Constant(3, -0.2);
    auto ex = single_reference(h, x);
    auto b = make(kind, 0.08, 0.05, 0.08);
    RMat re = bare_kernel(ex, b).real();
    CHECK((re - energy_form_friction(h, x, b)).norm() / re.norm() < 1e-10);
    CHECK((re - energy_form_friction(ex, b)).norm() / re.norm() < 1e-12);
  }
}

TEST_CASE("bare kernel splits into -2i q plus the Markov term") {
  auto h = suite::random_testbed(10, 2, 9);
  RVec x(2);
  x << 0.3, 0.1;
  auto ex = single_reference(h, x);
  for (double omega : {0.0, 0.2}) {
    auto b = make(DeltaKind::resolvent, 0.05, omega, 0.05);
    CMat lhs = bare_kernel(ex, b);
    CMat rhs = -2.0 * I * geometric_tensor(ex) + markov_friction(ex, b);
    CHECK((lhs - rhs).norm() / lhs.norm() < 1e-12);
  }
  // geometric_tensor agrees with the sum over states of the geometry module.
  CHECK((geometric_tensor(ex) - geometry::qgt_sos(h, x, 0)).norm() < 1e-12);
}

TEST_CASE("antisymmetric real part of the bare kernel approaches -B") {
  auto h = suite::random_testbed(6, 2, 21);
  RVec x(2);
  x << -0.1, 0.25;
  auto ex = single_reference(h, x);
  CMat q = geometry::qgt_sos(h, x, 0);
  RMat b = -2.0 * q.imag();
  REQUIRE(std::abs(b(0, 1)) > 1e-3);
  double prev = 1e9;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    RMat re = bare_kernel(ex, make(DeltaKind::resolvent, eps, 0.0, eps)).real();
    double err = std::abs(0.5 * (re(0, 1) - re(1, 0)) + b(0, 1));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev / std::abs(b(0, 1)) < 1e-3);
}

TEST_CASE("Markov friction: spectral and linear-solve forms agree") {
  auto h = suite::random_testbed(15, 3, 4);
  RVec x = RVec::Constant(3, 0.1);
  auto ex = single_reference(h, x);
  for (auto kind : {DeltaKind::gaussian, DeltaKind::lorentzian}) {
    auto b = make(kind, 0.3, 0.1, 0.3);
    RMat a = markov_friction(ex, b).real();
    CHECK((a - markov_friction_alt(h, x, b)).norm() / a.norm() < 1e-10);
  }
  auto bm = band(60, 2.0, 0.12, 0.1);
  RVec y(2);
  y << 0.1, -0.1;
  auto fs = fermi_sea(bm, y);
  auto b = make(DeltaKind::gaussian, 0.2, 0.05, 0.2);
  RMat a = markov_friction(fs, b).real();
  CHECK((a - markov_friction_alt_fermi_sea(bm, y, b)).norm() / a.norm() < 1e-10);
}

TEST_CASE("Markov friction is symmetric and positive semidefinite") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto h = suite::random_testbed(20, 3, 8);
  for (int s = 0; s < 20; ++s) {
    RVec x(3);
    for (int k = 0; k < 3; ++k) x[k] = u(rng);
    auto ex = single_reference(h, x);
    for (auto kind : {DeltaKind::gaussian, DeltaKind::lorentzian}) {
      auto r = symmetry_report(markov_friction(ex, make(kind, 0.2, 0.2, 0.2)));
      CHECK(r.re_asymmetry < 1e-12);
      CHECK(r.im_symmetry < 1e-12);
      CHECK(r.min_eig_rel > -1e-12);
    }
  }
}

TEST_CASE("orbital-sum and Fermi-sea friction vanish without impurity-band coupling") {
  models::PolyField e{1.5, {0.4, -0.25}, {0.3, 0.2}};
  models::PolyField d{0.0, {}, {}};
  auto bm = models::build_independent_band(80, 2.0, 2, e.field(), d.field());
  RVec x = RVec::Zero(2);
  auto b = make(DeltaKind::gaussian, 0.05, 0.0, 0.05);
  CHECK(orbital_friction(bm, x, b).norm() < 1e-12);
  CHECK(markov_friction_alt_fermi_sea(bm, x, b).norm() < 1e-12);
  CHECK_THROWS_AS(orbital_friction(suite::random_testbed(4, 2, 1), x, b), ConfigError);
}

TEST_CASE("orbital-sum kernel for a single coupled orbital at the Fermi level") {
  // Two orbitals at +-s/2 around e_F: the Gaussian weights are equal and the
  // sum runs over all four (a, b) pairs.
  double s = 0.1;
  auto h = models::from_functions(
      "pair", 2, 1,
      [s](const RVec& x) {
        CMat m(2, 2);
        m << -s / 2 + 0.3 * x[0], 0.2 * x[0], 0.2 * x[0], s / 2 - 0.1 * x[0];
        return m;
      },
      [](const RVec&, int) {
        CMat m(2, 2);
        m << 0.3, 0.2, 0.2, -0.1;
        return m;
      });
  h.band = models::BandInfo{2, s, 0.0};
  auto b = make(DeltaKind::gaussian, 0.2, 0.0, 0.2);
  double w = real_delta(b, s / 2);
  double expect = pi * w * w * (0.3 * 0.3 + 0.1 * 0.1 + 2 * 0.2 * 0.2);
  CHECK(orbital_friction(h, RVec::Zero(1), b)(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("Markov friction converges as the broadening grows past the level spacing") {
  auto bm = band(400, 10.0, 0.4, 0.1);
  RVec x = RVec::Zero(2);
  auto fs = fermi_sea(bm, x);
  auto g = [&](double eta_sp) {
    return RMat(markov_friction(fs, make(DeltaKind::gaussian, eta_sp * fs.spacing, 0.0, 1.0)).real());
  };
  RMat a = g(8.0), b = g(16.0);
  CHECK((a - b).norm() / b.norm() < 0.05);
}

TEST_CASE("broadening resolution") {
  BroadeningScheme s;
  s.eta = 0.0;
  s.floor_factor = 5.0;
  auto b = resolve(s, 0.01);
  CHECK(b.eta == doctest::Approx(0.05));
  CHECK(b.omega == doctest::Approx(0.05));
  CHECK(b.warnings.empty());
  s.eta = 0.02;
  s.floor_factor = 0.0;
  auto w = resolve(s, 0.01);
  REQUIRE(w.warnings.size() == 1);
  CHECK(w.warnings[0].find("GapWarning") == 0);
  s.eta = 0.0;
  CHECK_THROWS_AS(resolve(s, 0.01), ConfigError);
  s.eta = 0.1;
  s.omega = -1.0;
  CHECK_THROWS_AS(resolve(s, 0.01), ConfigError);
  CHECK(delta_kind_from_string("lorentzian") == DeltaKind::lorentzian);
}

TEST_CASE("kernels are invariant under a constant change of electronic basis") {
  auto h = suite::random_testbed(7, 2, 13);
  CMat a = CMat::Random(7, 7);
  Eigen::HouseholderQR<CMat> qr(a);
  CMat u = qr.householderQ();
  auto hr = rotated(h, u);
  RVec x(2);
  x << 0.15, -0.3;
  BroadeningScheme s;
  s.kind = DeltaKind::lorentzian;
  s.eta = 0.1;
  auto t0 = evaluate(h, x, s, RVec::LinSpaced(4, 0.0, 3.0));
  auto t1 = evaluate(hr, x, s, RVec::LinSpaced(4, 0.0, 3.0));
  CHECK((t0.gamma_bar - t1.gamma_bar).norm() < 1e-11);
  CHECK((t0.gamma - t1.gamma).norm() < 1e-11);
  CHECK((t0.gamma_alt - t1.gamma_alt).norm() < 1e-11);
  CHECK((t0.memory.values[2] - t1.memory.values[2]).norm() < 1e-11);
  CHECK_FALSE(t0.gamma_orbital);
}

TEST_CASE("evaluate on a band model fills every tensor") {
  auto bm = band(60, 2.0, 0.12, 0.1);
  BroadeningScheme s;
  auto t = evaluate(bm, RVec::Zero(2), s, RVec::Zero(1));
  REQUIRE(t.gamma_orbital);
  CHECK(t.gamma_orbital->rows() == 2);
  CHECK(t.broadening.eta == doctest::Approx(5.0 * t.broadening.spacing));
  CHECK((RMat(t.gamma_bar.real()) - t.gamma_energy).norm() / t.gamma_energy.norm() < 1e-10);
}
