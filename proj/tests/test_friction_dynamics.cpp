#include <doctest.h>

#include <cmath>

#include "efric/exact_dynamics.hpp"
#include "efric/friction_dynamics.hpp"

using namespace efric;
using namespace efric::friction;

namespace {

struct Oscillator {
  double mass = 1.0, omega = 1.0, x0 = 2.0;
  Axis grid{-10.0, 20.0 / 320, 320};
  Surface surface() const {
    double k = mass * omega * omega;
    return surface_from_potential(grid, [k](double x) { return 0.5 * k * x * x; });
  }
  NuclearState state() const {
    return make_state(grid, mass, exact::gaussian_packet(grid, x0, std::sqrt(1.0 / (2 * mass * omega)), 0.0));
  }
};

FrictionRunConfig config(FrictionMode mode, double gamma, double dt, long steps) {
  FrictionRunConfig c;
  c.mode = mode;
  c.gamma = gamma;
  c.dt = dt;
  c.n_steps = steps;
  return c;
}

// Classical oscillator with force -gamma dx/dt released from rest at x0.
double damped_x(const Oscillator& o, double gamma, double t) {
  double b = gamma / (2 * o.mass), w1 = std::sqrt(o.omega * o.omega - b * b);
  return o.x0 * std::exp(-b * t) * (std::cos(w1 * t) + b / w1 * std::sin(w1 * t));
}

std::vector<unsigned char> all(long n) { return std::vector<unsigned char>(n, 1); }

}  // namespace

TEST_CASE("accumulated velocity field by trapezoid") {
  const long n = 4;
  CVec x = CVec::Zero(n);
  accumulate_X(x, CVec::Zero(n), CVec::Zero(n), 0.1, all(n));
  CHECK(x.norm() == 0.0);
  CVec v = CVec::Constant(n, cplx(0.3, -0.1));
  for (int s = 0; s < 10; ++s) accumulate_X(x, v, v, 0.1, all(n));
  CHECK((x - v).norm() < 1e-14);

  CVec c = CVec::Zero(1);
  double dt = 1e-3;
  for (int s = 0; s < 1000; ++s)
    accumulate_X(c, CVec::Constant(1, std::cos(s * dt)), CVec::Constant(1, std::cos((s + 1) * dt)), dt, all(1));
  CHECK(std::abs(c[0] - std::sin(1.0)) < 1e-7);

  auto mask = all(n);
  mask[2] = 0;
  CVec y = CVec::Zero(n);
  accumulate_X(y, v, v, 1.0, mask);
  CHECK(y[2] == cplx(0.0));
  CHECK(y[1] == v[1]);
}

TEST_CASE("vector potential correction is gamma Re X, held outside the support") {
  CVec x(5);
  x << cplx(1, 2), cplx(-0.5, 1), cplx(0.2, 0), cplx(3, 3), cplx(1, 1);
  RVec g = RVec::Constant(5, 0.4);
  auto mask = all(5);
  CHECK(delta_A(x, RVec::Zero(5), mask).norm() == 0.0);
  RVec da = delta_A(x, g, mask);
  for (int i = 0; i < 5; ++i) CHECK(da[i] == doctest::Approx(0.4 * x[i].real()));
  mask[4] = 0;
  mask[0] = 0;
  da = delta_A(x, g, mask);
  CHECK(da[0] == doctest::Approx(0.4 * x[1].real()));
  CHECK(da[4] == doctest::Approx(0.4 * x[3].real()));
}

TEST_CASE("velocity field of a drifting packet") {
  Oscillator o;
  double p0 = 1.5;
  auto s = make_state(o.grid, 2.0, exact::gaussian_packet(o.grid, 0.0, 1.0, p0));
  auto mask = support(s.psi, 1e-8);
  CVec v = velocity(s, RVec::Constant(o.grid.n, 0.5), mask);
  for (int i = 0; i < o.grid.n; ++i)
    if (mask[i] && std::abs(o.grid.at(i)) < 3) CHECK(v[i].real() == doctest::Approx((p0 - 0.5) / 2.0).epsilon(1e-6));
}

TEST_CASE("Kostin potential from the phase of psi") {
  Oscillator o;
  RVec g = RVec::Constant(o.grid.n, 0.3);
  auto real = exact::gaussian_packet(o.grid, 0.5, 1.0, 0.0);
  auto kr = kostin_potential(real, g, 2.0, 1e-10);
  CHECK(kr.phi.norm() < 1e-12);
  CHECK_FALSE(kr.near_node);

  double k = 1.25;
  auto pw = exact::gaussian_packet(o.grid, 0.0, 2.0, k);
  auto kp = kostin_potential(pw, g, 2.0, 1e-10);
  auto mask = support(pw, 1e-10);
  long a = o.grid.n / 2;
  for (int i = 0; i < o.grid.n; ++i)
    if (mask[i]) CHECK(kp.phi[i] - kp.phi[a] == doctest::Approx(0.3 * k * (o.grid.at(i) - o.grid.at(int(a))) / 2.0));
  CHECK(kostin_potential(pw, RVec::Zero(o.grid.n), 2.0, 1e-10).phi.norm() == 0.0);
}

TEST_CASE("memory force for constant, vanishing and oscillating histories") {
  double dt = 1e-3, eps = 2.0;
  int len = 12000;
  std::vector<cplx> kernel(len);
  for (int j = 0; j < len; ++j) kernel[j] = cplx(0.7, 0.2) * std::exp(-eps * j * dt);
  cplx v0(0.4, -0.3);
  std::vector<CVec> hist(len, CVec::Constant(1, v0));
  // -Re(gbar V) with gbar = 2 int Gamma = 2 (0.7 + 0.2i) / eps.
  double expect = -(2.0 * cplx(0.7, 0.2) / eps * v0).real();
  auto f = non_markov_force(kernel, hist, dt);
  CHECK(f.force[0] == doctest::Approx(expect).epsilon(1e-6));
  CHECK_FALSE(f.history_too_short);

  std::vector<cplx> zero(len, 0.0);
  CHECK(non_markov_force(zero, hist, dt).force.norm() == 0.0);

  // Gamma = exp(-(eps + i d) tau), V(t - tau) = cos(w (t - tau)).
  double d = 1.3, w = 0.8, t = 2.0;
  for (int j = 0; j < len; ++j) {
    kernel[j] = std::exp(-cplx(eps, d) * (j * dt));
    hist[j] = CVec::Constant(1, std::cos(w * (t - j * dt)));
  }
  cplx a(eps, d);
  cplx integral = 0.5 * (std::exp(I * w * t) / (a + I * w) + std::exp(-I * w * t) / (a - I * w));
  auto fs = non_markov_force(kernel, hist, dt);
  CHECK(fs.force[0] == doctest::Approx(-2.0 * integral.real()).epsilon(1e-6));

  std::vector<CVec> shorter(hist.begin(), hist.begin() + 100);
  CHECK(non_markov_force(kernel, shorter, dt).history_too_short);
}

TEST_CASE("without friction the propagator follows the harmonic orbit") {
  Oscillator o;
  auto tr = propagate_friction(o.state(), o.surface(), config(FrictionMode::markov_deltaA, 0.0, 0.001, 5000));
  double err = 0.0;
  for (size_t i = 0; i < tr.obs.t.size(); ++i) err = std::max(err, std::abs(tr.obs.x[i] - damped_x(o, 0.0, tr.obs.t[i])));
  CHECK(err < 1e-6);
  auto a = energy_audit(tr.obs);
  CHECK(a.max_relative_drift < 1e-6);
  CHECK(a.e0 == doctest::Approx(0.5 * o.x0 * o.x0 + 0.5).epsilon(1e-10));
}

TEST_CASE("both Markov schemes damp like the classical oscillator and lose energy monotonically") {
  Oscillator o;
  double gamma = 0.2;
  for (auto mode : {FrictionMode::markov_deltaA, FrictionMode::kostin}) {
    CAPTURE(to_string(mode));
    auto tr = propagate_friction(o.state(), o.surface(), config(mode, gamma, 0.01, 2000));
    double err = 0.0, norm = 0.0;
    for (size_t i = 0; i < tr.obs.t.size(); ++i) {
      err = std::max(err, std::abs(tr.obs.x[i] - damped_x(o, gamma, tr.obs.t[i])));
      norm = std::max(norm, std::abs(tr.obs.norm[i] - 1.0));
    }
    CHECK(err < 0.1 * o.x0 * 0.1);
    CHECK(norm < 1e-10);
    auto a = energy_audit(tr.obs);
    CHECK(a.monotone);
    CHECK(tr.obs.energy.back() < 0.3 * tr.obs.energy.front());
  }
}

TEST_CASE("doubling gamma doubles the decay exponent of the excess energy") {
  Oscillator o;
  auto exponent = [&](double gamma) {
    auto tr = propagate_friction(o.state(), o.surface(), config(FrictionMode::markov_deltaA, gamma, 0.01, 1571));
    double zp = 0.5 * o.omega;
    return std::log((tr.obs.energy.front() - zp) / (tr.obs.energy.back() - zp));
  };
  CHECK(exponent(0.2) / exponent(0.1) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("a constant Kostin offset leaves every observable unchanged") {
  Oscillator o;
  auto c0 = config(FrictionMode::kostin, 0.2, 0.01, 300);
  auto c1 = c0;
  c1.kostin_offset = 0.37;
  auto a = propagate_friction(o.state(), o.surface(), c0), b = propagate_friction(o.state(), o.surface(), c1);
  for (size_t i = 0; i < a.obs.t.size(); ++i) {
    CHECK(std::abs(a.obs.x[i] - b.obs.x[i]) < 1e-12);
    CHECK(std::abs(a.obs.p[i] - b.obs.p[i]) < 1e-12);
    CHECK(std::abs(a.obs.norm[i] - b.obs.norm[i]) < 1e-12);
  }
}

TEST_CASE("propagation is deterministic") {
  Oscillator o;
  auto c = config(FrictionMode::markov_deltaA, 0.2, 0.01, 200);
  c.snapshot_every = 50;
  auto a = propagate_friction(o.state(), o.surface(), c), b = propagate_friction(o.state(), o.surface(), c);
  CHECK(a.obs.x == b.obs.x);
  CHECK(a.obs.energy == b.obs.energy);
  REQUIRE(a.snapshots.size() == 5);
  CHECK(a.snapshots.back() == b.snapshots.back());
}

TEST_CASE("a narrow memory kernel reproduces the Markov run") {
  Oscillator o;
  double gamma = 0.2, eps = 20.0, dt = 0.01;
  auto markov = propagate_friction(o.state(), o.surface(), config(FrictionMode::markov_deltaA, gamma, dt, 600));
  auto free_run = propagate_friction(o.state(), o.surface(), config(FrictionMode::markov_deltaA, 0.0, dt, 600));
  auto c = config(FrictionMode::non_markov, 0.0, dt, 600);
  for (int j = 0; j < 120; ++j) c.kernel.push_back(0.5 * gamma * eps * std::exp(-eps * j * dt));
  auto memory = propagate_friction(o.state(), o.surface(), c);
  double effect = 0.0, diff = 0.0;
  for (size_t i = 0; i < markov.obs.t.size(); ++i) {
    effect = std::max(effect, std::abs(markov.obs.x[i] - free_run.obs.x[i]));
    diff = std::max(diff, std::abs(memory.obs.x[i] - markov.obs.x[i]));
  }
  REQUIRE(effect > 0.05);
  CHECK(diff / effect < 0.1);
  // A memory kernel only guarantees net dissipation, not a monotone decrease.
  CHECK(memory.obs.energy.back() < 0.9 * memory.obs.energy.front());
}

TEST_CASE("configuration errors") {
  Oscillator o;
  auto c = config(FrictionMode::non_markov, 0.1, 0.01, 10);
  CHECK_THROWS_AS(propagate_friction(o.state(), o.surface(), c), ConfigError);
  c = config(FrictionMode::markov_deltaA, -0.1, 0.01, 10);
  CHECK_THROWS_AS(propagate_friction(o.state(), o.surface(), c), ConfigError);
  c = config(FrictionMode::markov_deltaA, 0.1, 0.0, 10);
  CHECK_THROWS_AS(propagate_friction(o.state(), o.surface(), c), ConfigError);
  CHECK_THROWS_AS(make_state(o.grid, 1.0, CVec::Zero(3)), ConfigError);
  CHECK(mode_from_string("kostin") == FrictionMode::kostin);
  auto edge = make_state(o.grid, 1.0, exact::gaussian_packet(o.grid, 9.5, 0.5, 0.0));
  CHECK_THROWS_AS(propagate_friction(edge, o.surface(), config(FrictionMode::kostin, 0.1, 0.01, 1)), EdgeLeakError);
}
