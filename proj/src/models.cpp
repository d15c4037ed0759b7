#include "efric/models.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace efric {

DegeneracyError::DegeneracyError(const RVec& x, double g)
    : NumericalError("degenerate level at x = " + format_point(x) + " (gap " + format_number(g) + ")"),
      point(x),
      gap(g) {}

EdgeLeakError::EdgeLeakError(double d)
    : NumericalError("wavepacket density at grid edge " + format_number(d) + " exceeds threshold"),
      edge_density(d) {}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string format_point(const RVec& x) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace efric

namespace efric::models {

namespace {

CMat pauli(int k) {
  CMat s = CMat::Zero(2, 2);
  switch (k) {
    case 0: s(0, 1) = 1.0; s(1, 0) = 1.0; break;
    case 1: s(0, 1) = -I; s(1, 0) = I; break;
    default: s(0, 0) = 1.0; s(1, 1) = -1.0; break;
  }
  return s;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void check_dim(const RVec& x, int dim_nuc, const std::string& label) {
  if (x.size() != dim_nuc)
    throw ConfigError(label + ": expected " + std::to_string(dim_nuc) + " coordinates, got " +
                      std::to_string(x.size()));
}

}  // namespace

ScalarField PolyField::field() const {
  auto c0v = c0;
  auto l = lin;
  auto q = quad;
  ScalarField f;
  f.value = [c0v, l, q](const RVec& x) {
    double v = c0v;
    for (size_t k = 0; k < l.size() && k < size_t(x.size()); ++k) v += l[k] * x[k];
    for (size_t k = 0; k < q.size() && k < size_t(x.size()); ++k) v += 0.5 * q[k] * x[k] * x[k];
    return v;
  };
  f.deriv = [l, q](const RVec& x, int k) {
    double v = 0.0;
    if (size_t(k) < l.size()) v += l[k];
    if (size_t(k) < q.size()) v += q[k] * x[k];
    return v;
  };
  return f;
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::spin_monopole: return "spin_monopole";
    case ModelKind::conical: return "conical";
    case ModelKind::avoided_crossing: return "avoided_crossing";
    case ModelKind::independent_band: return "independent_band";
  }
  return "unknown";
}

std::optional<ModelKind> kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::spin_monopole, ModelKind::conical, ModelKind::avoided_crossing,
                 ModelKind::independent_band})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

ParametricHamiltonian build_spin_monopole(double b0) {
  require(b0 > 0.0, "spin_monopole: b0 must be > 0");
  ParametricHamiltonian h;
  h.dim_el = 2;
  h.dim_nuc = 3;
  h.label = "spin_monopole";
  h.eval = [b0](const RVec& x) {
    check_dim(x, 3, "spin_monopole");
    CMat m = CMat::Zero(2, 2);
    for (int k = 0; k < 3; ++k) m += (0.5 * b0 * x[k]) * pauli(k);
    return m;
  };
  h.grad = [b0](const RVec& x, int k) {
    check_dim(x, 3, "spin_monopole");
    if (k < 0 || k >= 3) throw ConfigError("spin_monopole: gradient index out of range");
    return CMat((0.5 * b0) * pauli(k));
  };
  return h;
}

ParametricHamiltonian build_conical(double a, double c) {
  require(a != 0.0 && c != 0.0, "conical: a and c must be nonzero");
  ParametricHamiltonian h;
  h.dim_el = 2;
  h.dim_nuc = 2;
  h.label = "conical";
  h.eval = [a, c](const RVec& x) {
    check_dim(x, 2, "conical");
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = a * x[0];
    m(1, 1) = -a * x[0];
    m(0, 1) = c * x[1];
    m(1, 0) = c * x[1];
    return m;
  };
  h.grad = [a, c](const RVec& x, int k) {
    check_dim(x, 2, "conical");
    CMat m = CMat::Zero(2, 2);
    if (k == 0) {
      m(0, 0) = a;
      m(1, 1) = -a;
    } else if (k == 1) {
      m(0, 1) = c;
      m(1, 0) = c;
    } else {
      throw ConfigError("conical: gradient index out of range");
    }
    return m;
  };
  return h;
}

ParametricHamiltonian build_avoided_crossing(double k_f, double x0, double delta, double c) {
  require(k_f > 0.0, "avoided_crossing: k_f must be > 0");
  require(c >= 0.0, "avoided_crossing: c must be >= 0");
  ParametricHamiltonian h;
  h.dim_el = 2;
  h.dim_nuc = 1;
  h.label = "avoided_crossing";
  h.eval = [=](const RVec& x) {
    check_dim(x, 1, "avoided_crossing");
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = 0.5 * k_f * (x[0] + x0) * (x[0] + x0);
    m(1, 1) = 0.5 * k_f * (x[0] - x0) * (x[0] - x0) + delta;
    m(0, 1) = c;
    m(1, 0) = c;
    return m;
  };
  h.grad = [=](const RVec& x, int k) {
    check_dim(x, 1, "avoided_crossing");
    if (k != 0) throw ConfigError("avoided_crossing: gradient index out of range");
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = k_f * (x[0] + x0);
    m(1, 1) = k_f * (x[0] - x0);
    return m;
  };
  return h;
}

ParametricHamiltonian build_independent_band(int n, double w, int dim_nuc, const ScalarField& eps_d,
                                             const ScalarField& d, double fermi_level) {
  require(n >= 16, "independent_band: band_size must be >= 16");
  require(w > 0.0, "independent_band: W must be > 0");
  require(dim_nuc >= 1, "independent_band: at least one nuclear coordinate");
  RVec levels(n);
  for (int l = 0; l < n; ++l) levels[l] = -0.5 * w + w * double(l) / double(n - 1);
  ParametricHamiltonian h;
  h.dim_el = n + 1;
  h.dim_nuc = dim_nuc;
  h.label = "independent_band";
  h.band = BandInfo{n, w, fermi_level};
  h.eval = [=](const RVec& x) {
    check_dim(x, dim_nuc, "independent_band");
    CMat m = CMat::Zero(n + 1, n + 1);
    m(0, 0) = eps_d.value(x);
    double dv = d.value(x);
    for (int l = 0; l < n; ++l) {
      m(l + 1, l + 1) = levels[l];
      m(0, l + 1) = dv;
      m(l + 1, 0) = dv;
    }
    return m;
  };
  h.grad = [=](const RVec& x, int k) {
    check_dim(x, dim_nuc, "independent_band");
    if (k < 0 || k >= dim_nuc) throw ConfigError("independent_band: gradient index out of range");
    CMat m = CMat::Zero(n + 1, n + 1);
    m(0, 0) = eps_d.deriv(x, k);
    double dd = d.deriv(x, k);
    for (int l = 0; l < n; ++l) {
      m(0, l + 1) = dd;
      m(l + 1, 0) = dd;
    }
    return m;
  };
  return h;
}

ParametricHamiltonian from_functions(std::string label, int dim_el, int dim_nuc,
                                     std::function<CMat(const RVec&)> eval,
                                     std::function<CMat(const RVec&, int)> grad) {
  require(dim_el >= 1 && dim_nuc >= 1, "model dimensions must be positive");
  ParametricHamiltonian h;
  h.dim_el = dim_el;
  h.dim_nuc = dim_nuc;
  h.label = std::move(label);
  h.eval = std::move(eval);
  h.grad = std::move(grad);
  return h;
}

ParametricHamiltonian single_surface(std::string label, int dim_nuc, const ScalarField& v) {
  return from_functions(
      std::move(label), 1, dim_nuc,
      [v](const RVec& x) { return CMat::Constant(1, 1, v.value(x)); },
      [v](const RVec& x, int k) { return CMat::Constant(1, 1, v.deriv(x, k)); });
}

ParametricHamiltonian reparametrize(const ParametricHamiltonian& h0, int dim_new,
                                    std::function<RVec(const RVec&)> map,
                                    std::function<RMat(const RVec&)> jacobian) {
  ParametricHamiltonian h = h0;
  h.dim_nuc = dim_new;
  h.label = h0.label + "_reparametrized";
  auto e0 = h0.eval;
  auto g0 = h0.grad;
  int n0 = h0.dim_nuc;
  h.eval = [e0, map](const RVec& y) { return e0(map(y)); };
  h.grad = [=](const RVec& y, int k) {
    RVec x = map(y);
    RMat j = jacobian(y);
    CMat m = CMat::Zero(h0.dim_el, h0.dim_el);
    for (int l = 0; l < n0; ++l)
      if (j(l, k) != 0.0) m += j(l, k) * g0(x, l);
    return m;
  };
  return h;
}

ParametricHamiltonian build(const ModelSpec& spec) {
  auto p = [&](const std::string& key, double def) {
    auto it = spec.parameters.find(key);
    return it == spec.parameters.end() ? def : it->second;
  };
  switch (spec.kind) {
    case ModelKind::spin_monopole:
      return build_spin_monopole(p("b0", 1.0));
    case ModelKind::conical:
      return build_conical(p("a", 1.0), p("c", 1.0));
    case ModelKind::avoided_crossing:
      return build_avoided_crossing(p("k_f", 0.02), p("x0", 1.0), p("delta", 0.0), p("c", 0.01));
    case ModelKind::independent_band: {
      size_t nd = std::max({spec.eps_d.lin.size(), spec.eps_d.quad.size(), spec.d.lin.size(),
                            spec.d.quad.size(), size_t(1)});
      return build_independent_band(spec.band_size, p("W", 10.0), int(nd), spec.eps_d.field(),
                                    spec.d.field(), p("fermi_level", 0.0));
    }
  }
  throw ConfigError("unknown model kind");
}

CMat fd_gradient(const ParametricHamiltonian& h, const RVec& x, int k, double step) {
  if (k < 0 || k >= h.dim_nuc)
    throw ConfigError("fd_gradient: index " + std::to_string(k) + " outside [0, " +
                      std::to_string(h.dim_nuc) + ")");
  if (!(step > 0.0)) throw ConfigError("fd_gradient: step must be > 0");
  RVec xp = x, xm = x;
  xp[k] += step;
  xm[k] -= step;
  CMat m = (h.eval(xp) - h.eval(xm)) / (2.0 * step);
  return 0.5 * (m + m.adjoint());
}

double hermiticity_error(const CMat& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

}  // namespace efric::models
