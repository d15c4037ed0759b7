#include "efric/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "efric/geometry.hpp"

namespace efric::kernels {

std::string to_string(DeltaKind k) {
  switch (k) {
    case DeltaKind::gaussian: return "gaussian";
    case DeltaKind::lorentzian: return "lorentzian";
    case DeltaKind::resolvent: return "resolvent";
  }
  return "unknown";
}

std::optional<DeltaKind> delta_kind_from_string(const std::string& s) {
  for (auto k : {DeltaKind::gaussian, DeltaKind::lorentzian, DeltaKind::resolvent})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

Broadening resolve(const BroadeningScheme& s, double spacing) {
  Broadening b;
  b.kind = s.kind;
  b.spacing = spacing;
  double floor = s.floor_factor > 0.0 ? s.floor_factor * spacing : 0.0;
  b.eta = s.eta > 0.0 ? std::max(s.eta, floor) : floor;
  if (!(b.eta > 0.0)) throw ConfigError("broadening width must be > 0 (set eta or a nonzero spacing floor)");
  b.omega = s.omega.value_or(b.eta);
  b.epsilon = s.epsilon.value_or(b.eta);
  if (b.omega < 0.0) throw ConfigError("broadening omega must be >= 0");
  if (!(b.epsilon > 0.0)) throw ConfigError("broadening epsilon must be > 0");
  if (std::isfinite(spacing) && b.eta < 3.0 * spacing) {
    std::ostringstream os;
    os << "GapWarning: eta = " << b.eta << " is below 3x the local level spacing " << spacing;
    b.warnings.push_back(os.str());
  }
  return b;
}

double real_delta(const Broadening& b, double x) {
  if (b.kind == DeltaKind::gaussian)
    return std::exp(-0.5 * x * x / (b.eta * b.eta)) / (std::sqrt(2.0 * pi) * b.eta);
  return b.eta / pi / (x * x + b.eta * b.eta);
}

cplx delta_weight(const Broadening& b, double de) {
  if (b.kind != DeltaKind::resolvent) return real_delta(b, de - b.omega);
  cplx z(b.omega, b.eta);
  return -I * z / (pi * de * (de - z));
}

CMat Excitations::derivative_couplings() const {
  CMat c = coupling;
  for (Eigen::Index m = 0; m < de.size(); ++m) c.col(m) /= -de[m];
  return c;
}

namespace {

double mean_spacing(std::vector<double> levels, double center, int k) {
  if (levels.size() < 2) return std::numeric_limits<double>::infinity();
  std::sort(levels.begin(), levels.end(),
            [center](double a, double b) { return std::abs(a - center) < std::abs(b - center); });
  levels.resize(std::min<size_t>(levels.size(), size_t(k)));
  auto [lo, hi] = std::minmax_element(levels.begin(), levels.end());
  return (*hi - *lo) / double(levels.size() - 1);
}

struct Orbitals {
  RVec e;
  CMat U;
  std::vector<CMat> D;  // D^k = U^dag d_k h U
};

Orbitals orbitals(const models::ParametricHamiltonian& h, const RVec& x) {
  Eigen::SelfAdjointEigenSolver<CMat> es(h.eval(x));
  Orbitals o{es.eigenvalues(), es.eigenvectors(), {}};
  for (int k = 0; k < h.dim_nuc; ++k) o.D.push_back(o.U.adjoint() * h.grad(x, k) * o.U);
  return o;
}

double fermi_of(const models::ParametricHamiltonian& band, std::optional<double> ef) {
  if (!band.band) throw ConfigError("model '" + band.label + "' is not an independent-band model");
  return ef.value_or(band.band->fermi_level);
}

// |Q d_j u_0> for the reference level n by a linear solve.
std::vector<CVec> projected_derivatives(const CMat& hx, const std::vector<CMat>& dh, const CVec& u0,
                                        double e0) {
  int dim = int(hx.rows());
  CMat a = hx - e0 * CMat::Identity(dim, dim) + u0 * u0.adjoint();
  Eigen::PartialPivLU<CMat> lu(a);
  std::vector<CVec> d;
  for (const auto& g : dh) {
    CVec r = g * u0;
    r -= u0 * u0.dot(r);
    d.push_back(lu.solve(-r));
  }
  return d;
}

}  // namespace

Excitations excitations_from(const RVec& energies, const CMat& vectors, const std::vector<CMat>& dh, int n,
                             const RVec& x, double gap_tol) {
  int dim = int(energies.size());
  double gap = geometry::level_gap(energies, n);
  if (gap <= gap_tol) throw DegeneracyError(x, gap);
  Excitations ex;
  ex.dim_nuc = int(dh.size());
  ex.e0 = energies[n];
  ex.de.resize(dim - 1);
  ex.coupling.resize(ex.dim_nuc, dim - 1);
  std::vector<CVec> hu;
  for (const auto& g : dh) hu.push_back(g * vectors.col(n));
  int col = 0;
  std::vector<double> levels;
  for (int m = 0; m < dim; ++m) {
    levels.push_back(energies[m]);
    if (m == n) continue;
    ex.de[col] = energies[m] - energies[n];
    for (int k = 0; k < ex.dim_nuc; ++k) ex.coupling(k, col) = vectors.col(m).dot(hu[k]);
    ++col;
  }
  ex.spacing = mean_spacing(levels, energies[n], 9);
  return ex;
}

Excitations single_reference(const models::ParametricHamiltonian& h, const RVec& x, int n, double gap_tol) {
  Eigen::SelfAdjointEigenSolver<CMat> es(h.eval(x));
  std::vector<CMat> dh;
  for (int k = 0; k < h.dim_nuc; ++k) dh.push_back(h.grad(x, k));
  return excitations_from(es.eigenvalues(), es.eigenvectors(), dh, n, x, gap_tol);
}

Excitations fermi_sea(const models::ParametricHamiltonian& band, const RVec& x, std::optional<double> fermi_level) {
  double ef = fermi_of(band, fermi_level);
  Orbitals o = orbitals(band, x);
  std::vector<int> occ, emp;
  std::vector<double> levels;
  for (Eigen::Index a = 0; a < o.e.size(); ++a) {
    levels.push_back(o.e[a]);
    (o.e[a] < ef ? occ : emp).push_back(int(a));
  }
  if (occ.empty() || emp.empty()) throw ConfigError("Fermi level leaves no occupied or no empty orbital");
  double gap = o.e[emp.front()] - o.e[occ.back()];
  if (gap <= 1e-8) throw DegeneracyError(x, gap);
  Excitations ex;
  ex.dim_nuc = band.dim_nuc;
  ex.e0 = 0.0;
  for (int a : occ) ex.e0 += o.e[a];
  long count = long(occ.size()) * long(emp.size());
  ex.de.resize(count);
  ex.coupling.resize(ex.dim_nuc, count);
  long m = 0;
  for (int a : occ)
    for (int b : emp) {
      ex.de[m] = o.e[b] - o.e[a];
      for (int k = 0; k < ex.dim_nuc; ++k) ex.coupling(k, m) = o.D[k](b, a);
      ++m;
    }
  ex.spacing = mean_spacing(levels, ef, 9);
  return ex;
}

CMat geometric_tensor(const Excitations& ex) {
  CMat c = ex.derivative_couplings();
  return c.conjugate() * c.transpose();
}

KernelSamples memory_kernel(const Excitations& ex, const RVec& tau) {
  CMat c = ex.derivative_couplings();
  KernelSamples out;
  out.tau = tau;
  for (Eigen::Index t = 0; t < tau.size(); ++t) {
    CVec w(ex.de.size());
    for (Eigen::Index m = 0; m < ex.de.size(); ++m) w[m] = ex.de[m] * std::exp(-I * ex.de[m] * tau[t]);
    out.values.push_back(c.conjugate() * w.asDiagonal() * c.transpose());
  }
  return out;
}

KernelSamples memory_kernel(const models::ParametricHamiltonian& h, const RVec& x, const RVec& tau) {
  return memory_kernel(single_reference(h, x), tau);
}

CMat bare_kernel(const Excitations& ex, const Broadening& b) {
  CMat c = ex.derivative_couplings();
  CVec w(ex.de.size());
  cplx z(b.omega, b.epsilon);
  for (Eigen::Index m = 0; m < ex.de.size(); ++m) w[m] = -2.0 * I * ex.de[m] / (ex.de[m] - z);
  return c.conjugate() * w.asDiagonal() * c.transpose();
}

CMat bare_kernel(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s) {
  auto ex = single_reference(h, x);
  return bare_kernel(ex, resolve(s, ex.spacing));
}

CMat markov_friction(const Excitations& ex, const Broadening& b) {
  CMat c = ex.derivative_couplings();
  CVec w(ex.de.size());
  for (Eigen::Index m = 0; m < ex.de.size(); ++m) w[m] = 2.0 * pi * ex.de[m] * delta_weight(b, ex.de[m]);
  return c.conjugate() * w.asDiagonal() * c.transpose();
}

CMat markov_friction(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s) {
  auto ex = single_reference(h, x);
  return markov_friction(ex, resolve(s, ex.spacing));
}

RMat markov_friction_alt(const models::ParametricHamiltonian& h, const RVec& x, const Broadening& b) {
  CMat hx = h.eval(x);
  Eigen::SelfAdjointEigenSolver<CMat> es(hx);
  const RVec& e = es.eigenvalues();
  const CMat& U = es.eigenvectors();
  double gap = geometry::level_gap(e, 0);
  if (gap <= 1e-8) throw DegeneracyError(x, gap);
  CVec u0 = U.col(0);
  std::vector<CMat> dh;
  for (int k = 0; k < h.dim_nuc; ++k) dh.push_back(h.grad(x, k));
  auto d = projected_derivatives(hx, dh, u0, e[0]);
  CVec w(e.size());
  w[0] = 0.0;
  for (Eigen::Index m = 1; m < e.size(); ++m) w[m] = delta_weight(b, e[m] - e[0]);
  std::vector<CVec> left;
  for (int k = 0; k < h.dim_nuc; ++k) left.push_back(dh[k] * u0);
  RMat out(h.dim_nuc, h.dim_nuc);
  for (int j = 0; j < h.dim_nuc; ++j) {
    CVec wd = U * (w.asDiagonal() * (U.adjoint() * d[j]));
    for (int k = 0; k < h.dim_nuc; ++k) out(k, j) = -2.0 * pi * left[k].dot(wd).real();
  }
  return out;
}

RMat markov_friction_alt(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s) {
  auto ex = single_reference(h, x);
  return markov_friction_alt(h, x, resolve(s, ex.spacing));
}

RMat markov_friction_alt_fermi_sea(const models::ParametricHamiltonian& band, const RVec& x, const Broadening& b,
                                   std::optional<double> fermi_level) {
  double ef = fermi_of(band, fermi_level);
  Orbitals o = orbitals(band, x);
  int nd = band.dim_nuc;
  RMat out = RMat::Zero(nd, nd);
  for (Eigen::Index a = 0; a < o.e.size(); ++a) {
    if (!(o.e[a] < ef)) continue;
    for (Eigen::Index bb = 0; bb < o.e.size(); ++bb) {
      if (o.e[bb] < ef) continue;
      double de = o.e[bb] - o.e[a];
      cplx w = delta_weight(b, de) / de;
      for (int k = 0; k < nd; ++k)
        for (int j = 0; j < nd; ++j) out(k, j) += (o.D[k](a, bb) * o.D[j](bb, a) * w).real();
    }
  }
  return 2.0 * pi * out;
}

RMat energy_form_friction(const models::ParametricHamiltonian& h, const RVec& x, const Broadening& b) {
  CMat hx = h.eval(x);
  Eigen::SelfAdjointEigenSolver<CMat> es(hx);
  double gap = geometry::level_gap(es.eigenvalues(), 0);
  if (gap <= 1e-8) throw DegeneracyError(x, gap);
  double e0 = es.eigenvalues()[0];
  CVec u0 = es.eigenvectors().col(0);
  std::vector<CMat> dh;
  for (int k = 0; k < h.dim_nuc; ++k) dh.push_back(h.grad(x, k));
  auto d = projected_derivatives(hx, dh, u0, e0);
  int dim = int(hx.rows());
  CMat shifted = hx - cplx(e0 + b.omega, b.epsilon) * CMat::Identity(dim, dim);
  Eigen::PartialPivLU<CMat> lu(shifted);
  RMat out(h.dim_nuc, h.dim_nuc);
  for (int j = 0; j < h.dim_nuc; ++j) {
    CVec y = lu.solve(d[j]);
    for (int k = 0; k < h.dim_nuc; ++k) out(k, j) = -2.0 * (dh[k] * u0).dot(y).imag();
  }
  return out;
}

RMat energy_form_friction(const Excitations& ex, const Broadening& b) {
  CMat c = ex.derivative_couplings();
  cplx z(b.omega, b.epsilon);
  RMat out(ex.dim_nuc, ex.dim_nuc);
  for (int k = 0; k < ex.dim_nuc; ++k)
    for (int j = 0; j < ex.dim_nuc; ++j) {
      cplx s = 0.0;
      for (Eigen::Index m = 0; m < ex.de.size(); ++m)
        s += std::conj(ex.coupling(k, m)) * c(j, m) / (ex.de[m] - z);
      out(k, j) = -2.0 * s.imag();
    }
  return out;
}

RMat orbital_friction(const models::ParametricHamiltonian& band, const RVec& x, const Broadening& b,
                  std::optional<double> fermi_level) {
  double ef = fermi_of(band, fermi_level);
  Orbitals o = orbitals(band, x);
  RVec w(o.e.size());
  for (Eigen::Index a = 0; a < o.e.size(); ++a) w[a] = real_delta(b, o.e[a] - ef);
  int nd = band.dim_nuc;
  RMat out(nd, nd);
  for (int k = 0; k < nd; ++k) {
    CMat wd = w.asDiagonal() * o.D[k];
    for (int j = 0; j < nd; ++j) {
      CMat wdj = w.asDiagonal() * o.D[j];
      out(k, j) = pi * (wd.cwiseProduct(wdj.transpose())).sum().real();
    }
  }
  return out;
}

CMat frequency_term(const Excitations& ex, const Broadening& b) {
  CMat c = ex.derivative_couplings();
  cplx z(b.omega, b.epsilon);
  CVec w(ex.de.size());
  for (Eigen::Index m = 0; m < ex.de.size(); ++m) w[m] = -2.0 * I * b.omega / (ex.de[m] - z);
  return c.conjugate() * w.asDiagonal() * c.transpose();
}

SymmetryReport symmetry_report(const CMat& gamma) {
  SymmetryReport r;
  r.norm = gamma.norm();
  double s = r.norm > 0.0 ? r.norm : 1.0;
  RMat re = gamma.real(), im = gamma.imag();
  r.re_asymmetry = (re - re.transpose()).norm() / s;
  r.im_symmetry = (im + im.transpose()).norm() / s;
  RMat sym = 0.5 * (re + re.transpose());
  Eigen::SelfAdjointEigenSolver<RMat> es(sym);
  r.min_eig_rel = es.eigenvalues().minCoeff() / s;
  return r;
}

FrictionTensorSet evaluate(const models::ParametricHamiltonian& h, const RVec& x, const BroadeningScheme& s,
                           const RVec& tau) {
  FrictionTensorSet out;
  out.x = x;
  auto ex = single_reference(h, x);
  out.broadening = resolve(s, ex.spacing);
  out.warnings = out.broadening.warnings;
  out.memory = memory_kernel(ex, tau);
  out.gamma_bar = bare_kernel(ex, out.broadening);
  out.gamma = markov_friction(ex, out.broadening);
  out.gamma_alt = markov_friction_alt(h, x, out.broadening);
  out.gamma_energy = energy_form_friction(h, x, out.broadening);
  if (h.band) {
    auto fs = fermi_sea(h, x);
    Broadening bf = resolve(s, fs.spacing);
    out.gamma_orbital = orbital_friction(h, x, bf);
  }
  return out;
}

double relative_difference(const CMat& a, const CMat& b, double scale) {
  double s = scale > 0.0 ? scale : 1.0;
  return (a - b).norm() / s;
}

}  // namespace efric::kernels
