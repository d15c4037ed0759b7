// Parametric electronic Hamiltonians H_el(x) with analytic gradients.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "efric/core.hpp"

namespace efric::models {

// Metadata kept for single-particle band models; many-body data is
// assembled downstream from the orbitals of h(x).
struct BandInfo {
  int n_band = 0;
  double width = 0.0;
  double fermi_level = 0.0;
};

struct ParametricHamiltonian {
  int dim_el = 0;
  int dim_nuc = 0;
  std::string label;
  std::function<CMat(const RVec&)> eval;
  std::function<CMat(const RVec&, int)> grad;
  std::optional<BandInfo> band;
};

// Smooth real function of the nuclear coordinates with its gradient.
struct ScalarField {
  std::function<double(const RVec&)> value;
  std::function<double(const RVec&, int)> deriv;
};

// c0 + sum_k lin_k x_k + 1/2 sum_k quad_k x_k^2
struct PolyField {
  double c0 = 0.0;
  std::vector<double> lin;
  std::vector<double> quad;
  ScalarField field() const;
};

enum class ModelKind { spin_monopole, conical, avoided_crossing, independent_band };

struct ModelSpec {
  ModelKind kind = ModelKind::avoided_crossing;
  std::map<std::string, double> parameters;
  int band_size = 0;
  PolyField eps_d;
  PolyField d;
};

std::string to_string(ModelKind k);
std::optional<ModelKind> kind_from_string(const std::string& s);

// H = (b0/2) x.sigma, x in R^3.
ParametricHamiltonian build_spin_monopole(double b0);

// H = a x sigma_z + c y sigma_x.
ParametricHamiltonian build_conical(double a, double c);

// Diabats 1/2 k (x + x0)^2 and 1/2 k (x - x0)^2 + delta, constant coupling c.
ParametricHamiltonian build_avoided_crossing(double k_f, double x0, double delta, double c);

// Impurity level eps_d(x) coupled by d(x) to n band levels evenly spaced on
// [-w/2, w/2]. Basis index 0 is the impurity. dim_nuc is the number of
// coordinates both fields are defined on.
ParametricHamiltonian build_independent_band(int n, double w, int dim_nuc, const ScalarField& eps_d,
                                             const ScalarField& d, double fermi_level = 0.0);

// Arbitrary Hermitian model from callables; used for synthetic testbeds.
ParametricHamiltonian from_functions(std::string label, int dim_el, int dim_nuc,
                                     std::function<CMat(const RVec&)> eval,
                                     std::function<CMat(const RVec&, int)> grad);

// Single adiabatic surface V(x) as a 1x1 model.
ParametricHamiltonian single_surface(std::string label, int dim_nuc, const ScalarField& v);

// H(y) = H0(map(y)); jacobian(y)(l, k) = d map_l / d y_k.
ParametricHamiltonian reparametrize(const ParametricHamiltonian& h0, int dim_new,
                                    std::function<RVec(const RVec&)> map,
                                    std::function<RMat(const RVec&)> jacobian);

// Validates parameters and dispatches to the builders above.
ParametricHamiltonian build(const ModelSpec& spec);

// Central difference of eval along k, Hermitized.
CMat fd_gradient(const ParametricHamiltonian& h, const RVec& x, int k, double step);

double hermiticity_error(const CMat& m);

}  // namespace efric::models
