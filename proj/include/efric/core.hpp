// Shared aliases and error types. Hartree atomic units, hbar = 1.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace efric {

using cplx = std::complex<double>;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

constexpr double pi = 3.14159265358979323846;
constexpr cplx I{0.0, 1.0};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input or unusable configuration.
struct ConfigError : Error {
  using Error::Error;
};

// A computed quantity left the regime where it is meaningful.
struct NumericalError : Error {
  using Error::Error;
};

struct DegeneracyError : NumericalError {
  RVec point;
  double gap;
  DegeneracyError(const RVec& x, double g);
};

struct EdgeLeakError : NumericalError {
  double edge_density;
  explicit EdgeLeakError(double d);
};

struct EmptySupportError : NumericalError {
  EmptySupportError() : NumericalError("factorization support is empty") {}
};

std::string format_point(const RVec& x);
std::string format_number(double v);

}  // namespace efric
