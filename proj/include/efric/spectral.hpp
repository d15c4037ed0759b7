// Periodic 1-D Fourier helpers on a uniform grid (FFTW backend).
#pragma once

#include <memory>

#include "efric/core.hpp"

namespace efric::spectral {

class Fft1d {
 public:
  explicit Fft1d(int n);
  ~Fft1d();
  Fft1d(const Fft1d&) = delete;
  Fft1d& operator=(const Fft1d&) = delete;

  int size() const { return n_; }
  // Unnormalized forward transform, in place.
  void forward(CVec& v) const;
  // Inverse transform including the 1/n factor, in place.
  void backward(CVec& v) const;

 private:
  int n_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

// Angular wavenumbers in FFT order for n points of spacing dx.
RVec wavenumbers(int n, double dx);

// Spectral derivative of order `order` of a periodic sampled function.
CVec derivative(const Fft1d& fft, const RVec& k, const CVec& f, int order);

}  // namespace efric::spectral
