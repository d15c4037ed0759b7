#include "efric/spectral.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

namespace efric::spectral {

namespace {
// Plan creation is not thread safe in FFTW.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fft1d::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  fftw_complex* buf = nullptr;
};

Fft1d::Fft1d(int n) : n_(n), plans_(std::make_unique<Plans>()) {
  if (n < 2) throw ConfigError("FFT size must be >= 2");
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->buf = fftw_alloc_complex(n);
  // FFTW_ESTIMATE keeps the chosen algorithm, and hence rounding, reproducible.
  plans_->fwd = fftw_plan_dft_1d(n, plans_->buf, plans_->buf, FFTW_FORWARD, FFTW_ESTIMATE);
  plans_->bwd = fftw_plan_dft_1d(n, plans_->buf, plans_->buf, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft1d::~Fft1d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (plans_->fwd) fftw_destroy_plan(plans_->fwd);
  if (plans_->bwd) fftw_destroy_plan(plans_->bwd);
  if (plans_->buf) fftw_free(plans_->buf);
}

void Fft1d::forward(CVec& v) const {
  std::memcpy(plans_->buf, v.data(), sizeof(cplx) * n_);
  fftw_execute(plans_->fwd);
  std::memcpy(static_cast<void*>(v.data()), plans_->buf, sizeof(cplx) * n_);
}

void Fft1d::backward(CVec& v) const {
  std::memcpy(plans_->buf, v.data(), sizeof(cplx) * n_);
  fftw_execute(plans_->bwd);
  std::memcpy(static_cast<void*>(v.data()), plans_->buf, sizeof(cplx) * n_);
  v /= double(n_);
}

RVec wavenumbers(int n, double dx) {
  RVec k(n);
  double dk = 2.0 * pi / (n * dx);
  for (int i = 0; i < n; ++i) k[i] = dk * (i <= n / 2 ? i : i - n);
  return k;
}

CVec derivative(const Fft1d& fft, const RVec& k, const CVec& f, int order) {
  CVec g = f;
  fft.forward(g);
  int n = int(g.size());
  for (int i = 0; i < n; ++i) g[i] *= std::pow(I * k[i], order);
  // An odd derivative of the Nyquist mode is not representable on the grid.
  if (order % 2 == 1 && n % 2 == 0) g[n / 2] = 0.0;
  fft.backward(g);
  return g;
}

}  // namespace efric::spectral
