#pragma once

// Thin wrapper around FFTW's 1-d real transforms with per-thread plan
// caching.  Plans are created under a global mutex (the FFTW planner is not
// thread-safe); execution uses thread-local buffers, so concurrent callers
// never share state.

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>

namespace smf::grid::detail {

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    static std::mutex planner_mutex;
    std::lock_guard<std::mutex> lock(planner_mutex);
    real_ = fftw_alloc_real(n);
    spec_ = fftw_alloc_complex(n / 2 + 1);
    fwd_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
  }

  ~RealFft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int spectrum_size() const { return n_ / 2 + 1; }

  /// in (n reals) -> out (n/2+1 complex), unnormalized.
  void forward(std::span<const double> in, std::complex<double>* out) {
    for (int j = 0; j < n_; ++j) real_[j] = in[j];
    fftw_execute(fwd_);
    for (int k = 0; k <= n_ / 2; ++k) out[k] = {spec_[k][0], spec_[k][1]};
  }

  /// in (n/2+1 complex) -> out (n reals), includes the 1/n normalization.
  void inverse(const std::complex<double>* in, std::span<double> out) {
    for (int k = 0; k <= n_ / 2; ++k) {
      spec_[k][0] = in[k].real();
      spec_[k][1] = in[k].imag();
    }
    fftw_execute(inv_);
    const double scale = 1.0 / n_;
    for (int j = 0; j < n_; ++j) out[j] = real_[j] * scale;
  }

 private:
  int n_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan fwd_, inv_;
};

inline RealFft& fft_for(int n) {
  thread_local std::map<int, std::unique_ptr<RealFft>> cache;
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<RealFft>(n)).first;
  return *it->second;
}

}  // namespace smf::grid::detail
