#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace tkam {

using cplx = std::complex<double>;

// Thin RAII wrapper over an FFTW complex plan. Plans are created unaligned so
// a single plan can be executed on any buffer from any thread.
//
// sign = +1 computes sum_n x_n exp(+2 pi i k n / N), sign = -1 the usual
// forward transform. Neither direction is normalized.
class FftPlan {
public:
  FftPlan() = default;
  FftPlan(std::size_t n, int sign) : n_(n) {
    if (n == 0) throw std::invalid_argument("FftPlan: zero length");
    std::vector<cplx> a(n), b(n);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(a.data()),
                             reinterpret_cast<fftw_complex*>(b.data()),
                             sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan_) throw std::runtime_error("FftPlan: fftw planning failed");
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  FftPlan(FftPlan&& o) noexcept : plan_(o.plan_), n_(o.n_) { o.plan_ = nullptr; }
  FftPlan& operator=(FftPlan&& o) noexcept {
    if (this != &o) {
      reset();
      plan_ = o.plan_;
      n_ = o.n_;
      o.plan_ = nullptr;
    }
    return *this;
  }
  ~FftPlan() { reset(); }

  std::size_t size() const { return n_; }

  void execute(std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("FftPlan: size mismatch");
    fftw_execute_dft(plan_, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
  }

private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
  void reset() {
    if (plan_) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
      plan_ = nullptr;
    }
  }

  fftw_plan plan_ = nullptr;
  std::size_t n_ = 0;
};

} // namespace tkam
