#pragma once

// Conversions between real two-component time series and circular-basis
// spectra.
//
// Spectra use the exp(+i W t) convention,
//   V(W) = dt * sum_n v(t_n) exp(i W t_n),
// so a field Re[a e+ exp(-i w t)] shows up at positive frequency W = w in
// the e+ slot. Circular components are projections on e+- = (x +- i y)/sqrt2.

#include <tkam/fft.hpp>
#include <tkam/grids.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace tkam {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Real field of the circular amplitudes: Re[plus e+ + minus e-].
inline Vec2 real_field(cplx plus, cplx minus) {
  const cplx ex = (plus + minus) * inv_sqrt2;
  const cplx ey = cplx(0.0, 1.0) * (plus - minus) * inv_sqrt2;
  return {ex.real(), ey.real()};
}

// Frequency bookkeeping for a TimeGrid. Bin k sits at W_k = k dW with k in
// [0, n_t/2). Harmonic window q collects -w/2 <= W - q w < w/2.
struct SpectralAxis {
  double omega = 0.0;
  double d_omega = 0.0;
  double dt = 0.0;
  double t0 = 0.0;
  int n_t = 0;
  int bins_per_order = 0;

  static SpectralAxis of(const TimeGrid& g) {
    SpectralAxis a;
    a.omega = g.omega;
    a.dt = g.dt();
    a.t0 = g.t0;
    a.n_t = g.n_t;
    a.bins_per_order = g.bins_per_order();
    a.d_omega = units::two_pi / (g.n_t * a.dt);
    return a;
  }

  double frequency(int k) const { return k * d_omega; }
  int window_begin(int q) const { return q * bins_per_order - bins_per_order / 2; }
  int window_end(int q) const { return window_begin(q) + bins_per_order; }
  int nyquist() const { return n_t / 2; }
  // harmonic order whose window contains bin k
  int order_of(int k) const {
    return static_cast<int>(std::floor((k + bins_per_order / 2) / static_cast<double>(bins_per_order)));
  }
};

// Computes the circular spectra of a real 2-vector series with one complex
// FFT of z = x + i y. Scratch buffers are owned by the caller so the object
// can be used per worker thread.
class CircularTransform {
public:
  explicit CircularTransform(const TimeGrid& g)
      : axis_(SpectralAxis::of(g)), plan_(static_cast<std::size_t>(g.n_t), +1), z_(g.n_t), spec_(g.n_t) {}

  const SpectralAxis& axis() const { return axis_; }

  // x, y: real samples on the time grid. Fills plus/minus for bins
  // [k_lo, k_lo + plus.size()).
  void forward(std::span<const double> x, std::span<const double> y, int k_lo, std::span<cplx> plus,
               std::span<cplx> minus) {
    const int n = axis_.n_t;
    for (int i = 0; i < n; ++i) z_[i] = cplx(x[i], y[i]);
    plan_.execute(z_, spec_);
    const int nb = static_cast<int>(plus.size());
    for (int b = 0; b < nb; ++b) {
      const int k = k_lo + b;
      const double w = axis_.frequency(k);
      const cplx ref = std::polar(axis_.dt * inv_sqrt2, w * axis_.t0);
      const cplx zk = spec_[k % n];
      const cplx zmk = spec_[(n - k % n) % n];
      minus[b] = ref * zk;
      // FT(conj z)(W) = conj(FT z(-W)); the t0 phase of -W conjugates to +W
      plus[b] = std::conj(zmk) * ref;
    }
  }

private:
  SpectralAxis axis_;
  FftPlan plan_;
  std::vector<cplx> z_;
  std::vector<cplx> spec_;
};

// Rebuilds a real 2-vector time series from positive-frequency circular
// spectra on bins [k_lo, k_lo + n). Output has n_t * upsample samples at
// t0 + n dt / upsample (band-limited interpolation).
class CircularSynthesis {
public:
  CircularSynthesis(const SpectralAxis& axis, int upsample)
      : axis_(axis), upsample_(upsample), n_out_(axis.n_t * upsample),
        plan_(static_cast<std::size_t>(axis.n_t) * upsample, -1), y_(n_out_), z_(n_out_) {
    if (upsample < 1) throw std::invalid_argument("CircularSynthesis: upsample must be >= 1");
  }

  int samples() const { return n_out_; }
  double dt() const { return axis_.dt / upsample_; }
  double t(int n) const { return axis_.t0 + n * dt(); }

  void inverse(int k_lo, std::span<const cplx> plus, std::span<const cplx> minus, std::span<double> x,
               std::span<double> y) {
    std::fill(y_.begin(), y_.end(), cplx{});
    const double sqrt2 = std::numbers::sqrt2;
    const int nb = static_cast<int>(plus.size());
    for (int b = 0; b < nb; ++b) {
      const int k = k_lo + b;
      if (k <= 0 || 2 * k >= n_out_) continue;
      const cplx ref = std::polar(1.0, -axis_.frequency(k) * axis_.t0);
      y_[k] += sqrt2 * minus[b] * ref;
      y_[n_out_ - k] += sqrt2 * std::conj(plus[b] * ref);
    }
    plan_.execute(y_, z_);
    const double norm = axis_.d_omega / units::two_pi;
    for (int i = 0; i < n_out_; ++i) {
      x[i] = z_[i].real() * norm;
      y[i] = z_[i].imag() * norm;
    }
  }

private:
  SpectralAxis axis_;
  int upsample_;
  int n_out_;
  FftPlan plan_;
  std::vector<cplx> y_;
  std::vector<cplx> z_;
};

} // namespace tkam
