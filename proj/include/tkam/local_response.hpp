#pragma once

// High-harmonic response of each transverse point to its local driver.
//
// Two models:
//  * surrogate: the instantaneous isotropic nonlinearity D = |F|^(p-1) F,
//    followed by an intrinsic phase alpha_q I(r, theta) per harmonic window.
//    Being local in time and rotation invariant, it inherits the dynamical
//    symmetries of the driver exactly.
//  * sfa: the strong-field-approximation dipole (Lewenstein form, saddle
//    point in momentum, hydrogenic dipole matrix elements). Slower; intended
//    for single points and reduced grids.

#include <tkam/field_synthesis.hpp>
#include <tkam/parallel.hpp>
#include <tkam/spectral.hpp>

#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tkam {

struct SurrogateModelParams {
  double effective_order = 4.0;
  double alpha0 = 0.0;                // rad per 1e14 W/cm^2, per harmonic order
  std::map<int, double> alpha_override; // explicit alpha_q
  int q_min = 1;
  int q_max = 30;

  double alpha(int q) const {
    auto it = alpha_override.find(q);
    return it != alpha_override.end() ? it->second : alpha0 * q;
  }

  void validate() const {
    if (!(effective_order >= 1.0)) throw std::invalid_argument("surrogate: effective order must be >= 1");
    if (!std::isfinite(alpha0)) throw std::invalid_argument("surrogate: alpha0 must be finite");
    for (auto& [q, a] : alpha_override)
      if (!std::isfinite(a)) throw std::invalid_argument("surrogate: alpha_" + std::to_string(q) + " must be finite");
    if (q_min < 1 || q_max < q_min) throw std::invalid_argument("surrogate: invalid harmonic range");
  }
};

enum class TrajectoryClass { short_only, long_only, all };

struct SfaParams {
  double ionization_potential_ev = units::argon_ip_ev;
  double excursion_cycles = 1.5;  // integration window over excursion time, fundamental cycles
  double short_long_split = 0.65; // cycles
  double tolerance = 0.1;         // in-band disagreement with the half-step quadrature allowed per point
  double epsilon = 1e-4;          // regularization of the spreading factor, a.u.
  TrajectoryClass trajectories = TrajectoryClass::all;
  int q_min = 1;
  int q_max = 30;

  void validate() const {
    if (!(ionization_potential_ev > 0.0)) throw std::invalid_argument("sfa: ionization potential must be positive");
    if (!(tolerance > 0.0)) throw std::invalid_argument("sfa: tolerance must be positive");
    if (!(excursion_cycles > 0.0)) throw std::invalid_argument("sfa: excursion window must be positive");
    if (q_min < 1 || q_max < q_min) throw std::invalid_argument("sfa: invalid harmonic range");
  }
};

// Positive-frequency circular spectra of the emission, per transverse point,
// on the contiguous bin range [k_lo, k_lo + n_bins). Layout [bin][s][r][theta]
// with s = 0 for e+ (SAM +1) and s = 1 for e- (SAM -1).
struct EmissionGrid {
  TransverseGrid transverse;
  SpectralAxis axis;
  int k_lo = 0;
  int n_bins = 0;
  std::vector<cplx> data;
  std::vector<char> excluded; // per point, set when the model could not converge
  std::size_t excluded_points = 0;

  EmissionGrid() = default;
  EmissionGrid(TransverseGrid tg, const SpectralAxis& ax, int q_min, int q_max) : transverse(std::move(tg)), axis(ax) {
    k_lo = std::max(1, ax.window_begin(q_min));
    const int k_hi = ax.window_end(q_max);
    if (k_hi > ax.nyquist())
      throw std::invalid_argument("EmissionGrid: harmonic " + std::to_string(q_max) + " beyond the Nyquist limit");
    n_bins = k_hi - k_lo;
    data.assign(static_cast<std::size_t>(n_bins) * 2 * transverse.points(), cplx{});
    excluded.assign(transverse.points(), 0);
  }

  static int slot(int sam) { return sam > 0 ? 0 : 1; }
  std::size_t plane() const { return transverse.points(); }
  std::size_t index(int bin, int s, int ir, int ith) const {
    return (static_cast<std::size_t>(bin) * 2 + s) * plane() + static_cast<std::size_t>(ir) * transverse.n_theta + ith;
  }
  cplx& at(int bin, int s, int ir, int ith) { return data[index(bin, s, ir, ith)]; }
  const cplx& at(int bin, int s, int ir, int ith) const { return data[index(bin, s, ir, ith)]; }

  int k_hi() const { return k_lo + n_bins; }
  // bins of harmonic window q clipped to the stored range, as offsets
  std::pair<int, int> window(int q) const {
    const int b = std::max(axis.window_begin(q), k_lo) - k_lo;
    const int e = std::min(axis.window_end(q), k_hi()) - k_lo;
    return {b, std::max(b, e)};
  }
  int q_min() const { return axis.order_of(k_lo); }
  int q_max() const { return axis.order_of(k_hi() - 1); }

  bool finite() const {
    for (const auto& v : data)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
};

namespace detail {

// local cycle-averaged intensity of the driver in units of 1e14 W/cm^2,
// referred to the envelope peak when the envelope is known
inline double local_intensity(std::span<const cplx> series, std::span<const double> envelope) {
  const std::size_t nt = series.size() / 2;
  double s = 0.0, norm = 0.0;
  for (std::size_t n = 0; n < nt; ++n) {
    s += std::norm(series[2 * n]) + std::norm(series[2 * n + 1]);
    norm += envelope.empty() ? 1.0 : envelope[n] * envelope[n];
  }
  if (norm == 0.0) return 0.0;
  return s / norm * units::atomic_intensity_wcm2 / units::intensity_unit_wcm2;
}

inline void store_point(EmissionGrid& out, int ir, int ith, std::span<const cplx> plus, std::span<const cplx> minus) {
  for (int b = 0; b < out.n_bins; ++b) {
    out.at(b, 0, ir, ith) = plus[b];
    out.at(b, 1, ir, ith) = minus[b];
  }
}

} // namespace detail

// Per-thread surrogate worker for one transverse point.
class SurrogateKernel {
public:
  SurrogateKernel(const TimeGrid& time, const SurrogateModelParams& params, int k_lo, int n_bins)
      : params_(params), transform_(time), k_lo_(k_lo), x_(time.n_t), y_(time.n_t), plus_(n_bins), minus_(n_bins) {}

  void run(std::span<const cplx> series, std::span<const double> envelope, EmissionGrid& out, int ir, int ith) {
    const int nt = static_cast<int>(x_.size());
    const double p1 = params_.effective_order - 1.0;
    for (int n = 0; n < nt; ++n) {
      const Vec2 f = real_field(series[2 * n], series[2 * n + 1]);
      const double mag = std::hypot(f.x, f.y);
      const double g = p1 == 0.0 ? 1.0 : std::pow(mag, p1);
      x_[n] = g * f.x;
      y_[n] = g * f.y;
      if (!std::isfinite(x_[n]) || !std::isfinite(y_[n]))
        throw std::overflow_error("surrogate_emission: non-finite response (effective order too large?)");
    }
    transform_.forward(x_, y_, k_lo_, plus_, minus_);
    const double intensity = detail::local_intensity(series, envelope);
    const auto& ax = transform_.axis();
    for (int b = 0; b < static_cast<int>(plus_.size()); ++b) {
      const int q = ax.order_of(k_lo_ + b);
      const double a = params_.alpha(q);
      if (a != 0.0) {
        const cplx ph = std::polar(1.0, a * intensity);
        plus_[b] *= ph;
        minus_[b] *= ph;
      }
    }
    detail::store_point(out, ir, ith, plus_, minus_);
  }

private:
  SurrogateModelParams params_;
  CircularTransform transform_;
  int k_lo_;
  std::vector<double> x_, y_;
  std::vector<cplx> plus_, minus_;
};

inline EmissionGrid surrogate_emission(const FieldGrid& field, const SurrogateModelParams& params) {
  params.validate();
  if (!field.finite()) throw std::invalid_argument("surrogate_emission: non-finite driver");
  EmissionGrid out(field.transverse, SpectralAxis::of(field.time), params.q_min, params.q_max);
  std::vector<std::unique_ptr<SurrogateKernel>> kernels(effective_threads());
  parallel_for(field.transverse.points(), [&](std::size_t p, unsigned w) {
    if (!kernels[w]) kernels[w] = std::make_unique<SurrogateKernel>(field.time, params, out.k_lo, out.n_bins);
    const int ir = static_cast<int>(p / field.transverse.n_theta), ith = static_cast<int>(p % field.transverse.n_theta);
    kernels[w]->run(field.series(ir, ith), field.envelope, out, ir, ith);
  });
  return out;
}

// Streaming variant: evaluates the driver point by point without holding the
// full space-time field in memory.
inline EmissionGrid surrogate_emission(const DriverSpec& driver, const TransverseGrid& transverse, const TimeGrid& time,
                                       const SurrogateModelParams& params) {
  params.validate();
  DriverEvaluator eval(driver, time);
  EmissionGrid out(transverse, SpectralAxis::of(time), params.q_min, params.q_max);
  const unsigned workers = effective_threads();
  std::vector<std::unique_ptr<SurrogateKernel>> kernels(workers);
  std::vector<std::vector<cplx>> buffers(workers);
  parallel_for(transverse.points(), [&](std::size_t p, unsigned w) {
    if (!kernels[w]) {
      kernels[w] = std::make_unique<SurrogateKernel>(time, params, out.k_lo, out.n_bins);
      buffers[w].resize(static_cast<std::size_t>(time.n_t) * 2);
    }
    const int ir = static_cast<int>(p / transverse.n_theta), ith = static_cast<int>(p % transverse.n_theta);
    eval.fill(transverse.radii[ir], transverse.theta(ith), buffers[w]);
    kernels[w]->run(buffers[w], eval.envelope(), out, ir, ith);
  });
  return out;
}

// Spectrum of the driver itself (the p = 1, alpha = 0 surrogate).
inline EmissionGrid field_spectrum(const FieldGrid& field, int q_min, int q_max) {
  SurrogateModelParams p;
  p.effective_order = 1.0;
  p.q_min = q_min;
  p.q_max = q_max;
  return surrogate_emission(field, p);
}

// ---------------------------------------------------------------------------
// strong-field approximation

// Dipole of one point,
//   d(t) = i int_0^T dtau (pi / (eps + i tau/2))^{3/2} d*(v_r) [E(t - tau) . d(v_i)] e^{-i S} + c.c.
// with saddle momentum p = -(1/tau) int A, v_r = p + A(t), v_i = p + A(t - tau),
// S = Ip tau + 1/2 int (p + A)^2 and d(v) = i C v / (v^2 + 2 Ip)^3. Atomic units.
class SfaKernel {
public:
  SfaKernel(const TimeGrid& time, const SfaParams& params, int k_lo, int n_bins)
      : params_(params), transform_(time), k_lo_(k_lo), nt_(time.n_t), plus_(n_bins), minus_(n_bins) {
    ip_ = params.ionization_potential_ev / units::hartree_ev;
    dt_ = time.dt() / units::au_time_fs;
    const double period = units::two_pi / (time.omega * units::au_time_fs);
    n_tau_ = static_cast<int>(std::ceil(params.excursion_cycles * period / dt_));
    const double c = std::pow(2.0, 3.5) * std::pow(2.0 * ip_, 1.25) / units::pi;
    c2_ = c * c;
    // spreading factor and excursion-time window per tau sample
    prefactor_.resize(n_tau_ + 1);
    const double split = params.short_long_split * period;
    const double taper = 0.1 * period;
    const double tmax = n_tau_ * dt_;
    for (int j = 0; j <= n_tau_; ++j) {
      const double tau = j * dt_;
      double w = 1.0;
      if (tau > tmax - taper) w *= std::pow(std::cos(0.5 * units::pi * (tau - (tmax - taper)) / taper), 2);
      const double s = 0.5 * (1.0 + std::tanh((tau - split) / (0.25 * taper)));
      if (params.trajectories == TrajectoryClass::short_only) w *= 1.0 - s;
      if (params.trajectories == TrajectoryClass::long_only) w *= s;
      if (j == 0) w = 0.0;
      prefactor_[j] = w * std::pow(units::pi / cplx(params.epsilon, 0.5 * tau), 1.5);
    }
    ex_.resize(nt_); ey_.resize(nt_); ax_.resize(nt_); ay_.resize(nt_);
    cax_.resize(nt_); cay_.resize(nt_); ca2_.resize(nt_);
    dx_.resize(nt_); dy_.resize(nt_);
    dx_coarse_.resize(nt_); dy_coarse_.resize(nt_);
  }

  // Returns false when the excursion-time quadrature disagrees with its
  // half-resolution estimate by more than the tolerance.
  bool run(std::span<const cplx> series, EmissionGrid& out, int ir, int ith) {
    for (int n = 0; n < nt_; ++n) {
      const Vec2 f = real_field(series[2 * n], series[2 * n + 1]);
      ex_[n] = f.x;
      ey_[n] = f.y;
    }
    // A = -int E dt, then running integrals of A and A^2 (trapezoid)
    ax_[0] = ay_[0] = 0.0;
    for (int n = 1; n < nt_; ++n) {
      ax_[n] = ax_[n - 1] - 0.5 * dt_ * (ex_[n] + ex_[n - 1]);
      ay_[n] = ay_[n - 1] - 0.5 * dt_ * (ey_[n] + ey_[n - 1]);
    }
    cax_[0] = cay_[0] = ca2_[0] = 0.0;
    for (int n = 1; n < nt_; ++n) {
      cax_[n] = cax_[n - 1] + 0.5 * dt_ * (ax_[n] + ax_[n - 1]);
      cay_[n] = cay_[n - 1] + 0.5 * dt_ * (ay_[n] + ay_[n - 1]);
      ca2_[n] = ca2_[n - 1] + 0.5 * dt_ * (ax_[n] * ax_[n] + ay_[n] * ay_[n] + ax_[n - 1] * ax_[n - 1] + ay_[n - 1] * ay_[n - 1]);
    }
    for (int n = 0; n < nt_; ++n) {
      cplx sx = 0.0, sy = 0.0, cx = 0.0, cy = 0.0;
      const int jmax = std::min(n_tau_, n);
      for (int j = 1; j <= jmax; ++j) {
        const int m = n - j;
        const double tau = j * dt_;
        const double dax = cax_[n] - cax_[m], day = cay_[n] - cay_[m];
        const double px = -dax / tau, py = -day / tau;
        const double action = ip_ * tau - 0.5 * (dax * dax + day * day) / tau + 0.5 * (ca2_[n] - ca2_[m]);
        const double vrx = px + ax_[n], vry = py + ay_[n];
        const double vix = px + ax_[m], viy = py + ay_[m];
        const double dr = vrx * vrx + vry * vry + 2.0 * ip_;
        const double di = vix * vix + viy * viy + 2.0 * ip_;
        const double proj = (ex_[m] * vix + ey_[m] * viy) / (di * di * di);
        const double amp = c2_ * proj / (dr * dr * dr);
        const cplx kern = prefactor_[j] * std::polar(amp, -action);
        sx += kern * vrx;
        sy += kern * vry;
        if (j % 2 == 0) {
          cx += kern * vrx;
          cy += kern * vry;
        }
      }
      // i * (sum) + c.c. = -2 Im(sum)
      dx_[n] = -2.0 * sx.imag() * dt_;
      dy_[n] = -2.0 * sy.imag() * dt_;
      dx_coarse_[n] = -2.0 * cx.imag() * 2.0 * dt_;
      dy_coarse_[n] = -2.0 * cy.imag() * 2.0 * dt_;
    }
    // the half-resolution estimate is compared inside the stored band only:
    // the near-singular short excursions feed low orders, not the plateau
    transform_.forward(dx_coarse_, dy_coarse_, k_lo_, plus_, minus_);
    coarse_plus_.assign(plus_.begin(), plus_.end());
    coarse_minus_.assign(minus_.begin(), minus_.end());
    transform_.forward(dx_, dy_, k_lo_, plus_, minus_);
    double norm_fine = 0.0, norm_diff = 0.0;
    for (std::size_t b = 0; b < plus_.size(); ++b) {
      norm_fine += std::norm(plus_[b]) + std::norm(minus_[b]);
      norm_diff += std::norm(plus_[b] - coarse_plus_[b]) + std::norm(minus_[b] - coarse_minus_[b]);
    }
    last_error_ = norm_fine > 0.0 ? std::sqrt(norm_diff / norm_fine) : 0.0;
    // dipole acceleration: multiply by -W^2
    const auto& axis = transform_.axis();
    for (int b = 0; b < static_cast<int>(plus_.size()); ++b) {
      const double w = axis.frequency(k_lo_ + b);
      plus_[b] *= -w * w;
      minus_[b] *= -w * w;
    }
    for (auto* v : {&plus_, &minus_})
      for (auto& z : *v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    const bool converged = last_error_ <= params_.tolerance;
    if (converged) detail::store_point(out, ir, ith, plus_, minus_);
    return converged;
  }

  int excursion_samples() const { return n_tau_; }
  // relative in-band disagreement of the last point with its half-resolution estimate
  double last_error() const { return last_error_; }

private:
  SfaParams params_;
  CircularTransform transform_;
  int k_lo_;
  int nt_;
  int n_tau_ = 0;
  double ip_ = 0.0, dt_ = 0.0, c2_ = 0.0;
  std::vector<cplx> prefactor_;
  std::vector<double> ex_, ey_, ax_, ay_, cax_, cay_, ca2_, dx_, dy_, dx_coarse_, dy_coarse_;
  std::vector<cplx> plus_, minus_, coarse_plus_, coarse_minus_;
  double last_error_ = 0.0;
};

inline EmissionGrid sfa_emission(const FieldGrid& field, const SfaParams& params) {
  params.validate();
  if (field.time.samples_per_2w_cycle < 64)
    throw std::invalid_argument("sfa_emission: need at least 64 samples per 2w cycle");
  EmissionGrid out(field.transverse, SpectralAxis::of(field.time), params.q_min, params.q_max);
  std::vector<std::unique_ptr<SfaKernel>> kernels(effective_threads());
  parallel_for(field.transverse.points(), [&](std::size_t p, unsigned w) {
    if (!kernels[w]) kernels[w] = std::make_unique<SfaKernel>(field.time, params, out.k_lo, out.n_bins);
    const int ir = static_cast<int>(p / field.transverse.n_theta), ith = static_cast<int>(p % field.transverse.n_theta);
    if (!kernels[w]->run(field.series(ir, ith), out, ir, ith)) out.excluded[p] = 1;
  });
  for (char e : out.excluded) out.excluded_points += e ? 1 : 0;
  return out;
}

inline EmissionGrid sfa_emission(const DriverSpec& driver, const TransverseGrid& transverse, const TimeGrid& time,
                                 const SfaParams& params) {
  params.validate();
  if (time.samples_per_2w_cycle < 64) throw std::invalid_argument("sfa_emission: need at least 64 samples per 2w cycle");
  DriverEvaluator eval(driver, time);
  EmissionGrid out(transverse, SpectralAxis::of(time), params.q_min, params.q_max);
  const unsigned workers = effective_threads();
  std::vector<std::unique_ptr<SfaKernel>> kernels(workers);
  std::vector<std::vector<cplx>> buffers(workers);
  parallel_for(transverse.points(), [&](std::size_t p, unsigned w) {
    if (!kernels[w]) {
      kernels[w] = std::make_unique<SfaKernel>(time, params, out.k_lo, out.n_bins);
      buffers[w].resize(static_cast<std::size_t>(time.n_t) * 2);
    }
    const int ir = static_cast<int>(p / transverse.n_theta), ith = static_cast<int>(p % transverse.n_theta);
    eval.fill(transverse.radii[ir], transverse.theta(ith), buffers[w]);
    if (!kernels[w]->run(buffers[w], out, ir, ith)) out.excluded[p] = 1;
  });
  for (char e : out.excluded) out.excluded_points += e ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// line analysis

// Power of harmonic window q in circular component `sam`, integrated over the slab.
inline double line_power(const EmissionGrid& e, int q, int sam) {
  const auto [b0, b1] = e.window(q);
  const int s = EmissionGrid::slot(sam);
  double total = 0.0;
  for (int b = b0; b < b1; ++b)
    for (int ir = 0; ir < e.transverse.n_r; ++ir) {
      double ring = 0.0;
      for (int ith = 0; ith < e.transverse.n_theta; ++ith) ring += std::norm(e.at(b, s, ir, ith));
      total += ring * e.transverse.area(ir);
    }
  return total;
}

inline double line_power(const EmissionGrid& e, int q) { return line_power(e, q, +1) + line_power(e, q, -1); }

struct LineHelicity {
  int sam = 0;            // dominant SAM, 0 when the line is below threshold
  double purity = 0.0;    // dominant / total power of the line
  double power = 0.0;
  double relative_db = 0.0; // line power relative to its allowed neighbours
};

// Mean power of the allowed lines among q-2 .. q+2 that lie in range.
inline double neighbour_power(const EmissionGrid& e, int q) {
  double sum = 0.0;
  int count = 0;
  for (int d : {-2, -1, 1, 2}) {
    const int n = q + d;
    if (n < 1 || n % 3 == 0 || n < e.q_min() || n > e.q_max()) continue;
    sum += line_power(e, n);
    ++count;
  }
  return count ? sum / count : 0.0;
}

inline LineHelicity helicity_of_line(const EmissionGrid& e, int q, double suppression_db = 20.0) {
  if (q < e.q_min() || q > e.q_max()) throw std::out_of_range("helicity_of_line: q outside spectral range");
  LineHelicity h;
  const double pp = line_power(e, q, +1), pm = line_power(e, q, -1);
  h.power = pp + pm;
  const double ref = neighbour_power(e, q);
  if (h.power == 0.0)
    h.relative_db = -std::numeric_limits<double>::infinity();
  else
    h.relative_db = ref > 0.0 ? 10.0 * std::log10(h.power / ref) : std::numeric_limits<double>::infinity();
  if (h.power == 0.0) return h;
  h.purity = std::max(pp, pm) / h.power;
  if (ref > 0.0 && h.relative_db < -suppression_db) return h;
  h.sam = pp >= pm ? +1 : -1;
  return h;
}

} // namespace tkam
