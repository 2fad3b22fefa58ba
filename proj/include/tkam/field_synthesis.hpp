#pragma once

// Bicircular vortex driver: an w component in e+ carrying OAM l1 and a 2w
// component in e- carrying OAM l2, Laguerre-Gauss (p = 0) radial profiles at
// the focal plane, a shared trapezoidal envelope, and optional l = 0 donut
// perturbations.
//
// The driver is invariant under the coordinated rotation
//   R(gamma a) F(R^-1(a) r, t) = F(r, t + tau a)
// with gamma = (l2 - 2 l1)/3 and w tau = (l1 + l2)/3. All such constants are
// kept as exact rationals.

#include <tkam/grids.hpp>
#include <tkam/parallel.hpp>
#include <tkam/spectral.hpp>
#include <tkam/units.hpp>

#include <boost/rational.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tkam {

using Rational = boost::rational<long long>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// ---------------------------------------------------------------------------
// coordination constants

struct CoordinationParameters {
  Rational gamma;     // polarization/space rotation ratio
  Rational tau_omega; // w tau
  Rational j1;        // TKAM charge of the fundamental, = w tau
  double omega = 0.0;

  double tau() const { return to_double(tau_omega) / omega; }
};

inline Rational coordination_parameter(int l1, int l2) { return Rational(l2 - 2LL * l1, 3); }

inline CoordinationParameters symmetry_constants(int l1, int l2, double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("symmetry_constants: omega must be positive");
  CoordinationParameters p;
  p.gamma = coordination_parameter(l1, l2);
  p.tau_omega = Rational(static_cast<long long>(l1) + l2, 3);
  p.j1 = p.tau_omega;
  p.omega = omega;
  return p;
}

inline Rational tkam_charge(int n, const CoordinationParameters& p) {
  if (n < 1) throw std::invalid_argument("tkam_charge: order must be >= 1");
  return p.j1 * static_cast<long long>(n);
}

struct HarmonicOam {
  int oam = 0;
  int sam = 0;
};

// l_q = j(q) - gamma S_q with S_q = +1 for q = 1 mod 3 and -1 for q = 2 mod 3.
inline HarmonicOam expected_harmonic_oam(int q, const CoordinationParameters& p) {
  if (q < 1) throw std::invalid_argument("expected_harmonic_oam: q must be >= 1");
  if (q % 3 == 0) throw std::domain_error("expected_harmonic_oam: q = " + std::to_string(q) + " is a forbidden line");
  const int sam = (q % 3 == 1) ? +1 : -1;
  const Rational l = tkam_charge(q, p) - p.gamma * static_cast<long long>(sam);
  if (l.denominator() != 1)
    throw std::logic_error("expected_harmonic_oam: non-integer OAM " + to_string(l) + " for q = " + std::to_string(q));
  return {static_cast<int>(l.numerator()), sam};
}

// ---------------------------------------------------------------------------
// driver specification

enum class Handedness { right = +1, left = -1 };

struct DriverComponentSpec {
  int carrier_multiple = 1;
  int oam = 0;
  Handedness handedness = Handedness::right;
  double peak_amplitude = 0.0; // a.u., peak of |a| over the beam profile
  double waist = 30.0;         // um

  static double amplitude_from_intensity(double intensity_wcm2) {
    return std::sqrt(intensity_wcm2 / units::atomic_intensity_wcm2);
  }
};

struct EnvelopeSpec {
  double ramp_up = 5.3;
  double flat = 10.7;
  double ramp_down = 5.3;

  double duration() const { return ramp_up + flat + ramp_down; }

  // Trapezoid starting at t = 0.
  double value(double t) const {
    if (t < 0.0 || t > duration()) return 0.0;
    if (t < ramp_up) return t / ramp_up;
    if (t <= ramp_up + flat) return 1.0;
    if (ramp_down <= 0.0) return 1.0;
    return (duration() - t) / ramp_down;
  }

  void validate() const {
    if (!(ramp_up >= 0.0 && flat >= 0.0 && ramp_down >= 0.0))
      throw std::invalid_argument("EnvelopeSpec: ramps and plateau must be non-negative");
    if (!(duration() > 0.0)) throw std::invalid_argument("EnvelopeSpec: zero duration");
  }
};

enum class PerturbationPhase { in_phase, out_of_phase };

struct PerturbationSpec {
  double fraction = 0.10;
  PerturbationPhase relative_phase = PerturbationPhase::in_phase;
  double donut_width = 30.0 / std::numbers::sqrt2; // sigma_p, um

  void validate() const {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("PerturbationSpec: fraction must be in [0, 1)");
    if (!(donut_width > 0.0)) throw std::invalid_argument("PerturbationSpec: donut width must be positive");
  }
};

struct DriverSpec {
  double omega = units::omega_from_wavelength_nm(800.0);
  DriverComponentSpec fundamental{1, 1, Handedness::right, 0.0, 30.0};
  DriverComponentSpec second{2, 1, Handedness::left, 0.0, 30.0};
  EnvelopeSpec envelope;
  std::optional<PerturbationSpec> perturbation;
  double delay = 0.0; // global time delay of the whole driver, fs

  void validate() const {
    if (!(omega > 0.0)) throw std::invalid_argument("DriverSpec: omega must be positive");
    if (fundamental.carrier_multiple != 1 || second.carrier_multiple != 2)
      throw std::invalid_argument("DriverSpec: components must sit at w and 2w");
    if (fundamental.handedness != Handedness::right || second.handedness != Handedness::left)
      throw std::invalid_argument("DriverSpec: the w component must be right-handed and the 2w component left-handed");
    for (const auto* c : {&fundamental, &second}) {
      if (!(c->waist > 0.0)) throw std::invalid_argument("DriverSpec: waist must be positive");
      if (!(c->peak_amplitude >= 0.0)) throw std::invalid_argument("DriverSpec: amplitude must be non-negative");
    }
    envelope.validate();
    if (perturbation) perturbation->validate();
  }

  CoordinationParameters constants() const { return symmetry_constants(fundamental.oam, second.oam, omega); }
};

// Builds the default two-colour driver from intensities. `ratio` is
// I(2w)/I(w); the two peak intensities add up to total_intensity.
inline DriverSpec make_bicircular_driver(int l1, int l2, double wavelength_nm, double total_intensity_wcm2,
                                         double ratio, double waist_um) {
  if (!(ratio > 0.0)) throw std::invalid_argument("make_bicircular_driver: intensity ratio must be positive");
  DriverSpec d;
  d.omega = units::omega_from_wavelength_nm(wavelength_nm);
  const double i1 = total_intensity_wcm2 / (1.0 + ratio);
  const double i2 = total_intensity_wcm2 - i1;
  d.fundamental = {1, l1, Handedness::right, DriverComponentSpec::amplitude_from_intensity(i1), waist_um};
  d.second = {2, l2, Handedness::left, DriverComponentSpec::amplitude_from_intensity(i2), waist_um};
  return d;
}

// ---------------------------------------------------------------------------
// mode profiles

// LG(p = 0) radial amplitude (sqrt2 r / w)^|l| exp(-r^2/w^2), scaled to unit peak.
inline double lg_profile(int l, double waist, double r) {
  const int al = std::abs(l);
  const double u = r / waist;
  const double base = std::exp(-u * u);
  if (al == 0) return base;
  const double peak = std::pow(al / 2.0, al / 2.0) * std::exp(-al / 2.0); // value of u^|l| e^{-u^2} at its maximum
  return std::pow(u, al) * base / peak;
}

// integral of |lg_profile|^2 over the plane
inline double lg_power(int l, double waist) {
  const int al = std::abs(l);
  const double peak = al == 0 ? 1.0 : std::pow(al / 2.0, al / 2.0) * std::exp(-al / 2.0);
  // int (u^2)^al e^{-2u^2} 2 pi r dr with u = r/w  ->  pi w^2 al! / 2^(al+1)
  return units::pi * waist * waist * std::tgamma(al + 1.0) / std::pow(2.0, al + 1) / (peak * peak);
}

inline double donut_profile(double sigma, double r) { return r * r * std::exp(-r * r / (sigma * sigma)); }

inline double donut_power(double sigma) { return units::pi * std::pow(sigma, 6) / 4.0; }

// Complex spatial amplitudes (no carrier, no envelope) of the e+ and e- slots.
struct SpatialAmplitude {
  cplx plus;
  cplx minus;
};

inline SpatialAmplitude spatial_amplitude(const DriverSpec& d, double r, double theta) {
  auto component = [&](const DriverComponentSpec& c, double donut_sign) {
    double main = c.peak_amplitude;
    cplx value = 0.0;
    if (d.perturbation && d.perturbation->fraction > 0.0) {
      const auto& p = *d.perturbation;
      main *= std::sqrt(1.0 - p.fraction);
      const double coeff = c.peak_amplitude * std::sqrt(p.fraction * lg_power(c.oam, c.waist) / donut_power(p.donut_width));
      value += donut_sign * coeff * donut_profile(p.donut_width, r);
    }
    value += main * lg_profile(c.oam, c.waist, r) * std::polar(1.0, c.oam * theta);
    return value;
  };
  const double second_sign =
      (d.perturbation && d.perturbation->relative_phase == PerturbationPhase::out_of_phase) ? -1.0 : 1.0;
  return {component(d.fundamental, 1.0), component(d.second, second_sign)};
}

// Analytic circular amplitudes at a single space-time point.
inline SpatialAmplitude driver_field_at(const DriverSpec& d, double r, double theta, double t) {
  const SpatialAmplitude s = spatial_amplitude(d, r, theta);
  const double tl = t - d.delay;
  const double env = d.envelope.value(tl);
  return {s.plus * env * std::polar(1.0, -d.omega * tl), s.minus * env * std::polar(1.0, -2.0 * d.omega * tl)};
}

// ---------------------------------------------------------------------------
// field grids

// Circular amplitudes per (r, theta, t), stored point-major: for each
// transverse point the n_t samples of (E+, E-) are contiguous. `envelope`
// optionally records the envelope sampled on the time grid.
struct FieldGrid {
  TransverseGrid transverse;
  TimeGrid time;
  std::vector<cplx> data;
  std::vector<double> envelope;

  FieldGrid() = default;
  FieldGrid(TransverseGrid tg, TimeGrid tm)
      : transverse(std::move(tg)), time(tm), data(transverse.points() * static_cast<std::size_t>(time.n_t) * 2) {}

  std::size_t point_index(int ir, int ith) const { return static_cast<std::size_t>(ir) * transverse.n_theta + ith; }
  std::size_t offset(int ir, int ith) const { return point_index(ir, ith) * time.n_t * 2; }

  std::span<cplx> series(int ir, int ith) { return {data.data() + offset(ir, ith), static_cast<std::size_t>(time.n_t) * 2}; }
  std::span<const cplx> series(int ir, int ith) const {
    return {data.data() + offset(ir, ith), static_cast<std::size_t>(time.n_t) * 2};
  }
  cplx& at(int ir, int ith, int it, int comp) { return data[offset(ir, ith) + 2 * it + comp]; }
  const cplx& at(int ir, int ith, int it, int comp) const { return data[offset(ir, ith) + 2 * it + comp]; }

  bool finite() const {
    for (const auto& v : data)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
};

// Samples the driver on the time grid for one transverse point at a time.
// Carrier and envelope factors are precomputed once.
class DriverEvaluator {
public:
  DriverEvaluator(const DriverSpec& spec, const TimeGrid& time) : spec_(spec), time_(time) {
    spec.validate();
    carrier1_.resize(time.n_t);
    carrier2_.resize(time.n_t);
    envelope_.resize(time.n_t);
    for (int n = 0; n < time.n_t; ++n) {
      const double tl = time.t(n) - spec.delay;
      envelope_[n] = spec.envelope.value(tl);
      carrier1_[n] = envelope_[n] * std::polar(1.0, -spec.omega * tl);
      carrier2_[n] = envelope_[n] * std::polar(1.0, -2.0 * spec.omega * tl);
    }
  }

  const std::vector<double>& envelope() const { return envelope_; }

  void fill(double r, double theta, std::span<cplx> out) const {
    const SpatialAmplitude s = spatial_amplitude(spec_, r, theta);
    for (int n = 0; n < time_.n_t; ++n) {
      out[2 * n] = s.plus * carrier1_[n];
      out[2 * n + 1] = s.minus * carrier2_[n];
    }
  }

private:
  DriverSpec spec_;
  TimeGrid time_;
  std::vector<cplx> carrier1_, carrier2_;
  std::vector<double> envelope_;
};

inline FieldGrid evaluate_driver(const DriverSpec& spec, const TransverseGrid& transverse, const TimeGrid& time) {
  if (std::abs(time.omega - spec.omega) > 1e-12 * spec.omega)
    throw std::invalid_argument("evaluate_driver: time grid built for a different fundamental frequency");
  DriverEvaluator eval(spec, time);
  FieldGrid f(transverse, time);
  f.envelope = eval.envelope();
  parallel_for(transverse.points(), [&](std::size_t p, unsigned) {
    const int ir = static_cast<int>(p / transverse.n_theta);
    const int ith = static_cast<int>(p % transverse.n_theta);
    eval.fill(transverse.radii[ir], transverse.theta(ith), f.series(ir, ith));
  });
  return f;
}

// Integral of |a+|^2 and |a-|^2 (spatial amplitudes only) over the grid.
inline std::array<double, 2> component_powers(const DriverSpec& spec, const TransverseGrid& g) {
  std::array<double, 2> p{0.0, 0.0};
  for (int ir = 0; ir < g.n_r; ++ir)
    for (int ith = 0; ith < g.n_theta; ++ith) {
      const auto s = spatial_amplitude(spec, g.radii[ir], g.theta(ith));
      p[0] += std::norm(s.plus) * g.area(ir);
      p[1] += std::norm(s.minus) * g.area(ir);
    }
  return p;
}

// ---------------------------------------------------------------------------
// coordinated rotations

// Number of azimuthal steps represented by `alpha`; throws if alpha is not a
// multiple of the grid spacing.
inline int azimuthal_steps(const TransverseGrid& g, double alpha) {
  const double steps = alpha / g.dtheta();
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, std::abs(steps)))
    throw std::invalid_argument("rotation angle is not commensurate with the azimuthal grid");
  return static_cast<int>(rounded);
}

inline int wrap_index(int i, int n) { return ((i % n) + n) % n; }

// R(gamma alpha) F(R^-1(alpha) r, t): cyclic azimuthal shift by alpha and
// e+- multiplied by exp(-+ i gamma alpha).
inline FieldGrid apply_coordinated_rotation(const FieldGrid& field, double alpha, const Rational& gamma) {
  const int k = azimuthal_steps(field.transverse, alpha);
  const double pol = to_double(gamma) * alpha;
  const cplx ph_plus = std::polar(1.0, -pol), ph_minus = std::polar(1.0, pol);
  FieldGrid out(field.transverse, field.time);
  out.envelope = field.envelope;
  const int nth = field.transverse.n_theta;
  for (int ir = 0; ir < field.transverse.n_r; ++ir)
    for (int ith = 0; ith < nth; ++ith) {
      auto src = field.series(ir, wrap_index(ith - k, nth));
      auto dst = out.series(ir, ith);
      for (int n = 0; n < field.time.n_t; ++n) {
        dst[2 * n] = src[2 * n] * ph_plus;
        dst[2 * n + 1] = src[2 * n + 1] * ph_minus;
      }
    }
  return out;
}

// F(t + shift dt); samples shifted in from outside the grid are zero.
inline FieldGrid shift_time(const FieldGrid& field, int shift) {
  FieldGrid out(field.transverse, field.time);
  const int nt = field.time.n_t;
  if (!field.envelope.empty()) {
    out.envelope.assign(nt, 0.0);
    for (int n = 0; n < nt; ++n)
      if (n + shift >= 0 && n + shift < nt) out.envelope[n] = field.envelope[n + shift];
  }
  for (std::size_t p = 0; p < field.transverse.points(); ++p) {
    const std::size_t base = p * nt * 2;
    for (int n = 0; n < nt; ++n) {
      const int m = n + shift;
      if (m < 0 || m >= nt) continue;
      out.data[base + 2 * n] = field.data[base + 2 * m];
      out.data[base + 2 * n + 1] = field.data[base + 2 * m + 1];
    }
  }
  return out;
}

enum class ComponentMask { both, plus_only, minus_only };

// A rotation/delay pair whose agreement is measured by transform_residual:
//   LHS(theta, t) = R(pol_angle) F_sel(theta - theta_steps dtheta, t)
//   RHS(theta, t) = F_sel(theta, t + time_shift dt)
struct SymmetryTransform {
  int theta_steps = 0;
  double pol_angle = 0.0;
  int time_shift = 0;
  ComponentMask components = ComponentMask::both;
};

// Relative L2 distance ||LHS - RHS|| / ||RHS||. Only time samples where both
// t and t + shift lie on the grid enter, and, when the field records its
// envelope, only samples where the envelope takes the same value at t and
// t + shift (plateau and padding). Zero field gives 0.
inline double transform_residual(const FieldGrid& field, const SymmetryTransform& tr) {
  const int nt = field.time.n_t;
  const int nth = field.transverse.n_theta;
  std::vector<char> use(nt, 0);
  for (int n = 0; n < nt; ++n) {
    const int m = n + tr.time_shift;
    if (m < 0 || m >= nt) continue;
    if (!field.envelope.empty() && field.envelope[n] != field.envelope[m]) continue;
    use[n] = 1;
  }
  const cplx ph_plus = std::polar(1.0, -tr.pol_angle), ph_minus = std::polar(1.0, tr.pol_angle);
  const bool use_plus = tr.components != ComponentMask::minus_only;
  const bool use_minus = tr.components != ComponentMask::plus_only;
  double diff = 0.0, ref = 0.0;
  for (int ir = 0; ir < field.transverse.n_r; ++ir) {
    const double w = field.transverse.area(ir);
    double diff_r = 0.0, ref_r = 0.0;
    for (int ith = 0; ith < nth; ++ith) {
      auto lhs = field.series(ir, wrap_index(ith - tr.theta_steps, nth));
      auto rhs = field.series(ir, ith);
      for (int n = 0; n < nt; ++n) {
        if (!use[n]) continue;
        const int m = n + tr.time_shift;
        if (use_plus) {
          diff_r += std::norm(lhs[2 * n] * ph_plus - rhs[2 * m]);
          ref_r += std::norm(rhs[2 * m]);
        }
        if (use_minus) {
          diff_r += std::norm(lhs[2 * n + 1] * ph_minus - rhs[2 * m + 1]);
          ref_r += std::norm(rhs[2 * m + 1]);
        }
      }
    }
    diff += w * diff_r;
    ref += w * ref_r;
  }
  if (ref == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(diff / ref);
}

// Time shift, in samples, corresponding to rotating by `theta_steps` grid
// steps when the delay is `delay_omega`/w per radian. Throws unless integral.
inline int commensurate_shift(const TransverseGrid& g, const TimeGrid& t, const Rational& delay_omega, int theta_steps) {
  // alpha / (w dt) = 2 k S / n_theta
  const Rational shift = delay_omega * Rational(2LL * theta_steps * t.samples_per_2w_cycle, g.n_theta);
  if (shift.denominator() != 1)
    throw std::invalid_argument("time shift " + to_string(shift) + " samples is not commensurate with the time grid");
  return static_cast<int>(shift.numerator());
}

// Residual of the full coordinated-rotation symmetry for rotation alpha.
inline double symmetry_residual(const FieldGrid& field, const CoordinationParameters& p, double alpha) {
  const int k = azimuthal_steps(field.transverse, alpha);
  SymmetryTransform tr;
  tr.theta_steps = k;
  tr.pol_angle = to_double(p.gamma) * alpha;
  tr.time_shift = commensurate_shift(field.transverse, field.time, p.tau_omega, k);
  return transform_residual(field, tr);
}

// Grid rotations (in steps) for which symmetry_residual is defined.
inline std::vector<int> commensurate_rotations(const TransverseGrid& g, const TimeGrid& t, const Rational& delay_omega) {
  std::vector<int> ks;
  for (int k = 0; k < g.n_theta; ++k) {
    const Rational shift = delay_omega * Rational(2LL * k * t.samples_per_2w_cycle, g.n_theta);
    if (shift.denominator() == 1) ks.push_back(k);
  }
  return ks;
}

// Separate spin and orbital invariances of the two colours:
//   [0] R(g a) F1(t)       = F1(t + g a / w)
//   [1] F1(R^-1(a) r, t)   = F1(t + l1 a / w)
//   [2] R(g a) F2(t)       = F2(t - g a / 2w)
//   [3] F2(R^-1(a) r, t)   = F2(t + l2 a / 2w)
inline std::array<double, 4> component_invariance_residuals(const FieldGrid& field, const CoordinationParameters& p,
                                                            int l1, int l2, int theta_steps) {
  const auto& g = field.transverse;
  const auto& t = field.time;
  const double alpha = theta_steps * g.dtheta();
  const double pol = to_double(p.gamma) * alpha;
  std::array<double, 4> res{};
  res[0] = transform_residual(field, {0, pol, commensurate_shift(g, t, p.gamma, theta_steps), ComponentMask::plus_only});
  res[1] = transform_residual(field, {theta_steps, 0.0, commensurate_shift(g, t, Rational(l1), theta_steps),
                                      ComponentMask::plus_only});
  res[2] = transform_residual(
      field, {0, pol, commensurate_shift(g, t, -p.gamma / 2LL, theta_steps), ComponentMask::minus_only});
  res[3] = transform_residual(field, {theta_steps, 0.0, commensurate_shift(g, t, Rational(l2, 2), theta_steps),
                                      ComponentMask::minus_only});
  return res;
}

// ---------------------------------------------------------------------------
// local symmetry class

enum class LineSymmetry { trefoil, none };

// A local field is a bicircular trefoil when essentially all its power sits in
// counter-rotating, spin-pure lines at w and 2w and both lines are present.
inline LineSymmetry classify_local_symmetry(std::span<const cplx> series, const TimeGrid& time) {
  const int nt = time.n_t;
  std::vector<double> x(nt), y(nt);
  for (int n = 0; n < nt; ++n) {
    const Vec2 v = real_field(series[2 * n], series[2 * n + 1]);
    x[n] = v.x;
    y[n] = v.y;
  }
  CircularTransform ct(time);
  const auto& ax = ct.axis();
  const int k_lo = 1, k_hi = ax.nyquist();
  std::vector<cplx> plus(k_hi - k_lo), minus(k_hi - k_lo);
  ct.forward(x, y, k_lo, plus, minus);
  double total = 0.0, p1[2] = {0, 0}, p2[2] = {0, 0};
  for (int k = k_lo; k < k_hi; ++k) {
    const double pp = std::norm(plus[k - k_lo]), pm = std::norm(minus[k - k_lo]);
    total += pp + pm;
    const int q = ax.order_of(k);
    if (q == 1) { p1[0] += pp; p1[1] += pm; }
    if (q == 2) { p2[0] += pp; p2[1] += pm; }
  }
  if (total == 0.0) return LineSymmetry::none;
  for (int h = 0; h < 2; ++h) {
    const double a = p1[h], b = p2[1 - h];
    if ((a + b) > 0.99 * total && a > 1e-3 * total && b > 1e-3 * total) return LineSymmetry::trefoil;
  }
  return LineSymmetry::none;
}

} // namespace tkam
