#pragma once

// Attosecond pulse train reconstruction from the far-field spectra and the
// time-windowed quadrupole moment
//
//   T22(t) = int (Ex + i Ey)^2(t') exp(-(t' - t)^2 / 2 sigma^2) dt',
//
// whose phase is twice the local polarization orientation. Rotating the field
// counterclockwise by chi multiplies T22 by exp(+2 i chi).

#include <tkam/farfield.hpp>
#include <tkam/field_synthesis.hpp>
#include <tkam/parallel.hpp>
#include <tkam/spectral.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tkam {

// ---------------------------------------------------------------------------
// reconstruction

// Real XUV field per far-field point, keeping harmonic windows q >= q_min.
// Upsampling interpolates the band-limited signal onto a finer grid.
class AptReconstructor {
public:
  AptReconstructor(const FarFieldGrid& far, int q_min, int upsample = 1)
      : far_(far), synth_(far.axis, upsample), plus_(far.n_bins), minus_(far.n_bins) {
    if (q_min < far.q_min() || q_min > far.q_max())
      throw std::out_of_range("reconstruct_apt: q_min " + std::to_string(q_min) + " outside the propagated range");
    first_ = far.window(q_min).first;
  }

  int samples() const { return synth_.samples(); }
  double dt() const { return synth_.dt(); }
  double t(int n) const { return synth_.t(n); }

  void point(int ib, int iphi, std::span<double> x, std::span<double> y) {
    for (int b = 0; b < far_.n_bins; ++b) {
      const bool keep = b >= first_;
      plus_[b] = keep ? far_.at(b, 0, ib, iphi) : cplx{};
      minus_[b] = keep ? far_.at(b, 1, ib, iphi) : cplx{};
    }
    synth_.inverse(far_.k_lo, plus_, minus_, x, y);
  }

private:
  const FarFieldGrid& far_;
  CircularSynthesis synth_;
  std::vector<cplx> plus_, minus_;
  int first_ = 0;
};

// Full time-domain field on the divergence grid, layout [beta][phi][t][xy].
// Memory grows as n_beta n_phi n_t; the pipeline streams instead.
struct AptField {
  TransverseGrid plane;
  int n_t = 0;
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<double> data;

  std::size_t offset(int ib, int iphi) const {
    return (static_cast<std::size_t>(ib) * plane.n_theta + iphi) * n_t * 2;
  }
  double t(int n) const { return t0 + n * dt; }
  double x(int ib, int iphi, int n) const { return data[offset(ib, iphi) + 2 * n]; }
  double y(int ib, int iphi, int n) const { return data[offset(ib, iphi) + 2 * n + 1]; }
  double& x(int ib, int iphi, int n) { return data[offset(ib, iphi) + 2 * n]; }
  double& y(int ib, int iphi, int n) { return data[offset(ib, iphi) + 2 * n + 1]; }
};

inline AptField reconstruct_apt(const FarFieldGrid& far, int q_min, int upsample = 1) {
  AptReconstructor probe(far, q_min, upsample);
  AptField f;
  f.plane = far.divergence;
  f.n_t = probe.samples();
  f.dt = probe.dt();
  f.t0 = probe.t(0);
  f.data.assign(f.plane.points() * f.n_t * 2, 0.0);
  std::vector<std::unique_ptr<AptReconstructor>> workers(effective_threads());
  std::vector<std::vector<double>> xs(workers.size()), ys(workers.size());
  parallel_for(f.plane.points(), [&](std::size_t p, unsigned w) {
    if (!workers[w]) {
      workers[w] = std::make_unique<AptReconstructor>(far, q_min, upsample);
      xs[w].resize(f.n_t);
      ys[w].resize(f.n_t);
    }
    const int ib = static_cast<int>(p / f.plane.n_theta), iphi = static_cast<int>(p % f.plane.n_theta);
    workers[w]->point(ib, iphi, xs[w], ys[w]);
    for (int n = 0; n < f.n_t; ++n) {
      f.x(ib, iphi, n) = xs[w][n];
      f.y(ib, iphi, n) = ys[w][n];
    }
  });
  return f;
}

// Coordinated rotation of an XUV field: azimuth shifted by `steps` samples
// and polarization rotated counterclockwise by gamma * alpha.
inline AptField rotate_apt_field(const AptField& f, int steps, const Rational& gamma) {
  const double alpha = steps * f.plane.dtheta();
  const double chi = to_double(gamma) * alpha;
  const double c = std::cos(chi), s = std::sin(chi);
  AptField out = f;
  for (int ib = 0; ib < f.plane.n_r; ++ib)
    for (int j = 0; j < f.plane.n_theta; ++j) {
      const int src = wrap_index(j - steps, f.plane.n_theta);
      for (int n = 0; n < f.n_t; ++n) {
        const double x = f.x(ib, src, n), y = f.y(ib, src, n);
        out.x(ib, j, n) = c * x - s * y;
        out.y(ib, j, n) = s * x + c * y;
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// windowed moments

inline constexpr double min_samples_per_sigma = 8.0;
inline constexpr double window_cutoff_sigmas = 6.0;

namespace detail {

// Gaussian-windowed sum of v over outputs [n_begin, n_end); the window is cut
// at the record edges and rescaled by the missing weight.
template <class T, class Value>
std::vector<T> windowed(int n_t, double dt, double sigma, int n_begin, int n_end, Value&& value) {
  if (!(sigma > 0.0)) throw std::invalid_argument("t22_windowed: sigma must be positive");
  if (sigma / dt < min_samples_per_sigma)
    throw std::invalid_argument("t22_windowed: sigma resolved by " + std::to_string(sigma / dt) +
                                " samples, need at least 8");
  if (n_begin < 0 || n_end > n_t || n_begin > n_end) throw std::out_of_range("t22_windowed: invalid output range");
  const int half = static_cast<int>(std::ceil(window_cutoff_sigmas * sigma / dt));
  std::vector<double> g(2 * half + 1);
  for (int k = -half; k <= half; ++k) g[k + half] = std::exp(-0.5 * std::pow(k * dt / sigma, 2));
  const double full = std::accumulate(g.begin(), g.end(), 0.0);
  std::vector<T> out(n_end - n_begin);
  for (int n = n_begin; n < n_end; ++n) {
    const int lo = std::max(0, n - half), hi = std::min(n_t - 1, n + half);
    T acc{};
    double inside = 0.0;
    for (int m = lo; m <= hi; ++m) {
      const double w = g[m - n + half];
      acc += value(m) * w;
      inside += w;
    }
    out[n - n_begin] = acc * (full / inside * dt);
  }
  return out;
}

} // namespace detail

inline std::vector<cplx> t22_windowed(std::span<const double> x, std::span<const double> y, double dt, double sigma,
                                      int n_begin = 0, int n_end = -1) {
  if (x.size() != y.size()) throw std::invalid_argument("t22_windowed: component length mismatch");
  const int n_t = static_cast<int>(x.size());
  if (n_end < 0) n_end = n_t;
  return detail::windowed<cplx>(n_t, dt, sigma, n_begin, n_end, [&](int m) {
    const cplx z(x[m], y[m]);
    return z * z;
  });
}

inline std::vector<double> windowed_intensity(std::span<const double> x, std::span<const double> y, double dt,
                                              double sigma, int n_begin = 0, int n_end = -1) {
  const int n_t = static_cast<int>(x.size());
  if (n_end < 0) n_end = n_t;
  return detail::windowed<double>(n_t, dt, sigma, n_begin, n_end, [&](int m) { return x[m] * x[m] + y[m] * y[m]; });
}

// Local orientation in (-pi/2, pi/2].
inline double orientation(cplx t22) { return 0.5 * std::arg(t22); }

inline double wrap_half_turn(double angle) {
  double a = std::remainder(angle, units::pi);
  if (a <= -units::pi / 2) a += units::pi;
  return a;
}

// ---------------------------------------------------------------------------
// (theta, t) maps

// Radially integrated T22 and windowed intensity over an annulus of the
// divergence plane, on [phi][t].
struct T22Map {
  int n_theta = 0;
  int n_t = 0;
  double t_begin = 0.0; // time of column 0
  double dt = 0.0;
  double sigma = 0.0;
  int ring_begin = 0;
  int ring_end = 0;
  double beta_inner = 0.0;
  double beta_outer = 0.0;
  std::vector<cplx> t22;
  std::vector<double> intensity;

  double theta(int j) const { return units::two_pi * j / n_theta; }
  double t(int n) const { return t_begin + n * dt; }
  cplx& at(int j, int n) { return t22[static_cast<std::size_t>(j) * n_t + n]; }
  const cplx& at(int j, int n) const { return t22[static_cast<std::size_t>(j) * n_t + n]; }
  double& intensity_at(int j, int n) { return intensity[static_cast<std::size_t>(j) * n_t + n]; }
  double intensity_at(int j, int n) const { return intensity[static_cast<std::size_t>(j) * n_t + n]; }

  bool finite() const {
    for (const auto& v : t22)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
};

struct MapWindow {
  int n_begin = 0;
  int n_end = 0;
};

// Output sample range centred on t_center spanning `span` (clipped to the record).
inline MapWindow map_window(int n_t, double t0, double dt, double t_center, double span) {
  MapWindow w;
  const int half = static_cast<int>(std::round(0.5 * span / dt));
  const int c = static_cast<int>(std::round((t_center - t0) / dt));
  w.n_begin = std::clamp(c - half, 0, n_t);
  w.n_end = std::clamp(c + half, 0, n_t);
  return w;
}

// Builds a T22Map from any per-point source(worker, ib, iphi, x, y) of n_t
// samples; `worker` indexes per-thread scratch.
using PointSource = std::function<void(unsigned, int, int, std::span<double>, std::span<double>)>;

inline T22Map t22_map_from(const PointSource& source,
                           const TransverseGrid& plane, int ring_begin, int ring_end, int n_t, double t0, double dt,
                           double sigma, MapWindow window) {
  if (ring_begin < 0 || ring_end > plane.n_r || ring_begin >= ring_end)
    throw std::out_of_range("t22_map: invalid ring range");
  T22Map m;
  m.n_theta = plane.n_theta;
  m.n_t = window.n_end - window.n_begin;
  m.dt = dt;
  m.t_begin = t0 + window.n_begin * dt;
  m.sigma = sigma;
  m.ring_begin = ring_begin;
  m.ring_end = ring_end;
  m.beta_inner = ring_begin * plane.dr();
  m.beta_outer = ring_end * plane.dr();
  m.t22.assign(static_cast<std::size_t>(m.n_theta) * m.n_t, cplx{});
  m.intensity.assign(m.t22.size(), 0.0);
  // parallel over azimuth, fixed ring order inside: deterministic sums
  std::vector<std::vector<double>> xs(effective_threads(), std::vector<double>(n_t)),
      ys(effective_threads(), std::vector<double>(n_t));
  parallel_for(static_cast<std::size_t>(plane.n_theta), [&](std::size_t jp, unsigned w) {
    const int j = static_cast<int>(jp);
    for (int ib = ring_begin; ib < ring_end; ++ib) {
      source(w, ib, j, xs[w], ys[w]);
      const auto t22 = t22_windowed(xs[w], ys[w], dt, sigma, window.n_begin, window.n_end);
      const auto inten = windowed_intensity(xs[w], ys[w], dt, sigma, window.n_begin, window.n_end);
      const double weight = plane.area(ib);
      for (int n = 0; n < m.n_t; ++n) {
        m.at(j, n) += t22[n] * weight;
        m.intensity_at(j, n) += inten[n] * weight;
      }
    }
  });
  return m;
}

inline T22Map t22_map(const AptField& f, double sigma, int ring_begin, int ring_end, MapWindow window) {
  auto source = [&](unsigned, int ib, int iphi, std::span<double> x, std::span<double> y) {
    for (int n = 0; n < f.n_t; ++n) {
      x[n] = f.x(ib, iphi, n);
      y[n] = f.y(ib, iphi, n);
    }
  };
  return t22_map_from(source, f.plane, ring_begin, ring_end, f.n_t, f.t0, f.dt, sigma, window);
}

// Largest deviation of the T22 map of the coordinated-rotated field from
// exp(2 i gamma alpha) times the azimuth-shifted original map, relative to
// the map maximum.
inline double t22_covariance_residual(const AptField& f, int steps, const Rational& gamma, double sigma) {
  const MapWindow all{0, f.n_t};
  const T22Map a = t22_map(f, sigma, 0, f.plane.n_r, all);
  const T22Map b = t22_map(rotate_apt_field(f, steps, gamma), sigma, 0, f.plane.n_r, all);
  const cplx phase = std::polar(1.0, 2.0 * to_double(gamma) * steps * f.plane.dtheta());
  double worst = 0.0, scale = 0.0;
  for (int j = 0; j < a.n_theta; ++j)
    for (int n = 0; n < a.n_t; ++n) {
      scale = std::max(scale, std::abs(a.at(j, n)));
      worst = std::max(worst, std::abs(b.at(j, n) - phase * a.at(wrap_index(j - steps, a.n_theta), n)));
    }
  return scale > 0.0 ? worst / scale : worst;
}

// Radial distribution of the filtered (q >= q_min) far-field power.
inline std::vector<double> filtered_ring_power(const FarFieldGrid& far, int q_min) {
  std::vector<double> p(far.divergence.n_r, 0.0);
  const int first = far.window(q_min).first;
  for (int b = first; b < far.n_bins; ++b)
    for (int s = 0; s < 2; ++s)
      for (int ib = 0; ib < far.divergence.n_r; ++ib) {
        double ring = 0.0;
        for (int j = 0; j < far.divergence.n_theta; ++j) ring += std::norm(far.at(b, s, ib, j));
        p[ib] += ring * far.divergence.area(ib);
      }
  return p;
}

// Narrowest contiguous ring range around the brightest ring holding at least
// `fraction` of the power (grown greedily toward the brighter side).
inline std::pair<int, int> power_annulus(const std::vector<double>& ring_power, double fraction) {
  const double total = std::accumulate(ring_power.begin(), ring_power.end(), 0.0);
  const int n = static_cast<int>(ring_power.size());
  if (n == 0) throw std::invalid_argument("power_annulus: empty ring list");
  if (total <= 0.0) return {0, n};
  int lo = static_cast<int>(std::max_element(ring_power.begin(), ring_power.end()) - ring_power.begin());
  int hi = lo + 1;
  double acc = ring_power[lo];
  while (acc < fraction * total && (lo > 0 || hi < n)) {
    const double left = lo > 0 ? ring_power[lo - 1] : -1.0;
    const double right = hi < n ? ring_power[hi] : -1.0;
    if (right >= left)
      acc += ring_power[hi++];
    else
      acc += ring_power[--lo];
  }
  return {lo, hi};
}

struct T22Options {
  int q_min = 10;
  int upsample = 2;
  double sigma = 0.0;         // fs; 0 selects 15 degrees of the fundamental
  double power_fraction = 0.8;
  double t_center = 0.0;
  double span = 0.0;          // fs; 0 selects the whole record
};

inline double default_sigma(double omega) { return units::rad(15.0) / omega; }

inline T22Map t22_map(const FarFieldGrid& far, const T22Options& opt) {
  const auto [r0, r1] = power_annulus(filtered_ring_power(far, opt.q_min), opt.power_fraction);
  AptReconstructor probe(far, opt.q_min, opt.upsample);
  const int n_t = probe.samples();
  const MapWindow win = opt.span > 0.0 ? map_window(n_t, probe.t(0), probe.dt(), opt.t_center, opt.span)
                                       : MapWindow{0, n_t};
  std::vector<std::unique_ptr<AptReconstructor>> workers(effective_threads());
  auto source = [&](unsigned w, int ib, int iphi, std::span<double> x, std::span<double> y) {
    if (!workers[w]) workers[w] = std::make_unique<AptReconstructor>(far, opt.q_min, opt.upsample);
    workers[w]->point(ib, iphi, x, y);
  };
  const double sigma = opt.sigma > 0.0 ? opt.sigma : default_sigma(far.axis.omega);
  return t22_map_from(source, far.divergence, r0, r1, n_t, probe.t(0), probe.dt(), sigma, win);
}

// ---------------------------------------------------------------------------
// spiral metrics

struct Ridge {
  std::vector<double> time;        // per azimuth sample
  std::vector<double> orientation; // unwrapped, rad
};

struct AptMetrics {
  double delay_per_revolution = 0.0;         // fs
  double rotation_per_revolution = 0.0;      // rad
  double delay_residual = 0.0;               // rms of the linear fit, fs
  double rotation_residual = 0.0;            // rad
  std::vector<double> fixed_theta_times;     // pulse peaks at theta = 0, fs
  std::vector<double> fixed_theta_orientations; // rad, in (-pi/2, pi/2]
  std::vector<double> fixed_theta_steps;     // successive differences, wrapped to (-pi/2, pi/2]
  double intensity_correlation = 0.0;
  int ridges = 0;
  double time_step = 0.0;                    // sample spacing of the map
};

namespace detail {

struct Peak {
  double t = 0.0;
  cplx value;
};

// local maxima of |T22| along time in azimuth column j, parabolic refinement
inline std::vector<Peak> column_peaks(const T22Map& m, int j, double threshold) {
  std::vector<Peak> out;
  for (int n = 1; n + 1 < m.n_t; ++n) {
    const double a = std::abs(m.at(j, n - 1)), b = std::abs(m.at(j, n)), c = std::abs(m.at(j, n + 1));
    if (!(b > threshold && b >= a && b > c)) continue;
    const double den = a - 2.0 * b + c;
    const double d = den != 0.0 ? std::clamp(0.5 * (a - c) / den, -0.5, 0.5) : 0.0;
    const int n2 = d >= 0.0 ? n + 1 : n - 1;
    const cplx v = m.at(j, n) + std::abs(d) * (m.at(j, n2) - m.at(j, n));
    out.push_back({m.t(n) + d * m.dt, v});
  }
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - (f.intercept + f.slope * x[i]), 2);
  f.rms = std::sqrt(ss / n);
  return f;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

} // namespace detail

// Tracks |T22| ridges across the full azimuth and fits their drift in time
// and orientation. Ridges start at the theta = 0 peaks of the central half of
// the window and follow the nearest peak of each next column.
inline AptMetrics polarization_spiral_metrics(const T22Map& m, const CoordinationParameters& p,
                                              double threshold_fraction = 0.1) {
  const double pulse_period = units::two_pi / (3.0 * p.omega);
  if (m.n_theta < 4) throw std::invalid_argument("polarization_spiral_metrics: need the full azimuth");
  if (m.n_t * m.dt < 2.0 * pulse_period)
    throw std::invalid_argument("polarization_spiral_metrics: map spans fewer than two pulse periods");
  AptMetrics r;
  r.time_step = m.dt;
  double peak = 0.0;
  for (const auto& v : m.t22) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw std::domain_error("polarization_spiral_metrics: empty map");
  const double threshold = threshold_fraction * peak;

  std::vector<std::vector<detail::Peak>> columns(m.n_theta);
  for (int j = 0; j < m.n_theta; ++j) columns[j] = detail::column_peaks(m, j, threshold);

  const double t_lo = m.t(0) + 0.25 * m.n_t * m.dt, t_hi = m.t(0) + 0.75 * m.n_t * m.dt;
  std::vector<double> theta(m.n_theta);
  for (int j = 0; j < m.n_theta; ++j) theta[j] = m.theta(j);
  std::vector<double> slopes, rotations, delay_res, rot_res;
  for (const auto& start : columns[0]) {
    if (start.t < t_lo || start.t > t_hi) continue;
    Ridge ridge;
    ridge.time.push_back(start.t);
    ridge.orientation.push_back(orientation(start.value));
    bool lost = false;
    for (int j = 1; j < m.n_theta && !lost; ++j) {
      const double prev = ridge.time.back();
      const detail::Peak* best = nullptr;
      for (const auto& c : columns[j])
        if (!best || std::abs(c.t - prev) < std::abs(best->t - prev)) best = &c;
      if (!best || std::abs(best->t - prev) > 0.5 * pulse_period) {
        lost = true;
        break;
      }
      ridge.time.push_back(best->t);
      const double o = orientation(best->value);
      ridge.orientation.push_back(ridge.orientation.back() + wrap_half_turn(o - ridge.orientation.back()));
    }
    if (lost) continue;
    const auto ft = detail::fit_line(theta, ridge.time);
    const auto fo = detail::fit_line(theta, ridge.orientation);
    slopes.push_back(ft.slope * units::two_pi);
    rotations.push_back(fo.slope * units::two_pi);
    delay_res.push_back(ft.rms);
    rot_res.push_back(fo.rms);
  }
  r.ridges = static_cast<int>(slopes.size());
  if (r.ridges == 0) throw std::domain_error("polarization_spiral_metrics: no ridge could be followed around the azimuth");
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  r.delay_per_revolution = mean(slopes);
  r.rotation_per_revolution = mean(rotations);
  r.delay_residual = *std::max_element(delay_res.begin(), delay_res.end());
  r.rotation_residual = *std::max_element(rot_res.begin(), rot_res.end());

  for (const auto& pk : columns[0]) {
    r.fixed_theta_times.push_back(pk.t);
    r.fixed_theta_orientations.push_back(orientation(pk.value));
  }
  for (std::size_t i = 1; i < r.fixed_theta_orientations.size(); ++i)
    r.fixed_theta_steps.push_back(wrap_half_turn(r.fixed_theta_orientations[i] - r.fixed_theta_orientations[i - 1]));

  std::vector<double> mag(m.t22.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(m.t22[i]);
  r.intensity_correlation = detail::correlation(mag, m.intensity);
  return r;
}

// ---------------------------------------------------------------------------
// Cartesian export

// Windowed intensity and orientation on a regular (x_div, y_div, t) grid,
// sampled from the nearest polar point. Layout [t][y][x][2].
struct AptGrid {
  int nx = 0, ny = 0, nt = 0;
  double extent = 0.0; // half width in rad; x_i = -extent + (i + 1/2) 2 extent / nx
  double t_begin = 0.0;
  double dt = 0.0;
  std::vector<float> data;

  double x(int i) const { return -extent + (i + 0.5) * 2.0 * extent / nx; }
  double y(int i) const { return -extent + (i + 0.5) * 2.0 * extent / ny; }
  double t(int n) const { return t_begin + n * dt; }
  std::size_t index(int n, int iy, int ix) const {
    return ((static_cast<std::size_t>(n) * ny + iy) * nx + ix) * 2;
  }
};

inline AptGrid apt_grid(const FarFieldGrid& far, const T22Options& opt, int n_xy, double extent, int stride) {
  if (n_xy < 2 || stride < 1 || !(extent > 0.0)) throw std::invalid_argument("apt_grid: invalid grid request");
  AptReconstructor probe(far, opt.q_min, opt.upsample);
  const int n_t = probe.samples();
  const MapWindow win = opt.span > 0.0 ? map_window(n_t, probe.t(0), probe.dt(), opt.t_center, opt.span)
                                       : MapWindow{0, n_t};
  const double sigma = opt.sigma > 0.0 ? opt.sigma : default_sigma(far.axis.omega);
  const auto& plane = far.divergence;
  AptGrid g;
  g.nx = g.ny = n_xy;
  g.extent = extent;
  g.dt = probe.dt() * stride;
  g.t_begin = probe.t(win.n_begin);
  g.nt = (win.n_end - win.n_begin + stride - 1) / stride;
  g.data.assign(static_cast<std::size_t>(g.nt) * g.ny * g.nx * 2, 0.0f);

  // nearest polar sample of every cell, -1 outside the divergence disc
  std::vector<int> cell(static_cast<std::size_t>(n_xy) * n_xy, -1);
  std::map<int, std::vector<int>> users;
  for (int iy = 0; iy < n_xy; ++iy)
    for (int ix = 0; ix < n_xy; ++ix) {
      const double bx = g.x(ix), by = g.y(iy);
      const double beta = std::hypot(bx, by);
      if (beta >= plane.r_max) continue;
      const int ib = std::min(plane.n_r - 1, static_cast<int>(beta / plane.dr()));
      double phi = std::atan2(by, bx);
      if (phi < 0.0) phi += units::two_pi;
      const int iphi = wrap_index(static_cast<int>(std::lround(phi / plane.dtheta())), plane.n_theta);
      const int key = ib * plane.n_theta + iphi;
      users[key].push_back(iy * n_xy + ix);
    }
  std::vector<std::pair<int, std::vector<int>>> work(users.begin(), users.end());
  std::vector<std::unique_ptr<AptReconstructor>> workers(effective_threads());
  std::vector<std::vector<double>> xs(workers.size()), ys(workers.size());
  parallel_for(work.size(), [&](std::size_t i, unsigned w) {
    if (!workers[w]) {
      workers[w] = std::make_unique<AptReconstructor>(far, opt.q_min, opt.upsample);
      xs[w].resize(n_t);
      ys[w].resize(n_t);
    }
    const int key = work[i].first;
    workers[w]->point(key / plane.n_theta, key % plane.n_theta, xs[w], ys[w]);
    const auto t22 = t22_windowed(xs[w], ys[w], probe.dt(), sigma, win.n_begin, win.n_end);
    const auto inten = windowed_intensity(xs[w], ys[w], probe.dt(), sigma, win.n_begin, win.n_end);
    for (int n = 0; n < g.nt; ++n) {
      const int s = n * stride;
      for (int c : work[i].second) {
        const std::size_t k = g.index(n, c / n_xy, c % n_xy);
        g.data[k] = static_cast<float>(inten[s]);
        g.data[k + 1] = static_cast<float>(orientation(t22[s]));
      }
    }
  });
  return g;
}

} // namespace tkam
