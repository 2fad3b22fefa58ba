#pragma once

#include <tkam/units.hpp>

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tkam {

// Polar sampling of the focal plane. Radii sit at the midpoints of n_r equal
// annuli so every quadrature weight is positive and the weights add up to the
// disc area pi r_max^2 exactly.
struct TransverseGrid {
  int n_r = 0;
  int n_theta = 0;
  double r_max = 0.0;
  std::vector<double> radii;
  std::vector<double> weights; // 2 pi r dr per ring

  static TransverseGrid make(int n_r, int n_theta, double r_max) {
    if (n_r < 1) throw std::invalid_argument("TransverseGrid: n_r must be positive");
    if (n_theta < 2 || !std::has_single_bit(static_cast<unsigned>(n_theta)))
      throw std::invalid_argument("TransverseGrid: n_theta must be a power of two, got " + std::to_string(n_theta));
    if (!(r_max > 0.0)) throw std::invalid_argument("TransverseGrid: r_max must be positive");
    TransverseGrid g;
    g.n_r = n_r;
    g.n_theta = n_theta;
    g.r_max = r_max;
    const double dr = r_max / n_r;
    g.radii.resize(n_r);
    g.weights.resize(n_r);
    for (int i = 0; i < n_r; ++i) {
      g.radii[i] = (i + 0.5) * dr;
      g.weights[i] = units::two_pi * g.radii[i] * dr;
    }
    return g;
  }

  double dr() const { return r_max / n_r; }
  double dtheta() const { return units::two_pi / n_theta; }
  double theta(int j) const { return j * dtheta(); }
  std::size_t points() const { return static_cast<std::size_t>(n_r) * n_theta; }
  // area element of a single (r, theta) sample
  double area(int ir) const { return weights[ir] / n_theta; }

  bool operator==(const TransverseGrid& o) const {
    return n_r == o.n_r && n_theta == o.n_theta && r_max == o.r_max;
  }
};

// Uniform time axis. dt is tied to the second-harmonic period so that the
// 2w carrier is sampled by an integer number of points; n_t is a multiple of
// the fundamental period so every harmonic qw falls on an FFT bin.
struct TimeGrid {
  double omega = 0.0;            // fundamental, rad/fs
  int samples_per_2w_cycle = 0;
  int n_t = 0;
  double t0 = 0.0;

  static TimeGrid make(double omega, int samples_per_2w_cycle, int n_t, double t0) {
    if (!(omega > 0.0)) throw std::invalid_argument("TimeGrid: omega must be positive");
    if (samples_per_2w_cycle < 32)
      throw std::invalid_argument("TimeGrid: need at least 32 samples per 2w cycle");
    if (n_t < 2 * samples_per_2w_cycle || n_t % (2 * samples_per_2w_cycle) != 0)
      throw std::invalid_argument("TimeGrid: n_t must be a positive multiple of the fundamental period in samples");
    return TimeGrid{omega, samples_per_2w_cycle, n_t, t0};
  }

  // Smallest grid whose span covers `duration` plus `padding` on both sides.
  // The pulse interval [0, duration] is centred in the window.
  static TimeGrid covering(double omega, int samples_per_2w_cycle, double duration, double padding) {
    const double period = units::two_pi / omega;
    const int cycles = std::max(1, static_cast<int>(std::ceil((duration + 2.0 * padding) / period - 1e-9)));
    const int n_t = cycles * 2 * samples_per_2w_cycle;
    const double span = cycles * period;
    return make(omega, samples_per_2w_cycle, n_t, -(span - duration) / 2.0);
  }

  double dt() const { return units::pi / (omega * samples_per_2w_cycle); }
  double t(int n) const { return t0 + n * dt(); }
  double span() const { return n_t * dt(); }
  int samples_per_period() const { return 2 * samples_per_2w_cycle; }
  // FFT bins per harmonic order
  int bins_per_order() const { return n_t / samples_per_period(); }

  bool operator==(const TimeGrid& o) const {
    return omega == o.omega && samples_per_2w_cycle == o.samples_per_2w_cycle && n_t == o.n_t && t0 == o.t0;
  }
};

} // namespace tkam
