#pragma once

// Fraunhofer propagation of the thin-slab emission, one spectral bin at a
// time. With the near field written as sum_m a_m(r) e^{i m theta},
//
//   E_far(beta, phi) = (k / 2 pi) int E(r, theta) e^{-i k beta r cos(theta - phi)} r dr dtheta
//                    = sum_m e^{i m phi} k i^{-m} int a_m(r) J_m(k beta r) r dr,
//
// so every azimuthal order maps onto itself. The k / 2 pi prefactor makes the
// transform unitary between r dr dtheta and beta dbeta dphi.

#include <tkam/bessel.hpp>
#include <tkam/fft.hpp>
#include <tkam/local_response.hpp>
#include <tkam/parallel.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace tkam {

inline constexpr double paraxial_limit_rad = 0.2;

// Far-field amplitudes on a polar divergence grid (beta in rad). Layout
// [bin][s][beta][phi], same bins as the source EmissionGrid or a sub-range.
struct FarFieldGrid {
  TransverseGrid divergence; // radii hold beta, weights 2 pi beta dbeta
  SpectralAxis axis;
  int k_lo = 0;
  int n_bins = 0;
  std::vector<double> wavenumber; // per bin, 1/um
  std::vector<cplx> data;
  std::vector<std::string> warnings;

  FarFieldGrid() = default;
  FarFieldGrid(TransverseGrid div, const SpectralAxis& ax, int k_lo_, int n_bins_)
      : divergence(std::move(div)), axis(ax), k_lo(k_lo_), n_bins(n_bins_), wavenumber(n_bins_),
        data(static_cast<std::size_t>(n_bins_) * 2 * divergence.points()) {
    for (int b = 0; b < n_bins; ++b) wavenumber[b] = ax.frequency(k_lo + b) / units::c_um_per_fs;
  }

  std::size_t plane() const { return divergence.points(); }
  std::size_t index(int bin, int s, int ib, int iphi) const {
    return (static_cast<std::size_t>(bin) * 2 + s) * plane() + static_cast<std::size_t>(ib) * divergence.n_theta + iphi;
  }
  cplx& at(int bin, int s, int ib, int iphi) { return data[index(bin, s, ib, iphi)]; }
  const cplx& at(int bin, int s, int ib, int iphi) const { return data[index(bin, s, ib, iphi)]; }

  int k_hi() const { return k_lo + n_bins; }
  std::pair<int, int> window(int q) const {
    const int b = std::max(axis.window_begin(q), k_lo) - k_lo;
    const int e = std::min(axis.window_end(q), k_hi()) - k_lo;
    return {b, std::max(b, e)};
  }
  int q_min() const { return axis.order_of(k_lo); }
  int q_max() const { return axis.order_of(k_hi() - 1); }
};

inline TransverseGrid make_divergence_grid(int n_beta, int n_phi, double beta_max) {
  return TransverseGrid::make(n_beta, n_phi, beta_max);
}

namespace detail {

// Propagates one bin of one polarization. Scratch is per worker.
class HankelWorker {
public:
  HankelWorker(const TransverseGrid& near, const TransverseGrid& far)
      : near_(near), far_(far), n_(near.n_theta), m_max_(near.n_theta / 2), fwd_(near.n_theta, -1),
        inv_(near.n_theta, +1), modes_(static_cast<std::size_t>(near.n_r) * n_),
        bessel_(static_cast<std::size_t>(far.n_r) * near.n_r * (m_max_ + 1)), buf_(n_), out_(n_), far_modes_(n_) {}

  void prepare(double k) {
    for (int ib = 0; ib < far_.n_r; ++ib)
      for (int ir = 0; ir < near_.n_r; ++ir) {
        std::span<double> seq(bessel_.data() + (static_cast<std::size_t>(ib) * near_.n_r + ir) * (m_max_ + 1),
                              m_max_ + 1);
        bessel_j_sequence(k * far_.radii[ib] * near_.radii[ir], seq);
      }
    k_ = k;
  }

  // near(ir, ith) -> far(ib, iphi)
  template <class Near, class Far>
  void propagate(Near&& near_at, Far&& far_at) {
    const double inv_n = 1.0 / n_;
    for (int ir = 0; ir < near_.n_r; ++ir) {
      for (int j = 0; j < n_; ++j) buf_[j] = near_at(ir, j);
      fwd_.execute(buf_, out_);
      for (int j = 0; j < n_; ++j) modes_[static_cast<std::size_t>(ir) * n_ + j] = out_[j] * inv_n;
    }
    static const cplx i_pow[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}}; // i^{-m}, m mod 4
    for (int ib = 0; ib < far_.n_r; ++ib) {
      for (int j = 0; j < n_; ++j) {
        const int m = j < n_ / 2 ? j : j - n_;
        const int am = std::abs(m);
        const double sign = (m < 0 && (am & 1)) ? -1.0 : 1.0;
        cplx acc = 0.0;
        for (int ir = 0; ir < near_.n_r; ++ir) {
          const double jm = bessel_[(static_cast<std::size_t>(ib) * near_.n_r + ir) * (m_max_ + 1) + am];
          acc += modes_[static_cast<std::size_t>(ir) * n_ + j] * (jm * near_.weights[ir]);
        }
        // weights carry 2 pi r dr; the transform needs r dr
        far_modes_[j] = acc * (sign * k_ / units::two_pi) * i_pow[((m % 4) + 4) % 4];
      }
      inv_.execute(far_modes_, out_);
      for (int j = 0; j < n_; ++j) far_at(ib, j) = out_[j];
    }
  }

private:
  const TransverseGrid& near_;
  const TransverseGrid& far_;
  int n_;
  int m_max_;
  FftPlan fwd_, inv_;
  std::vector<cplx> modes_;
  std::vector<double> bessel_;
  std::vector<cplx> buf_, out_, far_modes_;
  double k_ = 0.0;
};

} // namespace detail

// Propagates emission bins [k_begin, k_end) (absolute FFT bins).
inline FarFieldGrid propagate_bins(const EmissionGrid& emission, const TransverseGrid& divergence, int k_begin,
                                   int k_end) {
  if (divergence.n_theta != emission.transverse.n_theta)
    throw std::invalid_argument("propagate: divergence grid must use the near-field azimuthal sampling");
  k_begin = std::max(k_begin, emission.k_lo);
  k_end = std::min(k_end, emission.k_hi());
  FarFieldGrid far(divergence, emission.axis, k_begin, std::max(0, k_end - k_begin));
  if (divergence.r_max > paraxial_limit_rad)
    far.warnings.push_back("divergence grid extends to " + std::to_string(divergence.r_max) +
                           " rad, beyond paraxial validity (0.2 rad)");
  std::vector<std::unique_ptr<detail::HankelWorker>> workers(effective_threads());
  parallel_for(static_cast<std::size_t>(far.n_bins), [&](std::size_t b, unsigned w) {
    if (!workers[w]) workers[w] = std::make_unique<detail::HankelWorker>(emission.transverse, divergence);
    auto& hw = *workers[w];
    const int src_bin = far.k_lo + static_cast<int>(b) - emission.k_lo;
    hw.prepare(far.wavenumber[b]);
    for (int s = 0; s < 2; ++s)
      hw.propagate([&](int ir, int ith) { return emission.at(src_bin, s, ir, ith); },
                   [&](int ib, int iphi) -> cplx& { return far.at(static_cast<int>(b), s, ib, iphi); });
  });
  return far;
}

inline FarFieldGrid propagate(const EmissionGrid& emission, int q, const TransverseGrid& divergence) {
  if (q < emission.q_min() || q > emission.q_max()) throw std::out_of_range("propagate: harmonic outside emission range");
  return propagate_bins(emission, divergence, emission.axis.window_begin(q), emission.axis.window_end(q));
}

inline FarFieldGrid propagate_all(const EmissionGrid& emission, const TransverseGrid& divergence) {
  return propagate_bins(emission, divergence, emission.k_lo, emission.k_hi());
}

// Power of window q in component slot s: sum over bins of int |E|^2 dA.
template <class Grid>
double window_power(const Grid& g, const TransverseGrid& plane, int q, int s) {
  const auto [b0, b1] = g.window(q);
  double total = 0.0;
  for (int b = b0; b < b1; ++b)
    for (int ir = 0; ir < plane.n_r; ++ir) {
      double ring = 0.0;
      for (int ith = 0; ith < plane.n_theta; ++ith) ring += std::norm(g.at(b, s, ir, ith));
      total += ring * plane.area(ir);
    }
  return total;
}

inline double near_power(const EmissionGrid& e, int q, int s) { return window_power(e, e.transverse, q, s); }
inline double far_power(const FarFieldGrid& f, int q, int s) { return window_power(f, f.divergence, q, s); }

// Root-mean-square transverse wavenumber of harmonic q in the near field,
// from |grad E|^2 = |dE/dr|^2 + |dE/dtheta|^2 / r^2 by finite differences.
inline double rms_transverse_wavenumber(const EmissionGrid& e, int q) {
  const auto& g = e.transverse;
  const auto [b0, b1] = e.window(q);
  const double dr = g.dr(), dth = g.dtheta();
  double grad = 0.0, norm = 0.0;
  for (int b = b0; b < b1; ++b)
    for (int s = 0; s < 2; ++s)
      for (int ir = 0; ir < g.n_r; ++ir)
        for (int ith = 0; ith < g.n_theta; ++ith) {
          const cplx v = e.at(b, s, ir, ith);
          cplx d_r;
          if (ir == 0)
            d_r = (e.at(b, s, 1, ith) - v) / dr;
          else if (ir == g.n_r - 1)
            d_r = (v - e.at(b, s, ir - 1, ith)) / dr;
          else
            d_r = (e.at(b, s, ir + 1, ith) - e.at(b, s, ir - 1, ith)) / (2.0 * dr);
          const cplx d_t = (e.at(b, s, ir, wrap_index(ith + 1, g.n_theta)) - e.at(b, s, ir, wrap_index(ith - 1, g.n_theta))) /
                           (2.0 * dth * g.radii[ir]);
          grad += (std::norm(d_r) + std::norm(d_t)) * g.area(ir);
          norm += std::norm(v) * g.area(ir);
        }
  return norm > 0.0 ? std::sqrt(grad / norm) : 0.0;
}

// Divergence radius enclosing harmonics q_lo..q_hi: `factor` times the largest
// rms divergence among the allowed lines.
inline double suggest_beta_max(const EmissionGrid& e, int q_lo, int q_hi, double factor = 4.0) {
  double best = 0.0;
  for (int q = std::max(q_lo, e.q_min()); q <= std::min(q_hi, e.q_max()); ++q) {
    if (q % 3 == 0) continue;
    const double k = q * e.axis.omega / units::c_um_per_fs;
    best = std::max(best, rms_transverse_wavenumber(e, q) / k);
  }
  return best > 0.0 ? factor * best : 0.01;
}

} // namespace tkam
