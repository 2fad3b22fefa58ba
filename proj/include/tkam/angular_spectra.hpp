#pragma once

// OAM and TKAM spectra of far-field harmonics, and the linear-scaling test
// of the TKAM charge j(q) = q j(1).

#include <tkam/farfield.hpp>
#include <tkam/field_synthesis.hpp>
#include <tkam/local_response.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tkam {

struct SpectrumEntry {
  int m = 0;
  Rational j;
  double power = 0.0;
};

// Power per azimuthal order m in [-N/2, N/2) for harmonic q and circular
// component s, with the TKAM label j = m + gamma s attached (gamma = 0 for a
// plain OAM spectrum).
struct AngularSpectrum {
  int q = 0;
  int s = +1;
  Rational gamma{0};
  std::vector<SpectrumEntry> entries; // ascending m

  double total() const {
    double t = 0.0;
    for (const auto& e : entries) t += e.power;
    return t;
  }
  const SpectrumEntry& dominant() const {
    if (entries.empty()) throw std::logic_error("AngularSpectrum: empty");
    return *std::max_element(entries.begin(), entries.end(),
                             [](const auto& a, const auto& b) { return a.power < b.power; });
  }
  double power_at(int m) const {
    for (const auto& e : entries)
      if (e.m == m) return e.power;
    return 0.0;
  }
  double mean_m() const {
    double t = total(), s1 = 0.0;
    for (const auto& e : entries) s1 += e.m * e.power;
    return t > 0.0 ? s1 / t : 0.0;
  }
  // standard deviation of m weighted by power
  double width() const {
    const double t = total();
    if (t == 0.0) return 0.0;
    const double mu = mean_m();
    double v = 0.0;
    for (const auto& e : entries) v += (e.m - mu) * (e.m - mu) * e.power;
    return std::sqrt(v / t);
  }
  // fraction of power in the two outermost orders (aliasing indicator)
  double band_edge_fraction() const {
    const double t = total();
    if (t == 0.0 || entries.empty()) return 0.0;
    return (entries.front().power + entries.back().power) / t;
  }
};

// P(m) = sum over bins of window q of  2 pi int |c_m(beta)|^2 beta dbeta,
// c_m = (1/N) sum_phi E_s(beta, phi) e^{-i m phi}. Sums to the window power.
inline AngularSpectrum oam_spectrum(const FarFieldGrid& far, int q, int s) {
  if (s != 1 && s != -1) throw std::invalid_argument("oam_spectrum: s must be +1 or -1");
  const int n = far.divergence.n_theta;
  AngularSpectrum out;
  out.q = q;
  out.s = s;
  std::vector<double> power(n, 0.0);
  FftPlan fwd(n, -1);
  std::vector<cplx> buf(n), modes(n);
  const auto [b0, b1] = far.window(q);
  const int slot = EmissionGrid::slot(s);
  const double inv_n = 1.0 / n;
  for (int b = b0; b < b1; ++b)
    for (int ib = 0; ib < far.divergence.n_r; ++ib) {
      for (int j = 0; j < n; ++j) buf[j] = far.at(b, slot, ib, j);
      fwd.execute(buf, modes);
      for (int j = 0; j < n; ++j) power[j] += std::norm(modes[j] * inv_n) * far.divergence.weights[ib];
    }
  out.entries.reserve(n);
  for (int m = -n / 2; m < n / 2; ++m) out.entries.push_back({m, Rational(m), power[wrap_index(m, n)]});
  return out;
}

inline AngularSpectrum tkam_spectrum(const AngularSpectrum& oam, const Rational& gamma) {
  if ((gamma * 3LL).denominator() != 1) throw std::invalid_argument("tkam_spectrum: gamma must lie on the 1/3 lattice");
  AngularSpectrum out = oam;
  out.gamma = gamma;
  for (auto& e : out.entries) e.j = Rational(e.m) + gamma * static_cast<long long>(oam.s);
  return out;
}

struct HarmonicConservation {
  int q = 0;
  Rational dominant_j;
  Rational expected_j;
  bool match = false;
  double purity = 0.0;
  int dominant_m = 0;
  int dominant_s = 0;
};

struct ConservationReport {
  std::vector<HarmonicConservation> harmonics;
  double slope = 0.0;
  double slope_uncertainty = 0.0;

  bool all_match() const {
    return std::all_of(harmonics.begin(), harmonics.end(), [](const auto& h) { return h.match; });
  }
  double min_purity() const {
    double p = 1.0;
    for (const auto& h : harmonics) p = std::min(p, h.purity);
    return p;
  }
};

// Merges the s = +-1 spectra of each allowed harmonic on the TKAM lattice,
// takes the dominant j, and fits j = slope * q through the origin.
inline ConservationReport conservation_fit(const std::vector<AngularSpectrum>& spectra, const CoordinationParameters& p) {
  std::map<int, std::map<Rational, double>> merged;
  std::map<int, std::map<Rational, std::pair<int, int>>> label; // j -> (m, s) of the largest contribution
  for (const auto& sp : spectra) {
    if (sp.q % 3 == 0) continue;
    const AngularSpectrum t = tkam_spectrum(sp, p.gamma);
    for (const auto& e : t.entries) {
      double& acc = merged[sp.q][e.j];
      auto& lab = label[sp.q][e.j];
      if (acc == 0.0 || e.power > acc) lab = {e.m, sp.s};
      acc += e.power;
    }
  }
  if (merged.size() < 3) throw std::invalid_argument("conservation_fit: need at least three allowed harmonics");
  ConservationReport r;
  double sqq = 0.0, sqj = 0.0;
  for (const auto& [q, by_j] : merged) {
    HarmonicConservation h;
    h.q = q;
    double total = 0.0, best = -1.0;
    for (const auto& [j, pw] : by_j) {
      total += pw;
      if (pw > best) {
        best = pw;
        h.dominant_j = j;
      }
    }
    h.expected_j = tkam_charge(q, p);
    h.match = h.dominant_j == h.expected_j;
    h.purity = total > 0.0 ? best / total : 0.0;
    std::tie(h.dominant_m, h.dominant_s) = label[q][h.dominant_j];
    r.harmonics.push_back(h);
    sqq += double(q) * q;
    sqj += q * to_double(h.dominant_j);
  }
  r.slope = sqj / sqq;
  double ss = 0.0;
  for (const auto& h : r.harmonics) ss += std::pow(to_double(h.dominant_j) - r.slope * h.q, 2);
  const double n = static_cast<double>(r.harmonics.size());
  r.slope_uncertainty = std::sqrt(ss / (n - 1.0) / sqq);
  return r;
}

struct SuppressionResult {
  bool applicable = false; // false: the driver has no trefoil symmetry
  double db = 0.0;         // 10 log10(mean neighbour power / line power)
};

namespace detail {
template <class PowerFn>
SuppressionResult suppression(int q, int q_min, int q_max, LineSymmetry sym, PowerFn&& power) {
  if (q % 3 != 0) throw std::invalid_argument("forbidden_line_suppression: q must be a multiple of 3");
  SuppressionResult r;
  if (sym != LineSymmetry::trefoil) return r;
  double sum = 0.0;
  int count = 0;
  for (int d : {-2, -1, 1, 2}) {
    const int n = q + d;
    if (n < std::max(1, q_min) || n > q_max) continue;
    sum += power(n);
    ++count;
  }
  if (count == 0) throw std::out_of_range("forbidden_line_suppression: no neighbouring lines in range");
  r.applicable = true;
  const double line = power(q);
  r.db = line > 0.0 ? 10.0 * std::log10(sum / count / line) : std::numeric_limits<double>::infinity();
  return r;
}
} // namespace detail

inline SuppressionResult forbidden_line_suppression(const EmissionGrid& e, int q, LineSymmetry sym) {
  return detail::suppression(q, e.q_min(), e.q_max(), sym, [&](int n) { return line_power(e, n); });
}

inline SuppressionResult forbidden_line_suppression(const FarFieldGrid& f, int q, LineSymmetry sym) {
  return detail::suppression(q, f.q_min(), f.q_max(), sym, [&](int n) { return far_power(f, n, 0) + far_power(f, n, 1); });
}

} // namespace tkam
