#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

namespace tkam {

// J_0(x) ... J_{m_max}(x) in one sweep by Miller's downward recurrence,
// normalized with J_0 + 2 sum_k J_2k = 1. x must be non-negative.
inline void bessel_j_sequence(double x, std::span<double> out) {
  const int m_max = static_cast<int>(out.size()) - 1;
  if (m_max < 0) return;
  if (x < 0.0) throw std::domain_error("bessel_j_sequence: negative argument");
  if (x == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    out[0] = 1.0;
    return;
  }
  const double scale = std::max<double>(m_max, x);
  int start = static_cast<int>(scale + 20.0 + std::sqrt(40.0 * scale));
  start += start & 1;
  double next = 0.0, cur = 1e-300, norm = 0.0;
  constexpr double big = 1e250;
  for (int n = start; n > 0; --n) {
    const double prev = (2.0 * n / x) * cur - next;
    next = cur;
    cur = prev;
    // cur now holds J_{n-1}
    if (n - 1 <= m_max) out[n - 1] = cur;
    if ((n - 1) % 2 == 0) norm += (n - 1 == 0) ? cur : 2.0 * cur;
    if (std::abs(cur) > big) {
      cur /= big;
      next /= big;
      norm /= big;
      for (int k = n - 1; k <= m_max; ++k) out[k] /= big;
    }
  }
  for (auto& v : out) v /= norm;
}

} // namespace tkam
