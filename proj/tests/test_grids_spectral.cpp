#include <tkam/bessel.hpp>
#include <tkam/fft.hpp>
#include <tkam/grids.hpp>
#include <tkam/parallel.hpp>
#include <tkam/spectral.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace tkam;
using Catch::Approx;

namespace {

const double omega = units::omega_from_wavelength_nm(800.0);

std::vector<double> random_series(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// direct sum of (dt / sqrt2) sum_n (x -+ i y)(t_n) e^{i W t_n}
cplx brute_circular(const std::vector<double>& x, const std::vector<double>& y, const TimeGrid& g, int k, int sam) {
  const double w = k * units::two_pi / g.span();
  cplx acc = 0.0;
  for (int n = 0; n < g.n_t; ++n) {
    const cplx z(x[n], -sam * y[n]);
    acc += z * std::polar(1.0, w * g.t(n));
  }
  return acc * g.dt() / std::numbers::sqrt2;
}

} // namespace

TEST_CASE("time grid ties dt to the 2w period and spans whole fundamental cycles") {
  const TimeGrid g = TimeGrid::covering(omega, 64, 21.3, 5.0);
  CHECK(g.dt() == Approx(units::pi / (omega * 64)).epsilon(1e-15));
  CHECK(g.n_t % 128 == 0);
  CHECK(g.span() >= 21.3 + 10.0);
  CHECK(g.span() - units::two_pi / omega < 21.3 + 10.0);
  CHECK(g.bins_per_order() == g.n_t / 128);
  // pulse interval centred in the window
  CHECK(g.t0 + 0.5 * g.span() == Approx(21.3 / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(TimeGrid::make(omega, 16, 512, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::make(omega, 32, 100, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::make(-1.0, 32, 64, 0.0), std::invalid_argument);
}

TEST_CASE("transverse grid midpoint weights integrate the disc exactly") {
  const TransverseGrid g = TransverseGrid::make(37, 16, 5.0);
  double area = 0.0;
  for (int ir = 0; ir < g.n_r; ++ir) area += g.weights[ir];
  CHECK(area == Approx(units::pi * 25.0).epsilon(1e-13));
  CHECK(g.radii.front() == Approx(0.5 * g.dr()));
  CHECK(g.area(3) * g.n_theta == Approx(g.weights[3]));
  CHECK_THROWS_AS(TransverseGrid::make(4, 12, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(TransverseGrid::make(0, 16, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(TransverseGrid::make(4, 16, 0.0), std::invalid_argument);
}

TEST_CASE("fft plan matches the direct DFT in both directions") {
  const int n = 24;
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  std::vector<cplx> in(n), out(n);
  for (auto& v : in) v = {g(rng), g(rng)};
  for (int sign : {+1, -1}) {
    FftPlan plan(n, sign);
    plan.execute(in, out);
    for (int k = 0; k < n; ++k) {
      cplx ref = 0.0;
      for (int j = 0; j < n; ++j) ref += in[j] * std::polar(1.0, sign * units::two_pi * k * j / n);
      CHECK(std::abs(out[k] - ref) < 1e-12 * n);
    }
  }
  FftPlan plan(n, 1);
  std::vector<cplx> wrong(n + 1);
  CHECK_THROWS_AS(plan.execute(wrong, out), std::invalid_argument);
}

TEST_CASE("circular transform agrees with a brute-force sum") {
  const TimeGrid g = TimeGrid::make(omega, 32, 256, -3.7);
  const auto x = random_series(g.n_t, 1), y = random_series(g.n_t, 2);
  CircularTransform ct(g);
  const int k_lo = 3, nb = 90;
  std::vector<cplx> plus(nb), minus(nb);
  ct.forward(x, y, k_lo, plus, minus);
  double worst = 0.0, scale = 0.0;
  for (int b = 0; b < nb; ++b) {
    const cplx rp = brute_circular(x, y, g, k_lo + b, +1), rm = brute_circular(x, y, g, k_lo + b, -1);
    worst = std::max({worst, std::abs(plus[b] - rp), std::abs(minus[b] - rm)});
    scale = std::max({scale, std::abs(rp), std::abs(rm)});
  }
  CHECK(worst / scale < 1e-12);
}

TEST_CASE("a counterclockwise field lands in the plus slot at its frequency") {
  const TimeGrid g = TimeGrid::make(omega, 32, 256, 0.0);
  std::vector<double> x(g.n_t), y(g.n_t);
  for (int n = 0; n < g.n_t; ++n) {
    const Vec2 v = real_field(std::polar(1.0, -3.0 * omega * g.t(n)), 0.0);
    x[n] = v.x;
    y[n] = v.y;
  }
  CircularTransform ct(g);
  const SpectralAxis& ax = ct.axis();
  const int k3 = 3 * ax.bins_per_order;
  std::vector<cplx> plus(1), minus(1);
  ct.forward(x, y, k3, plus, minus);
  // plus amplitude of Re[a e^{-i W t}] is a * span / 2
  CHECK(std::abs(plus[0] - cplx(g.span() / 2.0, 0.0)) < 1e-12 * g.span());
  CHECK(std::abs(minus[0]) < 1e-12 * g.span());
  CHECK(ax.order_of(k3) == 3);
  CHECK(ax.order_of(ax.window_begin(3)) == 3);
  CHECK(ax.order_of(ax.window_end(3) - 1) == 3);
  CHECK(ax.order_of(ax.window_end(3)) == 4);
}

TEST_CASE("circular synthesis inverts the circular transform") {
  const TimeGrid g = TimeGrid::make(omega, 32, 128, 1.25);
  std::vector<double> x(g.n_t, 0.0), y(g.n_t, 0.0);
  // band-limited, zero-mean signal
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int h = 1; h < 40; ++h) {
    const double ax = u(rng), ay = u(rng), px = 3 * u(rng), py = 3 * u(rng);
    const double w = h * units::two_pi / g.span();
    for (int n = 0; n < g.n_t; ++n) {
      x[n] += ax * std::cos(w * g.t(n) + px);
      y[n] += ay * std::cos(w * g.t(n) + py);
    }
  }
  CircularTransform ct(g);
  const int nb = g.n_t / 2 - 1;
  std::vector<cplx> plus(nb), minus(nb);
  ct.forward(x, y, 1, plus, minus);
  for (int up : {1, 3}) {
    CircularSynthesis cs(ct.axis(), up);
    std::vector<double> xr(cs.samples()), yr(cs.samples());
    cs.inverse(1, plus, minus, xr, yr);
    double worst = 0.0;
    for (int n = 0; n < g.n_t; ++n)
      worst = std::max({worst, std::abs(xr[n * up] - x[n]), std::abs(yr[n * up] - y[n])});
    CHECK(worst < 1e-11);
    CHECK(cs.t(up) == Approx(g.t(1)));
  }
  CHECK_THROWS_AS(CircularSynthesis(ct.axis(), 0), std::invalid_argument);
}

TEST_CASE("Miller recurrence matches the standard library Bessel functions") {
  for (double x : {0.0, 1e-3, 0.5, 1.0, 7.3, 25.0, 63.0, 140.0}) {
    std::vector<double> seq(65);
    bessel_j_sequence(x, seq);
    for (int m = 0; m <= 64; ++m) CHECK(std::abs(seq[m] - std::cyl_bessel_j(m, x)) < 1e-12);
  }
  std::vector<double> seq(4);
  CHECK_THROWS_AS(bessel_j_sequence(-1.0, seq), std::domain_error);
}

TEST_CASE("parallel_for visits every index once and rethrows worker failures") {
  const unsigned saved = thread_count();
  thread_count() = 4;
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i, unsigned) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t i, unsigned) {
                    if (i == 57) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  thread_count() = saved;
}
