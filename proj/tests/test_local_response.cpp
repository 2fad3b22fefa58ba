#include <tkam/angular_spectra.hpp>
#include <tkam/farfield.hpp>
#include <tkam/local_response.hpp>

#include <catch_amalgamated.hpp>

using namespace tkam;
using Catch::Approx;

namespace {

const double omega = units::omega_from_wavelength_nm(800.0);

// Constant envelope over a periodic window: the grid sees a CW driver.
DriverSpec cw_driver(int l1, int l2) {
  DriverSpec d = make_bicircular_driver(l1, l2, 800.0, 2e14, 1.0, 30.0);
  d.envelope = {0.0, 1e5, 0.0};
  return d;
}

TimeGrid cw_time(int cycles, int samples = 32) { return TimeGrid::make(omega, samples, cycles * 2 * samples, 0.0); }

double max_abs(const EmissionGrid& e) {
  double m = 0.0;
  for (const auto& v : e.data) m = std::max(m, std::abs(v));
  return m;
}

} // namespace

TEST_CASE("identity nonlinearity reproduces the driver lines") {
  const DriverSpec d = cw_driver(1, 1);
  const TransverseGrid g = TransverseGrid::make(3, 8, 60.0);
  const TimeGrid t = cw_time(6);
  const FieldGrid f = evaluate_driver(d, g, t);
  const EmissionGrid e = field_spectrum(f, 1, 2);
  const int K = t.bins_per_order();
  for (int ir = 0; ir < g.n_r; ++ir)
    for (int ith = 0; ith < g.n_theta; ++ith) {
      const SpatialAmplitude a = spatial_amplitude(d, g.radii[ir], g.theta(ith));
      for (int b = 0; b < e.n_bins; ++b) {
        const int k = e.k_lo + b;
        const cplx ep = k == K ? a.plus * t.span() / 2.0 : cplx{};
        const cplx em = k == 2 * K ? a.minus * t.span() / 2.0 : cplx{};
        CHECK(std::abs(e.at(b, 0, ir, ith) - ep) < 1e-12 * t.span());
        CHECK(std::abs(e.at(b, 1, ir, ith) - em) < 1e-12 * t.span());
      }
    }
}

TEST_CASE("surrogate emission is equivariant under the coordinated rotation") {
  for (auto [l1, l2] : {std::pair{1, 1}, {1, 2}}) {
    const DriverSpec d = cw_driver(l1, l2);
    const CoordinationParameters p = d.constants();
    const TransverseGrid g = TransverseGrid::make(4, 16, 90.0);
    const TimeGrid t = cw_time(4);
    SurrogateModelParams mp;
    mp.alpha0 = 0.3;
    mp.q_min = 4;
    mp.q_max = 20;
    const EmissionGrid e = surrogate_emission(d, g, t, mp);
    const auto ks = commensurate_rotations(g, t, p.tau_omega);
    REQUIRE(ks.size() >= 2);
    const int kt = ks[1];
    const int shift = commensurate_shift(g, t, p.tau_omega, kt);
    const double alpha = kt * g.dtheta(), gam = to_double(p.gamma);
    const double scale = max_abs(e);
    double worst = 0.0;
    for (int b = 0; b < e.n_bins; ++b) {
      const cplx delay = std::polar(1.0, -units::two_pi * (e.k_lo + b) * shift / t.n_t);
      for (int s = 0; s < 2; ++s) {
        const cplx pol = std::polar(1.0, (s == 0 ? -1.0 : 1.0) * gam * alpha);
        for (int ir = 0; ir < g.n_r; ++ir)
          for (int ith = 0; ith < g.n_theta; ++ith) {
            const cplx lhs = e.at(b, s, ir, ith) * delay;
            const cplx rhs = e.at(b, s, ir, wrap_index(ith - kt, g.n_theta)) * pol;
            worst = std::max(worst, std::abs(lhs - rhs));
          }
      }
    }
    CHECK(worst / scale < 1e-8);
  }
}

TEST_CASE("trefoil driver: 3n lines vanish and helicities alternate") {
  for (auto [l1, l2] : {std::pair{1, 1}, {0, 0}}) {
    const DriverSpec d = cw_driver(l1, l2);
    const TransverseGrid g = TransverseGrid::make(6, 16, 90.0);
    SurrogateModelParams mp;
    mp.q_min = 4;
    mp.q_max = 22;
    // 96 samples per fundamental period: a third of a period is a whole
    // number of samples, so the sampled field keeps the trefoil symmetry
    const EmissionGrid e = surrogate_emission(d, g, cw_time(4, 48), mp);
    for (int q = 6; q <= 21; q += 3) {
      const auto sup = forbidden_line_suppression(e, q, LineSymmetry::trefoil);
      CHECK(sup.applicable);
      CHECK(sup.db > 60.0);
      CHECK(helicity_of_line(e, q).sam == 0);
    }
    for (int q = 5; q <= 20; ++q) {
      if (q % 3 == 0) continue;
      const LineHelicity h = helicity_of_line(e, q);
      CHECK(h.sam == (q % 3 == 1 ? +1 : -1));
      CHECK(h.purity > 0.999);
    }
  }
}

TEST_CASE("intrinsic phase follows the local cycle-averaged intensity") {
  const DriverSpec d = cw_driver(1, 1);
  const TransverseGrid g = TransverseGrid::make(3, 8, 60.0);
  const TimeGrid t = cw_time(4);
  SurrogateModelParams flat, tilted;
  flat.q_min = tilted.q_min = 10;
  flat.q_max = tilted.q_max = 14;
  tilted.alpha0 = 0.07;
  tilted.alpha_override[11] = -0.4;
  const EmissionGrid a = surrogate_emission(d, g, t, flat), b = surrogate_emission(d, g, t, tilted);
  CHECK(tilted.alpha(13) == Approx(0.91));
  CHECK(tilted.alpha(11) == -0.4);
  for (int ir = 0; ir < g.n_r; ++ir) {
    const SpatialAmplitude s = spatial_amplitude(d, g.radii[ir], 0.0);
    const double intensity = (std::norm(s.plus) + std::norm(s.minus)) * units::atomic_intensity_wcm2 / 1e14;
    for (int q : {10, 11, 13, 14}) {
      const int bin = q * t.bins_per_order() - a.k_lo;
      const cplx ratio = b.at(bin, 0, ir, 0) / a.at(bin, 0, ir, 0);
      const cplx ratio_m = b.at(bin, 1, ir, 0) / a.at(bin, 1, ir, 0);
      const double expected = tilted.alpha(q) * intensity;
      CHECK(std::abs(ratio - std::polar(1.0, expected)) < 1e-9);
      CHECK(std::abs(ratio_m - std::polar(1.0, expected)) < 1e-9);
    }
  }
}

TEST_CASE("surrogate parameters and grid limits are validated") {
  SurrogateModelParams p;
  p.effective_order = 0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.q_min = 5;
  p.q_max = 4;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.alpha0 = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  const TimeGrid t = cw_time(2);
  CHECK_THROWS_AS(EmissionGrid(TransverseGrid::make(1, 4, 1.0), SpectralAxis::of(t), 1, 32), std::invalid_argument);
}

TEST_CASE("line power and helicity on a hand-built grid") {
  const TimeGrid t = cw_time(2);
  EmissionGrid e(TransverseGrid::make(2, 4, 2.0), SpectralAxis::of(t), 1, 8);
  const auto& g = e.transverse;
  auto put = [&](int q, int s, double amp) {
    const int b = q * t.bins_per_order() - e.k_lo;
    for (int ir = 0; ir < g.n_r; ++ir)
      for (int ith = 0; ith < g.n_theta; ++ith) e.at(b, s, ir, ith) = amp;
  };
  put(4, 0, 2.0);
  put(4, 1, 0.5);
  put(5, 1, 1.0);
  put(6, 0, 0.01);
  const double disc = units::pi * 4.0;
  CHECK(line_power(e, 4, +1) == Approx(4.0 * disc));
  CHECK(line_power(e, 4, -1) == Approx(0.25 * disc));
  CHECK(line_power(e, 4) == Approx(4.25 * disc));
  const LineHelicity h4 = helicity_of_line(e, 4);
  CHECK(h4.sam == +1);
  CHECK(h4.purity == Approx(4.0 / 4.25));
  CHECK(helicity_of_line(e, 5).sam == -1);
  // H6 neighbours: 4, 5, 7, 8 -> mean (4.25 + 1) / 4 disc
  const LineHelicity h6 = helicity_of_line(e, 6);
  CHECK(h6.sam == 0);
  CHECK(h6.relative_db == Approx(10.0 * std::log10(1e-4 / (5.25 / 4.0))));
  CHECK(helicity_of_line(e, 7).power == 0.0);
  CHECK_THROWS_AS(helicity_of_line(e, 9), std::out_of_range);
}

TEST_CASE("strong-field model produces a finite trefoil-symmetric spectrum") {
  // the vector potential starts from zero, so the driver must switch on
  const DriverSpec d = make_bicircular_driver(1, 1, 800.0, 2e14, 1.0, 30.0);
  const TransverseGrid g = TransverseGrid::make(1, 4, 2.0 * 21.2);
  const TimeGrid t = TimeGrid::covering(omega, 64, d.envelope.duration(), 5.0);
  SfaParams sp;
  sp.q_min = 9;
  sp.q_max = 17;
  const EmissionGrid e = sfa_emission(d, g, t, sp);
  CHECK(e.finite());
  CHECK(e.excluded_points == 0);
  for (int q : {10, 13, 16}) CHECK(helicity_of_line(e, q).sam == +1);
  for (int q : {11, 14}) CHECK(helicity_of_line(e, q).sam == -1);
  // the pulse envelope leaks power into the 3n windows; only ordering is robust
  CHECK(forbidden_line_suppression(e, 12, LineSymmetry::trefoil).db > 6.0);
  CHECK_THROWS_AS(sfa_emission(d, g, cw_time(6, 32), sp), std::invalid_argument);
}

namespace {

// One point (replicated over four azimuths) carrying a hand-built series.
FieldGrid point_field(const TimeGrid& t, const std::function<std::pair<cplx, cplx>(double)>& f) {
  FieldGrid g(TransverseGrid::make(1, 4, 1.0), t);
  for (int ith = 0; ith < 4; ++ith)
    for (int n = 0; n < t.n_t; ++n) {
      const auto [p, m] = f(t.t(n));
      g.at(0, ith, n, 0) = p;
      g.at(0, ith, n, 1) = m;
    }
  return g;
}

} // namespace

TEST_CASE("a global delay multiplies each harmonic by its phase ramp") {
  // p = 5 makes the response a polynomial of degree 5 in the field: no
  // aliasing, so the delay theorem holds for delays off the sample grid
  DriverSpec d = cw_driver(1, 1);
  d.delay = -1000.0; // keeps every delayed sample on the flat envelope
  const TransverseGrid g = TransverseGrid::make(2, 8, 60.0);
  const TimeGrid t = cw_time(3, 48);
  SurrogateModelParams mp;
  mp.effective_order = 5.0;
  mp.q_min = 1;
  mp.q_max = 10;
  const double base = d.delay;
  const EmissionGrid a = surrogate_emission(d, g, t, mp);
  const int K = t.bins_per_order();
  for (double dt : {0.13, 0.917, 2.5}) {
    d.delay = base + dt;
    const EmissionGrid b = surrogate_emission(d, g, t, mp);
    double worst = 0.0;
    for (int q = 1; q <= 10; ++q) {
      if (q % 3 == 0) continue;
      const int bin = q * K - a.k_lo;
      const cplx ramp = std::polar(1.0, q * omega * dt);
      for (int s = 0; s < 2; ++s)
        for (int ir = 0; ir < g.n_r; ++ir)
          for (int ith = 0; ith < g.n_theta; ++ith) {
            const cplx ref = a.at(bin, s, ir, ith) * ramp;
            worst = std::max(worst, std::abs(b.at(bin, s, ir, ith) - ref) / max_abs(a));
          }
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("a single circular colour generates no harmonics") {
  DriverSpec d = cw_driver(1, 1);
  d.second.peak_amplitude = 0.0;
  const TransverseGrid g = TransverseGrid::make(3, 8, 60.0);
  SurrogateModelParams mp;
  mp.q_min = 1;
  mp.q_max = 12;
  const EmissionGrid e = surrogate_emission(d, g, cw_time(4), mp);
  const double fundamental = line_power(e, 1);
  REQUIRE(fundamental > 0.0);
  for (int q = 2; q <= 12; ++q) CHECK(10.0 * std::log10(line_power(e, q) / fundamental) < -40.0);
}

TEST_CASE("a linear field gives odd harmonics only") {
  const TimeGrid t = cw_time(4, 64);
  const double a = 0.04;
  const FieldGrid f = point_field(t, [&](double tt) {
    const cplx v = a * std::polar(1.0, -omega * tt);
    return std::pair{v, v};
  });
  SurrogateModelParams mp;
  mp.q_min = 1;
  mp.q_max = 12;
  const EmissionGrid e = surrogate_emission(f, mp);
  for (int q = 3; q <= 11; q += 2) {
    REQUIRE(line_power(e, q) > 0.0);
    CHECK(line_power(e, q + 1) < 1e-20 * line_power(e, q));
  }

  // strong-field dipole. The kernel is causal, so two runs that share their
  // start share the dipole up to the end of the shorter one; the difference of
  // their lines at qw is the steady-state dipole over the extra cycles alone,
  // free of the switch-on transient. Half-cycle antisymmetry cancels even q.
  const double e0 = std::sqrt(1.5e14 / units::atomic_intensity_wcm2) / std::numbers::sqrt2;
  auto sfa_lines = [&](int cycles) {
    const TimeGrid ts = TimeGrid::make(omega, 64, cycles * 128, 0.0);
    // E ~ cos(wt): the vector potential starts from zero with zero mean
    const FieldGrid fs = point_field(ts, [&](double tt) {
      const cplx v = e0 * std::polar(1.0, -omega * tt);
      return std::pair{v, v};
    });
    SfaParams sp;
    sp.q_min = 9;
    sp.q_max = 22;
    const EmissionGrid es = sfa_emission(fs, sp);
    CHECK(es.excluded_points == 0);
    std::map<int, std::array<cplx, 2>> lines;
    for (int q = 10; q <= 21; ++q)
      lines[q] = {es.at(q * ts.bins_per_order() - es.k_lo, 0, 0, 0), es.at(q * ts.bins_per_order() - es.k_lo, 1, 0, 0)};
    return lines;
  };
  const auto shorter = sfa_lines(6), longer = sfa_lines(8);
  auto steady = [&](int q) {
    return std::norm(longer.at(q)[0] - shorter.at(q)[0]) + std::norm(longer.at(q)[1] - shorter.at(q)[1]);
  };
  double odd_max = 0.0;
  for (int q = 11; q <= 21; q += 2) odd_max = std::max(odd_max, steady(q));
  REQUIRE(odd_max > 0.0);
  for (int q = 10; q <= 20; q += 2) CHECK(steady(q) < 1e-20 * odd_max);
}

TEST_CASE("zero field gives zero emission in both models") {
  const TimeGrid t = TimeGrid::covering(omega, 64, 20.0, 2.0);
  const FieldGrid f = point_field(t, [](double) { return std::pair{cplx{}, cplx{}}; });
  SurrogateModelParams mp;
  mp.q_min = 4;
  mp.q_max = 14;
  CHECK(max_abs(surrogate_emission(f, mp)) == 0.0);
  SfaParams sp;
  sp.q_min = 9;
  sp.q_max = 14;
  const EmissionGrid es = sfa_emission(f, sp);
  CHECK(es.excluded_points == 0);
  CHECK(max_abs(es) == 0.0);
}

TEST_CASE("with no intrinsic phase each allowed harmonic is a single OAM line") {
  const DriverSpec d = cw_driver(1, 1);
  const CoordinationParameters p = d.constants();
  const TransverseGrid g = TransverseGrid::make(60, 32, 90.0);
  SurrogateModelParams mp;
  mp.q_min = 9;
  mp.q_max = 20;
  const EmissionGrid e = surrogate_emission(d, g, cw_time(2, 48), mp);
  const FarFieldGrid f = propagate_all(e, make_divergence_grid(40, 32, suggest_beta_max(e, 10, 20)));
  for (int q = 10; q <= 20; ++q) {
    if (q % 3 == 0) continue;
    const HarmonicOam h = expected_harmonic_oam(q, p);
    const AngularSpectrum sp = oam_spectrum(f, q, h.sam);
    const double all = sp.total() + oam_spectrum(f, q, -h.sam).total();
    CHECK(sp.power_at(h.oam) / all >= 0.95);
  }
}

TEST_CASE("surrogate and strong-field models agree on line positions and helicities") {
  const DriverSpec d = make_bicircular_driver(1, 1, 800.0, 2e14, 1.0, 30.0);
  const TransverseGrid g = TransverseGrid::make(1, 4, 2.0 * 21.2);
  const TimeGrid t = TimeGrid::covering(omega, 64, d.envelope.duration(), 5.0);
  SfaParams sp;
  sp.q_min = 9;
  sp.q_max = 17;
  SurrogateModelParams mp;
  mp.q_min = 9;
  mp.q_max = 17;
  const EmissionGrid a = sfa_emission(d, g, t, sp), b = surrogate_emission(d, g, t, mp);
  for (int q = 10; q <= 17; ++q) {
    if (q % 3 == 0) continue;
    CHECK(helicity_of_line(a, q).sam == helicity_of_line(b, q).sam);
  }
  for (int q : {12, 15}) {
    CHECK(forbidden_line_suppression(a, q, LineSymmetry::trefoil).db > 0.0);
    CHECK(forbidden_line_suppression(b, q, LineSymmetry::trefoil).db > 0.0);
  }
}
