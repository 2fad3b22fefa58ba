#include <tkam/field_synthesis.hpp>

#include <catch_amalgamated.hpp>

#include <random>

using namespace tkam;
using Catch::Approx;

namespace {

const double omega = units::omega_from_wavelength_nm(800.0);

// Photon counting: harmonic q absorbs n1 photons of w (spin +1, OAM l1) and
// n2 of 2w (spin -1, OAM l2) with q = n1 + 2 n2 and n1 - n2 = S = +-1.
struct Photons {
  int n1, n2, sam, oam;
};

Photons count_photons(int q, int l1, int l2) {
  for (int s : {+1, -1}) {
    if ((q - s) % 3 != 0) continue;
    const int n2 = (q - s) / 3, n1 = n2 + s;
    if (n1 < 0 || n2 < 0) continue;
    return {n1, n2, s, n1 * l1 + n2 * l2};
  }
  return {0, 0, 0, 0};
}

DriverSpec short_driver(int l1, int l2) {
  DriverSpec d = make_bicircular_driver(l1, l2, 800.0, 2e14, 1.0, 30.0);
  d.envelope = {2.0, 8.0, 2.0};
  return d;
}

} // namespace

TEST_CASE("default coordination constants") {
  const CoordinationParameters p = symmetry_constants(1, 1, omega);
  CHECK(p.gamma == Rational(-1, 3));
  CHECK(p.tau_omega == Rational(2, 3));
  CHECK(p.j1 == Rational(2, 3));
  CHECK(tkam_charge(13, p) == Rational(26, 3));
  CHECK(tkam_charge(14, p) == Rational(28, 3));
  CHECK(expected_harmonic_oam(13, p).oam == 9);
  CHECK(expected_harmonic_oam(14, p).oam == 9);
  CHECK(expected_harmonic_oam(13, p).sam == +1);
  CHECK(expected_harmonic_oam(14, p).sam == -1);
  CHECK(p.tau() * units::two_pi == Approx(4.0 * units::pi / (3.0 * omega)));
  CHECK(to_string(p.gamma) == "-1/3");
  CHECK(to_string(Rational(4)) == "4");
}

TEST_CASE("harmonic charges agree with photon counting") {
  for (int l1 = -3; l1 <= 3; ++l1)
    for (int l2 = -3; l2 <= 3; ++l2) {
      const CoordinationParameters p = symmetry_constants(l1, l2, omega);
      for (int q = 1; q <= 40; ++q) {
        if (q % 3 == 0) {
          CHECK_THROWS_AS(expected_harmonic_oam(q, p), std::domain_error);
          continue;
        }
        const Photons ph = count_photons(q, l1, l2);
        const HarmonicOam h = expected_harmonic_oam(q, p);
        CHECK(h.sam == ph.sam);
        CHECK(h.oam == ph.oam);
        // total angular momentum of the photons equals q j1
        CHECK(Rational(ph.oam) + p.gamma * static_cast<long long>(ph.sam) == tkam_charge(q, p));
        CHECK(ph.n1 + 2 * ph.n2 == q);
      }
    }
  CHECK_THROWS_AS(tkam_charge(0, symmetry_constants(1, 1, omega)), std::invalid_argument);
  CHECK_THROWS_AS(symmetry_constants(1, 1, 0.0), std::invalid_argument);
}

TEST_CASE("analytic driver obeys the coordinated rotation for any angle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto [l1, l2] : {std::pair{1, 1}, {0, 0}, {1, 2}, {2, -1}, {-1, 3}}) {
    DriverSpec d = make_bicircular_driver(l1, l2, 800.0, 2e14, 0.7, 30.0);
    d.envelope = {0.0, 1e4, 0.0};
    const CoordinationParameters p = d.constants();
    const double g = to_double(p.gamma);
    for (int trial = 0; trial < 50; ++trial) {
      const double r = 60.0 * u(rng), th = units::two_pi * u(rng), alpha = units::two_pi * u(rng);
      const double t = 100.0 + 50.0 * u(rng);
      const SpatialAmplitude lhs = driver_field_at(d, r, th - alpha, t);
      const SpatialAmplitude rhs = driver_field_at(d, r, th, t + p.tau() * alpha);
      const double scale = std::abs(rhs.plus) + std::abs(rhs.minus) + 1e-300;
      CHECK(std::abs(lhs.plus * std::polar(1.0, -g * alpha) - rhs.plus) < 1e-12 * scale);
      CHECK(std::abs(lhs.minus * std::polar(1.0, g * alpha) - rhs.minus) < 1e-12 * scale);
    }
  }
}

TEST_CASE("sampled driver is invariant under every grid-commensurate rotation") {
  const TransverseGrid g = TransverseGrid::make(6, 16, 90.0);
  for (auto [l1, l2] : {std::pair{1, 1}, {0, 0}, {1, 2}, {2, -1}}) {
    const DriverSpec d = short_driver(l1, l2);
    const CoordinationParameters p = d.constants();
    const TimeGrid t = TimeGrid::covering(omega, 32, d.envelope.duration(), 2.0);
    const FieldGrid f = evaluate_driver(d, g, t);
    const auto ks = commensurate_rotations(g, t, p.tau_omega);
    REQUIRE(ks.size() >= 2);
    for (int k : ks) CHECK(symmetry_residual(f, p, k * g.dtheta()) < 1e-10);
    // the coordinated rotation equals the matching time shift
    const int k = ks[1];
    const FieldGrid rotated = apply_coordinated_rotation(f, k * g.dtheta(), p.gamma);
    const FieldGrid shifted = shift_time(f, commensurate_shift(g, t, p.tau_omega, k));
    double diff = 0.0, ref = 0.0;
    for (int ir = 0; ir < g.n_r; ++ir)
      for (int ith = 0; ith < g.n_theta; ++ith)
        for (int n = 0; n < t.n_t; ++n) {
          if (f.envelope[n] != shifted.envelope[n]) continue;
          for (int c = 0; c < 2; ++c) {
            diff += std::norm(rotated.at(ir, ith, n, c) - shifted.at(ir, ith, n, c));
            ref += std::norm(shifted.at(ir, ith, n, c));
          }
        }
    CHECK(std::sqrt(diff / ref) < 1e-10);
  }
}

TEST_CASE("separate spin and orbital invariances of each colour") {
  const TransverseGrid g = TransverseGrid::make(4, 16, 90.0);
  const DriverSpec d = short_driver(1, 1);
  const TimeGrid t = TimeGrid::covering(omega, 48, d.envelope.duration(), 2.0);
  const FieldGrid f = evaluate_driver(d, g, t);
  int tested = 0;
  for (int k = 1; k < g.n_theta; ++k) {
    try {
      for (double r : component_invariance_residuals(f, d.constants(), 1, 1, k)) CHECK(r < 1e-10);
      ++tested;
    } catch (const std::invalid_argument&) {
    }
  }
  CHECK(tested > 0);
}

TEST_CASE("a donut perturbation breaks the symmetry and conserves power") {
  const TransverseGrid fine = TransverseGrid::make(300, 16, 120.0);
  DriverSpec d = short_driver(1, 1);
  const auto p0 = component_powers(d, fine);
  PerturbationSpec pert;
  pert.fraction = 0.1;
  pert.donut_width = 30.0 / std::numbers::sqrt2;
  d.perturbation = pert;
  for (auto phase : {PerturbationPhase::in_phase, PerturbationPhase::out_of_phase}) {
    d.perturbation->relative_phase = phase;
    const auto p1 = component_powers(d, fine);
    CHECK(p1[0] == Approx(p0[0]).epsilon(5e-3));
    CHECK(p1[1] == Approx(p0[1]).epsilon(5e-3));
  }
  d.perturbation->relative_phase = PerturbationPhase::in_phase;
  const TransverseGrid g = TransverseGrid::make(6, 16, 90.0);
  const TimeGrid t = TimeGrid::covering(omega, 32, d.envelope.duration(), 2.0);
  const FieldGrid f = evaluate_driver(d, g, t);
  CHECK(symmetry_residual(f, d.constants(), 3 * g.dtheta()) > 1e-2);
  pert.fraction = 1.0;
  CHECK_THROWS_AS(pert.validate(), std::invalid_argument);
}

TEST_CASE("mode profiles and envelope") {
  for (int l : {0, 1, 2, 5}) {
    const double w = 20.0;
    double peak = 0.0, power = 0.0;
    const int n = 20000;
    const double dr = 6.0 * w / n;
    for (int i = 0; i < n; ++i) {
      const double r = (i + 0.5) * dr, v = lg_profile(l, w, r);
      peak = std::max(peak, v);
      power += v * v * units::two_pi * r * dr;
    }
    CHECK(peak == Approx(1.0).epsilon(1e-6));
    CHECK(power == Approx(lg_power(l, w)).epsilon(1e-6));
  }
  double power = 0.0;
  const double s = 21.0, dr = 1e-3 * s;
  for (int i = 0; i < 8000; ++i) {
    const double r = (i + 0.5) * dr, v = donut_profile(s, r);
    power += v * v * units::two_pi * r * dr;
  }
  CHECK(power == Approx(donut_power(s)).epsilon(1e-6));

  const EnvelopeSpec e{5.3, 10.7, 5.3};
  CHECK(e.value(-0.1) == 0.0);
  CHECK(e.value(2.65) == Approx(0.5));
  CHECK(e.value(10.0) == 1.0);
  CHECK(e.value(21.3 - 2.65) == Approx(0.5));
  CHECK(e.value(21.4) == 0.0);
  CHECK_THROWS_AS((EnvelopeSpec{-1.0, 1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((EnvelopeSpec{0.0, 0.0, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("driver validation and grid mismatch") {
  DriverSpec d = short_driver(1, 1);
  d.fundamental.handedness = Handedness::left;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d = short_driver(1, 1);
  const TimeGrid t = TimeGrid::covering(units::omega_from_wavelength_nm(400.0), 32, 12.0, 2.0);
  CHECK_THROWS_AS(evaluate_driver(d, TransverseGrid::make(2, 4, 10.0), t), std::invalid_argument);
  CHECK_THROWS_AS(make_bicircular_driver(1, 1, 800.0, 1e14, 0.0, 30.0), std::invalid_argument);
  const TransverseGrid g = TransverseGrid::make(2, 16, 90.0);
  const TimeGrid t2 = TimeGrid::covering(omega, 32, 12.0, 2.0);
  const FieldGrid f = evaluate_driver(d, g, t2);
  CHECK_THROWS_AS(apply_coordinated_rotation(f, 0.1, Rational(-1, 3)), std::invalid_argument);
  CHECK_THROWS_AS(commensurate_shift(g, t2, Rational(2, 3), 1), std::invalid_argument);
}

TEST_CASE("local symmetry classification") {
  DriverSpec d = make_bicircular_driver(1, 1, 800.0, 2e14, 1.0, 30.0);
  const TimeGrid t = TimeGrid::covering(omega, 64, d.envelope.duration(), 5.0);
  DriverEvaluator eval(d, t);
  std::vector<cplx> s(static_cast<std::size_t>(t.n_t) * 2);
  eval.fill(21.0, 0.3, s);
  CHECK(classify_local_symmetry(s, t) == LineSymmetry::trefoil);
  d.second.peak_amplitude = 0.0;
  DriverEvaluator single(d, t);
  single.fill(21.0, 0.3, s);
  CHECK(classify_local_symmetry(s, t) == LineSymmetry::none);
  std::fill(s.begin(), s.end(), cplx{});
  CHECK(classify_local_symmetry(s, t) == LineSymmetry::none);
}

TEST_CASE("coordination constants of other charge pairs") {
  const CoordinationParameters zero = symmetry_constants(0, 0, omega);
  CHECK(zero.gamma == Rational(0));
  CHECK(zero.tau_omega == Rational(0));
  CHECK(zero.j1 == Rational(0));
  const CoordinationParameters p = symmetry_constants(1, 4, omega);
  CHECK(p.gamma == Rational(2, 3));
  CHECK(p.j1 == Rational(5, 3));
  // q = 4 absorbs three w photons and one 2w photon
  CHECK(expected_harmonic_oam(4, symmetry_constants(1, 1, omega)).oam == 3);
  CHECK(expected_harmonic_oam(4, symmetry_constants(1, 1, omega)).sam == +1);
  for (int l1 = -3; l1 <= 3; ++l1)
    for (int l2 = -3; l2 <= 3; ++l2) {
      const CoordinationParameters c = symmetry_constants(l1, l2, omega);
      CHECK((c.gamma * 3).denominator() == 1);
      for (int n = 1; n <= 12; ++n) CHECK(tkam_charge(n, c) == tkam_charge(1, c) * n);
    }
}

TEST_CASE("vortex null on axis and trefoil of a flat-phase driver") {
  DriverSpec d = make_bicircular_driver(1, 1, 800.0, 2e14, 1.0, 30.0);
  for (double th : {0.0, 1.0, 4.0}) {
    const SpatialAmplitude s = spatial_amplitude(d, 0.0, th);
    CHECK(s.plus == cplx{});
    CHECK(s.minus == cplx{});
  }
  d = make_bicircular_driver(0, 0, 800.0, 2e14, 1.0, 30.0);
  d.envelope = {0.0, 1e4, 0.0};
  CHECK(std::abs(spatial_amplitude(d, 0.0, 0.0).plus) > 0.0);
  // E(t + T/3) is E(t) rotated counterclockwise by 120 degrees
  const double third = units::two_pi / (3.0 * omega);
  const double c = std::cos(units::two_pi / 3.0), s = std::sin(units::two_pi / 3.0);
  for (double t : {10.0, 10.37, 11.91, 13.2}) {
    const SpatialAmplitude a = driver_field_at(d, 12.0, 0.4, t), b = driver_field_at(d, 12.0, 0.4, t + third);
    const Vec2 fa = real_field(a.plus, a.minus), fb = real_field(b.plus, b.minus);
    const double scale = std::hypot(fa.x, fa.y) + 1e-300;
    CHECK(std::abs(c * fa.x - s * fa.y - fb.x) < 1e-12 * scale);
    CHECK(std::abs(s * fa.x + c * fa.y - fb.y) < 1e-12 * scale);
  }
}

TEST_CASE("trivial rotations and a zero field") {
  const TransverseGrid g = TransverseGrid::make(3, 16, 90.0);
  const DriverSpec d = short_driver(1, 2);
  const TimeGrid t = TimeGrid::covering(omega, 32, d.envelope.duration(), 2.0);
  const FieldGrid f = evaluate_driver(d, g, t);
  const FieldGrid same = apply_coordinated_rotation(f, 0.0, d.constants().gamma);
  CHECK(same.data == f.data);
  // with gamma = 0 the rotation only moves samples between azimuths
  const int k = 3;
  const FieldGrid moved = apply_coordinated_rotation(f, k * g.dtheta(), Rational(0));
  for (int ir = 0; ir < g.n_r; ++ir)
    for (int ith = 0; ith < g.n_theta; ++ith)
      for (int n = 0; n < t.n_t; n += 7)
        for (int comp = 0; comp < 2; ++comp)
          CHECK(moved.at(ir, ith, n, comp) == f.at(ir, wrap_index(ith - k, g.n_theta), n, comp));
  FieldGrid zero(g, t);
  zero.envelope = f.envelope;
  const auto ks = commensurate_rotations(g, t, d.constants().tau_omega);
  REQUIRE(ks.size() >= 2);
  CHECK(symmetry_residual(zero, d.constants(), ks[1] * g.dtheta()) == 0.0);
}
