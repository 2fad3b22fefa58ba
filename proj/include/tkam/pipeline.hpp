#pragma once

// Run orchestration: synthesize -> respond -> propagate -> analyze, output
// writing, the verification suite and the text report.
//
// Output layout under the configured directory:
//   manifest.json                 config snapshot, checksums, timings, results
//   spectra/oam.csv               q,s,m,power
//   spectra/tkam.csv              q,s,m,j_num,j_den,power
//   spectra/lines.csv             q,power_plus,power_minus,sam,purity,relative_db,oam_std
//   spectra/conservation.csv      per allowed harmonic of the analysis range
//   timedomain/t22.csv            theta,t,re,im,abs,orientation,intensity
//   timedomain/apt_metrics.json
//   timedomain/apt_grid.bin       float32 LE, [t][y][x][intensity, orientation]
//   timedomain/apt_grid.meta.json

#include <tkam/angular_spectra.hpp>
#include <tkam/config.hpp>
#include <tkam/farfield.hpp>
#include <tkam/field_synthesis.hpp>
#include <tkam/local_response.hpp>
#include <tkam/time_domain.hpp>
#include <tkam/version.hpp>

#include <boost/crc.hpp>
#include <json.hpp>

#include <bit>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tkam {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// results

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct LineRecord {
  int q = 0;
  double power_plus = 0.0;
  double power_minus = 0.0;
  LineHelicity helicity;
};

struct RunResults {
  RunConfig config;
  DriverSpec driver;
  CoordinationParameters params;
  TimeGrid time;
  TransverseGrid transverse;
  LineSymmetry local_symmetry = LineSymmetry::none;
  EmissionGrid emission;
  double beta_max = 0.0;
  FarFieldGrid far;
  std::vector<AngularSpectrum> spectra; // every q in range, s = +1 then -1
  std::vector<LineRecord> lines;
  std::map<int, double> oam_width;      // std of m over both components
  std::map<int, double> parseval_error; // |far - near| / near per q
  std::optional<ConservationReport> conservation;
  std::map<int, SuppressionResult> suppression;
  std::optional<T22Map> map;
  std::optional<AptMetrics> apt;
  std::optional<AptGrid> apt_grid;

  std::vector<StageTiming> timings;
  std::vector<std::string> warnings;
  std::string failed_stage;
  std::string error;
  bool emission_empty = false;

  bool ok() const { return failed_stage.empty(); }

  const AngularSpectrum* spectrum(int q, int s) const {
    for (const auto& sp : spectra)
      if (sp.q == q && sp.s == s) return &sp;
    return nullptr;
  }
};

struct RunOptions {
  bool time_domain = true; // T22 map, spiral metrics and Cartesian grid
};

// ---------------------------------------------------------------------------
// pipeline

inline T22Options t22_options(const RunConfig& c, const DriverSpec& d) {
  T22Options o;
  o.q_min = c.analysis.apt_q_min;
  o.upsample = c.analysis.upsample;
  o.sigma = units::rad(c.analysis.sigma_deg) / d.omega;
  o.power_fraction = c.analysis.power_fraction;
  o.t_center = d.delay + 0.5 * d.envelope.duration();
  o.span = c.analysis.map_cycles * units::two_pi / d.omega;
  return o;
}

inline RunResults run_pipeline(const RunConfig& config, const RunOptions& options = {}) {
  RunResults r;
  r.config = config;
  auto stage = [&](const std::string& name, auto&& body) {
    if (!r.ok()) return;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      r.failed_stage = name;
      r.error = e.what();
    }
    r.timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };

  stage("driver", [&] {
    config.validate();
    r.driver = config.driver_spec();
    r.driver.validate();
    r.params = r.driver.constants();
    r.time = config.time();
    r.transverse = config.transverse();
    // local line structure at a representative point of the beam
    DriverEvaluator eval(r.driver, r.time);
    std::vector<cplx> series(static_cast<std::size_t>(r.time.n_t) * 2);
    eval.fill(r.driver.fundamental.waist / std::numbers::sqrt2, 0.0, series);
    r.local_symmetry = classify_local_symmetry(series, r.time);
  });

  stage("response", [&] {
    if (config.model.type == ModelType::surrogate) {
      SurrogateModelParams p;
      p.effective_order = config.model.effective_order;
      p.alpha0 = config.model.alpha0;
      p.q_min = config.model.q_min;
      p.q_max = config.model.q_max;
      r.emission = surrogate_emission(r.driver, r.transverse, r.time, p);
    } else {
      SfaParams p;
      p.ionization_potential_ev = config.model.ip_ev;
      p.tolerance = config.model.sfa_tolerance;
      p.trajectories = config.model.trajectories;
      p.q_min = config.model.q_min;
      p.q_max = config.model.q_max;
      r.emission = sfa_emission(r.driver, r.transverse, r.time, p);
      if (r.emission.excluded_points > 0)
        r.warnings.push_back(std::to_string(r.emission.excluded_points) +
                             " points excluded: excursion-time quadrature did not converge");
    }
    if (!r.emission.finite()) throw std::runtime_error("non-finite emission");
    double total = 0.0;
    for (const auto& v : r.emission.data) total += std::norm(v);
    r.emission_empty = total == 0.0;
    if (r.emission_empty) r.warnings.push_back("driver produced no emission; analysis stages skipped");
  });

  stage("propagation", [&] {
    r.beta_max = config.grids.beta_max_rad > 0.0
                     ? config.grids.beta_max_rad
                     : suggest_beta_max(r.emission, config.analysis.q_lo, config.analysis.q_hi);
    r.far = propagate_all(r.emission, make_divergence_grid(config.grids.n_beta, config.grids.n_theta, r.beta_max));
    for (const auto& w : r.far.warnings) r.warnings.push_back(w);
  });

  stage("spectra", [&] {
    for (int q = config.model.q_min; q <= config.model.q_max; ++q) {
      for (int s : {+1, -1}) r.spectra.push_back(oam_spectrum(r.far, q, s));
      LineRecord rec;
      rec.q = q;
      rec.power_plus = line_power(r.emission, q, +1);
      rec.power_minus = line_power(r.emission, q, -1);
      rec.helicity = helicity_of_line(r.emission, q, config.analysis.suppression_db);
      r.lines.push_back(rec);
      // widths over the merged OAM content of both helicities
      AngularSpectrum merged = r.spectra[r.spectra.size() - 2];
      const auto& minus = r.spectra.back();
      for (std::size_t i = 0; i < merged.entries.size(); ++i) merged.entries[i].power += minus.entries[i].power;
      r.oam_width[q] = merged.width();
      const double near = near_power(r.emission, q, 0) + near_power(r.emission, q, 1);
      const double far = far_power(r.far, q, 0) + far_power(r.far, q, 1);
      r.parseval_error[q] = near > 0.0 ? std::abs(far - near) / near : std::abs(far);
      for (const auto* sp : {&r.spectra[r.spectra.size() - 2], &r.spectra.back()})
        if (sp->total() > 0.0 && sp->band_edge_fraction() > 1e-6)
          r.warnings.push_back("harmonic " + std::to_string(q) + (sp->s > 0 ? " (s=+1)" : " (s=-1)") +
                               ": OAM spectrum reaches the azimuthal band edge");
    }
  });

  stage("conservation", [&] {
    if (r.emission_empty) return;
    std::vector<AngularSpectrum> in_range;
    for (const auto& sp : r.spectra)
      if (sp.q >= config.analysis.q_lo && sp.q <= config.analysis.q_hi) in_range.push_back(sp);
    r.conservation = conservation_fit(in_range, r.params);
  });

  stage("selection_rules", [&] {
    if (r.emission_empty) return;
    for (int q = config.model.q_min; q <= config.model.q_max; ++q)
      if (q % 3 == 0) r.suppression[q] = forbidden_line_suppression(r.emission, q, r.local_symmetry);
  });

  if (options.time_domain)
    stage("time_domain", [&] {
      if (r.emission_empty) return;
      const T22Options o = t22_options(config, r.driver);
      r.map = t22_map(r.far, o);
      try {
        r.apt = polarization_spiral_metrics(*r.map, r.params, config.analysis.ridge_threshold);
      } catch (const std::domain_error& e) {
        // broken symmetry can tear the ridges; the map itself is still valid
        r.warnings.push_back(std::string("spiral metrics unavailable: ") + e.what());
      }
      const double extent = std::min(r.far.divergence.r_max, 1.25 * r.map->beta_outer);
      r.apt_grid = apt_grid(r.far, o, config.analysis.apt_grid_points, extent, config.analysis.apt_grid_stride);
    });
  return r;
}

// ---------------------------------------------------------------------------
// writers

namespace detail {

inline std::string num(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::uint32_t crc32(const void* data, std::size_t bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(data, bytes);
  return crc.checksum();
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(8) << std::setfill('0') << v;
  return o.str();
}

// Writes through a temporary file and renames, so readers never see a
// partial file.
inline void write_atomic(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline json rational_json(const Rational& r) { return json::array({r.numerator(), r.denominator()}); }

} // namespace detail

inline json apt_metrics_json(const AptMetrics& m, const CoordinationParameters& p) {
  auto degs = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(units::deg(x));
    return a;
  };
  json j;
  j["delay_per_revolution_fs"] = m.delay_per_revolution;
  j["expected_delay_per_revolution_fs"] = p.tau() * units::two_pi;
  j["rotation_per_revolution_deg"] = units::deg(m.rotation_per_revolution);
  j["expected_rotation_per_revolution_deg"] = units::deg(to_double(p.gamma) * units::two_pi);
  j["delay_residual_fs"] = m.delay_residual;
  j["rotation_residual_deg"] = units::deg(m.rotation_residual);
  j["ridges"] = m.ridges;
  j["time_step_fs"] = m.time_step;
  j["intensity_correlation"] = m.intensity_correlation;
  j["fixed_theta_times_fs"] = m.fixed_theta_times;
  j["fixed_theta_orientations_deg"] = degs(m.fixed_theta_orientations);
  j["fixed_theta_steps_deg"] = degs(m.fixed_theta_steps);
  return j;
}

inline json results_json(const RunResults& r) {
  json j;
  j["gamma"] = detail::rational_json(r.params.gamma);
  j["j1"] = detail::rational_json(r.params.j1);
  j["local_symmetry"] = r.local_symmetry == LineSymmetry::trefoil ? "trefoil" : "none";
  j["beta_max_rad"] = r.beta_max;
  j["emission_empty"] = r.emission_empty;
  if (r.conservation) {
    const auto& c = *r.conservation;
    json h = json::array();
    for (const auto& x : c.harmonics)
      h.push_back({{"q", x.q},
                   {"dominant_j", detail::rational_json(x.dominant_j)},
                   {"expected_j", detail::rational_json(x.expected_j)},
                   {"match", x.match},
                   {"purity", x.purity},
                   {"dominant_m", x.dominant_m},
                   {"dominant_s", x.dominant_s}});
    j["conservation"] = {{"slope", c.slope},
                         {"slope_uncertainty", c.slope_uncertainty},
                         {"all_match", c.all_match()},
                         {"min_purity", c.min_purity()},
                         {"harmonics", h}};
  }
  json lines = json::array();
  for (const auto& l : r.lines)
    lines.push_back({{"q", l.q},
                     {"power_plus", l.power_plus},
                     {"power_minus", l.power_minus},
                     {"sam", l.helicity.sam},
                     {"purity", l.helicity.purity},
                     {"relative_db", std::isfinite(l.helicity.relative_db) ? json(l.helicity.relative_db) : json(nullptr)},
                     {"oam_std", r.oam_width.count(l.q) ? r.oam_width.at(l.q) : 0.0},
                     {"parseval_error", r.parseval_error.count(l.q) ? r.parseval_error.at(l.q) : 0.0}});
  j["lines"] = lines;
  json sup = json::array();
  for (const auto& [q, s] : r.suppression)
    sup.push_back({{"q", q}, {"applicable", s.applicable}, {"db", std::isfinite(s.db) ? json(s.db) : json(nullptr)}});
  j["suppression"] = sup;
  if (r.apt) j["apt"] = apt_metrics_json(*r.apt, r.params);
  return j;
}

// Writes every output the run produced, manifest last. Returns the manifest.
inline json write_outputs(const RunResults& r, const fs::path& dir) {
  using detail::num;
  fs::create_directories(dir);
  std::map<std::string, std::string> files;

  if (!r.spectra.empty()) {
    std::string oam = "q,s,m,power\n", tk = "q,s,m,j_num,j_den,power\n";
    for (const auto& sp : r.spectra) {
      const AngularSpectrum t = tkam_spectrum(sp, r.params.gamma);
      for (const auto& e : t.entries) {
        const std::string head = std::to_string(sp.q) + "," + std::to_string(sp.s) + "," + std::to_string(e.m) + ",";
        oam += head + num(e.power) + "\n";
        tk += head + std::to_string(e.j.numerator()) + "," + std::to_string(e.j.denominator()) + "," + num(e.power) + "\n";
      }
    }
    files["spectra/oam.csv"] = std::move(oam);
    files["spectra/tkam.csv"] = std::move(tk);
    std::string lines = "q,power_plus,power_minus,sam,purity,relative_db,oam_std\n";
    for (const auto& l : r.lines)
      lines += std::to_string(l.q) + "," + num(l.power_plus) + "," + num(l.power_minus) + "," +
               std::to_string(l.helicity.sam) + "," + num(l.helicity.purity) + "," + num(l.helicity.relative_db) + "," +
               num(r.oam_width.at(l.q)) + "\n";
    files["spectra/lines.csv"] = std::move(lines);
  }
  if (r.conservation) {
    std::string c = "q,dominant_j_num,dominant_j_den,expected_j_num,expected_j_den,match,purity,dominant_m,dominant_s\n";
    for (const auto& h : r.conservation->harmonics)
      c += std::to_string(h.q) + "," + std::to_string(h.dominant_j.numerator()) + "," +
           std::to_string(h.dominant_j.denominator()) + "," + std::to_string(h.expected_j.numerator()) + "," +
           std::to_string(h.expected_j.denominator()) + "," + (h.match ? "1" : "0") + "," + num(h.purity) + "," +
           std::to_string(h.dominant_m) + "," + std::to_string(h.dominant_s) + "\n";
    files["spectra/conservation.csv"] = std::move(c);
  }
  if (r.map) {
    const auto& m = *r.map;
    std::string t = "theta,t,re,im,abs,orientation,intensity\n";
    t.reserve(static_cast<std::size_t>(m.n_theta) * m.n_t * 80);
    for (int j = 0; j < m.n_theta; ++j)
      for (int n = 0; n < m.n_t; ++n) {
        const cplx v = m.at(j, n);
        t += num(m.theta(j)) + "," + num(m.t(n)) + "," + num(v.real()) + "," + num(v.imag()) + "," + num(std::abs(v)) +
             "," + num(orientation(v)) + "," + num(m.intensity_at(j, n)) + "\n";
      }
    files["timedomain/t22.csv"] = std::move(t);
  }
  if (r.apt) files["timedomain/apt_metrics.json"] = apt_metrics_json(*r.apt, r.params).dump(2) + "\n";
  if (r.apt_grid) {
    const auto& g = *r.apt_grid;
    std::string bin(g.data.size() * sizeof(float), '\0');
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      std::uint32_t u = std::bit_cast<std::uint32_t>(g.data[i]);
      for (int b = 0; b < 4; ++b) bin[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xff);
    }
    files["timedomain/apt_grid.bin"] = std::move(bin);
    json meta;
    meta["format"] = "float32 little-endian, row-major";
    meta["layout"] = json::array({"t", "y", "x", "channel"});
    meta["shape"] = json::array({g.nt, g.ny, g.nx, 2});
    meta["channels"] = json::array({"windowed_intensity", "orientation_rad"});
    meta["x"] = {{"unit", "rad"}, {"first", g.x(0)}, {"step", 2.0 * g.extent / g.nx}, {"count", g.nx}};
    meta["y"] = {{"unit", "rad"}, {"first", g.y(0)}, {"step", 2.0 * g.extent / g.ny}, {"count", g.ny}};
    meta["t"] = {{"unit", "fs"}, {"first", g.t(0)}, {"step", g.dt}, {"count", g.nt}};
    files["timedomain/apt_grid.meta.json"] = meta.dump(2) + "\n";
  }

  json manifest;
  manifest["schema"] = 1;
  manifest["code_version"] = version;
  manifest["status"] = r.ok() ? "ok" : "failed";
  if (!r.ok()) {
    manifest["failed_stage"] = r.failed_stage;
    manifest["error"] = r.error;
  }
  manifest["threads"] = effective_threads();
  manifest["config"] = r.config.to_ini();
  json grids;
  grids["time"] = {{"omega_rad_per_fs", r.time.omega}, {"samples_per_2w_cycle", r.time.samples_per_2w_cycle},
                   {"n_t", r.time.n_t}, {"dt_fs", r.time.dt()}, {"t0_fs", r.time.t0}};
  grids["transverse"] = {{"n_r", r.transverse.n_r}, {"n_theta", r.transverse.n_theta}, {"r_max_um", r.transverse.r_max}};
  grids["divergence"] = {{"n_beta", r.far.divergence.n_r}, {"n_phi", r.far.divergence.n_theta},
                         {"beta_max_rad", r.far.divergence.r_max}};
  manifest["grids"] = grids;
  json sums;
  if (!r.emission.data.empty())
    sums["emission"] = detail::hex32(detail::crc32(r.emission.data.data(), r.emission.data.size() * sizeof(cplx)));
  if (!r.far.data.empty())
    sums["far_field"] = detail::hex32(detail::crc32(r.far.data.data(), r.far.data.size() * sizeof(cplx)));
  json file_sums;
  for (const auto& [name, bytes] : files) file_sums[name] = detail::hex32(detail::crc32(bytes.data(), bytes.size()));
  sums["files"] = file_sums;
  manifest["checksums"] = sums;
  json timings = json::array();
  for (const auto& t : r.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  manifest["timings"] = timings;
  manifest["warnings"] = r.warnings;
  manifest["results"] = results_json(r);

  for (const auto& [name, bytes] : files) detail::write_atomic(dir / name, bytes);
  detail::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

inline RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return RunConfig::parse(ss.str(), overrides);
}

// ---------------------------------------------------------------------------
// verification suite

enum class CheckStatus { pass, fail, expected_broken, skipped };

struct Check {
  std::string name;
  CheckStatus status = CheckStatus::skipped;
  std::string value;
  std::string limit;
};

struct VerifyReport {
  std::vector<Check> checks;
  bool ok() const {
    return std::none_of(checks.begin(), checks.end(), [](const Check& c) { return c.status == CheckStatus::fail; });
  }
  std::string table() const {
    std::ostringstream o;
    o << std::left << std::setw(34) << "check" << std::setw(17) << "status" << std::setw(26) << "value"
      << "limit\n";
    for (const auto& c : checks) {
      const char* s = c.status == CheckStatus::pass              ? "pass"
                      : c.status == CheckStatus::fail            ? "FAIL"
                      : c.status == CheckStatus::expected_broken ? "expected-broken"
                                                                 : "skipped";
      o << std::left << std::setw(34) << c.name << std::setw(17) << s << std::setw(26) << c.value << c.limit << "\n";
    }
    return o.str();
  }
};

namespace detail {

inline std::string sci(double v) {
  std::ostringstream o;
  o << std::setprecision(3) << std::scientific << v;
  return o.str();
}

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream o;
  o << std::setprecision(digits) << std::fixed << v;
  return o.str();
}

// Smooth two-component test field on a small polar plane for the
// covariance check; deterministic.
inline AptField synthetic_xuv_field(double omega, double sigma) {
  AptField f;
  f.plane = TransverseGrid::make(3, 16, 0.01);
  f.dt = std::min(units::two_pi / omega / 128.0, sigma / 10.0);
  f.n_t = std::max(512, static_cast<int>(std::ceil(16.0 * window_cutoff_sigmas * sigma / f.dt)));
  f.t0 = 0.0;
  f.data.assign(f.plane.points() * f.n_t * 2, 0.0);
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Term {
    int q, m;
    double ax, ay, px, py;
  };
  std::vector<Term> terms;
  for (int q = 10; q < 16; ++q) terms.push_back({q, static_cast<int>(std::lround(3 * u(rng))), u(rng), u(rng), 3 * u(rng), 3 * u(rng)});
  for (int ib = 0; ib < f.plane.n_r; ++ib)
    for (int j = 0; j < f.plane.n_theta; ++j)
      for (int n = 0; n < f.n_t; ++n) {
        const double t = f.t(n), th = f.plane.theta(j);
        double x = 0.0, y = 0.0;
        for (const auto& tm : terms) {
          const double ph = tm.q * omega * t - tm.m * th + ib;
          x += tm.ax * std::cos(ph + tm.px);
          y += tm.ay * std::cos(ph + tm.py);
        }
        f.x(ib, j, n) = x;
        f.y(ib, j, n) = y;
      }
  return f;
}

} // namespace detail

inline VerifyReport verify(const RunConfig& config) {
  using detail::fixed;
  using detail::sci;
  VerifyReport rep;
  auto add = [&](std::string name, bool pass, std::string value, std::string limit, bool may_break = false) {
    CheckStatus s = pass ? CheckStatus::pass : may_break ? CheckStatus::expected_broken : CheckStatus::fail;
    rep.checks.push_back({std::move(name), s, std::move(value), std::move(limit)});
  };
  const bool perturbed = config.perturbed();
  const DriverSpec driver = config.driver_spec();
  const CoordinationParameters p = driver.constants();

  // charge algebra
  {
    bool ok = (p.gamma * 3LL).denominator() == 1 && (p.tau_omega * 3LL).denominator() == 1;
    for (int q = config.analysis.q_lo; q <= config.analysis.q_hi; ++q) {
      if (q % 3 == 0) continue;
      const auto h = expected_harmonic_oam(q, p);
      ok = ok && Rational(h.oam) == tkam_charge(q, p) - p.gamma * static_cast<long long>(h.sam);
    }
    add("charge algebra", ok, "gamma=" + to_string(p.gamma) + " j1=" + to_string(p.j1), "exact");
  }

  // driver symmetry on a reduced radial grid with the configured azimuth and time axis
  {
    const TransverseGrid g = TransverseGrid::make(12, config.grids.n_theta, config.transverse().r_max);
    const TimeGrid t = config.time();
    const FieldGrid f = evaluate_driver(driver, g, t);
    double worst = 0.0;
    const auto rotations = commensurate_rotations(g, t, p.tau_omega);
    for (int k : rotations) worst = std::max(worst, symmetry_residual(f, p, k * g.dtheta()));
    add("driver symmetry residual", !rotations.empty() && worst < 1e-10, sci(worst), "< 1e-10", perturbed);
    double comp = 0.0;
    int tested = 0;
    for (int k = 1; k < g.n_theta && tested < 4; ++k) {
      try {
        const auto res = component_invariance_residuals(f, p, driver.fundamental.oam, driver.second.oam, k);
        for (double v : res) comp = std::max(comp, v);
        ++tested;
      } catch (const std::invalid_argument&) {
        // some component delay is off the time grid for this rotation
      }
    }
    add("component invariance residual", tested > 0 && comp < 1e-10, sci(comp), "< 1e-10", perturbed);
  }

  // T22 covariance on a synthetic field
  {
    const double sigma = units::rad(config.analysis.sigma_deg) / driver.omega;
    const double res = t22_covariance_residual(detail::synthetic_xuv_field(driver.omega, sigma), 3, p.gamma, sigma);
    add("T22 rotation covariance", res < 1e-8, sci(res), "< 1e-8");
  }

  const RunResults r = run_pipeline(config);
  add("pipeline", r.ok(), r.ok() ? "ok" : r.failed_stage + ": " + r.error, "completes");
  if (!r.ok() || r.emission_empty) return rep;

  {
    double worst = 0.0;
    for (int q = config.analysis.q_lo; q <= config.analysis.q_hi; ++q)
      if (q % 3 != 0) worst = std::max(worst, r.parseval_error.at(q));
    add("Parseval near/far", worst <= 1e-3, sci(worst), "<= 1e-3");
  }
  if (r.conservation) {
    const auto& c = *r.conservation;
    add("TKAM lattice match", c.all_match(), c.all_match() ? "all" : "mismatch", "every allowed q", perturbed);
    const double rel = std::abs(c.slope - to_double(p.j1)) / std::max(1e-300, std::abs(to_double(p.j1)));
    add("TKAM slope", to_double(p.j1) == 0.0 ? std::abs(c.slope) < 1e-2 : rel <= 0.01, fixed(c.slope, 5),
        to_string(p.j1) + " within 1%", perturbed);
    add("TKAM purity", c.min_purity() >= config.analysis.purity_min, fixed(c.min_purity(), 4),
        ">= " + fixed(config.analysis.purity_min, 2), perturbed);
  }
  {
    double worst = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& [q, s] : r.suppression) {
      if (q < config.analysis.q_lo || q > config.analysis.q_hi || !s.applicable) continue;
      any = true;
      worst = std::min(worst, s.db);
    }
    if (any)
      add("forbidden-line suppression", worst >= config.analysis.suppression_db, fixed(worst, 1) + " dB",
          ">= " + fixed(config.analysis.suppression_db, 0) + " dB");
    else
      rep.checks.push_back({"forbidden-line suppression", CheckStatus::skipped, "no trefoil lines", ""});
    double purity = 1.0;
    bool signs = true;
    for (const auto& l : r.lines) {
      if (l.q < config.analysis.q_lo || l.q > config.analysis.q_hi || l.q % 3 == 0) continue;
      purity = std::min(purity, l.helicity.purity);
      signs = signs && l.helicity.sam == (l.q % 3 == 1 ? +1 : -1);
    }
    add("helicity purity", purity >= config.analysis.helicity_purity_min, fixed(purity, 4),
        ">= " + fixed(config.analysis.helicity_purity_min, 2));
    add("helicity 3n+-1 signs", signs, signs ? "alternating" : "wrong sign", "S_q = +1 (q=3n+1), -1 (q=3n-1)");
  }
  if (!r.apt && !r.emission_empty && r.map)
    add("APT spiral metrics", false, "no ridge followed", "ridges around the azimuth", perturbed);
  if (r.apt) {
    const auto& a = *r.apt;
    const double dd = std::abs(a.delay_per_revolution - p.tau() * units::two_pi);
    add("APT delay per revolution", dd <= r.time.dt(), fixed(a.delay_per_revolution, 4) + " fs",
        fixed(p.tau() * units::two_pi, 4) + " +- " + fixed(r.time.dt(), 4) + " fs", perturbed);
    const double expected_rot = units::deg(to_double(p.gamma) * units::two_pi);
    const double rot = units::deg(a.rotation_per_revolution);
    add("APT rotation per revolution", std::abs(rot - expected_rot) <= 5.0, fixed(rot, 2) + " deg",
        fixed(expected_rot, 1) + " +- 5 deg", perturbed);
    double worst = 0.0;
    for (double s : a.fixed_theta_steps) worst = std::max(worst, std::abs(units::deg(wrap_half_turn(s - units::rad(120.0)))));
    add("fixed-theta orientation steps", !a.fixed_theta_steps.empty() && worst <= 5.0, fixed(worst, 2) + " deg off",
        "120 deg (mod 180) +- 5", perturbed);
    add("|T22| vs intensity correlation", a.intensity_correlation >= 0.9, fixed(a.intensity_correlation, 4), ">= 0.9");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// report

inline std::string report(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::is_directory(dir)) throw std::runtime_error("output directory " + dir.string() + " does not exist");
  std::ifstream in(mpath);
  if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
  const json m = json::parse(in);
  const json& res = m.at("results");
  std::ostringstream o;
  o << "run: " << dir.string() << "  status: " << m.at("status").get<std::string>() << "  version "
    << m.at("code_version").get<std::string>() << "\n";
  if (m.contains("failed_stage"))
    o << "failed stage: " << m.at("failed_stage").get<std::string>() << " (" << m.at("error").get<std::string>() << ")\n";
  auto frac = [](const json& r) {
    const long long n = r.at(0), d = r.at(1);
    return d == 1 ? std::to_string(n) : std::to_string(n) + "/" + std::to_string(d);
  };
  o << "gamma = " << frac(res.at("gamma")) << ", j1 = " << frac(res.at("j1")) << ", local symmetry "
    << res.at("local_symmetry").get<std::string>() << "\n";
  if (res.contains("conservation")) {
    const json& c = res.at("conservation");
    o << "\nTKAM conservation: slope " << std::setprecision(6) << c.at("slope").get<double>() << " +- "
      << std::setprecision(2) << c.at("slope_uncertainty").get<double>() << " (expected " << frac(res.at("j1")) << ")\n";
    o << "  q   j       expected  m    s   purity  match\n";
    for (const auto& h : c.at("harmonics")) {
      o << "  " << std::setw(3) << std::left << h.at("q").get<int>() << " " << std::setw(7) << frac(h.at("dominant_j"))
        << " " << std::setw(9) << frac(h.at("expected_j")) << " " << std::setw(4) << h.at("dominant_m").get<int>() << " "
        << std::setw(3) << std::showpos << h.at("dominant_s").get<int>() << std::noshowpos << " " << std::fixed
        << std::setprecision(4) << h.at("purity").get<double>() << "  " << (h.at("match").get<bool>() ? "yes" : "NO")
        << "\n";
      o.unsetf(std::ios::fixed);
    }
  }
  if (res.contains("suppression")) {
    o << "\nforbidden lines (suppression below the mean of q+-1, q+-2):\n";
    for (const auto& s : res.at("suppression")) {
      const int q = s.at("q");
      if (q != 9 && q != 12 && q != 15) continue;
      o << "  H" << q << ": ";
      if (!s.at("applicable").get<bool>())
        o << "n/a (driver not trefoil)\n";
      else if (s.at("db").is_null())
        o << "line absent\n";
      else
        o << std::fixed << std::setprecision(1) << s.at("db").get<double>() << " dB\n";
      o.unsetf(std::ios::fixed);
    }
  }
  if (res.contains("apt")) {
    const json& a = res.at("apt");
    o << std::fixed << std::setprecision(4) << "\nspiral: delay per revolution " << a.at("delay_per_revolution_fs").get<double>()
      << " fs (expected " << a.at("expected_delay_per_revolution_fs").get<double>() << "), rotation "
      << std::setprecision(2) << a.at("rotation_per_revolution_deg").get<double>() << " deg (expected "
      << a.at("expected_rotation_per_revolution_deg").get<double>() << "), |T22|-intensity correlation "
      << std::setprecision(3) << a.at("intensity_correlation").get<double>() << "\n";
    o << "  fixed-theta orientation steps (deg):";
    for (const auto& s : a.at("fixed_theta_steps_deg")) o << " " << std::setprecision(1) << s.get<double>();
    o << "\n";
    o.unsetf(std::ios::fixed);
  }
  if (!m.at("warnings").empty()) {
    o << "\nwarnings:\n";
    for (const auto& w : m.at("warnings")) o << "  " << w.get<std::string>() << "\n";
  }
  return o.str();
}

} // namespace tkam
