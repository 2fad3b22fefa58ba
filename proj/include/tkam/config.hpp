#pragma once

// Run configuration: a small INI dialect.
//
//   # comment            (also ';'; whole-line or after whitespace)
//   [section]
//   key = value
//
// Keys are unique within a section, sections may not repeat, every key must
// be known. Errors carry the 1-based line number of the offending entry.

#include <tkam/field_synthesis.hpp>
#include <tkam/local_response.hpp>

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tkam {

class ConfigError : public std::runtime_error {
public:
  ConfigError(int line, const std::string& what, std::string key = {})
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line),
        key_(std::move(key)) {}
  int line() const { return line_; }
  // "section.key" the error refers to, when known
  const std::string& key() const { return key_; }

private:
  int line_;
  std::string key_;
};

struct IniEntry {
  std::string value;
  int line = 0;
};

struct IniDocument {
  std::map<std::string, std::map<std::string, IniEntry>> sections;
  std::map<std::string, int> section_lines;

  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  static std::string strip_comment(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i)
      if ((s[i] == '#' || s[i] == ';') && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) return s.substr(0, i);
    return s;
  }

  static IniDocument parse(const std::string& text) {
    IniDocument doc;
    std::istringstream in(text);
    std::string raw, current;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const std::string s = trim(strip_comment(raw));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(line, "unterminated section header");
        current = trim(std::string_view(s).substr(1, s.size() - 2));
        if (current.empty()) throw ConfigError(line, "empty section name");
        if (doc.section_lines.count(current)) throw ConfigError(line, "section [" + current + "] repeated");
        doc.section_lines[current] = line;
        doc.sections[current];
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
      if (current.empty()) throw ConfigError(line, "key outside of any section");
      const std::string key = trim(std::string_view(s).substr(0, eq));
      const std::string value = trim(std::string_view(s).substr(eq + 1));
      if (key.empty()) throw ConfigError(line, "empty key");
      auto& sec = doc.sections[current];
      if (sec.count(key)) throw ConfigError(line, "duplicate key '" + key + "' in [" + current + "]");
      sec[key] = {value, line};
    }
    return doc;
  }

  // "section.key=value"; creates the section when missing
  void apply_override(const std::string& spec) {
    const auto eq = spec.find('=');
    const auto dot = spec.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError(0, "override '" + spec + "' must look like section.key=value");
    const std::string sec = trim(std::string_view(spec).substr(0, dot));
    const std::string key = trim(std::string_view(spec).substr(dot + 1, eq - dot - 1));
    if (sec.empty() || key.empty()) throw ConfigError(0, "override '" + spec + "' has an empty section or key");
    sections[sec][key] = {trim(std::string_view(spec).substr(eq + 1)), 0};
  }
};

// ---------------------------------------------------------------------------
// typed configuration

struct DriverConfig {
  int l1 = 1;
  int l2 = 1;
  double wavelength_nm = 800.0;
  double total_intensity_wcm2 = 2e14;
  double intensity_ratio = 1.0; // I(2w) / I(w)
  double waist_um = 30.0;
  double ramp_up_fs = 5.3;
  double flat_fs = 10.7;
  double ramp_down_fs = 5.3;
  std::optional<Rational> gamma; // optional consistency assertion
};

struct PerturbationConfig {
  bool enabled = false;
  double fraction = 0.10;
  PerturbationPhase phase = PerturbationPhase::in_phase;
  double width_um = 0.0; // 0: waist / sqrt2
};

enum class ModelType { surrogate, sfa };

struct ModelConfig {
  ModelType type = ModelType::surrogate;
  double effective_order = 4.0;
  double alpha0 = 0.0;
  int q_min = 4;
  int q_max = 30;
  double ip_ev = units::argon_ip_ev;
  double sfa_tolerance = 0.1;
  TrajectoryClass trajectories = TrajectoryClass::all;
};

struct GridConfig {
  int n_r = 120;
  int n_theta = 128;
  double r_max_um = 0.0; // 0: 3 waists
  int samples_per_2w_cycle = 64;
  double padding_fs = 5.0;
  int n_beta = 100;
  double beta_max_rad = 0.0; // 0: automatic
};

struct AnalysisConfig {
  int q_lo = 10;
  int q_hi = 20;
  int apt_q_min = 10;
  double sigma_deg = 15.0;
  double power_fraction = 0.8;
  double ridge_threshold = 0.1;
  int upsample = 2;
  double map_cycles = 4.0;
  double purity_min = 0.95;
  double helicity_purity_min = 0.9;
  double suppression_db = 20.0;
  int apt_grid_points = 48;
  int apt_grid_stride = 2;
};

struct OutputConfig {
  std::string directory = "out";
};

struct RunConfig {
  DriverConfig driver;
  PerturbationConfig perturbation;
  ModelConfig model;
  GridConfig grids;
  AnalysisConfig analysis;
  OutputConfig output;

  double omega() const { return units::omega_from_wavelength_nm(driver.wavelength_nm); }

  DriverSpec driver_spec() const {
    DriverSpec d = make_bicircular_driver(driver.l1, driver.l2, driver.wavelength_nm, driver.total_intensity_wcm2,
                                          driver.intensity_ratio, driver.waist_um);
    d.envelope = {driver.ramp_up_fs, driver.flat_fs, driver.ramp_down_fs};
    if (perturbation.enabled) {
      PerturbationSpec p;
      p.fraction = perturbation.fraction;
      p.relative_phase = perturbation.phase;
      p.donut_width = perturbation.width_um > 0.0 ? perturbation.width_um : driver.waist_um / std::numbers::sqrt2;
      d.perturbation = p;
    }
    return d;
  }

  TransverseGrid transverse() const {
    return TransverseGrid::make(grids.n_r, grids.n_theta, grids.r_max_um > 0.0 ? grids.r_max_um : 3.0 * driver.waist_um);
  }

  TimeGrid time() const {
    const double duration = driver.ramp_up_fs + driver.flat_fs + driver.ramp_down_fs;
    return TimeGrid::covering(omega(), grids.samples_per_2w_cycle, duration, grids.padding_fs);
  }

  bool perturbed() const { return perturbation.enabled && perturbation.fraction > 0.0; }

  void validate() const;
  std::string to_ini() const;
  static RunConfig from_ini(const IniDocument& doc);
  static RunConfig parse(const std::string& text, const std::vector<std::string>& overrides = {}) {
    IniDocument doc = IniDocument::parse(text);
    for (const auto& o : overrides) doc.apply_override(o);
    return from_ini(doc);
  }
};

namespace detail {

inline double parse_double(const IniEntry& e, const std::string& key) {
  double v = 0.0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v))
    throw ConfigError(e.line, key + ": expected a finite number, got '" + e.value + "'");
  return v;
}

inline int parse_int(const IniEntry& e, const std::string& key) {
  int v = 0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end) throw ConfigError(e.line, key + ": expected an integer, got '" + e.value + "'");
  return v;
}

inline bool parse_bool(const IniEntry& e, const std::string& key) {
  if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "no" || e.value == "0") return false;
  throw ConfigError(e.line, key + ": expected true or false, got '" + e.value + "'");
}

inline Rational parse_rational(const IniEntry& e, const std::string& key) {
  const auto slash = e.value.find('/');
  IniEntry num{e.value.substr(0, slash), e.line};
  const int n = parse_int(num, key);
  int d = 1;
  if (slash != std::string::npos) d = parse_int({e.value.substr(slash + 1), e.line}, key);
  if (d == 0) throw ConfigError(e.line, key + ": zero denominator");
  return Rational(n, d);
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Reads known keys of one section and rejects the rest.
class SectionReader {
public:
  SectionReader(const IniDocument& doc, const std::string& name) : name_(name) {
    auto it = doc.sections.find(name);
    if (it != doc.sections.end()) entries_ = &it->second;
  }

  template <class F>
  void get(const std::string& key, F&& assign) {
    known_.push_back(key);
    if (!entries_) return;
    auto it = entries_->find(key);
    if (it != entries_->end()) assign(it->second, name_ + "." + key);
  }
  void number(const std::string& key, double& out) {
    get(key, [&](const IniEntry& e, const std::string& k) { out = parse_double(e, k); });
  }
  void integer(const std::string& key, int& out) {
    get(key, [&](const IniEntry& e, const std::string& k) { out = parse_int(e, k); });
  }
  void boolean(const std::string& key, bool& out) {
    get(key, [&](const IniEntry& e, const std::string& k) { out = parse_bool(e, k); });
  }

  void finish() const {
    if (!entries_) return;
    for (const auto& [key, e] : *entries_)
      if (std::find(known_.begin(), known_.end(), key) == known_.end())
        throw ConfigError(e.line, "unknown key '" + key + "' in [" + name_ + "]");
  }

private:
  std::string name_;
  const std::map<std::string, IniEntry>* entries_ = nullptr;
  std::vector<std::string> known_;
};

inline int entry_line(const IniDocument& doc, const std::string& section, const std::string& key) {
  auto s = doc.sections.find(section);
  if (s == doc.sections.end()) return 0;
  auto k = s->second.find(key);
  return k == s->second.end() ? doc.section_lines.count(section) ? doc.section_lines.at(section) : 0 : k->second.line;
}

} // namespace detail

inline RunConfig RunConfig::from_ini(const IniDocument& doc) {
  static const std::vector<std::string> known_sections = {"driver", "perturbation", "model", "grids", "analysis", "output"};
  for (const auto& [name, entries] : doc.sections)
    if (std::find(known_sections.begin(), known_sections.end(), name) == known_sections.end()) {
      const auto it = doc.section_lines.find(name);
      throw ConfigError(it != doc.section_lines.end() ? it->second : 0, "unknown section [" + name + "]");
    }

  RunConfig c;
  using detail::SectionReader;
  {
    SectionReader r(doc, "driver");
    r.integer("l1", c.driver.l1);
    r.integer("l2", c.driver.l2);
    r.number("wavelength_nm", c.driver.wavelength_nm);
    r.number("total_intensity_wcm2", c.driver.total_intensity_wcm2);
    r.number("intensity_ratio", c.driver.intensity_ratio);
    r.number("waist_um", c.driver.waist_um);
    r.number("ramp_up_fs", c.driver.ramp_up_fs);
    r.number("flat_fs", c.driver.flat_fs);
    r.number("ramp_down_fs", c.driver.ramp_down_fs);
    r.get("gamma", [&](const IniEntry& e, const std::string& k) {
      const Rational g = detail::parse_rational(e, k);
      if ((g * 3LL).denominator() != 1) throw ConfigError(e.line, k + ": " + to_string(g) + " is not on the 1/3 lattice");
      c.driver.gamma = g;
    });
    r.finish();
  }
  {
    SectionReader r(doc, "perturbation");
    r.boolean("enabled", c.perturbation.enabled);
    r.number("fraction", c.perturbation.fraction);
    r.get("phase", [&](const IniEntry& e, const std::string& k) {
      if (e.value == "in_phase")
        c.perturbation.phase = PerturbationPhase::in_phase;
      else if (e.value == "out_of_phase")
        c.perturbation.phase = PerturbationPhase::out_of_phase;
      else
        throw ConfigError(e.line, k + ": expected in_phase or out_of_phase");
    });
    r.number("width_um", c.perturbation.width_um);
    r.finish();
  }
  {
    SectionReader r(doc, "model");
    r.get("type", [&](const IniEntry& e, const std::string& k) {
      if (e.value == "surrogate")
        c.model.type = ModelType::surrogate;
      else if (e.value == "sfa")
        c.model.type = ModelType::sfa;
      else
        throw ConfigError(e.line, k + ": expected surrogate or sfa");
    });
    r.number("effective_order", c.model.effective_order);
    r.number("alpha0", c.model.alpha0);
    r.integer("q_min", c.model.q_min);
    r.integer("q_max", c.model.q_max);
    r.number("ip_ev", c.model.ip_ev);
    r.number("sfa_tolerance", c.model.sfa_tolerance);
    r.get("trajectories", [&](const IniEntry& e, const std::string& k) {
      if (e.value == "short")
        c.model.trajectories = TrajectoryClass::short_only;
      else if (e.value == "long")
        c.model.trajectories = TrajectoryClass::long_only;
      else if (e.value == "all")
        c.model.trajectories = TrajectoryClass::all;
      else
        throw ConfigError(e.line, k + ": expected short, long or all");
    });
    r.finish();
  }
  {
    SectionReader r(doc, "grids");
    r.integer("n_r", c.grids.n_r);
    r.integer("n_theta", c.grids.n_theta);
    r.number("r_max_um", c.grids.r_max_um);
    r.integer("samples_per_2w_cycle", c.grids.samples_per_2w_cycle);
    r.number("padding_fs", c.grids.padding_fs);
    r.integer("n_beta", c.grids.n_beta);
    r.number("beta_max_rad", c.grids.beta_max_rad);
    r.finish();
  }
  {
    SectionReader r(doc, "analysis");
    r.integer("q_lo", c.analysis.q_lo);
    r.integer("q_hi", c.analysis.q_hi);
    r.integer("apt_q_min", c.analysis.apt_q_min);
    r.number("sigma_deg", c.analysis.sigma_deg);
    r.number("power_fraction", c.analysis.power_fraction);
    r.number("ridge_threshold", c.analysis.ridge_threshold);
    r.integer("upsample", c.analysis.upsample);
    r.number("map_cycles", c.analysis.map_cycles);
    r.number("purity_min", c.analysis.purity_min);
    r.number("helicity_purity_min", c.analysis.helicity_purity_min);
    r.number("suppression_db", c.analysis.suppression_db);
    r.integer("apt_grid_points", c.analysis.apt_grid_points);
    r.integer("apt_grid_stride", c.analysis.apt_grid_stride);
    r.finish();
  }
  {
    SectionReader r(doc, "output");
    r.get("directory", [&](const IniEntry& e, const std::string& k) {
      if (e.value.empty()) throw ConfigError(e.line, k + ": empty directory");
      c.output.directory = e.value;
    });
    r.finish();
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    if (e.key().empty() || e.line() > 0) throw;
    const auto dot = e.key().find('.');
    const int line = dot == std::string::npos ? 0 : detail::entry_line(doc, e.key().substr(0, dot), e.key().substr(dot + 1));
    throw ConfigError(line, e.what(), e.key());
  }
  // attach line numbers to semantic errors where a single key is at fault
  if (c.driver.gamma && *c.driver.gamma != coordination_parameter(c.driver.l1, c.driver.l2))
    throw ConfigError(detail::entry_line(doc, "driver", "gamma"),
                      "driver.gamma = " + to_string(*c.driver.gamma) + " disagrees with (l2 - 2 l1)/3 = " +
                          to_string(coordination_parameter(c.driver.l1, c.driver.l2)));
  return c;
}

inline void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& m) { throw ConfigError(0, key + ' ' + m, key); };
  if (!(driver.wavelength_nm > 0.0)) fail("driver.wavelength_nm", "must be positive");
  if (!(driver.total_intensity_wcm2 >= 0.0)) fail("driver.total_intensity_wcm2", "must be non-negative");
  if (!(driver.intensity_ratio > 0.0)) fail("driver.intensity_ratio", "must be positive");
  if (!(driver.waist_um > 0.0)) fail("driver.waist_um", "must be positive");
  if (!(driver.ramp_up_fs >= 0.0 && driver.flat_fs >= 0.0 && driver.ramp_down_fs >= 0.0) ||
      !(driver.ramp_up_fs + driver.flat_fs + driver.ramp_down_fs > 0.0))
    fail("driver", "envelope: ramps and plateau must be non-negative with positive total");
  if (std::abs(driver.l1) > 20 || std::abs(driver.l2) > 20) fail("driver", "|l1|, |l2| must not exceed 20");
  if (perturbation.enabled && !(perturbation.fraction >= 0.0 && perturbation.fraction < 1.0))
    fail("perturbation.fraction", "must lie in [0, 1)");
  if (!(perturbation.width_um >= 0.0)) fail("perturbation.width_um", "must be non-negative");
  if (!(model.effective_order >= 1.0)) fail("model.effective_order", "must be >= 1");
  if (model.q_min < 1 || model.q_max < model.q_min) fail("model", "need 1 <= q_min <= q_max");
  if (!(model.ip_ev > 0.0)) fail("model.ip_ev", "must be positive");
  if (!(model.sfa_tolerance > 0.0)) fail("model.sfa_tolerance", "must be positive");
  if (grids.n_r < 2) fail("grids.n_r", "must be at least 2");
  if (grids.n_theta < 4 || (grids.n_theta & (grids.n_theta - 1)) != 0) fail("grids.n_theta", "must be a power of two >= 4");
  if (!(grids.r_max_um >= 0.0)) fail("grids.r_max_um", "must be non-negative");
  if (grids.samples_per_2w_cycle < 32) fail("grids.samples_per_2w_cycle", "must be at least 32");
  if (model.type == ModelType::sfa && grids.samples_per_2w_cycle < 64)
    fail("grids.samples_per_2w_cycle", "must be at least 64 for the sfa model");
  if (!(grids.padding_fs >= 0.0)) fail("grids.padding_fs", "must be non-negative");
  if (grids.n_beta < 2) fail("grids.n_beta", "must be at least 2");
  if (!(grids.beta_max_rad >= 0.0)) fail("grids.beta_max_rad", "must be non-negative");
  // harmonic q_max must stay below Nyquist: 2S samples per period resolve q < S
  if (model.q_max >= grids.samples_per_2w_cycle) fail("model.q_max", "must be below grids.samples_per_2w_cycle");
  if (analysis.q_lo < model.q_min || analysis.q_hi > model.q_max || analysis.q_hi < analysis.q_lo)
    fail("analysis.q_lo..q_hi", "must lie inside model.q_min..q_max");
  if (analysis.apt_q_min < model.q_min || analysis.apt_q_min > model.q_max)
    fail("analysis.apt_q_min", "must lie inside model.q_min..q_max");
  if (!(analysis.sigma_deg > 0.0)) fail("analysis.sigma_deg", "must be positive");
  if (!(analysis.power_fraction > 0.0 && analysis.power_fraction <= 1.0)) fail("analysis.power_fraction", "must lie in (0, 1]");
  if (!(analysis.ridge_threshold > 0.0 && analysis.ridge_threshold < 1.0)) fail("analysis.ridge_threshold", "must lie in (0, 1)");
  if (analysis.upsample < 1) fail("analysis.upsample", "must be >= 1");
  if (!(analysis.map_cycles > 0.0)) fail("analysis.map_cycles", "must be positive");
  if (analysis.apt_grid_points < 2) fail("analysis.apt_grid_points", "must be >= 2");
  if (analysis.apt_grid_stride < 1) fail("analysis.apt_grid_stride", "must be >= 1");
}

inline std::string RunConfig::to_ini() const {
  using detail::format_double;
  std::ostringstream o;
  auto traj = [](TrajectoryClass t) {
    return t == TrajectoryClass::short_only ? "short" : t == TrajectoryClass::long_only ? "long" : "all";
  };
  o << "[driver]\n"
    << "l1 = " << driver.l1 << "\n"
    << "l2 = " << driver.l2 << "\n"
    << "wavelength_nm = " << format_double(driver.wavelength_nm) << "\n"
    << "total_intensity_wcm2 = " << format_double(driver.total_intensity_wcm2) << "\n"
    << "intensity_ratio = " << format_double(driver.intensity_ratio) << "\n"
    << "waist_um = " << format_double(driver.waist_um) << "\n"
    << "ramp_up_fs = " << format_double(driver.ramp_up_fs) << "\n"
    << "flat_fs = " << format_double(driver.flat_fs) << "\n"
    << "ramp_down_fs = " << format_double(driver.ramp_down_fs) << "\n";
  if (driver.gamma) o << "gamma = " << to_string(*driver.gamma) << "\n";
  o << "\n[perturbation]\n"
    << "enabled = " << (perturbation.enabled ? "true" : "false") << "\n"
    << "fraction = " << format_double(perturbation.fraction) << "\n"
    << "phase = " << (perturbation.phase == PerturbationPhase::in_phase ? "in_phase" : "out_of_phase") << "\n"
    << "width_um = " << format_double(perturbation.width_um) << "\n"
    << "\n[model]\n"
    << "type = " << (model.type == ModelType::surrogate ? "surrogate" : "sfa") << "\n"
    << "effective_order = " << format_double(model.effective_order) << "\n"
    << "alpha0 = " << format_double(model.alpha0) << "\n"
    << "q_min = " << model.q_min << "\n"
    << "q_max = " << model.q_max << "\n"
    << "ip_ev = " << format_double(model.ip_ev) << "\n"
    << "sfa_tolerance = " << format_double(model.sfa_tolerance) << "\n"
    << "trajectories = " << traj(model.trajectories) << "\n"
    << "\n[grids]\n"
    << "n_r = " << grids.n_r << "\n"
    << "n_theta = " << grids.n_theta << "\n"
    << "r_max_um = " << format_double(grids.r_max_um) << "\n"
    << "samples_per_2w_cycle = " << grids.samples_per_2w_cycle << "\n"
    << "padding_fs = " << format_double(grids.padding_fs) << "\n"
    << "n_beta = " << grids.n_beta << "\n"
    << "beta_max_rad = " << format_double(grids.beta_max_rad) << "\n"
    << "\n[analysis]\n"
    << "q_lo = " << analysis.q_lo << "\n"
    << "q_hi = " << analysis.q_hi << "\n"
    << "apt_q_min = " << analysis.apt_q_min << "\n"
    << "sigma_deg = " << format_double(analysis.sigma_deg) << "\n"
    << "power_fraction = " << format_double(analysis.power_fraction) << "\n"
    << "ridge_threshold = " << format_double(analysis.ridge_threshold) << "\n"
    << "upsample = " << analysis.upsample << "\n"
    << "map_cycles = " << format_double(analysis.map_cycles) << "\n"
    << "purity_min = " << format_double(analysis.purity_min) << "\n"
    << "helicity_purity_min = " << format_double(analysis.helicity_purity_min) << "\n"
    << "suppression_db = " << format_double(analysis.suppression_db) << "\n"
    << "apt_grid_points = " << analysis.apt_grid_points << "\n"
    << "apt_grid_stride = " << analysis.apt_grid_stride << "\n"
    << "\n[output]\n"
    << "directory = " << output.directory << "\n";
  return o.str();
}

} // namespace tkam
