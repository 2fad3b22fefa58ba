// tkam: command-line driver for the bicircular vortex HHG simulator.
//
//   tkam simulate <config.ini> [--threads N] [--override section.key=value]...
//   tkam verify   <config.ini> [--threads N] [--override ...]
//   tkam report   <output-dir>
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure or failed checks.

#include <tkam/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

int simulate(const std::string& path, const std::vector<std::string>& overrides) {
  const tkam::RunConfig config = tkam::load_config(path, overrides);
  const tkam::RunResults r = tkam::run_pipeline(config);
  tkam::write_outputs(r, config.output.directory);
  for (const auto& t : r.timings) std::cerr << "  " << t.stage << ": " << t.seconds << " s\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  if (!r.ok()) {
    std::cerr << "error: stage " << r.failed_stage << " failed: " << r.error << "\n";
    return 2;
  }
  std::cout << "outputs written to " << config.output.directory << "\n";
  return 0;
}

int verify(const std::string& path, const std::vector<std::string>& overrides) {
  const tkam::RunConfig config = tkam::load_config(path, overrides);
  const tkam::VerifyReport rep = tkam::verify(config);
  std::cout << rep.table();
  return rep.ok() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bicircular vortex beam HHG: TKAM conservation simulator"};
  app.require_subcommand(1);
  unsigned threads = 1;
  std::vector<std::string> overrides;
  app.add_option("--threads", threads, "worker threads (0: all cores)");

  std::string sim_path, verify_path, report_dir;
  auto* sim = app.add_subcommand("simulate", "run the pipeline and write outputs");
  sim->add_option("config", sim_path, "run configuration (INI)")->required();
  sim->add_option("--override", overrides, "section.key=value, applied after the file");
  auto* ver = app.add_subcommand("verify", "run the invariant suite and print a table");
  ver->add_option("config", verify_path, "run configuration (INI)")->required();
  ver->add_option("--override", overrides, "section.key=value, applied after the file");
  auto* rep = app.add_subcommand("report", "summarize an output directory");
  rep->add_option("dir", report_dir, "output directory of a previous simulate")->required();
  for (auto* sub : {sim, ver}) sub->add_option("--threads", threads, "worker threads (0: all cores)");

  CLI11_PARSE(app, argc, argv);
  tkam::thread_count() = threads;
  try {
    if (*sim) return simulate(sim_path, overrides);
    if (*ver) return verify(verify_path, overrides);
    if (*rep) {
      std::cout << tkam::report(report_dir);
      return 0;
    }
  } catch (const tkam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
