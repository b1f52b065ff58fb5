// npspec command line driver: mesh, spectrum, plasmon, decay, calr, report, compare.

#include "npspec/error.hpp"
#include "npspec/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Overrides {
  std::string config;
  std::string out;
  int threads = -1;
  bool deterministic = false;
  std::optional<bool> cache;
  long j_max = -1;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--threads", o.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  sub->add_flag("--deterministic", o.deterministic, "single-threaded BLAS for reproducible reductions");
  sub->add_flag_function("--cache,!--no-cache", [&o](std::int64_t n) { o.cache = n > 0; },
                         "reuse cached operators and spectrum");
  sub->add_option("--j-max", o.j_max, "largest plasmon index in decay reports")->check(CLI::PositiveNumber);
}

npspec::RunConfig resolve(const Overrides& o) {
  npspec::RunConfig c = o.config.empty() ? npspec::RunConfig{} : npspec::load_config(o.config);
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.threads >= 0) c.threads = o.threads;
  if (o.deterministic) c.deterministic = true;
  if (o.cache) c.cache = *o.cache;
  if (o.j_max > 0) c.j_max = static_cast<std::size_t>(o.j_max);
  return c;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neumann-Poincare spectra, plasmons and CALR sweeps on closed surfaces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "npspec " NPSPEC_CLI_VERSION);

  Overrides o;
  const std::vector<std::pair<std::string, std::string>> stages = {
      {"mesh", "triangulate the surface and write mesh.obj"},
      {"spectrum", "assemble operators and write the NP spectrum"},
      {"plasmon", "write plasmon field dumps over the cross-section region"},
      {"decay", "region norms, decay fit and exceptional-mode detection"},
      {"calr", "CALR energy sweep and verdict"},
      {"report", "run every stage"}};
  for (const auto& [name, help] : stages) add_common(app.add_subcommand(name, help), o);

  std::string run_a, run_b, compare_out;
  CLI::App* compare = app.add_subcommand("compare", "diff two completed runs");
  compare->add_option("run_a", run_a, "first run directory")->required();
  compare->add_option("run_b", run_b, "second run directory")->required();
  compare->add_option("--out", compare_out, "write the JSON diff to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (compare->parsed()) {
    try {
      const auto report = npspec::compare_report(run_a, run_b);
      for (const auto& w : report.at("warnings")) std::cerr << "npspec: warning: " << w.get<std::string>() << "\n";
      if (compare_out.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        std::ofstream os(compare_out, std::ios::binary | std::ios::trunc);
        if (!os) throw npspec::ConfigError("cannot write " + compare_out);
        os << report.dump(2) << "\n";
      }
      return kOk;
    } catch (const std::exception& e) {
      std::cerr << "npspec: stage compare: " << e.what() << "\n";
      return kConfigError;
    }
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const npspec::RunConfig config = resolve(o);
    const auto t0 = std::chrono::steady_clock::now();
    const auto summary = npspec::run_pipeline(config, npspec::command_from_string(name));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "npspec: " << name << " done in " << secs << " s"
              << (summary.cache_hit ? " (operators from cache)" : "") << "; outputs in " << config.out_dir.string()
              << "\n";
    return kOk;
  } catch (const npspec::PipelineError& e) {
    std::cerr << "npspec: stage " << e.stage() << ": " << e.what() << "\n";
    return e.kind() == npspec::PipelineError::Kind::Numerical ? kNumericalError : kConfigError;
  } catch (const npspec::ConfigError& e) {
    std::cerr << "npspec: stage config: " << e.what() << "\n";
    return kConfigError;
  }
}
