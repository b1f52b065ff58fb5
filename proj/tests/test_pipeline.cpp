#include <doctest.h>

#include "npspec/error.hpp"
#include "npspec/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace npspec;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::path(NPSPEC_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunConfig small_sphere(const fs::path& out) {
  RunConfig c;
  c.n_u = 8;
  c.n_v = 16;
  c.j_max = 60;
  c.grid_n = 24;
  c.azimuths = 3;
  c.out_dir = out;
  c.threads = 1;
  c.deterministic = true;
  return c;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + NPSPEC_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

} // namespace

TEST_CASE("config parsing") {
  const RunConfig c = config_from_json(json::parse(R"({"surface":"torus","n_u":12,"epsilon":"auto","j_max":80})"));
  CHECK(c.surface == SurfaceKind::CliffordTorus);
  CHECK(c.n_u == 12);
  CHECK(c.epsilon == 0.0);
  CHECK(c.j_max == 80);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"n_uu":12})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"n_u":"twelve"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"epsilon":"small"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"([1,2])")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"surface":"cube"})")), ConfigError);

  const RunConfig round = config_from_json(config_to_json(c));
  CHECK(round.surface == c.surface);
  CHECK(round.n_u == c.n_u);
  CHECK(round.j_max == c.j_max);
  CHECK(round.calr_direction.isApprox(c.calr_direction));

  RunConfig bad = small_sphere("x");
  bad.j_max = 10;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = small_sphere("x");
  bad.outlier_window = 4;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = small_sphere("x");
  bad.params.radius = -1;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  CHECK_NOTHROW(validate_config(small_sphere("x")));
}

TEST_CASE("config errors surface as the config stage") {
  RunConfig c = small_sphere(scratch_dir("cfg_err"));
  c.grid_n = 2;
  try {
    run_pipeline(c, Command::Report);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "config");
    CHECK(e.kind() == PipelineError::Kind::Config);
  }
}

TEST_CASE("pipeline runs are deterministic and cacheable") {
  const fs::path root = scratch_dir("determinism");
  RunConfig a = small_sphere(root / "a");
  a.cache = false;
  RunConfig b = small_sphere(root / "b");
  b.cache = false;
  const RunSummary ra = run_pipeline(a, Command::Report);
  const RunSummary rb = run_pipeline(b, Command::Report);
  CHECK_FALSE(ra.cache_hit);
  CHECK(ra.manifest.at("valid").get<bool>());
  for (const char* f : {"spectrum.csv", "spectrum_positive.csv", "norms.csv", "calr.csv", "calr.json", "mesh.obj",
                        "field_j001.csv"}) {
    INFO(f);
    REQUIRE(fs::exists(root / "a" / f));
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }

  RunConfig cached = small_sphere(root / "c");
  cached.cache_dir = root / "cache";
  const RunSummary first = run_pipeline(cached, Command::Spectrum);
  const RunSummary second = run_pipeline(cached, Command::Spectrum);
  CHECK_FALSE(first.cache_hit);
  CHECK(second.cache_hit);
  CHECK(slurp(root / "c" / "spectrum.csv") == slurp(root / "a" / "spectrum.csv"));
  CHECK(first.manifest.at("cache_key") == second.manifest.at("cache_key"));

  // Changing a non-geometric option must not invalidate the cache.
  cached.j_max = 70;
  CHECK(run_pipeline(cached, Command::Decay).cache_hit);
  // Changing the mesh must.
  cached.n_u = 10;
  CHECK_FALSE(run_pipeline(cached, Command::Spectrum).cache_hit);

  const json self = compare_report(root / "a", root / "b");
  CHECK(self.at("diff").empty());
  CHECK(self.at("warnings").empty());
}

TEST_CASE("compare reports differing runs") {
  const fs::path root = scratch_dir("compare");
  RunConfig a = small_sphere(root / "a");
  RunConfig b = small_sphere(root / "b");
  a.cache_dir = b.cache_dir = root / "cache";
  b.j_max = 80;
  run_pipeline(a, Command::Report);
  run_pipeline(b, Command::Report);
  const json r = compare_report(root / "a", root / "b");
  CHECK_FALSE(r.at("warnings").empty());
  CHECK(r.contains("side_by_side"));
  CHECK_THROWS(compare_report(root / "a", root / "missing"));
}

TEST_CASE("command line exit codes") {
  const fs::path root = scratch_dir("cli");
  const fs::path log = root / "log.txt";

  CHECK(run_cli("--version", log) == 0);
  CHECK(run_cli("frobnicate", log) == 2);
  CHECK(run_cli("spectrum --threads -3", log) == 2);

  std::ofstream(root / "bad.json") << R"({"n_u": 8, "bogus": 1})";
  CHECK(run_cli("spectrum --config \"" + (root / "bad.json").string() + "\" --out \"" + (root / "o1").string() + "\"",
                log) == 2);
  CHECK(slurp(log).find("config") != std::string::npos);

  std::ofstream(root / "flat.json")
      << R"({"surface":"spheroid","equatorial_radius":1,"polar_radius":1e-9,"n_u":4,"n_v":4})";
  CHECK(run_cli("spectrum --no-cache --config \"" + (root / "flat.json").string() + "\" --out \"" +
                    (root / "o2").string() + "\"",
                log) == 3);
  CHECK(slurp(log).find("stage spectrum") != std::string::npos);
  const json failed = json::parse(slurp(root / "o2" / "manifest.json"));
  CHECK_FALSE(failed.at("valid").get<bool>());
  CHECK(failed.at("failed_stage") == "spectrum");

  std::ofstream(root / "ok.json") << R"({"n_u": 8, "n_v": 16, "j_max": 60, "grid_n": 24, "azimuths": 3})";
  const std::string ok = "--config \"" + (root / "ok.json").string() + "\" --threads 1 --deterministic --no-cache";
  CHECK(run_cli("mesh " + ok + " --out \"" + (root / "m").string() + "\"", log) == 0);
  CHECK(fs::exists(root / "m" / "mesh.obj"));
  CHECK(run_cli("decay " + ok + " --j-max 55 --out \"" + (root / "d").string() + "\"", log) == 0);
  const json m = json::parse(slurp(root / "d" / "manifest.json"));
  CHECK(m.at("config").at("j_max") == 55);
  CHECK(run_cli("compare \"" + (root / "d").string() + "\" \"" + (root / "d").string() + "\" --out \"" +
                    (root / "cmp.json").string() + "\"",
                log) == 0);
  CHECK(json::parse(slurp(root / "cmp.json")).at("diff").empty());
}
