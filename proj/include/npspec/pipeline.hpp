#pragma once

#include "npspec/assembly.hpp"
#include "npspec/surface.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace npspec {

/// Flat configuration document; keys mirror the module parameters.
struct RunConfig {
  SurfaceKind surface = SurfaceKind::Sphere;
  SurfaceParams params;
  int n_u = 24;
  int n_v = 48;
  AssemblyOptions assembly;

  std::string region = "auto"; // "X", "Y" or "auto" (X for the torus, Y otherwise)
  double epsilon = 0;          // 0 = typical mesh edge
  int grid_n = 64;
  int azimuths = 31;
  std::size_t j_max = 150;
  int outlier_window = 21;
  double outlier_k = 5;
  std::vector<long> field_modes{1, 2, 3};

  std::optional<Vec3> calr_z;  // default: calr_distance along the normal
  double calr_distance = 1.0;
  Vec3 calr_direction = Vec3(1, 1, 1).normalized();
  double delta_min = 0;
  double delta_max = 0;
  int delta_points_per_decade = 40;
  double calr_tol = 0.1;

  std::filesystem::path out_dir = "npspec_out";
  bool cache = true;
  std::filesystem::path cache_dir; // empty = <out_dir>/cache
  int threads = 0;                 // 0 = hardware concurrency
  bool deterministic = false;
};

RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& config);

/// Throws ConfigError on any out-of-range parameter.
void validate_config(const RunConfig& config);

enum class Command { Mesh, Spectrum, Plasmon, Decay, Calr, Report };
Command command_from_string(const std::string& name);
std::string to_string(Command command);

/// Error raised by run_pipeline; `stage` names the failing stage.
class PipelineError : public std::runtime_error {
public:
  enum class Kind { Config, Numerical, Io };
  PipelineError(std::string stage, Kind kind, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)), kind_(kind) {}
  const std::string& stage() const { return stage_; }
  Kind kind() const { return kind_; }

private:
  std::string stage_;
  Kind kind_;
};

struct RunSummary {
  nlohmann::ordered_json manifest;
  bool cache_hit = false;
};

/// Runs the stages needed for `command` and writes artifacts plus
/// manifest.json into config.out_dir.
RunSummary run_pipeline(const RunConfig& config, Command command);

/// Side-by-side summary of two completed runs and the fields that differ.
nlohmann::ordered_json compare_report(const std::filesystem::path& run_a, const std::filesystem::path& run_b);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(const std::string& data);

} // namespace npspec
