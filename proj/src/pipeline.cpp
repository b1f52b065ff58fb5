#include "npspec/pipeline.hpp"

#include "npspec/calr.hpp"
#include "npspec/error.hpp"
#include "npspec/matrix_io.hpp"
#include "npspec/mesh.hpp"
#include "npspec/plasmon.hpp"
#include "npspec/region.hpp"
#include "npspec/spectrum.hpp"
#include "npspec/stats.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#ifdef NPSPEC_HAVE_OPENBLAS
extern "C" void openblas_set_num_threads(int);
#endif

#ifndef NPSPEC_VERSION
#define NPSPEC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace npspec {

namespace {

// Bumped whenever the cached matrix layout or the assembly scheme changes.
constexpr int kCacheFormat = 1;

template <class T>
T take(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

Vec3 take_vec(const json& doc, const char* key, const Vec3& fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  const json& v = doc.at(key);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
    throw ConfigError(std::string("config key '") + key + "' must be an array of three numbers");
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

ojson vec_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

std::string hex(const unsigned char* d, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < n; ++i) {
    out.push_back(digits[d[i] >> 4]);
    out.push_back(digits[d[i] & 15]);
  }
  return out;
}

class Sha256 {
public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string finish() {
    unsigned char d[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx_, d, &n);
    return hex(d, n);
  }

private:
  EVP_MD_CTX* ctx_;
};

RegionKind region_for(const RunConfig& c) {
  if (c.region == "auto") return c.surface == SurfaceKind::CliffordTorus ? RegionKind::X : RegionKind::Y;
  return region_kind_from_string(c.region);
}

int effective_threads(const RunConfig& c) {
  if (c.threads > 0) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Tracks the current stage so failures can be reported with its name.
struct Run {
  explicit Run(const RunConfig& c) : config(c) {}
  const RunConfig& config;
  std::string stage = "config";
  ojson manifest;
  ojson files = ojson::object();

  std::ofstream open(const std::string& name) {
    std::ofstream os(config.out_dir / name, std::ios::binary | std::ios::trunc);
    if (!os) throw PipelineError(stage, PipelineError::Kind::Io, "cannot write " + (config.out_dir / name).string());
    return os;
  }
  void record(const std::string& name) { files[name] = sha256_file(config.out_dir / name); }
};

Vec3 default_calr_point(const ParametricSurface& s, double distance) {
  const Vec3 far = 10.0 * Vec3(0.4, 0.3, std::sqrt(1.0 - 0.25)).normalized();
  const Vec3 q = s.project(far);
  return q + distance * s.normal_at(q);
}

std::string field_name(long j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "field_j%03ld.csv", j);
  return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// configuration

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {
      "surface", "radius", "equatorial_radius", "polar_radius", "major_radius", "minor_radius", "n_u", "n_v",
      "quadrature_degree", "near_field_factor", "max_subdivision", "region", "epsilon", "grid_n", "azimuths",
      "j_max", "outlier_window", "outlier_k", "field_modes", "calr_z", "calr_distance", "calr_direction",
      "delta_min", "delta_max", "delta_points_per_decade", "calr_tol", "out_dir", "cache", "cache_dir", "threads",
      "deterministic"};
  for (const auto& [key, value] : doc.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");

  RunConfig c;
  c.surface = surface_kind_from_string(take<std::string>(doc, "surface", std::string(to_string(c.surface))));
  c.params.radius = take(doc, "radius", c.params.radius);
  c.params.equatorial = take(doc, "equatorial_radius", c.params.equatorial);
  c.params.polar = take(doc, "polar_radius", c.params.polar);
  c.params.major = take(doc, "major_radius", c.params.major);
  c.params.minor = take(doc, "minor_radius", c.params.minor);
  c.n_u = take(doc, "n_u", c.n_u);
  c.n_v = take(doc, "n_v", c.n_v);
  c.assembly.quadrature_degree = take(doc, "quadrature_degree", c.assembly.quadrature_degree);
  c.assembly.near_field_factor = take(doc, "near_field_factor", c.assembly.near_field_factor);
  c.assembly.max_subdivision = take(doc, "max_subdivision", c.assembly.max_subdivision);
  c.region = take<std::string>(doc, "region", c.region);
  if (doc.contains("epsilon") && doc.at("epsilon").is_string()) {
    if (doc.at("epsilon").get<std::string>() != "auto") throw ConfigError("epsilon must be a number or \"auto\"");
    c.epsilon = 0;
  } else {
    c.epsilon = take(doc, "epsilon", c.epsilon);
  }
  c.grid_n = take(doc, "grid_n", c.grid_n);
  c.azimuths = take(doc, "azimuths", c.azimuths);
  const long j_max = take<long>(doc, "j_max", static_cast<long>(c.j_max));
  if (j_max < 1) throw ConfigError("j_max must be positive");
  c.j_max = static_cast<std::size_t>(j_max);
  c.outlier_window = take(doc, "outlier_window", c.outlier_window);
  c.outlier_k = take(doc, "outlier_k", c.outlier_k);
  c.field_modes = take(doc, "field_modes", c.field_modes);
  if (doc.contains("calr_z") && !doc.at("calr_z").is_null()) c.calr_z = take_vec(doc, "calr_z", Vec3::Zero());
  c.calr_distance = take(doc, "calr_distance", c.calr_distance);
  const Vec3 dir = take_vec(doc, "calr_direction", c.calr_direction);
  if (!(dir.norm() > 0.0)) throw ConfigError("calr_direction must be nonzero");
  c.calr_direction = dir.normalized();
  c.delta_min = take(doc, "delta_min", c.delta_min);
  c.delta_max = take(doc, "delta_max", c.delta_max);
  c.delta_points_per_decade = take(doc, "delta_points_per_decade", c.delta_points_per_decade);
  c.calr_tol = take(doc, "calr_tol", c.calr_tol);
  c.out_dir = take<std::string>(doc, "out_dir", c.out_dir.string());
  c.cache = take(doc, "cache", c.cache);
  c.cache_dir = take<std::string>(doc, "cache_dir", c.cache_dir.string());
  c.threads = take(doc, "threads", c.threads);
  c.deterministic = take(doc, "deterministic", c.deterministic);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

ojson config_to_json(const RunConfig& c) {
  ojson j;
  j["surface"] = std::string(to_string(c.surface));
  switch (c.surface) {
  case SurfaceKind::Sphere: j["radius"] = c.params.radius; break;
  case SurfaceKind::OblateSpheroid:
    j["equatorial_radius"] = c.params.equatorial;
    j["polar_radius"] = c.params.polar;
    break;
  case SurfaceKind::CliffordTorus:
    j["major_radius"] = c.params.major;
    j["minor_radius"] = c.params.minor;
    break;
  }
  j["n_u"] = c.n_u;
  j["n_v"] = c.n_v;
  j["quadrature_degree"] = c.assembly.quadrature_degree;
  j["near_field_factor"] = c.assembly.near_field_factor;
  j["max_subdivision"] = c.assembly.max_subdivision;
  j["region"] = c.region;
  j["epsilon"] = c.epsilon;
  j["grid_n"] = c.grid_n;
  j["azimuths"] = c.azimuths;
  j["j_max"] = c.j_max;
  j["outlier_window"] = c.outlier_window;
  j["outlier_k"] = c.outlier_k;
  j["field_modes"] = c.field_modes;
  j["calr_z"] = c.calr_z ? vec_json(*c.calr_z) : ojson(nullptr);
  j["calr_distance"] = c.calr_distance;
  j["calr_direction"] = vec_json(c.calr_direction);
  j["delta_min"] = c.delta_min;
  j["delta_max"] = c.delta_max;
  j["delta_points_per_decade"] = c.delta_points_per_decade;
  j["calr_tol"] = c.calr_tol;
  j["out_dir"] = c.out_dir.string();
  j["cache"] = c.cache;
  j["cache_dir"] = c.cache_dir.string();
  j["threads"] = c.threads;
  j["deterministic"] = c.deterministic;
  return j;
}

void validate_config(const RunConfig& c) {
  const ParametricSurface s = build_surface(c.surface, c.params); // validates radii
  (void)s;
  if (c.n_u < 4 || c.n_v < 4) throw ConfigError("n_u and n_v must be at least 4");
  if (c.assembly.quadrature_degree < 2 || c.assembly.quadrature_degree > 19)
    throw ConfigError("quadrature_degree must be in [2, 19]");
  if (!(c.assembly.near_field_factor >= 0.0)) throw ConfigError("near_field_factor must be >= 0");
  if (c.assembly.max_subdivision < 0 || c.assembly.max_subdivision > 6)
    throw ConfigError("max_subdivision must be in [0, 6]");
  if (c.region != "auto") region_kind_from_string(c.region);
  if (c.epsilon < 0.0) throw ConfigError("epsilon must be positive (or 0 / \"auto\" for the mesh edge)");
  if (c.grid_n < 16) throw ConfigError("grid_n must be at least 16");
  if (c.azimuths < 1) throw ConfigError("azimuths must be at least 1");
  if (c.j_max < 50) throw ConfigError("j_max must be at least 50 for the outlier window and decay fit");
  if (c.outlier_window < 3 || c.outlier_window % 2 == 0) throw ConfigError("outlier_window must be odd and >= 3");
  if (!(c.outlier_k > 0.0)) throw ConfigError("outlier_k must be positive");
  for (long j : c.field_modes)
    if (j < 0) throw ConfigError("field_modes entries must be >= 0");
  if (!(c.calr_distance > 0.0)) throw ConfigError("calr_distance must be positive");
  if (c.delta_min < 0.0 || c.delta_max < 0.0 || (c.delta_max > 0.0 && c.delta_min >= c.delta_max && c.delta_min > 0.0))
    throw ConfigError("delta range must satisfy 0 <= delta_min < delta_max");
  if (c.delta_points_per_decade < 2) throw ConfigError("delta_points_per_decade must be >= 2");
  if (!(c.calr_tol > 0.0 && c.calr_tol < 0.5)) throw ConfigError("calr_tol must be in (0, 0.5)");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  if (c.out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

Command command_from_string(const std::string& name) {
  if (name == "mesh") return Command::Mesh;
  if (name == "spectrum") return Command::Spectrum;
  if (name == "plasmon") return Command::Plasmon;
  if (name == "decay") return Command::Decay;
  if (name == "calr") return Command::Calr;
  if (name == "report") return Command::Report;
  throw ConfigError("unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
  case Command::Mesh: return "mesh";
  case Command::Spectrum: return "spectrum";
  case Command::Plasmon: return "plasmon";
  case Command::Decay: return "decay";
  case Command::Calr: return "calr";
  case Command::Report: return "report";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// hashing

std::string sha256_string(const std::string& data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.finish();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PipelineError("hash", PipelineError::Kind::Io, "cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return h.finish();
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

struct SpectrumBundle {
  OperatorPair ops;
  Spectrum spectrum;
  double calderon = 0;
  double s_min = 0, s_max = 0;
};

std::string cache_key(const RunConfig& c) {
  ojson k;
  k["format"] = kCacheFormat;
  k["surface"] = std::string(to_string(c.surface));
  k["radius"] = c.params.radius;
  k["equatorial_radius"] = c.params.equatorial;
  k["polar_radius"] = c.params.polar;
  k["major_radius"] = c.params.major;
  k["minor_radius"] = c.params.minor;
  k["n_u"] = c.n_u;
  k["n_v"] = c.n_v;
  k["quadrature_degree"] = c.assembly.quadrature_degree;
  k["near_field_factor"] = c.assembly.near_field_factor;
  k["max_subdivision"] = c.assembly.max_subdivision;
  return sha256_string(k.dump());
}

bool load_bundle(const fs::path& dir, const std::string& key, const PanelMesh& mesh, SpectrumBundle& b) {
  const fs::path mats = dir / (key + ".bin"), meta = dir / (key + ".json");
  if (!fs::exists(mats) || !fs::exists(meta)) return false;
  try {
    std::ifstream is(meta);
    const json m = json::parse(is);
    std::vector<Eigen::MatrixXd> ms = read_matrices(mats.string());
    const auto n = static_cast<Eigen::Index>(mesh.size());
    if (ms.size() != 3 || ms[0].rows() != n) return false;
    const auto values = m.at("values").get<std::vector<double>>();
    if (values.size() != mesh.size()) return false;
    b.ops.single_layer = std::move(ms[0]);
    b.ops.np_adjoint = std::move(ms[1]);
    b.spectrum.vectors = std::move(ms[2]);
    b.spectrum.values = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
    b.ops.weights = Eigen::Map<const Eigen::VectorXd>(mesh.areas.data(), n);
    b.ops.diagnostics.single_layer_asymmetry = m.at("single_layer_asymmetry").get<double>();
    b.ops.diagnostics.large_diagonal_count = m.at("large_diagonal_count").get<int>();
    b.ops.diagnostics.max_abs_diagonal = m.at("max_abs_diagonal").get<double>();
    b.spectrum.antisymmetric_defect = m.at("antisymmetric_defect").get<double>();
    b.spectrum.min_cholesky_pivot = m.at("min_cholesky_pivot").get<double>();
    b.calderon = m.at("calderon_residual").get<double>();
    b.s_min = m.at("s_min").get<double>();
    b.s_max = m.at("s_max").get<double>();
    return true;
  } catch (const std::exception& e) {
    std::cerr << "npspec: ignoring unreadable cache entry " << key << ": " << e.what() << "\n";
    return false;
  }
}

void store_bundle(const fs::path& dir, const std::string& key, const SpectrumBundle& b) {
  fs::create_directories(dir);
  const fs::path tmp = dir / (key + ".bin.tmp");
  write_matrices(tmp.string(), {&b.ops.single_layer, &b.ops.np_adjoint, &b.spectrum.vectors});
  fs::rename(tmp, dir / (key + ".bin"));
  json m;
  m["values"] = std::vector<double>(b.spectrum.values.data(), b.spectrum.values.data() + b.spectrum.values.size());
  m["single_layer_asymmetry"] = b.ops.diagnostics.single_layer_asymmetry;
  m["large_diagonal_count"] = b.ops.diagnostics.large_diagonal_count;
  m["max_abs_diagonal"] = b.ops.diagnostics.max_abs_diagonal;
  m["antisymmetric_defect"] = b.spectrum.antisymmetric_defect;
  m["min_cholesky_pivot"] = b.spectrum.min_cholesky_pivot;
  m["calderon_residual"] = b.calderon;
  m["s_min"] = b.s_min;
  m["s_max"] = b.s_max;
  std::ofstream os(dir / (key + ".json"), std::ios::binary | std::ios::trunc);
  os << m.dump();
}

void execute(Run& run, Command command, RunSummary& summary) {
  const RunConfig& c = run.config;
  ojson& man = run.manifest;

  run.stage = "mesh";
  const ParametricSurface surface = build_surface(c.surface, c.params);
  const PanelMesh mesh = triangulate(surface, c.n_u, c.n_v);
  {
    auto os = run.open("mesh.obj");
    write_mesh(os, mesh);
  }
  run.record("mesh.obj");
  man["mesh"] = {{"panels", mesh.size()},
                 {"vertices", mesh.vertices.size()},
                 {"euler_characteristic", mesh.euler_characteristic()},
                 {"area", mesh.total_area()},
                 {"analytic_area", surface.analytic_area()},
                 {"typical_edge", mesh.typical_edge()}};
  if (command == Command::Mesh) return;

  // Parameters consumed by later stages are checked before the heavy work.
  run.stage = "config";
  const double epsilon = c.epsilon > 0 ? c.epsilon : mesh.typical_edge();
  std::optional<CrossSectionRegion> region;
  if (command == Command::Plasmon || command == Command::Decay || command == Command::Report)
    region = build_region(region_for(c), surface, epsilon, c.grid_n);
  Vec3 z = Vec3::Zero();
  if (command == Command::Calr || command == Command::Report) {
    z = c.calr_z ? *c.calr_z : default_calr_point(surface, c.calr_distance);
    const double d = distance_to_surface(surface, z);
    if (d < 0.5 * mesh.typical_edge())
      throw ConfigError("CALR source point lies on or too close to the surface (distance " + std::to_string(d) + ")");
  }

  const int threads = effective_threads(c);
  AssemblyOptions aopt = c.assembly;
  aopt.threads = threads;
  FieldOptions fopt;
  fopt.near_field_factor = c.assembly.near_field_factor;
  fopt.max_subdivision = c.assembly.max_subdivision;
  fopt.threads = threads;
  fopt.azimuths = c.azimuths;

  run.stage = "assembly";
  const std::string key = cache_key(c);
  man["cache_key"] = key;
  const fs::path cache_dir = c.cache_dir.empty() ? c.out_dir / "cache" : c.cache_dir;
  SpectrumBundle b;
  summary.cache_hit = c.cache && load_bundle(cache_dir, key, mesh, b);
  if (!summary.cache_hit) {
    b.ops = assemble_operators(mesh, aopt);
    const auto range = symmetric_eigen_range(b.ops.single_layer);
    b.s_min = range.first;
    b.s_max = range.second;
    run.stage = "spectrum";
    b.spectrum = solve_spectrum(b.ops.single_layer, b.ops.np_adjoint);
    b.calderon = calderon_residual(b.ops.single_layer, b.ops.np_adjoint);
    if (c.cache) store_bundle(cache_dir, key, b);
  }
  const Spectrum& sp = b.spectrum;

  run.stage = "spectrum";
  man["diagnostics"] = {{"single_layer_asymmetry", b.ops.diagnostics.single_layer_asymmetry},
                        {"large_diagonal_count", b.ops.diagnostics.large_diagonal_count},
                        {"max_abs_diagonal", b.ops.diagnostics.max_abs_diagonal},
                        {"single_layer_min_eigenvalue", b.s_min},
                        {"single_layer_max_eigenvalue", b.s_max},
                        {"single_layer_condition", b.s_max / b.s_min},
                        {"min_cholesky_pivot", sp.min_cholesky_pivot},
                        {"calderon_residual", b.calderon}};
  {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(sp.size()));
    std::vector<long> labels(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = static_cast<Eigen::Index>(i);
      labels[i] = static_cast<long>(i);
    }
    auto os = run.open("spectrum.csv");
    write_spectrum_csv(os, sp, order, labels);
  }
  run.record("spectrum.csv");
  {
    const std::vector<Eigen::Index> order = sp.positive_order();
    std::vector<long> labels(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) labels[i] = static_cast<long>(i);
    auto os = run.open("spectrum_positive.csv");
    write_spectrum_csv(os, sp, order, labels);
  }
  run.record("spectrum_positive.csv");
  const int negatives = sp.count_negative(b.calderon);
  man["eigenvalues"] = {{"count", sp.size()},
                        {"leading", sp.values(0)},
                        {"negative_total", sp.count_negative(0.0)},
                        {"negative_above_calderon", negatives}};
  try {
    const WeylFit w = weyl_fit(sp, surface, mesh);
    man["weyl"] = {{"estimate", w.estimate},
                   {"positive_estimate", w.positive_estimate},
                   {"theoretical", w.theoretical},
                   {"relative_deviation", w.relative_deviation},
                   {"willmore", w.willmore},
                   {"euler", w.euler},
                   {"window", {w.window_begin, w.window_end}}};
  } catch (const ConfigError& e) {
    man["weyl"] = {{"skipped", e.what()}};
  }
  if (command == Command::Spectrum || command == Command::Report) {
    {
      auto os = run.open("eigenvectors.bin");
      write_matrix(os, sp.vectors);
    }
    run.record("eigenvectors.bin");
  }
  if (command == Command::Spectrum) return;

  const std::vector<Eigen::Index> positive = sp.positive_order();
  std::vector<long> modes = c.field_modes;

  if (command == Command::Decay || command == Command::Report) {
    run.stage = "decay";
    OutlierOptions oo;
    oo.window = c.outlier_window;
    oo.k = c.outlier_k;
    const DecayReport rep = decay_report(mesh, sp, *region, c.j_max, oo, fopt);
    {
      auto os = run.open("norms.csv");
      write_norms_csv(os, rep);
    }
    run.record("norms.csv");
    ojson flagged = ojson::array();
    for (std::size_t i : rep.outliers) {
      flagged.push_back({{"j", rep.rows[i].j}, {"lambda", rep.rows[i].lambda}, {"axisymmetry", rep.rows[i].axisymmetry}});
      modes.push_back(rep.rows[i].j);
    }
    ojson as = ojson::array();
    for (std::size_t i = 0; i < rep.deltas.size(); ++i)
      as.push_back({{"delta", rep.deltas[i]}, {"s0", rep.as_fraction_s0[i]}, {"s_half", rep.as_fraction_s_half[i]}});
    man["decay"] = {{"region", region_for(c) == RegionKind::X ? "X" : "Y"},
                    {"epsilon", epsilon},
                    {"region_points", region->points.size()},
                    {"j_count", rep.rows.size()},
                    {"slope", rep.fit.slope},
                    {"intercept", rep.fit.intercept},
                    {"outlier_count", rep.outliers.size()},
                    {"outliers", flagged},
                    {"outlier_slope", rep.outliers.size() >= 2 ? ojson(rep.outlier_fit.slope) : ojson(nullptr)},
                    {"almost_sure", as}};
  }

  if (command == Command::Plasmon || command == Command::Report) {
    run.stage = "plasmon";
    std::sort(modes.begin(), modes.end());
    modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
    const Eigen::MatrixXd E = potential_operator(mesh, region->points, fopt);
    ojson dumped = ojson::array();
    for (long j : modes) {
      if (j >= static_cast<long>(positive.size())) throw ConfigError("field mode " + std::to_string(j) + " exceeds the positive spectrum");
      const Eigen::VectorXd u = E * sp.vectors.col(positive[static_cast<std::size_t>(j)]);
      const std::string name = field_name(j);
      {
        auto os = run.open(name);
        write_field_csv(os, region->points, u);
      }
      run.record(name);
      dumped.push_back(j);
    }
    man["fields"] = dumped;
  }

  if (command == Command::Calr || command == Command::Report) {
    run.stage = "calr";
    const CalrCoefficients co = calr_coefficients(mesh, sp, z, c.calr_direction, fopt);
    CalrOptions copt;
    copt.delta_min = c.delta_min;
    copt.delta_max = c.delta_max;
    copt.points_per_decade = c.delta_points_per_decade;
    copt.tol = c.calr_tol;
    copt.threads = threads;
    const CalrResult r = sweep_and_classify(co.lambda, co.c, copt);
    {
      auto os = run.open("calr.csv");
      write_sweep_csv(os, r);
    }
    run.record("calr.csv");
    {
      auto os = run.open("calr.json");
      write_verdict_json(os, r);
    }
    run.record("calr.json");
    man["calr"] = {{"z", vec_json(z)},
                   {"direction", vec_json(c.calr_direction)},
                   {"slope", r.slope},
                   {"clamp_floor", r.clamp_floor},
                   {"clamp_ceiling", r.clamp_ceiling},
                   {"tail_fraction", std::isfinite(r.tail_fraction) ? ojson(r.tail_fraction) : ojson(nullptr)},
                   {"verdict", r.verdict}};
  }
}

} // namespace

RunSummary run_pipeline(const RunConfig& config, Command command) {
  Run run{config};
  RunSummary summary;
  try {
    validate_config(config);
  } catch (const ConfigError& e) {
    throw PipelineError("config", PipelineError::Kind::Config, e.what());
  }
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw PipelineError("output", PipelineError::Kind::Io, "cannot create " + config.out_dir.string());

#ifdef NPSPEC_HAVE_OPENBLAS
  openblas_set_num_threads(config.deterministic ? 1 : effective_threads(config));
#endif

  run.manifest["tool"] = "npspec";
  run.manifest["version"] = NPSPEC_VERSION;
  run.manifest["command"] = to_string(command);
  run.manifest["config"] = config_to_json(config);
  run.manifest["valid"] = true;

  auto write_manifest = [&] {
    run.manifest["files"] = run.files;
    std::ofstream os(config.out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    os << run.manifest.dump(2) << "\n";
  };
  auto fail = [&](PipelineError::Kind kind, const std::string& what) {
    run.manifest["valid"] = false;
    run.manifest["failed_stage"] = run.stage;
    run.manifest["error"] = what;
    write_manifest();
    return PipelineError(run.stage, kind, what);
  };

  try {
    execute(run, command, summary);
  } catch (const PipelineError&) {
    throw;
  } catch (const ConfigError& e) {
    throw fail(PipelineError::Kind::Config, e.what());
  } catch (const NumericalError& e) {
    throw fail(PipelineError::Kind::Numerical, e.what());
  } catch (const std::exception& e) {
    throw fail(PipelineError::Kind::Io, e.what());
  }
  write_manifest();
  summary.manifest = run.manifest;
  return summary;
}

// ---------------------------------------------------------------------------
// comparison

namespace {

json read_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw ConfigError("no manifest.json in " + dir.string());
  json m;
  try {
    m = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("unreadable manifest in " + dir.string() + ": " + e.what());
  }
  if (!m.value("valid", false)) throw ConfigError("run in " + dir.string() + " did not complete");
  return m;
}

struct NormRow {
  long j;
  double norm;
  bool outlier;
};

std::vector<NormRow> read_norms(const fs::path& dir) {
  std::ifstream is(dir / "norms.csv");
  if (!is) throw ConfigError("no norms.csv in " + dir.string());
  std::string line;
  std::getline(is, line);
  std::vector<NormRow> rows;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 5) throw ConfigError("malformed norms.csv in " + dir.string());
    rows.push_back({std::stol(cells[0]), std::stod(cells[2]), cells[4] == "1"});
  }
  return rows;
}

ojson at_path(const json& m, std::initializer_list<const char*> path) {
  const json* cur = &m;
  for (const char* k : path) {
    if (!cur->is_object() || !cur->contains(k)) return nullptr;
    cur = &cur->at(k);
  }
  return ojson(*cur);
}

} // namespace

ojson compare_report(const fs::path& run_a, const fs::path& run_b) {
  const json a = read_manifest(run_a), b = read_manifest(run_b);
  ojson side;
  ojson warnings = ojson::array();
  auto row = [&](const char* name, ojson va, ojson vb) { side[name] = {{"a", std::move(va)}, {"b", std::move(vb)}}; };

  row("surface", at_path(a, {"config", "surface"}), at_path(b, {"config", "surface"}));
  row("panels", at_path(a, {"mesh", "panels"}), at_path(b, {"mesh", "panels"}));
  row("negative_count", at_path(a, {"eigenvalues", "negative_above_calderon"}),
      at_path(b, {"eigenvalues", "negative_above_calderon"}));
  row("calderon_residual", at_path(a, {"diagnostics", "calderon_residual"}),
      at_path(b, {"diagnostics", "calderon_residual"}));
  row("weyl_relative_deviation", at_path(a, {"weyl", "relative_deviation"}), at_path(b, {"weyl", "relative_deviation"}));

  const bool has_decay = a.contains("decay") && b.contains("decay");
  if (has_decay) {
    const auto ja = a.at("decay").at("j_count").get<std::size_t>();
    const auto jb = b.at("decay").at("j_count").get<std::size_t>();
    if (ja == jb) {
      row("outlier_count", at_path(a, {"decay", "outlier_count"}), at_path(b, {"decay", "outlier_count"}));
      row("decay_slope", at_path(a, {"decay", "slope"}), at_path(b, {"decay", "slope"}));
    } else {
      const std::size_t common = std::min(ja, jb);
      warnings.push_back("j ranges differ (" + std::to_string(ja) + " vs " + std::to_string(jb) +
                         "); decay statistics truncated to j <= " + std::to_string(common));
      auto summarize = [&](const fs::path& dir) {
        std::vector<NormRow> rows = read_norms(dir);
        rows.resize(std::min(rows.size(), common));
        std::size_t outliers = 0;
        std::vector<double> x, y;
        for (const NormRow& r : rows) {
          if (r.outlier) {
            ++outliers;
            continue;
          }
          if (r.j > 0 && r.norm > 0) {
            x.push_back(std::log(static_cast<double>(r.j)));
            y.push_back(std::log(r.norm));
          }
        }
        const ojson slope = x.size() >= 2 ? ojson(fit_line(x, y).slope) : ojson(nullptr);
        return std::make_pair(ojson(outliers), slope);
      };
      const auto sa = summarize(run_a), sb = summarize(run_b);
      row("outlier_count", sa.first, sb.first);
      row("decay_slope", sa.second, sb.second);
    }
  } else if (a.contains("decay") != b.contains("decay")) {
    warnings.push_back("only one run has decay statistics");
  }
  row("calr_verdict", at_path(a, {"calr", "verdict"}), at_path(b, {"calr", "verdict"}));
  row("calr_slope", at_path(a, {"calr", "slope"}), at_path(b, {"calr", "slope"}));

  ojson diff = ojson::object();
  for (const auto& [name, v] : side.items())
    if (v.at("a") != v.at("b")) diff[name] = v;
  // Artifact bodies: any file present in both runs whose hash differs.
  if (a.contains("files") && b.contains("files"))
    for (const auto& [name, h] : a.at("files").items())
      if (b.at("files").contains(name) && b.at("files").at(name) != h) diff["file:" + name] = {{"a", h}, {"b", b.at("files").at(name)}};

  ojson out;
  out["run_a"] = run_a.string();
  out["run_b"] = run_b.string();
  out["side_by_side"] = side;
  out["diff"] = diff;
  out["warnings"] = warnings;
  return out;
}

} // namespace npspec
