// Run manifests: strict JSON configuration with schema versioning. Every
// referenced field is validated before any computation starts.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "efric/friction_dynamics.hpp"
#include "efric/geometry.hpp"
#include "efric/kernels.hpp"
#include "efric/models.hpp"

namespace efric::cli {

constexpr int kSchemaVersion = 1;

enum class Command { geometry, kernels, propagate_exact, propagate_friction, lite, validate };

std::string to_string(Command c);
std::optional<Command> command_from_string(const std::string& s);

struct ParseError : ConfigError {
  int line = 0, column = 0;
  ParseError(const std::string& what, int line, int column);
};

// All problems found in one pass, each prefixed with its field path.
struct ValidationError : ConfigError {
  std::vector<std::string> issues;
  explicit ValidationError(std::vector<std::string> issues);
};

struct LoopSpec {
  RVec center;
  double radius = 1.0;
  int plane_a = 0, plane_b = 1;
  int points = 256;
  std::optional<double> expected;  // reference phase, compared modulo 2 pi
  double tolerance = 1e-6;
};

struct PacketSpec {
  double x0 = 0.0, sigma = 1.0, p0 = 0.0;
  int level = 0;
  std::optional<int> diabat;  // start on a diabatic state instead
};

struct PropagationSpec {
  double dt = 1.0;
  long n_steps = 0;
  long store_every = 1;
  double edge_tol = 1e-12;
  int edge_points = 16;
};

struct AnalysisSpec {
  std::optional<double> t_max;  // force analyses only on snapshots with t <= t_max
  int max_snapshots = 40;
  double floor = 1e-10;
  double resolve_tol = 1e-4;
};

struct FrictionSpec {
  friction::FrictionMode mode = friction::FrictionMode::markov_deltaA;
  // "constant", "kernel_point" (gamma of the model at gamma_point) or
  // "kernel_field" (gamma(x) of the model on the grid).
  std::string gamma_source = "constant";
  double gamma = 0.0;
  double gamma_point = 0.0;
  double floor = 1e-10;
  int memory_length = 0;
  double kostin_offset = 0.0;
  long snapshot_every = 0;
};

struct SurfaceSpec {
  std::string kind = "harmonic";  // "harmonic" or "model"
  double k = 0.0, center = 0.0, offset = 0.0;
};

struct LiteSpec {
  std::vector<double> dts;  // empty selects 0.1 / eps halved n_dts times
  int n_dts = 6;
  int substeps = 64;
};

struct Manifest {
  int schema_version = kSchemaVersion;
  Command command = Command::validate;
  std::optional<models::ModelSpec> model;
  std::vector<geometry::Axis> grid;
  int level = 0;
  std::optional<LoopSpec> loop;
  std::vector<RVec> points;
  kernels::BroadeningScheme broadening;
  int tau_points = 0;
  double tau_max = 0.0;
  double mass = 2000.0;
  std::optional<PacketSpec> packet;
  std::optional<PropagationSpec> propagation;
  AnalysisSpec analysis;
  std::optional<FrictionSpec> friction;
  std::optional<SurfaceSpec> surface;
  std::optional<LiteSpec> lite;
  std::string output_directory = "efric_out";
  bool plot = false;
  bool quick_suite = false;  // validate: "suite": "quick"
  unsigned long long seed = 0;
  std::optional<int> threads;
  std::string sha256;  // of the manifest file bytes
  std::string source;  // file path
};

// Reads, parses and validates. `command` overrides (or must match) the
// manifest's own command field.
Manifest load_manifest(const std::string& path, std::optional<Command> command = std::nullopt);
Manifest parse_manifest(const std::string& text, std::optional<Command> command = std::nullopt);

// Closest candidate within edit distance 2, empty if none.
std::string suggest(const std::string& key, const std::vector<std::string>& candidates);
std::size_t edit_distance(const std::string& a, const std::string& b);

std::string sha256_hex(const std::string& bytes);

}  // namespace efric::cli
