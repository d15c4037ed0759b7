#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "efric/manifest.hpp"
#include "efric/plot.hpp"
#include "efric/runner.hpp"
#include "efric/series.hpp"
#include "efric/trajectory_store.hpp"

using namespace efric;
using namespace efric::cli;
namespace fs = std::filesystem;

namespace {

const char* kGeometry = R"({
  "schema_version": 1,
  "command": "geometry",
  "model": {"kind": "avoided_crossing", "parameters": {"k_f": 0.02, "x0": 1.0, "c": 0.01}},
  "grid": {"axes": [{"start": -2.0, "step": 0.05, "n": 81}]}
})";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("efric_test_cli_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_manifest(const fs::path& dir, const std::string& text) {
  fs::path p = dir / "manifest.json";
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> issues_of(const std::string& text, std::optional<Command> c = std::nullopt) {
  try {
    parse_manifest(text, c);
  } catch (const ValidationError& e) {
    return e.issues;
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

nlohmann::json report(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "run_report.json")); }

}  // namespace

TEST_CASE("minimal geometry manifest picks up defaults") {
  auto m = parse_manifest(kGeometry);
  CHECK(m.command == Command::geometry);
  REQUIRE(m.model);
  CHECK(m.model->kind == models::ModelKind::avoided_crossing);
  CHECK(m.model->parameters.at("k_f") == 0.02);
  REQUIRE(m.grid.size() == 1);
  CHECK(m.grid[0].n == 81);
  CHECK(m.mass == 2000.0);
  CHECK(m.level == 0);
  CHECK(m.output_directory == "efric_out");
  CHECK(m.broadening.floor_factor == 5.0);
  CHECK_FALSE(m.loop);
  CHECK(m.sha256 == sha256_hex(kGeometry));
}

TEST_CASE("unknown keys get a suggestion") {
  std::string t = R"({"schema_version": 1, "command": "propagate-friction",
    "grid": {"axes": [{"start": -4, "step": 0.05, "n": 160}]},
    "packet": {"x0": 1, "sigma": 0.3},
    "propagation": {"dt": 0.5, "n_steps": 10},
    "surface": {"kind": "harmonic", "k": 0.05},
    "friction": {"mode": "markov_deltaA", "gama": 0.5}})";
  auto issues = issues_of(t);
  CHECK(any_contains(issues, "friction.gama: unknown key 'gama'; did you mean 'gamma'?"));
  CHECK(suggest("gama", {"gamma", "mode"}) == "gamma");
  CHECK(suggest("zzzzzz", {"gamma", "mode"}).empty());
  CHECK(edit_distance("kitten", "sitting") == 3);
}

TEST_CASE("negative broadening width names the violated invariant") {
  std::string t = R"({"schema_version": 1, "command": "kernels",
    "model": {"kind": "conical", "parameters": {"a": 1, "c": 0.7}},
    "points": [[0.3, 0.2]], "broadening": {"kind": "lorentzian", "eta": -0.1}})";
  auto issues = issues_of(t);
  CHECK(any_contains(issues, "broadening.eta"));
  CHECK(any_contains(issues, "eta >= 0"));
}

TEST_CASE("all validation issues are reported together") {
  std::string t = R"({"schema_version": 1, "command": "propagate-exact",
    "model": {"kind": "avoided_crossing", "parameters": {"k_f": -1}},
    "grid": {"axes": [{"start": -4, "step": 0.05, "n": 160}]},
    "mass": -3, "level": -1})";
  auto issues = issues_of(t);
  CHECK(issues.size() >= 4);
  CHECK(any_contains(issues, "model.parameters.k_f"));
  CHECK(any_contains(issues, "mass"));
  CHECK(any_contains(issues, "packet"));
  CHECK(any_contains(issues, "propagation"));
}

TEST_CASE("JSON syntax errors carry line and column") {
  std::string t = "{\n  \"schema_version\": 1,\n  \"command\": \"geometry\"\n  \"grid\": {}\n}";
  try {
    parse_manifest(t);
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 4);
    CHECK(e.column > 0);
  }
}

TEST_CASE("schema version and command consistency") {
  std::string v2 = kGeometry;
  v2.replace(v2.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  CHECK(any_contains(issues_of(v2), "schema_version"));
  std::string none = kGeometry;
  none.replace(none.find("\"schema_version\": 1,"), 20, "");
  CHECK(any_contains(issues_of(none), "schema_version"));
  CHECK(any_contains(issues_of(kGeometry, Command::kernels), "command"));
  CHECK(parse_manifest(kGeometry, Command::geometry).command == Command::geometry);
  CHECK(command_from_string("propagate-exact") == Command::propagate_exact);
  CHECK_FALSE(command_from_string("propagate_exact"));
}

TEST_CASE("sweep expands into evenly spaced points") {
  std::string t = R"({"schema_version": 1, "command": "kernels",
    "model": {"kind": "conical", "parameters": {"a": 1, "c": 0.7}},
    "sweep": {"start": [0.1, 0.2], "stop": [1.0, 0.2], "n": 10}})";
  auto m = parse_manifest(t);
  REQUIRE(m.points.size() == 10);
  CHECK(m.points[9][0] == doctest::Approx(1.0));
  CHECK(m.points[1][0] == doctest::Approx(0.2));
}

TEST_CASE("series files round trip with unit tags") {
  SeriesFile s;
  s.manifest_sha256 = std::string(64, 'a');
  s.columns = {{"x", "bohr"}, {"E_0", "hartree"}};
  s.add_row({0.1, -1.0 / 3.0});
  s.add_row({0.2, 1e-300});
  auto back = parse_series(format_series(s));
  CHECK(back.manifest_sha256 == s.manifest_sha256);
  REQUIRE(back.columns.size() == 2);
  CHECK(back.columns[1].unit == "hartree");
  CHECK(back.rows == s.rows);
  CHECK(back.values("E_0")[0] == -1.0 / 3.0);
  CHECK_THROWS_AS(back.column("missing"), SchemaMismatchError);
  CHECK_THROWS_AS(s.add_row({std::nan(""), 1.0}), NumericalError);
  CHECK_THROWS_AS(s.add_row({INFINITY, 1.0}), NumericalError);
  CHECK_THROWS_AS(s.add_row({1.0}), SchemaMismatchError);
  CHECK(parse_column("g_01[bohr^-2]").unit == "bohr^-2");
  CHECK_THROWS_AS(parse_column("g_01"), SchemaMismatchError);
  CHECK_THROWS_AS(parse_series("x\ty\n1\t2\n"), SchemaMismatchError);
}

TEST_CASE("trajectory store round trips bit for bit") {
  auto dir = scratch("traj");
  exact::Trajectory tr;
  exact::Axis grid{-1.0, 0.25, 8};
  for (int s = 0; s < 3; ++s) {
    exact::FullWavefunction w{grid, 2000.0, 0.5 * s, CMat::Random(8, 2)};
    tr.snapshots.push_back(w);
    tr.times.push_back(w.t);
  }
  auto path = (dir / "t.eftrj").string();
  write_trajectory(path, tr, "abc", "avoided_crossing");
  auto back = read_trajectory(path);
  CHECK(back.manifest_sha256 == "abc");
  CHECK(back.model_label == "avoided_crossing");
  REQUIRE(back.snapshots.size() == 3);
  for (int s = 0; s < 3; ++s) {
    CHECK(back.snapshots[s].amp == tr.snapshots[s].amp);
    CHECK(back.snapshots[s].t == tr.snapshots[s].t);
    CHECK(back.snapshots[s].grid.step == grid.step);
    CHECK(back.snapshots[s].mass == 2000.0);
  }
  std::ofstream(dir / "bad.eftrj") << "not a trajectory";
  CHECK_THROWS_AS(read_trajectory((dir / "bad.eftrj").string()), ConfigError);
}

TEST_CASE("plots render to SVG and reject incomplete lattices") {
  SeriesFile s;
  s.columns = {{"x", "bohr"}, {"y", "bohr"}, {"f", "1"}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) s.add_row({double(i), double(j), double(i * j)});
  auto line = render_svg(s, {PlotKind::line, "f", "x", {"f"}});
  CHECK(line.find("<svg") != std::string::npos);
  CHECK(render_svg(s, {PlotKind::heatmap, "f", "x", {"y", "f"}}).find("<svg") != std::string::npos);
  s.rows.pop_back();
  CHECK_THROWS_AS(render_svg(s, {PlotKind::heatmap, "f", "x", {"y", "f"}}), SchemaMismatchError);
  CHECK_THROWS_AS(render_svg(s, {PlotKind::quiver, "f", "x", {"y"}}), SchemaMismatchError);
}

TEST_CASE("geometry run writes hashed outputs deterministically") {
  auto a = scratch("geo_a"), b = scratch("geo_b");
  auto mpath = write_manifest(a, kGeometry);
  RunRequest r;
  r.command = Command::geometry;
  r.manifest_path = mpath.string();
  r.out = (a / "out").string();
  REQUIRE(run(r) == exit_ok);
  r.out = (b / "out").string();
  REQUIRE(run(r) == exit_ok);
  auto ra = report(a / "out"), rb = report(b / "out");
  CHECK(ra["status"] == "ok");
  CHECK(ra["outputs"] == rb["outputs"]);
  auto geo = read_series((a / "out" / "geometry.tsv").string());
  CHECK(geo.rows.size() == 81);
  CHECK(geo.manifest_sha256 == sha256_hex(kGeometry));
  CHECK(fs::exists(a / "out" / "diagnostics.txt"));
  for (const auto& c : ra["checks"])
    if (c["hard"] == true) CHECK(c["pass"] == true);
}

TEST_CASE("on a fine grid the finite-difference tensor matches the sum over states") {
  auto d = scratch("geo_fine");
  auto mpath = write_manifest(d, R"({"schema_version": 1, "command": "geometry",
    "model": {"kind": "avoided_crossing", "parameters": {"k_f": 0.02, "x0": 1.0, "c": 0.01}},
    "grid": {"axes": [{"start": -2.0, "step": 0.001, "n": 4001}]}})");
  RunRequest r;
  r.manifest_path = mpath.string();
  r.out = (d / "out").string();
  REQUIRE(run(r) == exit_ok);
  for (const auto& c : report(d / "out")["checks"]) CHECK(c["pass"] == true);
}

TEST_CASE("kernel sweep writes tensors and the broadening convergence table") {
  auto d = scratch("kern");
  auto mpath = write_manifest(d, R"({"schema_version": 1, "command": "kernels",
    "model": {"kind": "conical", "parameters": {"a": 1, "c": 0.7}},
    "sweep": {"start": [0.1, 0.2], "stop": [1.0, 0.2], "n": 10},
    "broadening": {"kind": "lorentzian", "eta": 0.05},
    "tau": {"max": 10, "points": 5}})");
  RunRequest r;
  r.manifest_path = mpath.string();
  r.out = (d / "out").string();
  REQUIRE(run(r) == exit_ok);
  auto k = read_series((d / "out" / "kernels.tsv").string());
  CHECK(k.rows.size() == 10);
  auto c = read_series((d / "out" / "kernels_convergence.tsv").string());
  CHECK(c.rows.size() == 40);
  CHECK(fs::exists(d / "out" / "kernels_memory.tsv"));
}

TEST_CASE("exit codes") {
  RunRequest r;
  auto d = scratch("codes");
  r.out = (d / "out").string();

  r.manifest_path = write_manifest(d, "{ not json").string();
  CHECK(run(r) == exit_config);
  CHECK(report(d / "out")["status"] == "parse_error");

  r.manifest_path = (d / "missing.json").string();
  CHECK(run(r) == exit_config);

  // A loop around the intersection with a wrong reference phase is a hard failure.
  r.manifest_path = write_manifest(d, R"({"schema_version": 1, "command": "geometry",
    "model": {"kind": "conical", "parameters": {"a": 1, "c": 0.7}},
    "grid": {"axes": [{"start": 0.2, "step": 0.1, "n": 5}, {"start": 0.2, "step": 0.1, "n": 5}]},
    "loop": {"center": [0, 0], "radius": 0.5, "expected": 1.0}})").string();
  CHECK(run(r) == exit_invariant);
  CHECK(report(d / "out")["status"] == "invariant_failure");

  // Packet density at the grid edge.
  r.manifest_path = write_manifest(d, R"({"schema_version": 1, "command": "propagate-exact",
    "model": {"kind": "avoided_crossing", "parameters": {"k_f": 0.02, "x0": 1, "c": 0.01}},
    "grid": {"axes": [{"start": -3, "step": 0.05, "n": 120}]},
    "packet": {"x0": 2.8, "sigma": 0.4, "p0": 0},
    "propagation": {"dt": 1, "n_steps": 5}})").string();
  CHECK(run(r) == exit_numerical);
  CHECK(report(d / "out")["status"] == "numerical_error");
}

TEST_CASE("thread count precedence") {
  auto m = parse_manifest(R"({"schema_version": 1, "command": "validate", "threads": 3})");
  RunRequest r;
  CHECK(resolve_threads(r, &m) == 3);
  r.threads = 2;
  CHECK(resolve_threads(r, &m) == 2);
  RunRequest none;
  setenv("EFRIC_THREADS", "5", 1);
  CHECK(resolve_threads(none, nullptr) == 5);
  unsetenv("EFRIC_THREADS");
  CHECK(resolve_threads(none, nullptr) == 1);
}
