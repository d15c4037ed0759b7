#include "efric/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace efric::cli {

using nlohmann::json;

std::string to_string(Command c) {
  switch (c) {
    case Command::geometry: return "geometry";
    case Command::kernels: return "kernels";
    case Command::propagate_exact: return "propagate-exact";
    case Command::propagate_friction: return "propagate-friction";
    case Command::lite: return "lite";
    case Command::validate: return "validate";
  }
  return "?";
}

std::optional<Command> command_from_string(const std::string& s) {
  for (Command c : {Command::geometry, Command::kernels, Command::propagate_exact, Command::propagate_friction,
                    Command::lite, Command::validate})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

ParseError::ParseError(const std::string& what, int l, int c)
    : ConfigError("parse error at line " + std::to_string(l) + ", column " + std::to_string(c) + ": " + what),
      line(l),
      column(c) {}

static std::string join_issues(const std::vector<std::string>& v) {
  std::string s = std::to_string(v.size()) + " validation error(s):";
  for (const auto& i : v) s += "\n  " + i;
  return s;
}

ValidationError::ValidationError(std::vector<std::string> v) : ConfigError(join_issues(v)), issues(std::move(v)) {}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggest(const std::string& key, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t bd = 3;
  for (const auto& c : candidates) {
    std::size_t d = edit_distance(key, c);
    if (d < bd) bd = d, best = c;
  }
  return best;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) s += hex[md[i] >> 4], s += hex[md[i] & 15];
  return s;
}

namespace {

// Accumulates issues while walking the document; every accessor returns a
// usable default so one pass reports everything.
struct Reader {
  std::vector<std::string> issues;

  void fail(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

  static std::string sub(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  bool object(const json& j, const std::string& path, const std::vector<std::string>& allowed) {
    if (!j.is_object()) {
      fail(path.empty() ? "<root>" : path, "expected an object");
      return false;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find(allowed.begin(), allowed.end(), it.key()) != allowed.end()) continue;
      std::string msg = "unknown key '" + it.key() + "'";
      std::string s = suggest(it.key(), allowed);
      if (!s.empty()) msg += "; did you mean '" + s + "'?";
      fail(sub(path, it.key()), msg);
    }
    return true;
  }

  const json* find(const json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
  }

  double num(const json& j, const std::string& path, const std::string& key, double def, bool required = false) {
    const json* v = find(j, key);
    if (!v) {
      if (required) fail(sub(path, key), "required number is missing");
      return def;
    }
    if (!v->is_number()) {
      fail(sub(path, key), "expected a number");
      return def;
    }
    double d = v->get<double>();
    if (!std::isfinite(d)) fail(sub(path, key), "must be finite");
    return d;
  }

  std::optional<double> opt_num(const json& j, const std::string& path, const std::string& key) {
    if (!find(j, key)) return std::nullopt;
    return num(j, path, key, 0.0);
  }

  long integer(const json& j, const std::string& path, const std::string& key, long def, bool required = false) {
    const json* v = find(j, key);
    if (!v) {
      if (required) fail(sub(path, key), "required integer is missing");
      return def;
    }
    if (!v->is_number_integer()) {
      fail(sub(path, key), "expected an integer");
      return def;
    }
    return v->get<long>();
  }

  bool boolean(const json& j, const std::string& path, const std::string& key, bool def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_boolean()) {
      fail(sub(path, key), "expected true or false");
      return def;
    }
    return v->get<bool>();
  }

  std::string str(const json& j, const std::string& path, const std::string& key, const std::string& def,
                  const std::vector<std::string>& choices = {}, bool required = false) {
    const json* v = find(j, key);
    if (!v) {
      if (required) fail(sub(path, key), "required string is missing");
      return def;
    }
    if (!v->is_string()) {
      fail(sub(path, key), "expected a string");
      return def;
    }
    std::string s = v->get<std::string>();
    if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
      std::string msg = "'" + s + "' is not one of";
      for (const auto& c : choices) msg += " " + c;
      std::string g = suggest(s, choices);
      if (!g.empty()) msg += "; did you mean '" + g + "'?";
      fail(sub(path, key), msg);
      return def;
    }
    return s;
  }

  std::vector<double> numbers(const json& j, const std::string& path, const std::string& key,
                              bool required = false) {
    std::vector<double> out;
    const json* v = find(j, key);
    if (!v) {
      if (required) fail(sub(path, key), "required array is missing");
      return out;
    }
    if (!v->is_array()) {
      fail(sub(path, key), "expected an array of numbers");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        fail(sub(path, key) + "[" + std::to_string(i) + "]", "expected a finite number");
        continue;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  void positive(double v, const std::string& path, const std::string& what = "must be > 0") {
    if (!(v > 0.0)) fail(path, what);
  }
};

RVec to_rvec(const std::vector<double>& v) {
  RVec r(Eigen::Index(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r[Eigen::Index(i)] = v[i];
  return r;
}

models::PolyField read_poly(Reader& r, const json& j, const std::string& path) {
  models::PolyField f;
  if (!r.object(j, path, {"c0", "lin", "quad"})) return f;
  f.c0 = r.num(j, path, "c0", 0.0);
  f.lin = r.numbers(j, path, "lin");
  f.quad = r.numbers(j, path, "quad");
  return f;
}

models::ModelSpec read_model(Reader& r, const json& j) {
  models::ModelSpec m;
  const std::string path = "model";
  if (!r.object(j, path, {"kind", "parameters", "band_size", "eps_d", "d"})) return m;
  std::string kind = r.str(j, path, "kind", "avoided_crossing",
                           {"spin_monopole", "conical", "avoided_crossing", "independent_band"}, true);
  m.kind = *models::kind_from_string(kind);
  std::map<models::ModelKind, std::vector<std::string>> allowed = {
      {models::ModelKind::spin_monopole, {"b0"}},
      {models::ModelKind::conical, {"a", "c"}},
      {models::ModelKind::avoided_crossing, {"k_f", "x0", "delta", "c"}},
      {models::ModelKind::independent_band, {"W", "fermi_level"}}};
  const std::string pp = "model.parameters";
  if (const json* p = r.find(j, "parameters")) {
    if (r.object(*p, pp, allowed[m.kind]))
      for (auto it = p->begin(); it != p->end(); ++it)
        if (it->is_number()) m.parameters[it.key()] = it->get<double>();
        else r.fail(pp + "." + it.key(), "expected a number");
  }
  auto par = [&](const std::string& k, double def) {
    auto it = m.parameters.find(k);
    return it == m.parameters.end() ? def : it->second;
  };
  switch (m.kind) {
    case models::ModelKind::spin_monopole: r.positive(par("b0", 1.0), pp + ".b0"); break;
    case models::ModelKind::conical:
      if (par("a", 1.0) == 0.0) r.fail(pp + ".a", "must be nonzero");
      if (par("c", 1.0) == 0.0) r.fail(pp + ".c", "must be nonzero");
      break;
    case models::ModelKind::avoided_crossing:
      r.positive(par("k_f", 0.02), pp + ".k_f");
      if (par("c", 0.01) < 0.0) r.fail(pp + ".c", "must be >= 0");
      break;
    case models::ModelKind::independent_band:
      r.positive(par("W", 10.0), pp + ".W");
      break;
  }
  bool band = m.kind == models::ModelKind::independent_band;
  if (band) {
    m.band_size = int(r.integer(j, path, "band_size", 0, true));
    if (m.band_size < 16) r.fail(path + ".band_size", "must be >= 16");
    if (const json* e = r.find(j, "eps_d")) m.eps_d = read_poly(r, *e, path + ".eps_d");
    if (const json* d = r.find(j, "d")) m.d = read_poly(r, *d, path + ".d");
    else m.d.c0 = 1.0;
  } else {
    for (const char* k : {"band_size", "eps_d", "d"})
      if (r.find(j, k)) r.fail(path + "." + k, "only valid for kind independent_band");
  }
  return m;
}

int model_dim_nuc(const models::ModelSpec& m) {
  switch (m.kind) {
    case models::ModelKind::spin_monopole: return 3;
    case models::ModelKind::conical: return 2;
    case models::ModelKind::avoided_crossing: return 1;
    case models::ModelKind::independent_band:
      return int(std::max({m.eps_d.lin.size(), m.eps_d.quad.size(), m.d.lin.size(), m.d.quad.size(),
                           std::size_t(1)}));
  }
  return 1;
}

}  // namespace

Manifest parse_manifest(const std::string& text, std::optional<Command> override_cmd) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') ++line, col = 1;
      else ++col;
    }
    std::string what = e.what();
    auto c = what.find("syntax error");
    throw ParseError(c == std::string::npos ? what : what.substr(c), line, col);
  }

  Reader r;
  Manifest m;
  m.sha256 = sha256_hex(text);
  static const std::vector<std::string> top = {
      "schema_version", "command", "model", "grid", "level", "loop", "points", "sweep",
      "broadening", "tau", "mass", "packet", "propagation", "analysis", "friction", "surface",
      "lite", "output", "seed", "threads", "suite"};
  if (!r.object(doc, "", top)) throw ValidationError(r.issues);

  m.schema_version = int(r.integer(doc, "", "schema_version", kSchemaVersion, true));
  if (r.find(doc, "schema_version") && m.schema_version != kSchemaVersion)
    r.fail("schema_version", "unsupported version " + std::to_string(m.schema_version) + " (expected " +
                                 std::to_string(kSchemaVersion) + ")");

  std::vector<std::string> names;
  for (Command c : {Command::geometry, Command::kernels, Command::propagate_exact, Command::propagate_friction,
                    Command::lite, Command::validate})
    names.push_back(to_string(c));
  std::string cmd = r.str(doc, "", "command", "", names, !override_cmd);
  if (!cmd.empty()) m.command = *command_from_string(cmd);
  if (override_cmd) {
    if (!cmd.empty() && *override_cmd != m.command)
      r.fail("command", "manifest says '" + cmd + "' but '" + to_string(*override_cmd) + "' was requested");
    m.command = *override_cmd;
  }
  const Command c = m.command;

  bool needs_model = c == Command::geometry || c == Command::kernels || c == Command::propagate_exact ||
                     c == Command::lite;
  if (const json* j = r.find(doc, "model")) m.model = read_model(r, *j);
  else if (needs_model) r.fail("model", "required for command " + to_string(c));

  // grid
  bool needs_grid = c != Command::kernels && c != Command::validate;
  if (const json* g = r.find(doc, "grid")) {
    if (r.object(*g, "grid", {"axes"})) {
      const json* axes = r.find(*g, "axes");
      if (!axes || !axes->is_array() || axes->empty()) {
        r.fail("grid.axes", "expected a nonempty array of {start, step, n}");
      } else {
        for (std::size_t i = 0; i < axes->size(); ++i) {
          std::string p = "grid.axes[" + std::to_string(i) + "]";
          geometry::Axis a;
          if (!r.object((*axes)[i], p, {"start", "step", "n"})) continue;
          a.start = r.num((*axes)[i], p, "start", 0.0, true);
          a.step = r.num((*axes)[i], p, "step", 1.0, true);
          a.n = int(r.integer((*axes)[i], p, "n", 3, true));
          r.positive(a.step, p + ".step");
          if (a.n < 3) r.fail(p + ".n", "at least 3 points are needed");
          m.grid.push_back(a);
        }
      }
    }
  } else if (needs_grid) {
    r.fail("grid", "required for command " + to_string(c));
  }

  int dim_nuc = m.model ? model_dim_nuc(*m.model) : 1;
  bool one_d = c == Command::propagate_exact || c == Command::propagate_friction || c == Command::lite;
  if (!m.grid.empty()) {
    if (one_d && m.grid.size() != 1) r.fail("grid.axes", "propagation needs exactly one axis");
    if (c == Command::geometry && m.model && int(m.grid.size()) != dim_nuc)
      r.fail("grid.axes", "model has " + std::to_string(dim_nuc) + " coordinate(s) but the grid has " +
                              std::to_string(m.grid.size()) + " axes");
    if (c == Command::geometry && m.grid.size() > 3) r.fail("grid.axes", "at most 3 axes");
  }
  if (one_d && m.model && dim_nuc != 1)
    r.fail("model", "propagation needs a model with one nuclear coordinate");

  m.level = int(r.integer(doc, "", "level", 0));
  if (m.level < 0) r.fail("level", "must be >= 0");

  if (const json* l = r.find(doc, "loop")) {
    LoopSpec s;
    if (r.object(*l, "loop", {"center", "radius", "plane", "points", "expected", "tolerance"})) {
      s.center = to_rvec(r.numbers(*l, "loop", "center", true));
      s.radius = r.num(*l, "loop", "radius", 1.0);
      r.positive(s.radius, "loop.radius");
      std::vector<double> pl = r.numbers(*l, "loop", "plane");
      if (!pl.empty()) {
        if (pl.size() != 2) r.fail("loop.plane", "expected two axis indices");
        else s.plane_a = int(pl[0]), s.plane_b = int(pl[1]);
      }
      s.points = int(r.integer(*l, "loop", "points", 256));
      if (s.points < 3) r.fail("loop.points", "at least 3 points are needed");
      s.expected = r.opt_num(*l, "loop", "expected");
      s.tolerance = r.num(*l, "loop", "tolerance", 1e-6);
      if (m.model && s.center.size() != dim_nuc)
        r.fail("loop.center", "expected " + std::to_string(dim_nuc) + " coordinates");
      if (s.plane_a < 0 || s.plane_b < 0 || s.plane_a >= dim_nuc || s.plane_b >= dim_nuc || s.plane_a == s.plane_b)
        r.fail("loop.plane", "needs two distinct axis indices below " + std::to_string(dim_nuc));
    }
    m.loop = s;
  }

  // kernel points
  if (const json* p = r.find(doc, "points")) {
    if (!p->is_array()) r.fail("points", "expected an array of coordinate arrays");
    else
      for (std::size_t i = 0; i < p->size(); ++i) {
        json wrap = {{"x", (*p)[i]}};
        RVec x = to_rvec(r.numbers(wrap, "points[" + std::to_string(i) + "]", "x", true));
        if (x.size() != dim_nuc)
          r.fail("points[" + std::to_string(i) + "]", "expected " + std::to_string(dim_nuc) + " coordinates");
        else m.points.push_back(x);
      }
  }
  if (const json* s = r.find(doc, "sweep")) {
    if (r.object(*s, "sweep", {"start", "stop", "n"})) {
      RVec a = to_rvec(r.numbers(*s, "sweep", "start", true));
      RVec b = to_rvec(r.numbers(*s, "sweep", "stop", true));
      long n = r.integer(*s, "sweep", "n", 2, true);
      if (n < 1) r.fail("sweep.n", "must be >= 1");
      if (a.size() != dim_nuc || b.size() != dim_nuc)
        r.fail("sweep", "start and stop need " + std::to_string(dim_nuc) + " coordinates");
      else
        for (long i = 0; i < n; ++i) m.points.push_back(n == 1 ? a : RVec(a + (b - a) * (double(i) / (n - 1))));
    }
  }
  if (c == Command::kernels && m.points.empty()) r.fail("points", "kernels needs 'points' or 'sweep'");

  if (const json* b = r.find(doc, "broadening")) {
    if (r.object(*b, "broadening", {"kind", "eta", "omega", "epsilon", "floor_factor"})) {
      std::string k = r.str(*b, "broadening", "kind", "gaussian", {"gaussian", "lorentzian", "resolvent"});
      m.broadening.kind = *kernels::delta_kind_from_string(k);
      m.broadening.eta = r.num(*b, "broadening", "eta", 0.0);
      if (m.broadening.eta < 0.0)
        r.fail("broadening.eta", "violates the BroadeningScheme invariant eta >= 0 (0 selects the automatic width)");
      m.broadening.omega = r.opt_num(*b, "broadening", "omega");
      m.broadening.epsilon = r.opt_num(*b, "broadening", "epsilon");
      if (m.broadening.omega && *m.broadening.omega < 0.0)
        r.fail("broadening.omega", "violates the BroadeningScheme invariant omega >= 0");
      if (m.broadening.epsilon && *m.broadening.epsilon < 0.0)
        r.fail("broadening.epsilon", "violates the BroadeningScheme invariant epsilon >= 0");
      m.broadening.floor_factor = r.num(*b, "broadening", "floor_factor", 5.0);
      if (m.broadening.floor_factor < 0.0) r.fail("broadening.floor_factor", "must be >= 0");
    }
  }

  if (const json* t = r.find(doc, "tau")) {
    if (r.object(*t, "tau", {"max", "points"})) {
      m.tau_max = r.num(*t, "tau", "max", 0.0, true);
      m.tau_points = int(r.integer(*t, "tau", "points", 0, true));
      if (m.tau_max < 0.0) r.fail("tau.max", "must be >= 0");
      if (m.tau_points < 0) r.fail("tau.points", "must be >= 0");
    }
  }

  m.mass = r.num(doc, "", "mass", 2000.0);
  r.positive(m.mass, "mass");

  bool needs_packet = one_d;
  if (const json* p = r.find(doc, "packet")) {
    PacketSpec s;
    if (r.object(*p, "packet", {"x0", "sigma", "p0", "level", "diabat"})) {
      s.x0 = r.num(*p, "packet", "x0", 0.0, true);
      s.sigma = r.num(*p, "packet", "sigma", 1.0, true);
      s.p0 = r.num(*p, "packet", "p0", 0.0);
      s.level = int(r.integer(*p, "packet", "level", 0));
      r.positive(s.sigma, "packet.sigma");
      if (s.level < 0) r.fail("packet.level", "must be >= 0");
      if (r.find(*p, "diabat")) {
        s.diabat = int(r.integer(*p, "packet", "diabat", 0));
        if (*s.diabat < 0) r.fail("packet.diabat", "must be >= 0");
      }
      if (!m.grid.empty()) {
        const auto& a = m.grid[0];
        if (s.x0 < a.start || s.x0 > a.start + a.step * (a.n - 1)) r.fail("packet.x0", "lies outside the grid");
      }
    }
    m.packet = s;
  } else if (needs_packet) {
    r.fail("packet", "required for command " + to_string(c));
  }

  bool needs_prop = c == Command::propagate_exact || c == Command::propagate_friction;
  if (const json* p = r.find(doc, "propagation")) {
    PropagationSpec s;
    if (r.object(*p, "propagation", {"dt", "n_steps", "store_every", "edge_tol", "edge_points"})) {
      s.dt = r.num(*p, "propagation", "dt", 1.0, true);
      s.n_steps = r.integer(*p, "propagation", "n_steps", 0, true);
      s.store_every = r.integer(*p, "propagation", "store_every", 1);
      s.edge_tol = r.num(*p, "propagation", "edge_tol", 1e-12);
      s.edge_points = int(r.integer(*p, "propagation", "edge_points", 16));
      r.positive(s.dt, "propagation.dt");
      if (s.n_steps < 1) r.fail("propagation.n_steps", "must be >= 1");
      if (s.store_every < 1) r.fail("propagation.store_every", "must be >= 1");
      r.positive(s.edge_tol, "propagation.edge_tol");
      if (s.edge_points < 1) r.fail("propagation.edge_points", "must be >= 1");
    }
    m.propagation = s;
  } else if (needs_prop) {
    r.fail("propagation", "required for command " + to_string(c));
  }

  if (const json* a = r.find(doc, "analysis")) {
    if (r.object(*a, "analysis", {"t_max", "max_snapshots", "floor", "resolve_tol"})) {
      m.analysis.t_max = r.opt_num(*a, "analysis", "t_max");
      m.analysis.max_snapshots = int(r.integer(*a, "analysis", "max_snapshots", 40));
      m.analysis.floor = r.num(*a, "analysis", "floor", 1e-10);
      m.analysis.resolve_tol = r.num(*a, "analysis", "resolve_tol", 1e-4);
      if (m.analysis.max_snapshots < 1) r.fail("analysis.max_snapshots", "must be >= 1");
      r.positive(m.analysis.floor, "analysis.floor");
      r.positive(m.analysis.resolve_tol, "analysis.resolve_tol");
    }
  }

  if (const json* f = r.find(doc, "friction")) {
    FrictionSpec s;
    const std::string p = "friction";
    if (r.object(*f, p, {"mode", "gamma", "gamma_source", "gamma_point", "floor", "memory_length",
                         "kostin_offset", "snapshot_every"})) {
      s.mode = *friction::mode_from_string(
          r.str(*f, p, "mode", "markov_deltaA", {"markov_deltaA", "kostin", "non_markov"}));
      s.gamma_source = r.str(*f, p, "gamma_source", "constant", {"constant", "kernel_point", "kernel_field"});
      s.gamma = r.num(*f, p, "gamma", 0.0, s.gamma_source == "constant" && s.mode != friction::FrictionMode::non_markov);
      if (s.gamma < 0.0) r.fail(p + ".gamma", "must be >= 0");
      s.gamma_point = r.num(*f, p, "gamma_point", 0.0);
      s.floor = r.num(*f, p, "floor", 1e-10);
      r.positive(s.floor, p + ".floor");
      s.memory_length = int(r.integer(*f, p, "memory_length", 0));
      s.kostin_offset = r.num(*f, p, "kostin_offset", 0.0);
      s.snapshot_every = r.integer(*f, p, "snapshot_every", 0);
      if (s.snapshot_every < 0) r.fail(p + ".snapshot_every", "must be >= 0");
      bool kernel_needed = s.gamma_source != "constant" || s.mode == friction::FrictionMode::non_markov;
      if (kernel_needed && !m.model) r.fail("model", "friction from kernels needs a model");
      if (s.mode == friction::FrictionMode::non_markov && s.memory_length < 1)
        r.fail(p + ".memory_length", "non_markov needs memory_length >= 1");
      if (s.mode == friction::FrictionMode::non_markov && s.gamma_source == "kernel_field")
        r.fail(p + ".gamma_source", "non_markov uses the kernel at gamma_point; kernel_field is not supported");
    }
    m.friction = s;
  } else if (c == Command::propagate_friction) {
    r.fail("friction", "required for command propagate-friction");
  }

  if (const json* s = r.find(doc, "surface")) {
    SurfaceSpec v;
    if (r.object(*s, "surface", {"kind", "k", "center", "offset"})) {
      v.kind = r.str(*s, "surface", "kind", "harmonic", {"harmonic", "model"}, true);
      v.k = r.num(*s, "surface", "k", 0.0, v.kind == "harmonic");
      v.center = r.num(*s, "surface", "center", 0.0);
      v.offset = r.num(*s, "surface", "offset", 0.0);
      if (v.kind == "harmonic" && v.k < 0.0) r.fail("surface.k", "must be >= 0");
      if (v.kind == "model" && !m.model) r.fail("model", "surface kind 'model' needs a model");
    }
    m.surface = v;
  } else if (c == Command::propagate_friction) {
    r.fail("surface", "required for command propagate-friction");
  }

  if (const json* l = r.find(doc, "lite")) {
    LiteSpec s;
    if (r.object(*l, "lite", {"dts", "n_dts", "substeps"})) {
      s.dts = r.numbers(*l, "lite", "dts");
      for (std::size_t i = 0; i < s.dts.size(); ++i)
        if (!(s.dts[i] > 0.0)) r.fail("lite.dts[" + std::to_string(i) + "]", "must be > 0");
      s.n_dts = int(r.integer(*l, "lite", "n_dts", 6));
      s.substeps = int(r.integer(*l, "lite", "substeps", 64));
      if (s.n_dts < 2) r.fail("lite.n_dts", "must be >= 2");
      if (s.substeps < 1) r.fail("lite.substeps", "must be >= 1");
    }
    m.lite = s;
  } else if (c == Command::lite) {
    m.lite = LiteSpec{};
  }

  if (const json* o = r.find(doc, "output")) {
    if (r.object(*o, "output", {"directory", "plot"})) {
      m.output_directory = r.str(*o, "output", "directory", m.output_directory);
      if (m.output_directory.empty()) r.fail("output.directory", "must not be empty");
      m.plot = r.boolean(*o, "output", "plot", false);
    }
  }

  m.quick_suite = r.str(doc, "", "suite", "full", {"full", "quick"}) == "quick";
  long seed = r.integer(doc, "", "seed", 0);
  if (seed < 0) r.fail("seed", "must be >= 0");
  m.seed = static_cast<unsigned long long>(seed);
  if (r.find(doc, "threads")) {
    m.threads = int(r.integer(doc, "", "threads", 1));
    if (*m.threads < 1) r.fail("threads", "must be >= 1");
  }

  if (!r.issues.empty()) throw ValidationError(r.issues);
  return m;
}

Manifest load_manifest(const std::string& path, std::optional<Command> command) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read manifest '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  Manifest m = parse_manifest(ss.str(), command);
  m.source = path;
  return m;
}

}  // namespace efric::cli
