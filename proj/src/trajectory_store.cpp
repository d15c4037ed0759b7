#include "efric/trajectory_store.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace efric::cli {

namespace {

constexpr char kMagic[8] = {'E', 'F', 'T', 'R', 'J', '0', '0', '1'};

template <class T>
void put(std::ostream& o, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  o.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw ConfigError("trajectory file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void write_trajectory(const std::string& path, const exact::Trajectory& traj, const std::string& manifest_sha256,
                      const std::string& model_label) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error("cannot write '" + path + "'");
  nlohmann::json meta;
  const auto& first = traj.snapshots.at(0);
  meta["grid"] = {{"start", first.grid.start}, {"step", first.grid.step}, {"n", first.grid.n}};
  meta["mass"] = first.mass;
  meta["dim_el"] = first.dim_el();
  meta["snapshots"] = traj.snapshots.size();
  meta["manifest_sha256"] = manifest_sha256;
  meta["model"] = model_label;
  std::string m = meta.dump();
  o.write(kMagic, 8);
  put<std::uint64_t>(o, m.size());
  o.write(m.data(), std::streamsize(m.size()));
  for (const auto& s : traj.snapshots) {
    put<double>(o, s.t);
    for (Eigen::Index i = 0; i < s.amp.rows(); ++i)
      for (Eigen::Index k = 0; k < s.amp.cols(); ++k) {
        put<double>(o, s.amp(i, k).real());
        put<double>(o, s.amp(i, k).imag());
      }
  }
  if (!o) throw Error("write failed for '" + path + "'");
}

StoredTrajectory read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read trajectory '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("not an efric trajectory file");
  auto len = get<std::uint64_t>(in);
  std::string m(len, '\0');
  if (!in.read(m.data(), std::streamsize(len))) throw ConfigError("trajectory metadata is truncated");
  auto meta = nlohmann::json::parse(m);
  StoredTrajectory out;
  out.manifest_sha256 = meta.at("manifest_sha256").get<std::string>();
  out.model_label = meta.at("model").get<std::string>();
  geometry::Axis grid{meta["grid"]["start"].get<double>(), meta["grid"]["step"].get<double>(),
                      meta["grid"]["n"].get<int>()};
  int dim = meta.at("dim_el").get<int>();
  double mass = meta.at("mass").get<double>();
  std::size_t count = meta.at("snapshots").get<std::size_t>();
  for (std::size_t s = 0; s < count; ++s) {
    exact::FullWavefunction w{grid, mass, get<double>(in), CMat(grid.n, dim)};
    for (int i = 0; i < grid.n; ++i)
      for (int k = 0; k < dim; ++k) {
        double re = get<double>(in);
        double im = get<double>(in);
        w.amp(i, k) = {re, im};
      }
    out.snapshots.push_back(std::move(w));
  }
  return out;
}

}  // namespace efric::cli
