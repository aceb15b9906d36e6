#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ogp/common.hpp"
#include "ogp/ogm.hpp"

namespace ogp {

using nlohmann::json;

inline json load_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void save_json(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open for writing: " + path.string());
  os << j.dump(2) << "\n";
}

inline json grid_to_json(const GridSpec& g) {
  return json{{"width", g.width}, {"height", g.height}, {"resolution", g.resolution}};
}

inline GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.width = j.at("width").get<int>();
  g.height = j.at("height").get<int>();
  g.resolution = j.at("resolution").get<float>();
  g.validate();
  return g;
}

struct SequenceEntry {
  std::string id;
  std::string file;  // path relative to the manifest directory
  std::string split; // train / val / test (empty for prediction outputs)
  int frames = 0;
};

// Manifest listing the sequence files of a generated dataset or of a
// prediction run. `dir` is where the manifest was loaded from; sequence
// paths resolve against it.
struct Manifest {
  std::string kind;  // "dataset" or "predictions"
  GridSpec grid;
  int H = 0;
  int P = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  json extra;  // kind-specific fields (checkpoint hashes, rollout length, ...)
  std::vector<SequenceEntry> sequences;
  std::filesystem::path dir;  // runtime only

  std::filesystem::path sequence_path(const SequenceEntry& e) const { return dir / e.file; }

  std::vector<SequenceEntry> split_entries(const std::string& split) const {
    std::vector<SequenceEntry> out;
    for (const auto& e : sequences)
      if (e.split == split) out.push_back(e);
    return out;
  }

  const SequenceEntry* find(const std::string& id) const {
    for (const auto& e : sequences)
      if (e.id == id) return &e;
    return nullptr;
  }
};

inline constexpr const char* kManifestFilename = "manifest.json";

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  json seqs = json::array();
  for (const auto& e : m.sequences) {
    json je{{"id", e.id}, {"file", e.file}, {"frames", e.frames}};
    if (!e.split.empty()) je["split"] = e.split;
    seqs.push_back(je);
  }
  json j{{"format", "ogp-" + m.kind},
         {"version", 1},
         {"grid", grid_to_json(m.grid)},
         {"H", m.H},
         {"P", m.P},
         {"dt", m.dt},
         {"seed", m.seed},
         {"config_hash", m.config_hash},
         {"sequences", seqs}};
  if (!m.extra.is_null())
    for (auto& [k, v] : m.extra.items()) j[k] = v;
  save_json(j, path);
}

inline Manifest load_manifest(const std::filesystem::path& path_or_dir) {
  namespace fs = std::filesystem;
  fs::path path = path_or_dir;
  if (fs::is_directory(path)) path = path / kManifestFilename;
  json j = load_json(path);
  Manifest m;
  const std::string format = j.value("format", "");
  if (format.rfind("ogp-", 0) != 0) throw FormatError("not an ogp manifest: " + path.string());
  m.kind = format.substr(4);
  m.grid = grid_from_json(j.at("grid"));
  m.H = j.at("H").get<int>();
  m.P = j.at("P").get<int>();
  m.dt = j.value("dt", 0.0);
  m.seed = j.value("seed", std::uint64_t{0});
  m.config_hash = j.value("config_hash", "");
  m.extra = json::object();
  for (auto& [k, v] : j.items())
    if (k != "format" && k != "version" && k != "grid" && k != "H" && k != "P" && k != "dt" &&
        k != "seed" && k != "config_hash" && k != "sequences")
      m.extra[k] = v;
  for (const auto& je : j.at("sequences")) {
    SequenceEntry e;
    e.id = je.at("id").get<std::string>();
    e.file = je.at("file").get<std::string>();
    e.split = je.value("split", "");
    e.frames = je.value("frames", 0);
    m.sequences.push_back(std::move(e));
  }
  m.dir = path.parent_path();
  return m;
}

}  // namespace ogp
