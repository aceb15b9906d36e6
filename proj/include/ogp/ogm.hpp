#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ogp/common.hpp"
#include "ogp/serialize.hpp"

namespace ogp {

// Canonical cell value encoding. Grids store continuous values in [0,1];
// the three-class semantics come from thresholding at metric time.
inline constexpr float kFreeValue = 0.0f;
inline constexpr float kOccludedValue = 0.5f;
inline constexpr float kOccupiedValue = 1.0f;
inline constexpr double kDefaultFreeThreshold = 0.25;
inline constexpr double kDefaultOccupiedThreshold = 0.75;

enum class CellClass : std::uint8_t { Free = 0, Occluded = 1, Occupied = 2 };

struct GridSpec {
  int width = 64;
  int height = 64;
  float resolution = 1.0f / 3.0f;  // meters per cell

  void validate() const {
    if (width < 8 || height < 8) throw ConfigError("grid dims must be >= 8");
    if (!(resolution > 0)) throw ConfigError("grid resolution must be positive");
  }
  bool operator==(const GridSpec& o) const {
    return width == o.width && height == o.height && resolution == o.resolution;
  }
  std::int64_t cells() const { return static_cast<std::int64_t>(width) * height; }
};

// Single ego-centric occupancy grid, row-major with the top-left cell
// first (row 0 is the +y edge of the sensed area).
struct Ogm {
  GridSpec spec;
  std::vector<float> values;  // width*height entries in [0,1]

  Ogm() = default;
  explicit Ogm(GridSpec s, float fill = kOccludedValue)
      : spec(s), values(static_cast<std::size_t>(s.cells()), fill) {
    spec.validate();
  }

  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * spec.width + col]; }
  float at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * spec.width + col];
  }

  void validate() const {
    spec.validate();
    if (static_cast<std::int64_t>(values.size()) != spec.cells())
      throw ShapeError("ogm value count does not match spec");
    for (float v : values)
      if (!(v >= 0.0f && v <= 1.0f)) throw Error("ogm value outside [0,1]");
  }
};

struct ClassGrid {
  GridSpec spec;
  std::vector<CellClass> classes;

  ClassGrid() = default;
  explicit ClassGrid(GridSpec s)
      : spec(s), classes(static_cast<std::size_t>(s.cells()), CellClass::Occluded) {}

  CellClass at(int row, int col) const {
    return classes[static_cast<std::size_t>(row) * spec.width + col];
  }
  CellClass& at(int row, int col) {
    return classes[static_cast<std::size_t>(row) * spec.width + col];
  }
};

// value < t_free -> Free, value > t_occ -> Occupied, else Occluded.
inline ClassGrid classify(const Ogm& ogm, double t_free = kDefaultFreeThreshold,
                          double t_occ = kDefaultOccupiedThreshold) {
  if (!(0.0 < t_free && t_free < t_occ && t_occ < 1.0))
    throw ConfigError("thresholds must satisfy 0 < t_free < t_occ < 1");
  ClassGrid out(ogm.spec);
  for (std::size_t i = 0; i < ogm.values.size(); ++i) {
    const double v = ogm.values[i];
    out.classes[i] =
        v < t_free ? CellClass::Free : (v > t_occ ? CellClass::Occupied : CellClass::Occluded);
  }
  return out;
}

struct Pose {
  float x = 0, y = 0, heading = 0;
  bool operator==(const Pose& o) const { return x == o.x && y == o.y && heading == o.heading; }
};

// Ordered OGM frames for one scene plus the ego-pose trace and the
// history/horizon windowing metadata.
struct ScenarioSequence {
  GridSpec spec;
  std::vector<Ogm> frames;
  std::vector<Pose> ego_poses;
  int H = 0;  // observed frames per window
  int P = 0;  // predicted frames per window

  void validate(bool require_window = false) const {
    spec.validate();
    if (frames.size() != ego_poses.size()) throw ShapeError("frame/pose count mismatch");
    if (frames.empty()) throw Error("empty sequence");
    for (const Ogm& f : frames) {
      if (!(f.spec == spec)) throw ShapeError("frame spec mismatch within sequence");
      f.validate();
    }
    if (H < 0 || P < 0) throw ConfigError("negative window sizes");
    if (require_window && static_cast<int>(frames.size()) < H + P)
      throw ConfigError("sequence shorter than H+P window");
  }
};

// --- OGMS binary container -------------------------------------------------
//
//   magic   "OGMS"            4 bytes
//   version u16 = 1
//   width, height, T, H, P    u32 each
//   resolution                f32
//   frames  T * width*height  f32, little-endian, row-major, top-left first
//   poses   T * (x,y,heading) f32
//   crc32   u32 over all preceding bytes
//
// Round-trips are bit-identical: values are stored exactly as held in
// memory (f32, no quantization).

inline constexpr char kOgmsMagic[4] = {'O', 'G', 'M', 'S'};
inline constexpr std::uint16_t kOgmsVersion = 1;

inline void write_sequence(const ScenarioSequence& seq, const std::filesystem::path& path) {
  seq.validate();
  BinWriter w;
  w.bytes(kOgmsMagic, 4);
  w.u16(kOgmsVersion);
  w.u32(static_cast<std::uint32_t>(seq.spec.width));
  w.u32(static_cast<std::uint32_t>(seq.spec.height));
  w.u32(static_cast<std::uint32_t>(seq.frames.size()));
  w.u32(static_cast<std::uint32_t>(seq.H));
  w.u32(static_cast<std::uint32_t>(seq.P));
  w.f32(seq.spec.resolution);
  for (const Ogm& f : seq.frames)
    for (float v : f.values) w.f32(v);
  for (const Pose& p : seq.ego_poses) {
    w.f32(p.x);
    w.f32(p.y);
    w.f32(p.heading);
  }
  w.u32(w.crc32_all());
  w.write_file(path);
}

inline ScenarioSequence read_sequence(const std::filesystem::path& path) {
  BinReader r = BinReader::from_file(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kOgmsMagic, 4) != 0) throw BadMagicError("not an OGMS file: " + path.string());
  const std::uint16_t version = r.u16();
  if (version != kOgmsVersion)
    throw BadVersionError("unsupported OGMS version " + std::to_string(version));
  ScenarioSequence seq;
  seq.spec.width = static_cast<int>(r.u32());
  seq.spec.height = static_cast<int>(r.u32());
  const std::uint32_t T = r.u32();
  seq.H = static_cast<int>(r.u32());
  seq.P = static_cast<int>(r.u32());
  seq.spec.resolution = r.f32();
  seq.spec.validate();
  const std::size_t cells = static_cast<std::size_t>(seq.spec.cells());
  seq.frames.reserve(T);
  for (std::uint32_t t = 0; t < T; ++t) {
    Ogm f(seq.spec);
    for (std::size_t i = 0; i < cells; ++i) f.values[i] = r.f32();
    seq.frames.push_back(std::move(f));
  }
  seq.ego_poses.resize(T);
  for (std::uint32_t t = 0; t < T; ++t) {
    seq.ego_poses[t].x = r.f32();
    seq.ego_poses[t].y = r.f32();
    seq.ego_poses[t].heading = r.f32();
  }
  const std::uint32_t expect = r.crc32_prefix();
  const std::uint32_t got = r.u32();
  if (got != expect) throw ChecksumError("OGMS checksum mismatch: " + path.string());
  if (r.remaining() != 0) throw FormatError("trailing bytes after OGMS trailer");
  seq.validate();
  return seq;
}

}  // namespace ogp
