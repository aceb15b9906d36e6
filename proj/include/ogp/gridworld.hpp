#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "ogp/manifest.hpp"
#include "ogp/ogm.hpp"
#include "ogp/rng.hpp"
#include "ogp/serialize.hpp"

namespace ogp {

// Axis-aligned rectangle, center + half extents, in meters.
struct Rect {
  double cx = 0, cy = 0, hx = 0, hy = 0;

  bool contains(double px, double py) const {
    return std::abs(px - cx) <= hx && std::abs(py - cy) <= hy;
  }
  bool overlaps(const Rect& o) const {
    return std::abs(cx - o.cx) <= hx + o.hx && std::abs(cy - o.cy) <= hy + o.hy;
  }
};

struct Agent {
  double x = 0, y = 0;    // position, meters
  double vx = 0, vy = 0;  // velocity, meters/second
  double hx = 0.5, hy = 0.5;  // footprint half extents, meters

  Rect footprint() const { return Rect{x, y, hx, hy}; }
  double speed() const { return std::hypot(vx, vy); }
};

struct World {
  Rect bounds;
  std::vector<Rect> static_obstacles;
  std::vector<Agent> agents;
  Agent ego;
  double v_max = 10.0;

  void validate() const {
    if (!(bounds.hx > 0 && bounds.hy > 0)) throw ConfigError("world bounds must have positive extent");
    auto check_agent = [&](const Agent& a, const char* who) {
      if (!(a.hx > 0 && a.hy > 0)) throw ConfigError(std::string(who) + " footprint half-extents must be positive");
      if (!std::isfinite(a.vx) || !std::isfinite(a.vy) || a.speed() > v_max)
        throw ConfigError(std::string(who) + " speed not finite or exceeds v_max");
      if (!a.footprint().overlaps(bounds)) throw ConfigError(std::string(who) + " outside world bounds");
      if (!(a.hx < bounds.hx && a.hy < bounds.hy))
        throw ConfigError(std::string(who) + " footprint larger than world");
    };
    for (const Rect& r : static_obstacles) {
      if (!(r.hx > 0 && r.hy > 0)) throw ConfigError("obstacle half-extents must be positive");
      if (!r.overlaps(bounds)) throw ConfigError("obstacle outside world bounds");
    }
    for (const Agent& a : agents) check_agent(a, "agent");
    check_agent(ego, "ego");
  }
};

namespace detail {

// Advance one coordinate by v*dt inside [lo,hi] with elastic reflection.
// Folding handles multiple bounces within a single step.
inline void advance_reflect(double& pos, double& vel, double dt, double lo, double hi) {
  pos += vel * dt;
  while (pos < lo || pos > hi) {
    if (pos < lo) {
      pos = 2.0 * lo - pos;
      vel = -vel;
    } else {
      pos = 2.0 * hi - pos;
      vel = -vel;
    }
  }
}

inline void step_agent(Agent& a, double dt, const Rect& bounds) {
  advance_reflect(a.x, a.vx, dt, bounds.cx - bounds.hx + a.hx, bounds.cx + bounds.hx - a.hx);
  advance_reflect(a.y, a.vy, dt, bounds.cy - bounds.hy + a.hy, bounds.cy + bounds.hy - a.hy);
}

// First positive ray parameter at which the ray enters the rectangle, or
// +inf. Slab method; the origin is assumed outside the rectangle.
inline double ray_rect_entry(double ox, double oy, double dx, double dy, const Rect& r) {
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  const double lo[2] = {r.cx - r.hx, r.cy - r.hy};
  const double hi[2] = {r.cx + r.hx, r.cy + r.hy};
  const double o[2] = {ox, oy}, d[2] = {dx, dy};
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] < lo[axis] || o[axis] > hi[axis]) return std::numeric_limits<double>::infinity();
    } else {
      double t1 = (lo[axis] - o[axis]) / d[axis];
      double t2 = (hi[axis] - o[axis]) / d[axis];
      if (t1 > t2) std::swap(t1, t2);
      t_lo = std::max(t_lo, t1);
      t_hi = std::min(t_hi, t2);
    }
  }
  if (t_lo <= t_hi && t_lo > 0.0) return t_lo;
  return std::numeric_limits<double>::infinity();
}

}  // namespace detail

struct LidarScan {
  double ox = 0, oy = 0;           // sensor origin, meters
  std::vector<double> angles;      // radians, uniform over [0, 2*pi)
  std::vector<double> ranges;      // meters, (0, max_range]
  double max_range = 25.0;
};

// Constant-velocity update with elastic reflection at the world bounds.
// Static obstacles never move; agents and ego may pass through them (the
// sensor model, not the dynamics, is what notices the overlap).
inline World step_world(const World& world, double dt) {
  if (!(dt > 0)) throw ConfigError("step_world: dt must be positive");
  World next = world;
  for (Agent& a : next.agents) detail::step_agent(a, dt, next.bounds);
  detail::step_agent(next.ego, dt, next.bounds);
  return next;
}

// Cast n uniformly spaced rays from `origin`. Surfaces are the static
// obstacles and the agent footprints; the ego body and the world bounds
// are not sensed. Ranges clamp to max_range.
inline LidarScan cast_rays(const World& world, double ox, double oy, int n_rays,
                           double max_range) {
  if (n_rays < 4) throw ConfigError("cast_rays: need at least 4 rays");
  if (!(max_range > 0)) throw ConfigError("cast_rays: max_range must be positive");
  for (const Rect& r : world.static_obstacles)
    if (r.contains(ox, oy)) throw InputError("cast_rays: origin inside a static obstacle");
  for (const Agent& a : world.agents)
    if (a.footprint().contains(ox, oy)) throw InputError("cast_rays: origin inside an agent footprint");

  LidarScan scan;
  scan.ox = ox;
  scan.oy = oy;
  scan.max_range = max_range;
  scan.angles.resize(static_cast<std::size_t>(n_rays));
  scan.ranges.resize(static_cast<std::size_t>(n_rays));
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int i = 0; i < n_rays; ++i) {
    const double angle = two_pi * static_cast<double>(i) / static_cast<double>(n_rays);
    const double dx = std::cos(angle), dy = std::sin(angle);
    double best = std::numeric_limits<double>::infinity();
    for (const Rect& r : world.static_obstacles)
      best = std::min(best, detail::ray_rect_entry(ox, oy, dx, dy, r));
    for (const Agent& a : world.agents)
      best = std::min(best, detail::ray_rect_entry(ox, oy, dx, dy, a.footprint()));
    scan.angles[static_cast<std::size_t>(i)] = angle;
    scan.ranges[static_cast<std::size_t>(i)] = std::min(best, max_range);
  }
  return scan;
}

namespace detail {

// Grid geometry relative to the scan origin at the grid center. Cell
// (r,c) covers x in [(c-W/2)*res, (c+1-W/2)*res) and y in
// ((H/2-r-1)*res, (H/2-r)*res]: row 0 is the top (+y) edge.
struct GridFrame {
  int w, h;
  double res;

  explicit GridFrame(const GridSpec& spec)
      : w(spec.width), h(spec.height), res(spec.resolution) {}

  bool point_cell(double x, double y, int& row, int& col) const {
    col = static_cast<int>(std::floor(x / res + 0.5 * w));
    row = static_cast<int>(std::floor(0.5 * h - y / res));
    return row >= 0 && row < h && col >= 0 && col < w;
  }
  double cell_x0(int col) const { return (col - 0.5 * w) * res; }
  double cell_y1(int row) const { return (0.5 * h - row) * res; }  // top edge

  // Positive-length intersection of the ray segment [0, t_cap] with the
  // cell box. Grazing contacts along a nonzero direction never count; a
  // ray running exactly on a cell boundary (zero direction component)
  // belongs to the cell picked by the point_cell floor convention, so it
  // agrees with hit-point assignment.
  bool segment_crosses_cell(double dx, double dy, double t_cap, int row, int col) const {
    const double x0 = cell_x0(col), x1 = x0 + res;
    const double y1 = cell_y1(row), y0 = y1 - res;
    double t_lo = 0.0, t_hi = t_cap;
    if (dx == 0.0) {
      if (!(x0 <= 0.0 && 0.0 < x1)) return false;  // origin x is 0 by construction
    } else {
      double a = x0 / dx, b = x1 / dx;
      if (a > b) std::swap(a, b);
      t_lo = std::max(t_lo, a);
      t_hi = std::min(t_hi, b);
    }
    if (dy == 0.0) {
      if (!(y0 < 0.0 && 0.0 <= y1)) return false;
    } else {
      double a = y0 / dy, b = y1 / dy;
      if (a > b) std::swap(a, b);
      t_lo = std::max(t_lo, a);
      t_hi = std::min(t_hi, b);
    }
    return t_lo < t_hi;
  }
};

}  // namespace detail

// Single-shot inverse sensor model: per ray, cells crossed before the hit
// are free, the cell containing the hit point is occupied, everything
// else stays occluded. Hit evidence wins where rays disagree.
inline Ogm render_ogm(const LidarScan& scan, const GridSpec& spec) {
  spec.validate();
  const detail::GridFrame g(spec);
  Ogm ogm(spec, kOccludedValue);
  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(spec.cells()), 0);
  std::vector<std::uint8_t> free_(static_cast<std::size_t>(spec.cells()), 0);

  for (std::size_t i = 0; i < scan.angles.size(); ++i) {
    const double dx = std::cos(scan.angles[i]);
    const double dy = std::sin(scan.angles[i]);
    const double range = scan.ranges[i];
    const bool hit = range < scan.max_range;

    int hit_row = -1, hit_col = -1;
    if (hit && !g.point_cell(range * dx, range * dy, hit_row, hit_col)) {
      hit_row = hit_col = -1;  // hit outside the grid
    }

    // Amanatides-Woo walk enumerates candidates; the shared predicate
    // makes the final call so grazing steps never mislabel a cell.
    int row, col;
    {
      // starting cell: the one containing the origin
      col = static_cast<int>(std::floor(0.5 * g.w));
      row = static_cast<int>(std::floor(0.5 * g.h));
    }
    const int step_c = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_r = dy > 0 ? -1 : (dy < 0 ? 1 : 0);  // +y decreases row
    auto next_x = [&](int c) {
      return step_c == 0 ? std::numeric_limits<double>::infinity()
                         : (g.cell_x0(c) + (step_c > 0 ? g.res : 0.0)) / dx;
    };
    auto next_y = [&](int r) {
      return step_r == 0 ? std::numeric_limits<double>::infinity()
                         : (g.cell_y1(r) - (step_r > 0 ? g.res : 0.0)) / dy;
    };

    while (row >= 0 && row < g.h && col >= 0 && col < g.w) {
      if (g.segment_crosses_cell(dx, dy, range, row, col)) {
        if (hit && row == hit_row && col == hit_col)
          occupied[static_cast<std::size_t>(row) * g.w + col] = 1;
        else
          free_[static_cast<std::size_t>(row) * g.w + col] = 1;
      }
      const double tx = next_x(col), ty = next_y(row);
      if (std::min(tx, ty) > range) break;
      if (tx <= ty)
        col += step_c;
      else
        row += step_r;
    }
    if (hit && hit_row >= 0)  // the walk may stop one cell short of the hit cell
      occupied[static_cast<std::size_t>(hit_row) * g.w + hit_col] = 1;
  }

  for (std::int64_t i = 0; i < spec.cells(); ++i) {
    if (occupied[static_cast<std::size_t>(i)])
      ogm.values[static_cast<std::size_t>(i)] = kOccupiedValue;
    else if (free_[static_cast<std::size_t>(i)])
      ogm.values[static_cast<std::size_t>(i)] = kFreeValue;
  }
  return ogm;
}

// --- dataset generation ------------------------------------------------

struct RangeSpec {
  double lo = 0, hi = 0;
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

struct SimConfig {
  GridSpec grid;
  double dt = 0.2;
  int n_scenes = 10;
  int frames_per_scene = 40;
  int H = 5;
  int P = 15;
  int n_rays = 256;
  double max_range = 25.0;
  double world_half_width = 16.0;
  double world_half_height = 16.0;
  int obstacle_count_min = 2, obstacle_count_max = 4;
  RangeSpec obstacle_half_extent{0.8, 2.5};
  int agent_count_min = 1, agent_count_max = 3;
  RangeSpec agent_speed{0.4, 1.4};
  RangeSpec agent_half_extent{0.9, 1.6};
  RangeSpec ego_speed{0.0, 0.8};
  double split_val = 0.15, split_test = 0.15;

  void validate() const {
    grid.validate();
    if (!(dt > 0)) throw ConfigError("dt must be positive");
    if (n_scenes < 1) throw ConfigError("n_scenes must be >= 1");
    if (H < 1 || P < 1) throw ConfigError("H and P must be >= 1");
    if (frames_per_scene < H + P)
      throw ConfigError("frames_per_scene must be >= H+P (" + std::to_string(H + P) + ")");
    if (n_rays < 4) throw ConfigError("n_rays must be >= 4");
    if (!(max_range > 0)) throw ConfigError("max_range must be positive");
    if (!(world_half_width > 0 && world_half_height > 0)) throw ConfigError("world extent must be positive");
    if (obstacle_count_min < 0 || obstacle_count_max < obstacle_count_min)
      throw ConfigError("bad obstacle count range");
    if (agent_count_min < 0 || agent_count_max < agent_count_min)
      throw ConfigError("bad agent count range");
    if (split_val < 0 || split_test < 0 || split_val + split_test >= 1.0)
      throw ConfigError("split fractions must be nonnegative and sum below 1");
  }

  json to_json() const {
    return json{{"grid", grid_to_json(grid)},
                {"dt", dt},
                {"n_scenes", n_scenes},
                {"frames_per_scene", frames_per_scene},
                {"H", H},
                {"P", P},
                {"n_rays", n_rays},
                {"max_range", max_range},
                {"world", {{"half_width", world_half_width}, {"half_height", world_half_height}}},
                {"obstacles",
                 {{"count_min", obstacle_count_min},
                  {"count_max", obstacle_count_max},
                  {"half_extent_min", obstacle_half_extent.lo},
                  {"half_extent_max", obstacle_half_extent.hi}}},
                {"agents",
                 {{"count_min", agent_count_min},
                  {"count_max", agent_count_max},
                  {"speed_min", agent_speed.lo},
                  {"speed_max", agent_speed.hi},
                  {"half_extent_min", agent_half_extent.lo},
                  {"half_extent_max", agent_half_extent.hi}}},
                {"ego", {{"speed_min", ego_speed.lo}, {"speed_max", ego_speed.hi}}},
                {"split", {{"val", split_val}, {"test", split_test}}}};
  }

  static SimConfig from_json(const json& j) {
    SimConfig c;
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    c.dt = j.value("dt", c.dt);
    c.n_scenes = j.value("n_scenes", c.n_scenes);
    c.frames_per_scene = j.value("frames_per_scene", c.frames_per_scene);
    c.H = j.value("H", c.H);
    c.P = j.value("P", c.P);
    c.n_rays = j.value("n_rays", c.n_rays);
    c.max_range = j.value("max_range", c.max_range);
    if (j.contains("world")) {
      c.world_half_width = j.at("world").value("half_width", c.world_half_width);
      c.world_half_height = j.at("world").value("half_height", c.world_half_height);
    }
    if (j.contains("obstacles")) {
      const auto& o = j.at("obstacles");
      c.obstacle_count_min = o.value("count_min", c.obstacle_count_min);
      c.obstacle_count_max = o.value("count_max", c.obstacle_count_max);
      c.obstacle_half_extent.lo = o.value("half_extent_min", c.obstacle_half_extent.lo);
      c.obstacle_half_extent.hi = o.value("half_extent_max", c.obstacle_half_extent.hi);
    }
    if (j.contains("agents")) {
      const auto& a = j.at("agents");
      c.agent_count_min = a.value("count_min", c.agent_count_min);
      c.agent_count_max = a.value("count_max", c.agent_count_max);
      c.agent_speed.lo = a.value("speed_min", c.agent_speed.lo);
      c.agent_speed.hi = a.value("speed_max", c.agent_speed.hi);
      c.agent_half_extent.lo = a.value("half_extent_min", c.agent_half_extent.lo);
      c.agent_half_extent.hi = a.value("half_extent_max", c.agent_half_extent.hi);
    }
    if (j.contains("ego")) {
      c.ego_speed.lo = j.at("ego").value("speed_min", c.ego_speed.lo);
      c.ego_speed.hi = j.at("ego").value("speed_max", c.ego_speed.hi);
    }
    if (j.contains("split")) {
      c.split_val = j.at("split").value("val", c.split_val);
      c.split_test = j.at("split").value("test", c.split_test);
    }
    c.validate();
    return c;
  }

  std::string canonical_json() const { return to_json().dump(); }
  std::string hash() const { return hash_hex(fnv1a64(canonical_json())); }
};

namespace detail {

inline World sample_world(const SimConfig& cfg, Rng& rng) {
  World w;
  w.bounds = Rect{0, 0, cfg.world_half_width, cfg.world_half_height};
  w.v_max = std::max({cfg.agent_speed.hi, cfg.ego_speed.hi, 1e-9});

  const int n_obs = static_cast<int>(rng.uniform_int(cfg.obstacle_count_min, cfg.obstacle_count_max));
  for (int i = 0; i < n_obs; ++i) {
    Rect r;
    r.hx = cfg.obstacle_half_extent.sample(rng);
    r.hy = cfg.obstacle_half_extent.sample(rng);
    r.cx = rng.uniform(w.bounds.cx - w.bounds.hx, w.bounds.cx + w.bounds.hx);
    r.cy = rng.uniform(w.bounds.cy - w.bounds.hy, w.bounds.cy + w.bounds.hy);
    w.static_obstacles.push_back(r);
  }

  constexpr double two_pi = 6.283185307179586476925286766559;
  const int n_agents = static_cast<int>(rng.uniform_int(cfg.agent_count_min, cfg.agent_count_max));
  for (int i = 0; i < n_agents; ++i) {
    Agent a;
    a.hx = cfg.agent_half_extent.sample(rng);
    a.hy = cfg.agent_half_extent.sample(rng);
    a.x = rng.uniform(w.bounds.cx - w.bounds.hx + a.hx, w.bounds.cx + w.bounds.hx - a.hx);
    a.y = rng.uniform(w.bounds.cy - w.bounds.hy + a.hy, w.bounds.cy + w.bounds.hy - a.hy);
    const double speed = cfg.agent_speed.sample(rng);
    const double angle = rng.uniform(0.0, two_pi);
    a.vx = speed * std::cos(angle);
    a.vy = speed * std::sin(angle);
    w.agents.push_back(a);
  }

  // Ego spawns in the inner half of the arena so the grid mostly stays
  // inside the world.
  w.ego.hx = w.ego.hy = 0.6;
  w.ego.x = rng.uniform(-0.5 * w.bounds.hx, 0.5 * w.bounds.hx);
  w.ego.y = rng.uniform(-0.5 * w.bounds.hy, 0.5 * w.bounds.hy);
  const double espeed = cfg.ego_speed.sample(rng);
  const double eangle = rng.uniform(0.0, two_pi);
  w.ego.vx = espeed * std::cos(eangle);
  w.ego.vy = espeed * std::sin(eangle);
  return w;
}

inline bool ego_collides(const World& w) {
  for (const Rect& r : w.static_obstacles)
    if (r.contains(w.ego.x, w.ego.y)) return true;
  for (const Agent& a : w.agents)
    if (a.footprint().contains(w.ego.x, w.ego.y)) return true;
  return false;
}

// Simulate one scene; empty result if the ego ever ends up inside an
// obstacle or agent (the attempt is rejected and resampled).
inline bool simulate_scene(const SimConfig& cfg, World world, ScenarioSequence& out) {
  out.spec = cfg.grid;
  out.H = cfg.H;
  out.P = cfg.P;
  out.frames.clear();
  out.ego_poses.clear();
  for (int t = 0; t < cfg.frames_per_scene; ++t) {
    if (ego_collides(world)) return false;
    const LidarScan scan = cast_rays(world, world.ego.x, world.ego.y, cfg.n_rays, cfg.max_range);
    out.frames.push_back(render_ogm(scan, cfg.grid));
    out.ego_poses.push_back(Pose{static_cast<float>(world.ego.x), static_cast<float>(world.ego.y), 0.0f});
    world = step_world(world, cfg.dt);
  }
  return true;
}

}  // namespace detail

// Generate the full dataset: one OGMS file per scene plus a manifest with
// a deterministic 70/15/15-style split. (config, seed) fully determines
// every output byte; each scene draws from its own RNG substream so scene
// generation can run in parallel without changing results.
inline Manifest generate_dataset(const SimConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  const int n = cfg.n_scenes;
  std::vector<ScenarioSequence> scenes(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));

  auto make_scene = [&](int i) {
    constexpr int kMaxAttempts = 200;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt));
      World world = detail::sample_world(cfg, rng);
      world.validate();
      if (detail::simulate_scene(cfg, world, scenes[static_cast<std::size_t>(i)])) return;
    }
    errors[static_cast<std::size_t>(i)] = "scene rejection limit reached";
  };

  const unsigned hc = std::max(1u, std::thread::hardware_concurrency());
  const int n_threads = static_cast<int>(std::min<unsigned>(hc, static_cast<unsigned>(n)));
  if (n_threads <= 1) {
    for (int i = 0; i < n; ++i) make_scene(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (int i = t; i < n; i += n_threads) make_scene(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error("generate_dataset: " + e);

  // Deterministic split by scene: shuffle indices on a dedicated stream,
  // carve off floor(frac*n) for val and test, the rest trains.
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng split_rng = Rng::stream(seed, 0x53504C4954ULL);  // "SPLIT"
  split_rng.shuffle(order.begin(), order.end());
  const int n_val = static_cast<int>(std::floor(cfg.split_val * n));
  const int n_test = static_cast<int>(std::floor(cfg.split_test * n));
  const int n_train = n - n_val - n_test;
  std::vector<std::string> split(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const int i = order[static_cast<std::size_t>(k)];
    split[static_cast<std::size_t>(i)] = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
  }

  Manifest m;
  m.kind = "dataset";
  m.grid = cfg.grid;
  m.H = cfg.H;
  m.P = cfg.P;
  m.dt = cfg.dt;
  m.seed = seed;
  m.config_hash = cfg.hash();
  m.dir = out_dir;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d.ogms", i);
    write_sequence(scenes[static_cast<std::size_t>(i)], out_dir / name);
    SequenceEntry e;
    e.id = std::string(name, std::strlen(name) - 5);
    e.file = name;
    e.split = split[static_cast<std::size_t>(i)];
    e.frames = cfg.frames_per_scene;
    m.sequences.push_back(std::move(e));
  }
  save_json(cfg.to_json(), out_dir / "sim_config.json");
  save_manifest(m, out_dir / kManifestFilename);
  return m;
}

}  // namespace ogp
