#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ogp/manifest.hpp"
#include "ogp/ogm.hpp"

namespace ogp {

struct Thresholds {
  double t_free = kDefaultFreeThreshold;
  double t_occ = kDefaultOccupiedThreshold;
};

namespace detail {

// Exact Manhattan distance from every cell to the nearest source cell,
// via multi-source BFS on the 4-connected grid (no obstacles, so the
// 4-connected graph distance equals the Manhattan distance). -1 where no
// source exists.
inline std::vector<int> manhattan_distance_field(const ClassGrid& g, CellClass cls) {
  const int w = g.spec.width, h = g.spec.height;
  std::vector<int> dist(static_cast<std::size_t>(w) * h, -1);
  std::deque<int> queue;
  for (int i = 0; i < w * h; ++i) {
    if (g.classes[static_cast<std::size_t>(i)] == cls) {
      dist[static_cast<std::size_t>(i)] = 0;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const int idx = queue.front();
    queue.pop_front();
    const int r = idx / w, c = idx % w;
    const int d = dist[static_cast<std::size_t>(idx)];
    const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (const auto& n : nbr) {
      if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
      const int nidx = n[0] * w + n[1];
      if (dist[static_cast<std::size_t>(nidx)] < 0) {
        dist[static_cast<std::size_t>(nidx)] = d + 1;
        queue.push_back(nidx);
      }
    }
  }
  return dist;
}

// Sum over cells of class `cls` in `from` of the distance field of `to`.
// Integer arithmetic; the caller divides once.
inline bool directed_class_sum(const ClassGrid& from, const std::vector<int>& to_field,
                               CellClass cls, std::int64_t& sum, std::int64_t& count) {
  sum = 0;
  count = 0;
  for (std::size_t i = 0; i < from.classes.size(); ++i) {
    if (from.classes[i] == cls) {
      sum += to_field[i];
      ++count;
    }
  }
  return count > 0;
}

}  // namespace detail

// Image-similarity score between two grids (lower is better, 0 iff the
// thresholded class grids are identical). For each occupancy class
// present in both grids the contribution is the symmetrized mean nearest
// same-class Manhattan distance; a class present in exactly one grid
// contributes width+height (the largest possible cell distance); a class
// absent from both contributes nothing.
inline double is_metric_classified(const ClassGrid& ca, const ClassGrid& cb) {
  if (!(ca.spec == cb.spec)) throw ShapeError("is_metric: grid spec mismatch");
  const double penalty = ca.spec.width + ca.spec.height;
  double total = 0.0;
  for (CellClass cls : {CellClass::Free, CellClass::Occluded, CellClass::Occupied}) {
    const auto field_b = detail::manhattan_distance_field(cb, cls);
    const auto field_a = detail::manhattan_distance_field(ca, cls);
    std::int64_t sum_ab = 0, n_a = 0, sum_ba = 0, n_b = 0;
    const bool in_a = detail::directed_class_sum(ca, field_b, cls, sum_ab, n_a);
    const bool in_b = detail::directed_class_sum(cb, field_a, cls, sum_ba, n_b);
    if (in_a && in_b) {
      const double d_ab = static_cast<double>(sum_ab) / static_cast<double>(n_a);
      const double d_ba = static_cast<double>(sum_ba) / static_cast<double>(n_b);
      total += 0.5 * (d_ab + d_ba);
    } else if (in_a || in_b) {
      total += penalty;
    }
  }
  return total;
}

inline double is_metric(const Ogm& a, const Ogm& b, Thresholds th = {}) {
  if (!(a.spec == b.spec)) throw ShapeError("is_metric: grid spec mismatch");
  return is_metric_classified(classify(a, th.t_free, th.t_occ), classify(b, th.t_free, th.t_occ));
}

// O(n^2) all-pairs evaluation of the same definition; verification
// reference for is_metric, guarded to small grids.
inline double is_metric_oracle(const Ogm& a, const Ogm& b, Thresholds th = {}) {
  if (!(a.spec == b.spec)) throw ShapeError("is_metric_oracle: grid spec mismatch");
  if (a.spec.width > 32 || a.spec.height > 32)
    throw InputError("is_metric_oracle limited to grids <= 32x32");
  const ClassGrid ca = classify(a, th.t_free, th.t_occ);
  const ClassGrid cb = classify(b, th.t_free, th.t_occ);
  const int w = a.spec.width, h = a.spec.height;
  const double penalty = w + h;

  auto cells_of = [&](const ClassGrid& g, CellClass cls) {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (g.at(r, c) == cls) out.emplace_back(r, c);
    return out;
  };
  auto directed = [&](const std::vector<std::pair<int, int>>& from,
                      const std::vector<std::pair<int, int>>& to) {
    std::int64_t sum = 0;
    for (const auto& [r, c] : from) {
      int best = INT32_MAX;
      for (const auto& [r2, c2] : to) best = std::min(best, std::abs(r - r2) + std::abs(c - c2));
      sum += best;
    }
    return static_cast<double>(sum) / static_cast<double>(from.size());
  };

  double total = 0.0;
  for (CellClass cls : {CellClass::Free, CellClass::Occluded, CellClass::Occupied}) {
    const auto cells_a = cells_of(ca, cls);
    const auto cells_b = cells_of(cb, cls);
    if (!cells_a.empty() && !cells_b.empty())
      total += 0.5 * (directed(cells_a, cells_b) + directed(cells_b, cells_a));
    else if (!cells_a.empty() || !cells_b.empty())
      total += penalty;
  }
  return total;
}

inline double mse(const Ogm& a, const Ogm& b) {
  if (!(a.spec == b.spec)) throw ShapeError("mse: grid spec mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.values.size());
}

// --- batch evaluation --------------------------------------------------

struct FrameScore {
  std::string sequence_id;
  int step = 0;  // horizon step, 1-based
  double is_value = 0.0;
  double mse_value = 0.0;
};

struct AggregateStat {
  int step = 0;  // 0 for the overall row
  int n = 0;
  double is_mean = 0.0, is_se = 0.0;
  double mse_mean = 0.0, mse_se = 0.0;
};

struct EvalReport {
  std::vector<FrameScore> per_frame;
  std::vector<AggregateStat> per_horizon;
  AggregateStat overall;
};

namespace detail {

inline AggregateStat aggregate(int step, const std::vector<const FrameScore*>& rows) {
  AggregateStat s;
  s.step = step;
  s.n = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  for (const auto* r : rows) {
    s.is_mean += r->is_value;
    s.mse_mean += r->mse_value;
  }
  s.is_mean /= s.n;
  s.mse_mean /= s.n;
  if (s.n > 1) {
    double vis = 0, vmse = 0;
    for (const auto* r : rows) {
      vis += (r->is_value - s.is_mean) * (r->is_value - s.is_mean);
      vmse += (r->mse_value - s.mse_mean) * (r->mse_value - s.mse_mean);
    }
    // standard error: sample std (n-1 denominator) / sqrt(n)
    s.is_se = std::sqrt(vis / (s.n - 1)) / std::sqrt(static_cast<double>(s.n));
    s.mse_se = std::sqrt(vmse / (s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

}  // namespace detail

// Score every predicted frame of `pred` against the matching ground-truth
// sequence: prediction frame k lines up with truth frame H+k. Frames are
// scored in parallel; rows land in preallocated slots so ordering and
// aggregation stay deterministic.
inline EvalReport evaluate(const Manifest& pred, const Manifest& truth, Thresholds th = {}) {
  if (!(pred.grid == truth.grid)) throw ShapeError("evaluate: grid spec mismatch");
  std::vector<std::string> missing;
  struct Job {
    std::string id;
    std::filesystem::path pred_path, truth_path;
  };
  std::vector<Job> jobs;
  for (const auto& e : pred.sequences) {
    const SequenceEntry* t = truth.find(e.id);
    if (!t) {
      missing.push_back(e.id);
      continue;
    }
    jobs.push_back({e.id, pred.sequence_path(e), truth.sequence_path(*t)});
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "evaluate: sequences missing from ground truth:";
    for (const auto& id : missing) os << " " << id;
    throw Error(os.str());
  }

  const int H = pred.H;
  std::vector<std::vector<FrameScore>> rows(jobs.size());
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ScenarioSequence ps = read_sequence(jobs[i].pred_path);
      const ScenarioSequence ts = read_sequence(jobs[i].truth_path);
      const int n = std::min<int>(static_cast<int>(ps.frames.size()),
                                  static_cast<int>(ts.frames.size()) - H);
      if (n <= 0) throw Error("evaluate: ground truth shorter than H for " + jobs[i].id);
      for (int k = 0; k < n; ++k) {
        FrameScore fs;
        fs.sequence_id = jobs[i].id;
        fs.step = k + 1;
        fs.is_value = is_metric(ps.frames[static_cast<std::size_t>(k)],
                                ts.frames[static_cast<std::size_t>(H + k)], th);
        fs.mse_value = mse(ps.frames[static_cast<std::size_t>(k)],
                           ts.frames[static_cast<std::size_t>(H + k)]);
        rows[i].push_back(std::move(fs));
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(jobs.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (n_threads <= 1) {
    worker(0, jobs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (jobs.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(jobs.size(), b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th_ : pool) th_.join();
  }

  EvalReport report;
  for (auto& rs : rows)
    for (auto& fs : rs) report.per_frame.push_back(std::move(fs));

  std::map<int, std::vector<const FrameScore*>> by_step;
  std::vector<const FrameScore*> all;
  for (const auto& fs : report.per_frame) {
    by_step[fs.step].push_back(&fs);
    all.push_back(&fs);
  }
  for (const auto& [step, ptrs] : by_step)
    report.per_horizon.push_back(detail::aggregate(step, ptrs));
  report.overall = detail::aggregate(0, all);
  return report;
}

inline json report_to_json(const EvalReport& r) {
  json frames = json::array();
  for (const auto& f : r.per_frame)
    frames.push_back(
        {{"sequence_id", f.sequence_id}, {"step", f.step}, {"is", f.is_value}, {"mse", f.mse_value}});
  auto agg = [](const AggregateStat& s) {
    return json{{"step", s.step},       {"n", s.n},           {"is_mean", s.is_mean},
                {"is_se", s.is_se},     {"mse_mean", s.mse_mean}, {"mse_se", s.mse_se}};
  };
  json horizons = json::array();
  for (const auto& h : r.per_horizon) horizons.push_back(agg(h));
  return json{{"format", "ogp-eval-report"},
              {"version", 1},
              {"per_frame", frames},
              {"per_horizon", horizons},
              {"overall", agg(r.overall)}};
}

inline std::string report_to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "sequence_id,step,is,mse\n";
  os.precision(10);
  for (const auto& f : r.per_frame)
    os << f.sequence_id << "," << f.step << "," << f.is_value << "," << f.mse_value << "\n";
  return os.str();
}

// Console summary in the usual model-comparison table style.
inline std::string report_summary(const EvalReport& r, const std::string& label) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "Model                              IS              MSE\n";
  os << "-----------------------------------------------------\n";
  os << label;
  for (std::size_t i = label.size(); i < 30; ++i) os << ' ';
  os << "  " << r.overall.is_mean << " +/- " << r.overall.is_se << "   " << r.overall.mse_mean
     << " +/- " << r.overall.mse_se << "\n";
  os << "per-horizon IS:";
  for (const auto& h : r.per_horizon) os << " " << h.is_mean;
  os << "\n";
  return os.str();
}

}  // namespace ogp
