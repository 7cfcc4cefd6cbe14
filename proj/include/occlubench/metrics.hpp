#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlubench/pose.hpp"
#include "occlubench/skeleton.hpp"

namespace occlubench {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fixed-tree pairwise reduction; the summation order is independent of
/// how work was sharded, so reports reproduce to the last bit.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

enum class Slice { Overall, Visible, Occluded };

inline const char* to_string(Slice s) {
  switch (s) {
    case Slice::Overall: return "overall";
    case Slice::Visible: return "visible";
    case Slice::Occluded: return "occluded";
  }
  return "?";
}

inline Slice slice_from_string(std::string_view s) {
  if (s == "overall") return Slice::Overall;
  if (s == "visible") return Slice::Visible;
  if (s == "occluded") return Slice::Occluded;
  throw std::invalid_argument("unknown slice: " + std::string(s));
}

/// Joints dropped from every error average. Defaults to the hip, whose
/// predicted coordinates several models reset to zero before evaluation.
struct JointExclusion {
  std::vector<int> indices;

  bool excluded(int j) const {
    return std::find(indices.begin(), indices.end(), j) != indices.end();
  }

  static JointExclusion none() { return {}; }

  static JointExclusion hip_only(const SkeletonSchema& schema) {
    JointExclusion e;
    const int hip = schema.index_of("Hip");
    if (hip >= 0) e.indices.push_back(hip);
    return e;
  }

  static JointExclusion from_names(const SkeletonSchema& schema, std::span<const std::string> names) {
    JointExclusion e;
    for (const auto& n : names) {
      const int i = schema.index_of(n);
      if (i < 0) throw MetricError("exclusion joint '" + n + "' not in schema");
      e.indices.push_back(i);
    }
    return e;
  }
};

namespace detail {
inline bool passes_slice(Slice slice, const OcclusionTrack* labels, int f, int j) {
  switch (slice) {
    case Slice::Overall: return true;
    case Slice::Visible: return !labels->occluded(f, j);
    case Slice::Occluded: return labels->occluded(f, j);
  }
  return false;
}

inline void check_shapes(const PoseSequence3D& pred, const PoseSequence3D& gt, Slice slice,
                         const OcclusionTrack* labels) {
  if (pred.hypotheses != 1 || gt.hypotheses != 1)
    throw MetricError("aggregate hypotheses before scoring");
  if (pred.frames() != gt.frames() || pred.joints() != gt.joints())
    throw MetricError("prediction shape (" + std::to_string(pred.frames()) + "x" +
                      std::to_string(pred.joints()) + ") does not match ground truth (" +
                      std::to_string(gt.frames()) + "x" + std::to_string(gt.joints()) + ")");
  if (slice != Slice::Overall) {
    if (!labels) throw MetricError("visibility slice requires occlusion labels");
    if (labels->frames() != gt.frames() || labels->joints() != gt.joints())
      throw MetricError("label shape does not match sequences");
  }
}
}  // namespace detail

/// Mean per-joint position error in millimeters: the average Euclidean
/// distance over every (frame, joint) pair that passes the slice and is
/// not excluded. An empty selection is an error, never 0.
inline double mpjpe(const PoseSequence3D& pred, const PoseSequence3D& gt, const JointExclusion& excl,
                    Slice slice = Slice::Overall, const OcclusionTrack* labels = nullptr) {
  detail::check_shapes(pred, gt, slice, labels);
  std::vector<double> dists;
  dists.reserve(static_cast<size_t>(pred.frames()) * static_cast<size_t>(pred.joints()));
  for (int f = 0; f < pred.frames(); ++f)
    for (int j = 0; j < pred.joints(); ++j) {
      if (excl.excluded(j)) continue;
      if (slice != Slice::Overall && !detail::passes_slice(slice, labels, f, j)) continue;
      dists.push_back((pred.at(f, j) - gt.at(f, j)).norm());
    }
  if (dists.empty()) throw MetricError("empty selection: no (frame, joint) pair passes the slice");
  return pairwise_sum(dists) / static_cast<double>(dists.size());
}

/// Per-joint MPJPE; joints with an empty selection (or excluded) are
/// reported as absent rather than zero.
inline std::vector<std::optional<double>> per_joint_mpjpe(const PoseSequence3D& pred,
                                                          const PoseSequence3D& gt,
                                                          const JointExclusion& excl,
                                                          Slice slice = Slice::Overall,
                                                          const OcclusionTrack* labels = nullptr) {
  detail::check_shapes(pred, gt, slice, labels);
  std::vector<std::optional<double>> out(static_cast<size_t>(pred.joints()));
  std::vector<double> dists;
  for (int j = 0; j < pred.joints(); ++j) {
    if (excl.excluded(j)) continue;
    dists.clear();
    for (int f = 0; f < pred.frames(); ++f) {
      if (slice != Slice::Overall && !detail::passes_slice(slice, labels, f, j)) continue;
      dists.push_back((pred.at(f, j) - gt.at(f, j)).norm());
    }
    if (!dists.empty())
      out[static_cast<size_t>(j)] = pairwise_sum(dists) / static_cast<double>(dists.size());
  }
  return out;
}

/// Delta against the model's clean-input baseline.
inline double normalized_mpjpe(double value_at_sigma, double baseline) {
  return value_at_sigma - baseline;
}

// ---------------------------------------------------------------------------
// 2D detector error statistics (pixel MPJPE by occlusion category)

struct CategoryStats {
  double mean = 0.0;
  double stddev = 0.0;  // population std
  size_t count = 0;
};

/// Mean and population std of per-keypoint pixel errors, split by the
/// ground-truth occlusion category. Inputs must already be aligned
/// (same frame and joint count). Empty categories are absent.
inline std::map<OcclusionLabel, CategoryStats> detector_error_stats(const PoseSequence2D& detected,
                                                                    const PoseSequence2D& gt,
                                                                    const OcclusionTrack& labels) {
  if (detected.frames() != gt.frames() || detected.joints() != gt.joints())
    throw MetricError("detected shape does not match ground truth");
  if (labels.frames() != gt.frames() || labels.joints() != gt.joints())
    throw MetricError("label shape does not match sequences");
  std::map<OcclusionLabel, std::vector<double>> errs;
  for (int f = 0; f < gt.frames(); ++f)
    for (int j = 0; j < gt.joints(); ++j) {
      const Vec2 d = detected.coords(f, j);
      const Vec2 g = gt.coords(f, j);
      if (!d.finite() || !g.finite()) continue;  // MISSING joints contribute nothing
      errs[labels.label(f, j)].push_back((d - g).norm());
    }
  std::map<OcclusionLabel, CategoryStats> out;
  for (auto& [cat, v] : errs) {
    CategoryStats s;
    s.count = v.size();
    s.mean = pairwise_sum(v) / static_cast<double>(v.size());
    std::vector<double> sq(v.size());
    for (size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - s.mean) * (v[i] - s.mean);
    s.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size()));
    out[cat] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Occlusion structure statistics

struct DurationStats {
  double avg = 0.0;  // mean length of maximal occluded streaks, frames
  int max = 0;
};

/// Per-joint streak statistics over one track (one action).
inline std::vector<DurationStats> occlusion_duration_stats(const OcclusionTrack& labels) {
  std::vector<DurationStats> out(static_cast<size_t>(labels.joints()));
  for (int j = 0; j < labels.joints(); ++j) {
    int run = 0, runs = 0;
    long total = 0;
    int maxrun = 0;
    for (int f = 0; f < labels.frames(); ++f) {
      if (labels.occluded(f, j)) {
        ++run;
      } else if (run > 0) {
        ++runs;
        total += run;
        maxrun = std::max(maxrun, run);
        run = 0;
      }
    }
    if (run > 0) {
      ++runs;
      total += run;
      maxrun = std::max(maxrun, run);
    }
    out[static_cast<size_t>(j)] = {runs ? static_cast<double>(total) / runs : 0.0, maxrun};
  }
  return out;
}

/// Across actions: mean of per-action averages, max of per-action maxima.
inline std::vector<DurationStats> combine_duration_stats(
    const std::vector<std::vector<DurationStats>>& per_action) {
  if (per_action.empty()) return {};
  const size_t joints = per_action.front().size();
  std::vector<DurationStats> out(joints);
  for (const auto& a : per_action) {
    if (a.size() != joints) throw MetricError("duration stats joint counts differ across actions");
    for (size_t j = 0; j < joints; ++j) {
      out[j].avg += a[j].avg;
      out[j].max = std::max(out[j].max, a[j].max);
    }
  }
  for (auto& d : out) d.avg /= static_cast<double>(per_action.size());
  return out;
}

struct OcclusionHistogram {
  std::vector<size_t> bins;  // index = number of occluded joints per frame
  size_t frames = 0;
  double mean_occluded_fraction = 0.0;
};

inline OcclusionHistogram occluded_count_histogram(const OcclusionTrack& labels) {
  OcclusionHistogram h;
  h.frames = static_cast<size_t>(labels.frames());
  if (labels.frames() == 0) return h;
  h.bins.assign(static_cast<size_t>(labels.joints()) + 1, 0);
  size_t occluded = 0;
  for (int f = 0; f < labels.frames(); ++f) {
    int n = 0;
    for (int j = 0; j < labels.joints(); ++j)
      if (labels.occluded(f, j)) ++n;
    ++h.bins[static_cast<size_t>(n)];
    occluded += static_cast<size_t>(n);
  }
  h.mean_occluded_fraction =
      static_cast<double>(occluded) / (static_cast<double>(h.frames) * labels.joints());
  return h;
}

/// Merges two histograms over the same joint count (e.g. across actions).
inline OcclusionHistogram merge_histograms(const OcclusionHistogram& a, const OcclusionHistogram& b) {
  if (a.frames == 0) return b;
  if (b.frames == 0) return a;
  if (a.bins.size() != b.bins.size()) throw MetricError("histogram bin counts differ");
  OcclusionHistogram h;
  h.bins.resize(a.bins.size());
  for (size_t i = 0; i < a.bins.size(); ++i) h.bins[i] = a.bins[i] + b.bins[i];
  h.frames = a.frames + b.frames;
  h.mean_occluded_fraction = (a.mean_occluded_fraction * static_cast<double>(a.frames) +
                              b.mean_occluded_fraction * static_cast<double>(b.frames)) /
                             static_cast<double>(h.frames);
  return h;
}

// ---------------------------------------------------------------------------
// Run aggregation

struct RunAggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample std across runs; 0 for a single run
  size_t runs = 0;
};

inline RunAggregate aggregate_runs(std::span<const double> values) {
  if (values.empty()) throw MetricError("aggregate_runs requires at least one run");
  RunAggregate a;
  a.runs = values.size();
  a.mean = pairwise_sum(values) / static_cast<double>(values.size());
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - a.mean) * (values[i] - a.mean);
    a.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1));
  }
  return a;
}

}  // namespace occlubench
