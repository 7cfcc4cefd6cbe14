#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "occlubench/camera.hpp"
#include "occlubench/metrics.hpp"
#include "occlubench/pose.hpp"
#include "occlubench/skeleton.hpp"

namespace occlubench {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Coordinate-wise mean of all joints in one frame.
inline Vec3 subject_center(std::span<const Vec3> frame) {
  if (frame.empty()) throw GeometryError("empty frame");
  Vec3 acc{0.0, 0.0, 0.0};
  for (const Vec3& p : frame) acc = acc + p;
  return acc * (1.0 / static_cast<double>(frame.size()));
}

/// Euclidean distance in meters between the subject center and the camera
/// position, both in world coordinates.
inline double camera_distance(std::span<const Vec3> frame_world, const CameraModel& cam) {
  if (!cam.orthonormal(1e-6)) throw GeometryError("camera rotation is not orthonormal");
  return (subject_center(frame_world) - cam.position_world()).norm() / 1000.0;
}

/// Angle in [0,180] degrees between the camera viewing axis and the normal
/// of the subject's shoulder-hip plane. 0 = subject facing away from the
/// camera, 180 = facing directly toward it. The normal is
/// normalize((LShoulder-Hip) x (RShoulder-Hip)), which in a right-handed
/// frame points out of the subject's chest.
inline double orientation_angle(std::span<const Vec3> frame_world, const CameraModel& cam,
                                const SkeletonSchema& schema) {
  if (!cam.orthonormal(1e-6)) throw GeometryError("camera rotation is not orthonormal");
  const int hip = schema.index_of("Hip");
  const int lsh = schema.index_of("LShoulder");
  const int rsh = schema.index_of("RShoulder");
  if (hip < 0 || lsh < 0 || rsh < 0) throw GeometryError("schema lacks Hip/LShoulder/RShoulder");
  const Vec3 h = frame_world[static_cast<size_t>(hip)];
  const Vec3 l = frame_world[static_cast<size_t>(lsh)];
  const Vec3 r = frame_world[static_cast<size_t>(rsh)];
  if (!h.finite() || !l.finite() || !r.finite())
    throw GeometryError("Hip/LShoulder/RShoulder must be finite");
  const Vec3 n = (l - h).cross(r - h);
  const double nn = n.norm();
  const double scale = std::max((l - h).norm(), (r - h).norm());
  if (nn <= 1e-12 * std::max(scale * scale, 1.0))
    throw GeometryError("degenerate geometry: hip and shoulders are collinear");
  const Vec3 z = cam.view_axis_world();
  const double c = std::clamp(n.dot(z) / (nn * z.norm()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

// ---------------------------------------------------------------------------
// Binned aggregation

/// Bin edges for the orientation-distance error heatmap. Defaults: 10
/// degree orientation bins over [0,180], 0.5 m distance bins over [0,8].
struct GridSpec {
  std::vector<double> orientation_edges;
  std::vector<double> distance_edges;

  static GridSpec defaults() {
    GridSpec g;
    for (int i = 0; i <= 18; ++i) g.orientation_edges.push_back(10.0 * i);
    for (int i = 0; i <= 16; ++i) g.distance_edges.push_back(0.5 * i);
    return g;
  }

  int orientation_bins() const { return static_cast<int>(orientation_edges.size()) - 1; }
  int distance_bins() const { return static_cast<int>(distance_edges.size()) - 1; }
};

namespace detail {
inline void check_edges(const std::vector<double>& edges) {
  if (edges.size() < 2) throw GeometryError("grid needs at least two edges");
  for (size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw GeometryError("grid edges must be strictly increasing");
}

/// Bin index with edge clamping. Values at the final edge fall into the
/// last bin; out-of-range values clamp and are reported through `spilled`.
inline int bin_index(const std::vector<double>& edges, double v, bool& spilled) {
  const int nbins = static_cast<int>(edges.size()) - 1;
  if (v < edges.front()) {
    spilled = true;
    return 0;
  }
  if (v > edges.back()) {
    spilled = true;
    return nbins - 1;
  }
  if (v == edges.back()) return nbins - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return static_cast<int>(it - edges.begin()) - 1;
}
}  // namespace detail

struct HeatmapSample {
  double orientation_deg = 0.0;
  double distance_m = 0.0;
  double error_mm = 0.0;
};

/// Mergeable accumulator over the orientation-distance grid. Out-of-grid
/// samples are assigned to the clamped edge bin and counted in `spill`.
class Heatmap {
 public:
  explicit Heatmap(GridSpec grid = GridSpec::defaults()) : grid_(std::move(grid)) {
    detail::check_edges(grid_.orientation_edges);
    detail::check_edges(grid_.distance_edges);
    const size_t n = static_cast<size_t>(grid_.orientation_bins()) * static_cast<size_t>(grid_.distance_bins());
    sum_.assign(n, 0.0);
    count_.assign(n, 0);
  }

  const GridSpec& grid() const { return grid_; }
  size_t spill() const { return spill_; }

  void add(const HeatmapSample& s) {
    bool spilled = false;
    const int oi = detail::bin_index(grid_.orientation_edges, s.orientation_deg, spilled);
    const int di = detail::bin_index(grid_.distance_edges, s.distance_m, spilled);
    if (spilled) ++spill_;
    const size_t idx = static_cast<size_t>(di) * static_cast<size_t>(grid_.orientation_bins()) +
                       static_cast<size_t>(oi);
    sum_[idx] += s.error_mm;
    ++count_[idx];
  }

  size_t count(int distance_bin, int orientation_bin) const {
    return count_[index(distance_bin, orientation_bin)];
  }

  /// Mean error of a bin; empty bins have no value ("white pixels").
  std::optional<double> mean(int distance_bin, int orientation_bin) const {
    const size_t idx = index(distance_bin, orientation_bin);
    if (count_[idx] == 0) return std::nullopt;
    return sum_[idx] / static_cast<double>(count_[idx]);
  }

  size_t total_count() const {
    size_t n = 0;
    for (size_t c : count_) n += c;
    return n;
  }

  /// Associative merge of partial grids from concurrent shards.
  void merge(const Heatmap& other) {
    if (sum_.size() != other.sum_.size()) throw GeometryError("heatmap grids differ");
    for (size_t i = 0; i < sum_.size(); ++i) {
      sum_[i] += other.sum_[i];
      count_[i] += other.count_[i];
    }
    spill_ += other.spill_;
  }

 private:
  size_t index(int di, int oi) const {
    if (di < 0 || di >= grid_.distance_bins() || oi < 0 || oi >= grid_.orientation_bins())
      throw GeometryError("bin index out of range");
    return static_cast<size_t>(di) * static_cast<size_t>(grid_.orientation_bins()) + static_cast<size_t>(oi);
  }
  GridSpec grid_;
  std::vector<double> sum_;
  std::vector<size_t> count_;
  size_t spill_ = 0;
};

inline Heatmap bin_heatmap(std::span<const HeatmapSample> samples, GridSpec grid = GridSpec::defaults()) {
  Heatmap h(std::move(grid));
  for (const auto& s : samples) h.add(s);
  return h;
}

// ---------------------------------------------------------------------------
// Velocity profile

/// 20 log-spaced speed bins over [1e-2, 1e2] px/frame; below-range speeds
/// (including zero) clamp into the first bin.
struct VelocityBins {
  std::vector<double> edges;
  std::vector<size_t> frequency;
  std::vector<double> error_sum;
  size_t spill = 0;

  static std::vector<double> default_edges(int bins = 20, double lo = 1e-2, double hi = 1e2) {
    std::vector<double> e;
    e.reserve(static_cast<size_t>(bins) + 1);
    const double step = (std::log10(hi) - std::log10(lo)) / bins;
    for (int i = 0; i <= bins; ++i) e.push_back(std::pow(10.0, std::log10(lo) + step * i));
    return e;
  }

  explicit VelocityBins(std::vector<double> edges_ = default_edges()) : edges(std::move(edges_)) {
    detail::check_edges(edges);
    frequency.assign(edges.size() - 1, 0);
    error_sum.assign(edges.size() - 1, 0.0);
  }

  void add(double speed, double error_mm) {
    bool spilled = false;
    const int b = detail::bin_index(edges, speed, spilled);
    if (spilled) ++spill;
    ++frequency[static_cast<size_t>(b)];
    error_sum[static_cast<size_t>(b)] += error_mm;
  }

  std::optional<double> mean_error(int bin) const {
    if (frequency[static_cast<size_t>(bin)] == 0) return std::nullopt;
    return error_sum[static_cast<size_t>(bin)] / static_cast<double>(frequency[static_cast<size_t>(bin)]);
  }

  size_t total_count() const {
    size_t n = 0;
    for (size_t f : frequency) n += f;
    return n;
  }

  void merge(const VelocityBins& other) {
    if (edges != other.edges) throw GeometryError("velocity bin edges differ");
    for (size_t i = 0; i < frequency.size(); ++i) {
      frequency[i] += other.frequency[i];
      error_sum[i] += other.error_sum[i];
    }
    spill += other.spill;
  }
};

/// Per-keypoint speed (px/frame, from consecutive 2D positions) against
/// per-keypoint 3D error. Requires at least two frames.
inline VelocityBins velocity_profile(const PoseSequence2D& seq2d, const PoseSequence3D& pred,
                                     const PoseSequence3D& gt,
                                     const JointExclusion& excl = JointExclusion::none(),
                                     std::vector<double> edges = VelocityBins::default_edges()) {
  if (seq2d.frames() < 2) throw GeometryError("velocity profile requires at least two frames");
  if (pred.frames() != seq2d.frames() || gt.frames() != seq2d.frames() ||
      pred.joints() != seq2d.joints() || gt.joints() != seq2d.joints())
    throw GeometryError("2D/3D sequence shapes do not match");
  VelocityBins bins(std::move(edges));
  for (int f = 1; f < seq2d.frames(); ++f)
    for (int j = 0; j < seq2d.joints(); ++j) {
      if (excl.excluded(j)) continue;
      const double speed = (seq2d.coords(f, j) - seq2d.coords(f - 1, j)).norm();
      const double err = (pred.at(f, j) - gt.at(f, j)).norm();
      bins.add(speed, err);
    }
  return bins;
}

}  // namespace occlubench
