#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlubench/skeleton.hpp"

namespace occlubench {

struct Vec2 {
  double x = 0.0, y = 0.0;
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  double dot(Vec3 o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(Vec3 o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

/// Dense row-major matrix used for per-frame, per-joint storage.
template <typename T>
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, T init = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * static_cast<size_t>(cols), init) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  T& operator()(int r, int c) { return data_[idx(r, c)]; }
  const T& operator()(int r, int c) const { return data_[idx(r, c)]; }

  std::span<T> row(int r) { return {data_.data() + idx(r, 0), static_cast<size_t>(cols_)}; }
  std::span<const T> row(int r) const { return {data_.data() + idx(r, 0), static_cast<size_t>(cols_)}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  size_t idx(int r, int c) const {
    return static_cast<size_t>(r) * static_cast<size_t>(cols_) + static_cast<size_t>(c);
  }
  int rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

enum class OcclusionLabel : uint8_t {
  Visible = 0,
  SelfOccluded = 1,
  ExternallyOccluded = 2,
};

inline bool valid_label(int v) { return v >= 0 && v <= 2; }

/// Per-frame, per-joint occlusion categories. Binary tracks store their
/// "occluded" entries as ExternallyOccluded.
class OcclusionTrack {
 public:
  OcclusionTrack() = default;
  OcclusionTrack(int frames, int joints)
      : labels_(frames, joints, OcclusionLabel::Visible) {}

  int frames() const { return labels_.rows(); }
  int joints() const { return labels_.cols(); }

  OcclusionLabel label(int f, int j) const { return labels_(f, j); }
  void set(int f, int j, OcclusionLabel v) { labels_(f, j) = v; }
  bool occluded(int f, int j) const { return labels_(f, j) != OcclusionLabel::Visible; }

  Mat<OcclusionLabel>& raw() { return labels_; }
  const Mat<OcclusionLabel>& raw() const { return labels_; }

  friend bool operator==(const OcclusionTrack& a, const OcclusionTrack& b) {
    return a.labels_.rows() == b.labels_.rows() && a.labels_.cols() == b.labels_.cols() &&
           a.labels_.data() == b.labels_.data();
  }

 private:
  Mat<OcclusionLabel> labels_;
};

/// 2D pose track in pixel coordinates.
struct PoseSequence2D {
  int width = 0, height = 0;
  double fps = 0.0;
  Mat<Vec2> coords;  // frames x joints
  std::optional<OcclusionTrack> occlusion;
  std::vector<double> confidence;  // empty, or frames*joints row-major

  PoseSequence2D() = default;
  PoseSequence2D(int frames, int joints, int w, int h, double fps_)
      : width(w), height(h), fps(fps_), coords(frames, joints) {}

  int frames() const { return coords.rows(); }
  int joints() const { return coords.cols(); }
  double confidence_at(int f, int j) const {
    return confidence[static_cast<size_t>(f) * static_cast<size_t>(joints()) + static_cast<size_t>(j)];
  }
};

/// 3D pose track in camera-space millimeters. `hypotheses` adds an extra
/// axis of H candidate poses per frame; columns are laid out
/// hypothesis-major: (h0 j0..jN-1, h1 j0..jN-1, ...).
struct PoseSequence3D {
  int hypotheses = 1;
  Mat<Vec3> coords;  // frames x (hypotheses*joints)

  PoseSequence3D() = default;
  PoseSequence3D(int frames, int joints, int hyps = 1)
      : hypotheses(hyps), coords(frames, hyps * joints) {
    if (hyps < 1) throw std::invalid_argument("hypothesis count must be >= 1");
  }

  int frames() const { return coords.rows(); }
  int joints() const { return hypotheses > 0 ? coords.cols() / hypotheses : 0; }

  Vec3& at(int f, int j) { return coords(f, j); }  // hypothesis 0
  const Vec3& at(int f, int j) const { return coords(f, j); }
  Vec3& at(int f, int h, int j) { return coords(f, h * joints() + j); }
  const Vec3& at(int f, int h, int j) const { return coords(f, h * joints() + j); }

  std::span<const Vec3> frame(int f, int h = 0) const {
    return coords.row(f).subspan(static_cast<size_t>(h) * static_cast<size_t>(joints()),
                                 static_cast<size_t>(joints()));
  }
};

// ---------------------------------------------------------------------------
// validate_sequence

struct Violation {
  enum class Kind {
    NonFiniteCoordinate,
    DimensionMismatch,
    LabelOutOfRange,
    InvalidResolution,
    EmptySequence,
    ConfidenceOutOfRange,
  };
  Kind kind;
  int frame = -1;
  int joint = -1;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationResult validate_sequence(const PoseSequence2D& seq, const SkeletonSchema& schema) {
  ValidationResult r;
  auto add = [&](Violation::Kind k, int f, int j, std::string msg) {
    r.violations.push_back({k, f, j, std::move(msg)});
  };
  if (seq.frames() < 1) add(Violation::Kind::EmptySequence, -1, -1, "sequence has no frames");
  if (seq.joints() != schema.joint_count())
    add(Violation::Kind::DimensionMismatch, -1, -1,
        "sequence has " + std::to_string(seq.joints()) + " joints, schema expects " +
            std::to_string(schema.joint_count()));
  if (seq.width <= 0 || seq.height <= 0)
    add(Violation::Kind::InvalidResolution, -1, -1, "resolution must be positive");
  for (int f = 0; f < seq.frames(); ++f)
    for (int j = 0; j < seq.joints(); ++j)
      if (!seq.coords(f, j).finite())
        add(Violation::Kind::NonFiniteCoordinate, f, j,
            "non-finite coordinate at frame " + std::to_string(f) + ", joint " + std::to_string(j));
  if (seq.occlusion) {
    if (seq.occlusion->frames() != seq.frames() || seq.occlusion->joints() != seq.joints())
      add(Violation::Kind::DimensionMismatch, -1, -1, "occlusion track shape does not match coordinates");
    for (int f = 0; f < seq.occlusion->frames(); ++f)
      for (int j = 0; j < seq.occlusion->joints(); ++j)
        if (!valid_label(static_cast<int>(seq.occlusion->label(f, j))))
          add(Violation::Kind::LabelOutOfRange, f, j, "occlusion label out of range");
  }
  if (!seq.confidence.empty()) {
    if (seq.confidence.size() != static_cast<size_t>(seq.frames()) * static_cast<size_t>(seq.joints()))
      add(Violation::Kind::DimensionMismatch, -1, -1, "confidence matrix shape does not match coordinates");
    else
      for (int f = 0; f < seq.frames(); ++f)
        for (int j = 0; j < seq.joints(); ++j) {
          const double c = seq.confidence_at(f, j);
          if (!(c >= 0.0 && c <= 1.0))
            add(Violation::Kind::ConfidenceOutOfRange, f, j, "confidence outside [0,1]");
        }
  }
  return r;
}

inline ValidationResult validate_sequence(const PoseSequence3D& seq, const SkeletonSchema& schema) {
  ValidationResult r;
  auto add = [&](Violation::Kind k, int f, int j, std::string msg) {
    r.violations.push_back({k, f, j, std::move(msg)});
  };
  if (seq.frames() < 1) add(Violation::Kind::EmptySequence, -1, -1, "sequence has no frames");
  if (seq.joints() != schema.joint_count())
    add(Violation::Kind::DimensionMismatch, -1, -1,
        "sequence has " + std::to_string(seq.joints()) + " joints, schema expects " +
            std::to_string(schema.joint_count()));
  for (int f = 0; f < seq.frames(); ++f)
    for (int h = 0; h < seq.hypotheses; ++h)
      for (int j = 0; j < seq.joints(); ++j)
        if (!seq.at(f, h, j).finite())
          add(Violation::Kind::NonFiniteCoordinate, f, j,
              "non-finite coordinate at frame " + std::to_string(f) + ", joint " + std::to_string(j));
  return r;
}

// ---------------------------------------------------------------------------
// center_on_root

/// Translates every frame (and hypothesis) so the Hip joint sits at the
/// origin. Frames are centered independently.
inline PoseSequence3D center_on_root(const PoseSequence3D& seq, const SkeletonSchema& schema) {
  const int hip = schema.index_of("Hip");
  if (hip < 0) throw std::invalid_argument("schema has no Hip joint to center on");
  PoseSequence3D out = seq;
  for (int f = 0; f < out.frames(); ++f)
    for (int h = 0; h < out.hypotheses; ++h) {
      const Vec3 root = out.at(f, h, hip);
      for (int j = 0; j < out.joints(); ++j) out.at(f, h, j) = out.at(f, h, j) - root;
    }
  return out;
}

}  // namespace occlubench
