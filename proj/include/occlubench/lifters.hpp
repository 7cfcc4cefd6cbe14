#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "occlubench/camera.hpp"
#include "occlubench/pose.hpp"

namespace occlubench {

/// Analytically predictable reference models. These consume ground-truth
/// 3D by design: they validate the harness, they do not estimate poses.
enum class LifterKind { GtOracle, Passthrough, ConstantPose };

struct LifterSpec {
  LifterKind kind = LifterKind::GtOracle;
  std::optional<CameraModel> camera;  // required for Passthrough
};

inline const char* to_string(LifterKind k) {
  switch (k) {
    case LifterKind::GtOracle: return "baseline:gt";
    case LifterKind::Passthrough: return "baseline:passthrough";
    case LifterKind::ConstantPose: return "baseline:constpose";
  }
  return "?";
}

inline bool is_baseline_model_id(std::string_view id) { return id.starts_with("baseline:"); }

inline LifterKind lifter_from_model_id(std::string_view id) {
  if (id == "baseline:gt") return LifterKind::GtOracle;
  if (id == "baseline:passthrough") return LifterKind::Passthrough;
  if (id == "baseline:constpose") return LifterKind::ConstantPose;
  throw std::invalid_argument("unknown baseline model id: " + std::string(id));
}

/// Zero-error reference: echoes the ground truth, ignoring the 2D input.
inline PoseSequence3D gt_oracle(const PoseSequence3D& gt) { return gt; }

/// Back-projects each 2D keypoint at its ground-truth depth:
/// x = (u-cx)*z/fx, y = (v-cy)*z/fy, z = z_gt. With clean 2D input this
/// inverts the projection; under keypoint noise the per-joint 3D error is
/// the 2D error scaled by z/f.
inline PoseSequence3D passthrough_lifter(const PoseSequence2D& noisy2d, const PoseSequence3D& gt,
                                         const CameraModel& cam) {
  if (!cam.intrinsics_valid()) throw std::invalid_argument("camera intrinsics must be positive");
  if (gt.hypotheses != 1) throw std::invalid_argument("ground truth must be single-hypothesis");
  if (noisy2d.frames() != gt.frames() || noisy2d.joints() != gt.joints())
    throw std::invalid_argument("2D and 3D sequence shapes do not match");
  PoseSequence3D out(gt.frames(), gt.joints(), 1);
  for (int f = 0; f < gt.frames(); ++f)
    for (int j = 0; j < gt.joints(); ++j) {
      const double z = gt.at(f, j).z;
      if (!(z > 0.0))
        throw DepthError("non-positive ground-truth depth at frame " + std::to_string(f) + ", joint " +
                         std::to_string(j));
      const Vec2 uv = noisy2d.coords(f, j);
      out.at(f, j) = {(uv.x - cam.cx) * z / cam.fx, (uv.y - cam.cy) * z / cam.fy, z};
    }
  return out;
}

/// Predicts the temporal mean pose for every frame; a weak upper-bound
/// reference.
inline PoseSequence3D constant_pose_lifter(const PoseSequence3D& gt) {
  if (gt.frames() < 1) throw std::invalid_argument("need at least one frame");
  if (gt.hypotheses != 1) throw std::invalid_argument("ground truth must be single-hypothesis");
  std::vector<Vec3> mean(static_cast<size_t>(gt.joints()), Vec3{0.0, 0.0, 0.0});
  for (int f = 0; f < gt.frames(); ++f)
    for (int j = 0; j < gt.joints(); ++j) mean[static_cast<size_t>(j)] = mean[static_cast<size_t>(j)] + gt.at(f, j);
  const double inv = 1.0 / static_cast<double>(gt.frames());
  PoseSequence3D out(gt.frames(), gt.joints(), 1);
  for (int f = 0; f < gt.frames(); ++f)
    for (int j = 0; j < gt.joints(); ++j) out.at(f, j) = mean[static_cast<size_t>(j)] * inv;
  return out;
}

}  // namespace occlubench
