#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlubench/pose.hpp"

namespace occlubench {

struct DepthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Pinhole camera: intrinsics in pixels, extrinsics world-to-camera
/// (x_cam = R x_world + t, t in millimeters).
struct CameraModel {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  std::array<double, 9> rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  std::array<double, 3> translation = {0, 0, 0};
  int width = 0, height = 0;

  static CameraModel identity(double fx_, double fy_, double cx_, double cy_, int w, int h) {
    CameraModel c;
    c.fx = fx_; c.fy = fy_; c.cx = cx_; c.cy = cy_;
    c.width = w; c.height = h;
    return c;
  }

  bool intrinsics_valid() const { return fx > 0.0 && fy > 0.0; }

  /// Max absolute deviation of R^T R from identity.
  double orthonormality_error() const {
    double err = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += rotation[static_cast<size_t>(k * 3 + i)] * rotation[static_cast<size_t>(k * 3 + j)];
        err = std::max(err, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    return err;
  }

  bool orthonormal(double tol = 1e-9) const { return orthonormality_error() <= tol; }

  Vec3 world_to_camera(Vec3 p) const {
    const auto& r = rotation;
    return {r[0] * p.x + r[1] * p.y + r[2] * p.z + translation[0],
            r[3] * p.x + r[4] * p.y + r[5] * p.z + translation[1],
            r[6] * p.x + r[7] * p.y + r[8] * p.z + translation[2]};
  }

  /// Camera center in world coordinates: -R^T t.
  Vec3 position_world() const {
    const auto& r = rotation;
    const auto& t = translation;
    return {-(r[0] * t[0] + r[3] * t[1] + r[6] * t[2]),
            -(r[1] * t[0] + r[4] * t[1] + r[7] * t[2]),
            -(r[2] * t[0] + r[5] * t[1] + r[8] * t[2])};
  }

  /// Viewing direction (camera Z axis) expressed in world coordinates.
  Vec3 view_axis_world() const {
    return {rotation[6], rotation[7], rotation[8]};
  }
};

/// Projects one camera-space point to pixels: u = fx*x/z + cx, v = fy*y/z + cy.
inline Vec2 project_point(Vec3 p_cam, const CameraModel& cam, int frame = -1, int joint = -1) {
  if (!(p_cam.z > 0.0)) {
    std::string where;
    if (frame >= 0) where += " at frame " + std::to_string(frame);
    if (joint >= 0) where += ", joint " + std::to_string(joint);
    throw DepthError("non-positive depth" + where + " (z=" + std::to_string(p_cam.z) + ")");
  }
  return {cam.fx * p_cam.x / p_cam.z + cam.cx, cam.fy * p_cam.y / p_cam.z + cam.cy};
}

/// Projects a whole camera-space frame.
inline std::vector<Vec2> project(std::span<const Vec3> frame_cam, const CameraModel& cam, int frame = -1) {
  std::vector<Vec2> out;
  out.reserve(frame_cam.size());
  for (size_t j = 0; j < frame_cam.size(); ++j)
    out.push_back(project_point(frame_cam[j], cam, frame, static_cast<int>(j)));
  return out;
}

}  // namespace occlubench
