#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include "occlubench/lifters.hpp"
#include "occlubench/metrics.hpp"
#include "occlubench/noise.hpp"
#include "test_util.hpp"

using namespace occlubench;

namespace {

/// Flat synthetic subject: every joint at depth z, spread in x/y.
PoseSequence3D make_gt3d(int frames, double z = 5000.0) {
  PoseSequence3D gt(frames, 17);
  for (int f = 0; f < frames; ++f)
    for (int j = 0; j < 17; ++j)
      gt.at(f, j) = {-400.0 + 50.0 * j + 0.1 * f, -300.0 + 35.0 * j, z};
  return gt;
}

PoseSequence2D project_all(const PoseSequence3D& gt, const CameraModel& cam) {
  PoseSequence2D seq(gt.frames(), gt.joints(), cam.width, cam.height, 50.0);
  for (int f = 0; f < gt.frames(); ++f) {
    const auto px = project(gt.frame(f), cam, f);
    for (int j = 0; j < gt.joints(); ++j) seq.coords(f, j) = px[static_cast<size_t>(j)];
  }
  return seq;
}

}  // namespace

TEST_CASE("gt oracle is exactly zero error, whatever the 2D input") {
  const auto gt = make_gt3d(40);
  const auto pred = gt_oracle(gt);
  REQUIRE(mpjpe(pred, gt, JointExclusion::none()) == 0.0);
  const auto track = testutil::make_track(40, 17, 0.5, 71);
  REQUIRE(mpjpe(pred, gt, JointExclusion::none(), Slice::Occluded, &track) == 0.0);
}

TEST_CASE("passthrough inverts the projection on clean input") {
  const auto cam = testutil::make_camera(1000, 1000, 500, 500);
  const auto gt = make_gt3d(50);
  const auto seq2d = project_all(gt, cam);
  const auto pred = passthrough_lifter(seq2d, gt, cam);
  REQUIRE(mpjpe(pred, gt, JointExclusion::none()) < 1e-9);
}

TEST_CASE("passthrough propagates noise locality: visible joints error-free") {
  const auto cam = testutil::make_camera(1000, 1000, 500, 500);
  auto seq2d = project_all(make_gt3d(200), cam);
  // Ground truth defined as the back-projection of the clean 2D input, so
  // visible joints reconstruct bit-identically.
  const auto gt = passthrough_lifter(seq2d, make_gt3d(200), cam);
  seq2d.occlusion = testutil::make_track(200, 17, 0.4, 73);
  const auto noisy = inject_occlusion_noise(seq2d, {0.01, 10.0, 91, 0});
  const auto pred = passthrough_lifter(noisy, gt, cam);
  REQUIRE(mpjpe(pred, gt, JointExclusion::none(), Slice::Visible, &*seq2d.occlusion) == 0.0);
  REQUIRE(mpjpe(pred, gt, JointExclusion::none(), Slice::Occluded, &*seq2d.occlusion) > 0.0);
}

TEST_CASE("passthrough occluded error matches sigma*(z/f)*sqrt(pi/2) within 2%") {
  const auto cam = testutil::make_camera(1000, 1000, 500, 500);
  const int frames = 12000;  // 12000 frames x 9 occluded joints > 1e5 samples
  const auto gt = make_gt3d(frames, 5000.0);
  auto seq2d = project_all(gt, cam);
  OcclusionTrack track(frames, 17);
  for (int f = 0; f < frames; ++f)
    for (int j = 0; j < 17; j += 2) track.set(f, j, OcclusionLabel::ExternallyOccluded);
  seq2d.occlusion = track;

  const double sigma_px = 10.0;
  const auto noisy = inject_occlusion_noise(seq2d, {0.01, sigma_px, 2025, 0});
  const auto pred = passthrough_lifter(noisy, gt, cam);
  const double got = mpjpe(pred, gt, JointExclusion::none(), Slice::Occluded, &track);
  const double expected = sigma_px * (5000.0 / 1000.0) * std::sqrt(std::numbers::pi / 2.0);
  REQUIRE_THAT(got, Catch::Matchers::WithinRel(expected, 0.02));
}

TEST_CASE("passthrough refuses non-positive depth") {
  const auto cam = testutil::make_camera();
  auto gt = make_gt3d(3);
  gt.at(1, 4).z = 0.0;
  const auto seq2d = testutil::make_seq2d(3, 17);
  REQUIRE_THROWS_AS(passthrough_lifter(seq2d, gt, cam), DepthError);
}

TEST_CASE("constant pose lifter") {
  SECTION("static ground truth gives zero error") {
    PoseSequence3D gt(6, 17);
    for (int f = 0; f < 6; ++f)
      for (int j = 0; j < 17; ++j) gt.at(f, j) = {1.0 * j, 2.0 * j, 1000.0};
    const auto pred = constant_pose_lifter(gt);
    REQUIRE(mpjpe(pred, gt, JointExclusion::none()) == 0.0);
  }
  SECTION("two frames, one joint moving +/- d/2 about its mean") {
    PoseSequence3D gt(2, 17);
    for (int f = 0; f < 2; ++f)
      for (int j = 0; j < 17; ++j) gt.at(f, j) = {10.0, 20.0, 1000.0};
    gt.at(0, 5).x = 10.0 - 8.0;  // d = 16
    gt.at(1, 5).x = 10.0 + 8.0;
    const auto pred = constant_pose_lifter(gt);
    const auto per_joint = per_joint_mpjpe(pred, gt, JointExclusion::none());
    REQUIRE(*per_joint[5] == 8.0);
    REQUIRE(*per_joint[6] == 0.0);
  }
  SECTION("random ground truth matches the brute-force mean pose") {
    const auto gt = testutil::make_seq3d(14, 17, 75);
    const auto pred = constant_pose_lifter(gt);
    for (int j = 0; j < 17; ++j) {
      double sx = 0;
      for (int f = 0; f < 14; ++f) sx += gt.at(f, j).x;
      for (int f = 0; f < 14; ++f)
        REQUIRE_THAT(pred.at(f, j).x, Catch::Matchers::WithinRel(sx / 14.0, 1e-12));
    }
  }
}

TEST_CASE("occluded MPJPE is strictly non-decreasing over the sigma grid") {
  const auto cam = testutil::make_camera(1000, 1000, 500, 500);
  const int frames = 2000;
  const auto gt = make_gt3d(frames, 5000.0);
  auto seq2d = project_all(gt, cam);
  seq2d.occlusion = testutil::make_track(frames, 17, 0.4, 77);

  double prev = -1.0;
  int sigma_index = 0;
  for (double sigma : {0.001, 0.005, 0.01, 0.03, 0.05}) {
    NoiseSpec spec;
    spec.sigma = sigma;
    spec.sigma_px = sigma_to_px(sigma, seq2d.width, seq2d.height);
    spec.seed = derive_seed(4242, {static_cast<uint64_t>(sigma_index++)});
    const auto noisy = inject_occlusion_noise(seq2d, spec);
    const auto pred = passthrough_lifter(noisy, gt, cam);
    const double occluded = mpjpe(pred, gt, JointExclusion::none(), Slice::Occluded, &*seq2d.occlusion);
    REQUIRE(occluded > prev);
    prev = occluded;
  }
}

TEST_CASE("model id parsing") {
  REQUIRE(lifter_from_model_id("baseline:gt") == LifterKind::GtOracle);
  REQUIRE(lifter_from_model_id("baseline:passthrough") == LifterKind::Passthrough);
  REQUIRE(lifter_from_model_id("baseline:constpose") == LifterKind::ConstantPose);
  REQUIRE_THROWS_AS(lifter_from_model_id("baseline:zero"), std::invalid_argument);
  REQUIRE(is_baseline_model_id("baseline:gt"));
  REQUIRE_FALSE(is_baseline_model_id("videopose3d"));
}
