#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "occlubench/runner.hpp"
#include "test_util.hpp"

using namespace occlubench;
using testutil::TempDir;

namespace {

std::vector<std::string> csv_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

/// All regular files under root, relative path -> bytes; manifests are
/// skipped (their creation timestamp is metadata).
std::map<std::string, std::string> tree_bytes(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      out[std::filesystem::relative(e.path(), root).generic_string()] = testutil::slurp(e.path());
  return out;
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(OCCLUBENCH_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("convert applies the bm3d adapter and is idempotent on h36m17") {
  TempDir tmp("convert");
  // BM3D-layout container: same joints, different order.
  SequenceContainer c = testutil::make_container2d(5, 17, 81, true, false);
  c.header.schema = SchemaTag::BM3D;
  write_container(c, tmp.path / "bm3d.poseq");

  RunnerConfig cfg;
  cfg.input = (tmp.path / "bm3d.poseq").string();
  cfg.mapping = "bm3d:h36m17";
  cfg.out = (tmp.path / "h36m.poseq").string();
  cmd_convert(cfg);

  const auto out = read_container(tmp.path / "h36m.poseq");
  REQUIRE(out.header.schema == SchemaTag::H36M17);
  const auto& bm3d = SkeletonSchema::bm3d();
  const auto& h36m = SkeletonSchema::h36m17();
  for (int t = 0; t < 17; ++t) {
    const int s = bm3d.index_of(h36m.joints[static_cast<size_t>(t)]);
    REQUIRE(out.pose2d().coords(2, t).x == c.pose2d().coords(2, s).x);
    REQUIRE(out.pose2d().occlusion->label(2, t) == c.pose2d().occlusion->label(2, s));
  }

  // identity convert of the converted file is byte-identical
  RunnerConfig cfg2;
  cfg2.input = cfg.out;
  cfg2.mapping = "h36m17:h36m17";
  cfg2.out = (tmp.path / "h36m_again.poseq").string();
  cmd_convert(cfg2);
  REQUIRE(testutil::slurp(cfg2.out) == testutil::slurp(cfg.out));
}

TEST_CASE("corrupt p1 writes the documented layout, deterministically") {
  TempDir tmp("corrupt_p1");
  const auto dataset = tmp.path / "gt";
  testutil::write_synthetic_dataset(dataset, 2, 1, 30, 11);
  // corruption input: only the 2D files
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  for (const auto& e : std::filesystem::directory_iterator(dataset))
    if (e.path().filename().string().find("_2d") != std::string::npos)
      std::filesystem::copy_file(e.path(), input / e.path().filename());

  RunnerConfig cfg;
  cfg.dataset = input.string();
  cfg.protocol = "p1";
  cfg.sigmas = {0.01, 0.05};
  cfg.runs = 2;
  cfg.seed = 7;
  cfg.out = (tmp.path / "outA").string();
  const auto manifest = cmd_corrupt(cfg);
  REQUIRE(manifest.tasks.size() == 2 + 2 * 2 * 2);

  REQUIRE(std::filesystem::exists(tmp.path / "outA/corrupted/p1/gt/0/S2_act0_cam0.poseq"));
  REQUIRE(std::filesystem::exists(tmp.path / "outA/corrupted/p1/0.01/0/S2_act1_cam0.poseq"));
  REQUIRE(std::filesystem::exists(tmp.path / "outA/corrupted/p1/0.05/1/S2_act0_cam0.poseq"));
  REQUIRE(std::filesystem::exists(tmp.path / "outA/manifest.json"));

  const auto corrupted = read_container(tmp.path / "outA/corrupted/p1/0.05/1/S2_act0_cam0.poseq");
  REQUIRE(corrupted.header.protocol == "p1");
  REQUIRE(corrupted.header.sigma == 0.05);
  REQUIRE(corrupted.header.run == 1);
  REQUIRE(corrupted.header.seed.has_value());
  const auto original = read_container(input / "S2_act0_cam0_2d.poseq");
  int changed = 0;
  for (int f = 0; f < 30; ++f)
    for (int j = 0; j < 17; ++j) {
      const bool same = corrupted.pose2d().coords(f, j).x == original.pose2d().coords(f, j).x;
      if (original.pose2d().occlusion->occluded(f, j)) {
        changed += same ? 0 : 1;
      } else {
        REQUIRE(same);
      }
    }
  REQUIRE(changed > 0);

  // rerun with the same seed: byte-identical data files
  cfg.out = (tmp.path / "outB").string();
  cmd_corrupt(cfg);
  REQUIRE(tree_bytes(tmp.path / "outA") == tree_bytes(tmp.path / "outB"));

  // different parallelism degree: still byte-identical
  cfg.out = (tmp.path / "outC").string();
  cfg.parallelism = 4;
  cmd_corrupt(cfg);
  REQUIRE(tree_bytes(tmp.path / "outA") == tree_bytes(tmp.path / "outC"));
}

TEST_CASE("corrupt p2 truncates to 243 frames and writes per-joint variants") {
  TempDir tmp("corrupt_p2");
  const auto dataset = tmp.path / "gt";
  testutil::write_synthetic_dataset(dataset, 1, 1, 250, 13);
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  std::filesystem::copy_file(dataset / "S2_act0_cam0_2d.poseq", input / "S2_act0_cam0_2d.poseq");

  RunnerConfig cfg;
  cfg.dataset = input.string();
  cfg.protocol = "p2";
  cfg.runs = 2;
  cfg.seed = 21;
  cfg.out = (tmp.path / "out").string();
  const auto manifest = cmd_corrupt(cfg);
  REQUIRE(manifest.tasks.size() == 1 + 17 * 2);

  const auto var = read_container(tmp.path / "out/corrupted/p2/0.03/1/S2_act0_cam0.RWrist.poseq");
  REQUIRE(var.frames() == 243);
  REQUIRE(var.header.target_joint == "RWrist");
  REQUIRE(var.header.sigma == 0.03);
  const auto baseline = read_container(tmp.path / "out/corrupted/p2/gt/0/S2_act0_cam0.poseq");
  REQUIRE(baseline.frames() == 243);
  const int rwrist = SkeletonSchema::h36m17().index_of("RWrist");
  int changed = 0;
  for (int f = 0; f < 243; ++f)
    for (int j = 0; j < 17; ++j) {
      const bool same = var.pose2d().coords(f, j).x == baseline.pose2d().coords(f, j).x &&
                        var.pose2d().coords(f, j).y == baseline.pose2d().coords(f, j).y;
      const bool in_window = j == rwrist && f >= 50 && f < 150;
      if (in_window) {
        changed += same ? 0 : 1;
        REQUIRE(var.pose2d().occlusion->occluded(f, j));
      } else {
        REQUIRE(same);
        REQUIRE_FALSE(var.pose2d().occlusion->occluded(f, j));
      }
    }
  REQUIRE(changed == 100);
}

TEST_CASE("corrupt p2 honors target joints and window from the config") {
  TempDir tmp("corrupt_p2_cfg");
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  auto c = testutil::make_container2d(243, 17, 63, true, false);
  write_container(c, input / "seq.poseq");

  RunnerConfig cfg;
  cfg.dataset = input.string();
  cfg.protocol = "p2";
  cfg.runs = 1;
  cfg.p2_joints = {"LWrist", "RFoot"};
  cfg.p2_window = {10, 30};
  cfg.out = (tmp.path / "out").string();
  const auto manifest = cmd_corrupt(cfg);
  REQUIRE(manifest.tasks.size() == 1 + 2);  // baseline + two target joints

  const auto var = read_container(tmp.path / "out/corrupted/p2/0.03/0/S2_act7_cam0.LWrist.poseq");
  const int lw = SkeletonSchema::h36m17().index_of("LWrist");
  int changed = 0;
  for (int f = 0; f < 243; ++f)
    if (var.pose2d().coords(f, lw).x != c.pose2d().coords(f, lw).x) ++changed;
  REQUIRE(changed == 20);
  REQUIRE(var.pose2d().occlusion->occluded(10, lw));
  REQUIRE_FALSE(var.pose2d().occlusion->occluded(30, lw));

  cfg.p2_joints = {"NoSuchJoint"};
  REQUIRE_THROWS_AS(cmd_corrupt(cfg), UsageError);
}

TEST_CASE("corrupt refuses bad inputs with data errors") {
  TempDir tmp("corrupt_err");
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  // no occlusion track
  auto c = testutil::make_container2d(30, 17, 15, false, false);
  write_container(c, input / "seq.poseq");
  RunnerConfig cfg;
  cfg.dataset = input.string();
  cfg.protocol = "p1";
  cfg.out = (tmp.path / "out").string();
  REQUIRE_THROWS_AS(cmd_corrupt(cfg), DataError);
  cfg.protocol = "p2";  // 30 frames < 243
  REQUIRE_THROWS_AS(cmd_corrupt(cfg), DataError);
  cfg.protocol = "p3";
  REQUIRE_THROWS_AS(cmd_corrupt(cfg), UsageError);
}

TEST_CASE("evaluate baseline:gt yields an all-zero table") {
  TempDir tmp("eval_gt");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 2, 2, 25, 17);
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  for (const auto& e : std::filesystem::directory_iterator(gtdir))
    if (e.path().filename().string().find("_2d") != std::string::npos)
      std::filesystem::copy_file(e.path(), input / e.path().filename());

  RunnerConfig corrupt_cfg;
  corrupt_cfg.dataset = input.string();
  corrupt_cfg.protocol = "p1";
  corrupt_cfg.sigmas = {0.03};
  corrupt_cfg.runs = 2;
  corrupt_cfg.seed = 5;
  corrupt_cfg.out = (tmp.path / "sweep").string();
  cmd_corrupt(corrupt_cfg);

  RunnerConfig eval_cfg;
  eval_cfg.pred = (tmp.path / "sweep/corrupted").string();
  eval_cfg.gt = gtdir.string();
  eval_cfg.model = "baseline:gt";
  eval_cfg.out = (tmp.path / "eval").string();
  const auto report = cmd_evaluate(eval_cfg);

  for (const auto& [k, v] : report.aggregated) REQUIRE(v.mean == 0.0);
  const auto lines = csv_lines(tmp.path / "eval/reports/noise_table.csv");
  REQUIRE(lines.size() > 1);
  bool saw_gt = false, saw_sigma = false;
  for (size_t i = 1; i < lines.size(); ++i) {
    REQUIRE(lines[i].find(",0.0000,") != std::string::npos);
    saw_gt = saw_gt || lines[i].find(",gt,") != std::string::npos;
    saw_sigma = saw_sigma || lines[i].find(",0.03,") != std::string::npos;
  }
  REQUIRE(saw_gt);
  REQUIRE(saw_sigma);
  // normalized deltas are zero as well
  const auto norm = csv_lines(tmp.path / "eval/reports/normalized.csv");
  for (size_t i = 1; i < norm.size(); ++i)
    REQUIRE(norm[i].substr(norm[i].rfind(',') + 1) == "0.0000");
}

TEST_CASE("evaluate scores fixture predictions with hand-computed errors") {
  TempDir tmp("eval_fixture");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 1, 1, 10, 19);
  const auto gt3 = read_container(gtdir / "S2_act0_cam0_3d.poseq");

  // prediction = gt + 10 mm on LWrist (z axis), everything else exact
  auto pred = gt3;
  pred.header.model = "fixturemodel";
  const int lw = SkeletonSchema::h36m17().index_of("LWrist");
  for (int f = 0; f < pred.frames(); ++f) pred.pose3d().at(f, lw).z += 10.0;
  const auto preddir = tmp.path / "pred";
  std::filesystem::create_directories(preddir);
  write_container(pred, preddir / "pred.poseq");

  RunnerConfig cfg;
  cfg.pred = preddir.string();
  cfg.gt = gtdir.string();
  cfg.out = (tmp.path / "eval").string();
  cfg.slices = {"overall"};
  const auto report = cmd_evaluate(cfg);

  ReportKey key;
  key.model = "fixturemodel";
  key.joint = kAllJoints;
  key.slice = Slice::Overall;
  REQUIRE_THAT(report.aggregated.at(key).mean, Catch::Matchers::WithinAbs(10.0 / 16.0, 1e-12));

  const auto lines = csv_lines(tmp.path / "eval/reports/per_joint.csv");
  bool saw_lwrist = false;
  for (const auto& l : lines)
    if (l.find("fixturemodel") != std::string::npos && l.find(",LWrist,") != std::string::npos) {
      saw_lwrist = true;
      REQUIRE(l.find(",10.0000,") != std::string::npos);
    }
  REQUIRE(saw_lwrist);
}

TEST_CASE("evaluate applies P-Agg to multi-hypothesis predictions") {
  TempDir tmp("eval_hyp");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 1, 1, 6, 23);
  const auto gt3 = read_container(gtdir / "S2_act0_cam0_3d.poseq");

  SequenceContainer pred;
  pred.header = gt3.header;
  pred.header.hypotheses = 2;
  pred.header.model = "hypmodel";
  PoseSequence3D p(gt3.frames(), 17, 2);
  for (int f = 0; f < gt3.frames(); ++f)
    for (int j = 0; j < 17; ++j) {
      const Vec3 g = gt3.pose3d().at(f, j);
      p.at(f, 0, j) = g;
      p.at(f, 1, j) = {g.x + 2.0, g.y + 4.0, g.z + 6.0};
    }
  pred.payload = std::move(p);
  const auto preddir = tmp.path / "pred";
  std::filesystem::create_directories(preddir);
  write_container(pred, preddir / "pred.poseq");

  RunnerConfig cfg;
  cfg.pred = preddir.string();
  cfg.gt = gtdir.string();
  cfg.out = (tmp.path / "eval").string();
  cfg.slices = {"overall"};
  const auto report = cmd_evaluate(cfg);
  ReportKey key;
  key.model = "hypmodel";
  key.joint = kAllJoints;
  key.slice = Slice::Overall;
  // P-Agg mean offset (1,2,3): error sqrt(14) per joint
  REQUIRE_THAT(report.aggregated.at(key).mean,
               Catch::Matchers::WithinRel(std::sqrt(14.0), 1e-9));
}

TEST_CASE("evaluate refuses unmatched predictions unless --allow-partial") {
  TempDir tmp("eval_partial");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 1, 1, 5, 29);
  auto orphan = read_container(gtdir / "S2_act0_cam0_3d.poseq");
  orphan.header.action = "unknown_action";
  orphan.header.model = "m";
  const auto preddir = tmp.path / "pred";
  std::filesystem::create_directories(preddir);
  write_container(orphan, preddir / "orphan.poseq");
  write_container(read_container(gtdir / "S2_act0_cam0_3d.poseq"), preddir / "good.poseq");

  RunnerConfig cfg;
  cfg.pred = preddir.string();
  cfg.gt = gtdir.string();
  cfg.out = (tmp.path / "eval").string();
  cfg.slices = {"overall"};
  cfg.model = "m";
  REQUIRE_THROWS_AS(cmd_evaluate(cfg), DataError);
  cfg.allow_partial = true;
  const auto report = cmd_evaluate(cfg);
  REQUIRE_FALSE(report.raw.empty());
}

TEST_CASE("analyze occlusion-stats matches the metric oracles") {
  TempDir tmp("an_occ");
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  // the reference track [0,1,1,1,0,1,0] on joint 0, all else visible
  auto c = testutil::make_container2d(7, 17, 31, false, false);
  OcclusionTrack t(7, 17);
  for (int f : {1, 2, 3, 5}) t.set(f, 0, OcclusionLabel::ExternallyOccluded);
  c.pose2d().occlusion = t;
  write_container(c, input / "seq.poseq");

  RunnerConfig cfg;
  cfg.which = "occlusion-stats";
  cfg.dataset = input.string();
  cfg.out = (tmp.path / "out").string();
  cmd_analyze(cfg);

  const auto lines = csv_lines(tmp.path / "out/reports/occlusion_durations.csv");
  REQUIRE(lines.at(0) == "joint,avg_frames,max_frames");
  REQUIRE(lines.at(1) == "Hip,2.0000,3");
  REQUIRE(lines.at(2) == "RHip,0.0000,0");

  const auto hist = csv_lines(tmp.path / "out/reports/occlusion_histogram.csv");
  size_t total = 0;
  for (size_t i = 1; i < hist.size(); ++i)
    total += std::stoul(hist[i].substr(hist[i].find(',') + 1));
  REQUIRE(total == 7);
}

TEST_CASE("analyze geometry produces the heatmap grid") {
  TempDir tmp("an_geo");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 1, 1, 12, 37);
  const auto preddir = tmp.path / "pred";
  std::filesystem::create_directories(preddir);
  auto pred = read_container(gtdir / "S2_act0_cam0_3d.poseq");
  pred.header.model = "m";
  write_container(pred, preddir / "pred.poseq");

  RunnerConfig cfg;
  cfg.which = "geometry";
  cfg.pred = preddir.string();
  cfg.gt = gtdir.string();
  cfg.out = (tmp.path / "out").string();
  cmd_analyze(cfg);

  const auto counts = csv_lines(tmp.path / "out/reports/heatmap_counts.csv");
  REQUIRE(counts.size() == 17);  // header + 16 distance rows
  size_t total = 0;
  for (size_t i = 1; i < counts.size(); ++i) {
    std::stringstream ss(counts[i]);
    std::string cell;
    std::getline(ss, cell, ',');  // row label
    while (std::getline(ss, cell, ',')) total += std::stoul(cell);
  }
  REQUIRE(total == 12);

  // geometry is refused when the ground truth has no camera
  auto gt_nocam = read_container(gtdir / "S2_act0_cam0_3d.poseq");
  gt_nocam.header.camera.reset();
  write_container(gt_nocam, gtdir / "S2_act0_cam0_3d.poseq");
  REQUIRE_THROWS_AS(cmd_analyze(cfg), DataError);
}

TEST_CASE("analyze velocity bins every (frame, joint) sample") {
  TempDir tmp("an_vel");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 1, 1, 15, 41);
  const auto preddir = tmp.path / "pred";
  std::filesystem::create_directories(preddir);
  auto pred = read_container(gtdir / "S2_act0_cam0_3d.poseq");
  write_container(pred, preddir / "pred.poseq");

  RunnerConfig cfg;
  cfg.which = "velocity";
  cfg.dataset = gtdir.string();
  cfg.pred = preddir.string();
  cfg.gt = gtdir.string();
  cfg.out = (tmp.path / "out").string();
  cfg.exclude_joints = {};
  cmd_analyze(cfg);

  const auto lines = csv_lines(tmp.path / "out/reports/velocity.csv");
  REQUIRE(lines.size() == 21);  // header + 20 bins
  size_t total = 0;
  for (size_t i = 1; i < lines.size(); ++i) {
    std::stringstream ss(lines[i]);
    std::string lo, hi, freq;
    std::getline(ss, lo, ',');
    std::getline(ss, hi, ',');
    std::getline(ss, freq, ',');
    total += std::stoul(freq);
  }
  REQUIRE(total == 14u * 17u);
}

TEST_CASE("analyze detector-stats writes the category table") {
  TempDir tmp("an_det");
  const auto gtdir = tmp.path / "gt";
  std::filesystem::create_directories(gtdir);
  auto gt2 = testutil::make_container2d(20, 17, 43, false, false);
  for (int f = 0; f < 20; ++f)
    for (int j = 0; j < 17; ++j)
      gt2.pose2d().coords(f, j) = {std::floor(gt2.pose2d().coords(f, j).x),
                                   std::floor(gt2.pose2d().coords(f, j).y)};
  OcclusionTrack t(20, 17);
  for (int f = 0; f < 20; ++f) {
    t.set(f, 1, OcclusionLabel::SelfOccluded);
    t.set(f, 2, OcclusionLabel::ExternallyOccluded);
  }
  gt2.pose2d().occlusion = t;
  write_container(gt2, gtdir / "gt.poseq");

  // COCO-format detections: map the H36M columns into COCO order, offset by 5 px
  const auto inv = JointMapping::by_names(SchemaTag::H36M17, SchemaTag::COCO17);
  auto det = map_skeleton(gt2, inv);
  det.pose2d().occlusion.reset();
  det.header.model = "cpn";
  for (int f = 0; f < 20; ++f)
    for (int j = 0; j < 17; ++j)
      if (det.pose2d().coords(f, j).finite())
        det.pose2d().coords(f, j) = det.pose2d().coords(f, j) + Vec2{3.0, 4.0};
  const auto preddir = tmp.path / "det";
  std::filesystem::create_directories(preddir);
  write_container(det, preddir / "det.poseq");

  RunnerConfig cfg;
  cfg.which = "detector-stats";
  cfg.pred = preddir.string();
  cfg.gt = gtdir.string();
  cfg.out = (tmp.path / "out").string();
  cmd_analyze(cfg);

  const auto lines = csv_lines(tmp.path / "out/reports/detector_stats.csv");
  REQUIRE(lines.at(0) == "detector,category,mean_px,std_px,count");
  REQUIRE(lines.at(1).find("cpn,visible,5.0000,0.0000,") == 0);
  REQUIRE(lines.at(2).find("cpn,self_occluded,5.0000,0.0000,") == 0);
  REQUIRE(lines.at(3).find("cpn,externally_occluded,5.0000,0.0000,") == 0);
}

TEST_CASE("P2 corrupted sweeps evaluate with per-target-joint keys") {
  TempDir tmp("eval_p2");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 1, 1, 250, 59);
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  std::filesystem::copy_file(gtdir / "S2_act0_cam0_2d.poseq", input / "S2_act0_cam0_2d.poseq");

  RunnerConfig corrupt_cfg;
  corrupt_cfg.dataset = input.string();
  corrupt_cfg.protocol = "p2";
  corrupt_cfg.runs = 1;
  corrupt_cfg.seed = 3;
  corrupt_cfg.out = (tmp.path / "sweep").string();
  cmd_corrupt(corrupt_cfg);

  RunnerConfig eval_cfg;
  eval_cfg.pred = (tmp.path / "sweep/corrupted").string();
  eval_cfg.gt = gtdir.string();
  eval_cfg.model = "baseline:passthrough";
  eval_cfg.out = (tmp.path / "eval").string();
  const auto report = cmd_evaluate(eval_cfg);

  // Every perturbed keypoint shows up as a target-joint key. The Hip
  // target has no occluded-slice cell: its only occluded samples are the
  // excluded hip itself, and empty selections stay absent.
  int occluded_cells = 0, overall_cells = 0;
  for (const auto& [k, v] : report.aggregated) {
    if (k.target_joint.empty() || k.joint != kAllJoints) continue;
    if (k.slice == Slice::Occluded) ++occluded_cells;
    if (k.slice == Slice::Overall) ++overall_cells;
  }
  REQUIRE(overall_cells == 17);
  REQUIRE(occluded_cells == 16);
  // the noisy window makes every occluded-slice error positive
  for (const auto& [k, v] : report.aggregated)
    if (!k.target_joint.empty() && k.slice == Slice::Occluded) REQUIRE(v.mean > 0.0);
}

TEST_CASE("aggregated report cells are recomputable from the per-run CSV") {
  TempDir tmp("eval_recompute");
  const auto gtdir = tmp.path / "gt";
  testutil::write_synthetic_dataset(gtdir, 2, 1, 20, 61);
  const auto input = tmp.path / "in";
  std::filesystem::create_directories(input);
  for (const auto& e : std::filesystem::directory_iterator(gtdir))
    if (e.path().filename().string().find("_2d") != std::string::npos)
      std::filesystem::copy_file(e.path(), input / e.path().filename());

  RunnerConfig corrupt_cfg;
  corrupt_cfg.dataset = input.string();
  corrupt_cfg.protocol = "p1";
  corrupt_cfg.sigmas = {0.03};
  corrupt_cfg.runs = 3;
  corrupt_cfg.seed = 8;
  corrupt_cfg.out = (tmp.path / "sweep").string();
  cmd_corrupt(corrupt_cfg);

  RunnerConfig eval_cfg;
  eval_cfg.pred = (tmp.path / "sweep/corrupted").string();
  eval_cfg.gt = gtdir.string();
  eval_cfg.model = "baseline:passthrough";
  eval_cfg.out = (tmp.path / "eval").string();
  cmd_evaluate(eval_cfg);

  // pool raw rows per run (count-weighted across actions), then aggregate
  struct Pool {
    double weighted = 0;
    size_t count = 0;
  };
  std::map<std::string, std::map<std::string, Pool>> cells;  // (slice|sigma) -> run -> pool
  for (const auto& line : csv_lines(tmp.path / "eval/reports/per_run.csv")) {
    std::stringstream ss(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.at(0) != "baseline:passthrough" || f.at(7) != "ALL") continue;
    const std::string key = f.at(8) + "|" + f.at(2);
    auto& pool = cells[key][f.at(3)];
    pool.weighted += std::stod(f.at(10)) * std::stod(f.at(11));
    pool.count += std::stoul(f.at(11));
  }
  std::map<std::string, std::string> recomputed;  // key -> "mean,std,runs"
  for (const auto& [key, runs] : cells) {
    std::vector<double> values;
    for (const auto& [run, pool] : runs) values.push_back(pool.weighted / pool.count);
    const auto agg = aggregate_runs(values);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%zu", agg.mean, agg.stddev, agg.runs);
    recomputed[key] = buf;
  }
  int matched = 0;
  for (const auto& line : csv_lines(tmp.path / "eval/reports/noise_table.csv")) {
    std::stringstream ss(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.at(0) != "baseline:passthrough") continue;
    const std::string key = f.at(2) + "|" + f.at(3);
    REQUIRE(recomputed.count(key) == 1);
    REQUIRE(recomputed.at(key) == f.at(4) + "," + f.at(5) + "," + f.at(6));
    ++matched;
  }
  REQUIRE(matched >= 6);  // 3 slices x (gt + sigma)
}

TEST_CASE("CLI exit codes: 0 success, 1 data error, 2 usage error") {
  TempDir tmp("cli_exit");
  REQUIRE(run_cli("--help") == 0);
  REQUIRE(run_cli("") == 2);                 // missing subcommand
  REQUIRE(run_cli("corrupt --protocol p9 --dataset x --out y") == 2);
  REQUIRE(run_cli("convert --input " + (tmp.path / "missing.poseq").string() +
                  " --mapping coco17:h36m17 --out " + (tmp.path / "o.poseq").string()) == 1);
  REQUIRE(run_cli("convert --input " + (tmp.path / "missing.poseq").string() +
                  " --mapping nosuch:h36m17 --out " + (tmp.path / "o.poseq").string()) == 2);

  // a real conversion through the binary
  auto c = testutil::make_container2d(3, 17, 47, true, false);
  write_container(c, tmp.path / "in.poseq");
  REQUIRE(run_cli("convert --input " + (tmp.path / "in.poseq").string() +
                  " --mapping h36m17:h36m17 --out " + (tmp.path / "out.poseq").string()) == 0);
  REQUIRE(std::filesystem::exists(tmp.path / "out.poseq"));
}

TEST_CASE("config file drives the runner and flags override it") {
  TempDir tmp("cli_config");
  const auto input = tmp.path / "in";
  testutil::write_synthetic_dataset(input, 1, 1, 10, 53);
  // keep only the 2D file
  std::filesystem::remove(input / "S2_act0_cam0_3d.poseq");

  nlohmann::json j;
  j["dataset"] = input.string();
  j["protocol"] = "p1";
  j["sigmas"] = {0.01};
  j["runs"] = 1;
  j["seed"] = 99;
  j["out"] = (tmp.path / "outA").string();
  std::ofstream(tmp.path / "cfg.json") << j.dump();

  REQUIRE(run_cli("corrupt --config " + (tmp.path / "cfg.json").string()) == 0);
  REQUIRE(std::filesystem::exists(tmp.path / "outA/corrupted/p1/0.01/0/S2_act0_cam0.poseq"));

  // --out overrides the config value
  REQUIRE(run_cli("corrupt --config " + (tmp.path / "cfg.json").string() + " --out " +
                  (tmp.path / "outB").string()) == 0);
  REQUIRE(std::filesystem::exists(tmp.path / "outB/corrupted/p1/0.01/0/S2_act0_cam0.poseq"));

  // unknown config keys are usage errors
  j["typo_key"] = 1;
  std::ofstream(tmp.path / "bad.json") << j.dump();
  REQUIRE(run_cli("corrupt --config " + (tmp.path / "bad.json").string()) == 2);
}
