#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "occlubench/container.hpp"
#include "occlubench/mapping.hpp"
#include "test_util.hpp"

using namespace occlubench;

TEST_CASE("minimal 1-frame 17-joint 2D file parses") {
  std::istringstream in(
      R"({"schema":"h36m17","units":"px","width":1000,"height":1002,"fps":50.0,"subject":"S2","action":"walk"})"
      "\n0,1.000000,2.000000,3.000000,4.000000,5.000000,6.000000,7.000000,8.000000,9.000000,10.000000,"
      "11.000000,12.000000,13.000000,14.000000,15.000000,16.000000,17.000000,18.000000,19.000000,20.000000,"
      "21.000000,22.000000,23.000000,24.000000,25.000000,26.000000,27.000000,28.000000,29.000000,30.000000,"
      "31.000000,32.000000,33.000000,34.000000\n");
  const auto c = parse_container(in);
  REQUIRE(c.is_2d());
  REQUIRE(c.frames() == 1);
  REQUIRE(c.joints() == 17);
  REQUIRE(c.pose2d().coords(0, 0).x == 1.0);
  REQUIRE(c.pose2d().coords(0, 16).y == 34.0);
  REQUIRE_FALSE(c.pose2d().occlusion.has_value());
}

TEST_CASE("round-trip of a random container is byte-identical") {
  const auto c = testutil::make_container2d(7, 17, 42, true, true);
  const std::string first = serialize_container(c);
  std::istringstream in(first);
  const auto c2 = parse_container(in);
  REQUIRE(serialize_container(c2) == first);
}

TEST_CASE("read(write(c)) == c structurally, including NaN and camera") {
  auto c = testutil::make_container3d(5, 17, 9, 3);
  c.header.camera = testutil::make_camera(1148.5, 1147.2, 512.54, 515.45);
  c.header.camera->rotation = testutil::random_rotation(4);
  c.header.sigma = 0.03;
  c.header.run = 4;
  c.header.protocol = "p1";
  c.header.seed = 0xDEADBEEFCAFEF00DULL;
  c.pose3d().at(2, 1, 9) = {std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN()};
  std::istringstream in(serialize_container(c));
  const auto c2 = parse_container(in);
  REQUIRE(structurally_equal(c, c2));
}

TEST_CASE("frame row with 16 joints is a shape-mismatch error naming the row") {
  auto c = testutil::make_container2d(3, 17, 5, false, false);
  std::string text = serialize_container(c);
  // drop the last joint (two fields) from the second frame row
  const size_t row1 = text.find('\n', text.find('\n') + 1) + 1;
  size_t row_end = text.find('\n', row1);
  std::string row = text.substr(row1, row_end - row1);
  for (int k = 0; k < 2; ++k) row.erase(row.rfind(','));
  text = text.substr(0, row1) + row + text.substr(row_end);
  std::istringstream in(text);
  try {
    parse_container(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 3);  // header + first frame precede it
    REQUIRE(std::string(e.what()).find("32") != std::string::npos);
  }
}

TEST_CASE("malformed header and unknown schema tag raise parse errors") {
  {
    std::istringstream in("not json\n");
    REQUIRE_THROWS_AS(parse_container(in), ParseError);
  }
  {
    std::istringstream in(
        R"({"schema":"mpii","units":"px","width":1,"height":1,"fps":1,"subject":"s","action":"a"})" "\n");
    try {
      parse_container(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      REQUIRE(e.field == "schema");
    }
  }
}

TEST_CASE("frame index must match row order") {
  auto c = testutil::make_container2d(2, 17, 6, false, false);
  std::string text = serialize_container(c);
  const size_t row1 = text.find('\n') + 1;
  REQUIRE(text[row1] == '0');
  text[row1] = '1';
  std::istringstream in(text);
  REQUIRE_THROWS_AS(parse_container(in), ParseError);
}

TEST_CASE("map_skeleton identity keeps the sequence unchanged") {
  const auto c = testutil::make_container2d(4, 17, 13, true, true);
  const auto mapped = map_skeleton(c, JointMapping::identity(SchemaTag::H36M17));
  REQUIRE(structurally_equal(c, mapped));
}

TEST_CASE("COCO to H36M mapping flags head/neck/spine/thorax/hip as missing") {
  const auto m = JointMapping::by_names(SchemaTag::COCO17, SchemaTag::H36M17);
  const auto& h36m = SkeletonSchema::h36m17();
  const auto& coco = SkeletonSchema::coco17();
  std::vector<std::string> missing, present;
  for (int t = 0; t < 17; ++t)
    (m.source_index[static_cast<size_t>(t)] == kMissingJoint ? missing : present)
        .push_back(h36m.joints[static_cast<size_t>(t)]);
  REQUIRE(missing == std::vector<std::string>{"Hip", "Spine", "Thorax", "Neck", "Head"});
  REQUIRE(present.size() == 12);
  // ankles stand in for feet
  REQUIRE(m.source_index[static_cast<size_t>(h36m.index_of("LFoot"))] == coco.index_of("LAnkle"));
  REQUIRE(m.source_index[static_cast<size_t>(h36m.index_of("RFoot"))] == coco.index_of("RAnkle"));
  REQUIRE(m.source_index[static_cast<size_t>(h36m.index_of("LWrist"))] == coco.index_of("LWrist"));
}

TEST_CASE("swap mapping exchanges columns exactly") {
  const auto c = testutil::make_container2d(4, 17, 14, true, false);
  JointMapping m = JointMapping::identity(SchemaTag::H36M17);
  const int lw = SkeletonSchema::h36m17().index_of("LWrist");
  const int rw = SkeletonSchema::h36m17().index_of("RWrist");
  std::swap(m.source_index[static_cast<size_t>(lw)], m.source_index[static_cast<size_t>(rw)]);
  const auto mapped = map_skeleton(c, m);
  for (int f = 0; f < 4; ++f) {
    REQUIRE(mapped.pose2d().coords(f, lw).x == c.pose2d().coords(f, rw).x);
    REQUIRE(mapped.pose2d().coords(f, rw).y == c.pose2d().coords(f, lw).y);
    REQUIRE(mapped.pose2d().occlusion->label(f, lw) == c.pose2d().occlusion->label(f, rw));
  }
}

TEST_CASE("permutation mappings are invertible") {
  std::mt19937_64 g(33);
  for (int trial = 0; trial < 20; ++trial) {
    JointMapping m = JointMapping::identity(SchemaTag::H36M17);
    std::shuffle(m.source_index.begin(), m.source_index.end(), g);
    REQUIRE(m.is_permutation());
    const auto c = testutil::make_container2d(3, 17, 100 + trial, true, true);
    const auto there = map_skeleton(c, m);
    const auto back = map_skeleton(there, m.inverse());
    REQUIRE(structurally_equal(c, back));
  }
}

TEST_CASE("bm3d:h36m17 mapping is the documented permutation") {
  const auto m = JointMapping::builtin("bm3d:h36m17");
  REQUIRE(m.is_permutation());
  const auto& bm3d = SkeletonSchema::bm3d();
  const auto& h36m = SkeletonSchema::h36m17();
  for (int t = 0; t < 17; ++t)
    REQUIRE(bm3d.joints[static_cast<size_t>(m.source_index[static_cast<size_t>(t)])] ==
            h36m.joints[static_cast<size_t>(t)]);
}

TEST_CASE("align_for_scoring keeps all 17 joints for full H36M inputs") {
  const auto pred = testutil::make_container3d(4, 17, 21);
  const auto gt = testutil::make_container3d(4, 17, 22);
  const auto a = align_for_scoring(pred, gt, JointMapping::identity(SchemaTag::H36M17));
  REQUIRE(a.joints.size() == 17);
  REQUIRE(a.pred.joints() == 17);
}

TEST_CASE("align_for_scoring retains the 12 common COCO/H36M joints") {
  SequenceContainer pred = testutil::make_container2d(4, 17, 23, false, false);
  pred.header.schema = SchemaTag::COCO17;
  const auto gt = testutil::make_container2d(4, 17, 24, true, false);
  const auto a = align_for_scoring(pred, gt, JointMapping::by_names(SchemaTag::COCO17, SchemaTag::H36M17));
  REQUIRE(a.joints == std::vector<std::string>{"RHip", "RKnee", "RFoot", "LHip", "LKnee", "LFoot",
                                               "LShoulder", "LElbow", "LWrist", "RShoulder", "RElbow",
                                               "RWrist"});
  REQUIRE(a.pred.joints() == 12);
  REQUIRE(a.gt.joints() == 12);
  REQUIRE(a.gt.pose2d().occlusion.has_value());
}

TEST_CASE("alignment with zero common joints errors") {
  // Prediction whose every coordinate is NaN has no present joints.
  SequenceContainer pred = testutil::make_container2d(2, 17, 25, false, false);
  for (int f = 0; f < 2; ++f)
    for (int j = 0; j < 17; ++j)
      pred.pose2d().coords(f, j) = {std::numeric_limits<double>::quiet_NaN(),
                                    std::numeric_limits<double>::quiet_NaN()};
  const auto gt = testutil::make_container2d(2, 17, 26, false, false);
  REQUIRE_THROWS_AS(align_for_scoring(pred, gt, JointMapping::identity(SchemaTag::H36M17)),
                    AlignmentError);
}

TEST_CASE("alignment joint selection is symmetric in argument order") {
  SequenceContainer a = testutil::make_container2d(3, 17, 27, false, false);
  SequenceContainer b = testutil::make_container2d(3, 17, 28, false, false);
  // knock out different joints on each side
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int f = 0; f < 3; ++f) {
    a.pose2d().coords(f, 2) = {nan, nan};
    a.pose2d().coords(f, 9) = {nan, nan};
    b.pose2d().coords(f, 9) = {nan, nan};
    b.pose2d().coords(f, 14) = {nan, nan};
  }
  const auto id = JointMapping::identity(SchemaTag::H36M17);
  const auto ab = align_for_scoring(a, b, id);
  const auto ba = align_for_scoring(b, a, id);
  REQUIRE(ab.joints == ba.joints);
  REQUIRE(ab.joints.size() == 14);
}

TEST_CASE("frame count mismatch is an alignment error") {
  const auto pred = testutil::make_container3d(4, 17, 29);
  const auto gt = testutil::make_container3d(5, 17, 30);
  REQUIRE_THROWS_AS(align_for_scoring(pred, gt, JointMapping::identity(SchemaTag::H36M17)),
                    AlignmentError);
}

TEST_CASE("map_skeleton rejects schema mismatch") {
  const auto c = testutil::make_container2d(2, 17, 31, false, false);
  REQUIRE_THROWS_AS(map_skeleton(c, JointMapping::builtin("coco17:h36m17")), MappingError);
}

TEST_CASE("unknown mapping ids are rejected") {
  REQUIRE_THROWS_AS(JointMapping::builtin("mpii:h36m17"), MappingError);
  REQUIRE_THROWS_AS(JointMapping::builtin("h36m17"), MappingError);
}
