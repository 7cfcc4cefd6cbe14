#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace occlubench {

/// Canonical 17-joint skeleton in the common H36M-17 index order. All
/// adapters map into this layout; metrics and geometry address joints
/// through it.
enum class Joint : int {
  Hip = 0,
  RHip = 1,
  RKnee = 2,
  RFoot = 3,
  LHip = 4,
  LKnee = 5,
  LFoot = 6,
  Spine = 7,
  Thorax = 8,
  Neck = 9,  // some sources label this slot "Nose"; treated as an alias
  Head = 10,
  LShoulder = 11,
  LElbow = 12,
  LWrist = 13,
  RShoulder = 14,
  RElbow = 15,
  RWrist = 16,
};

inline constexpr int kNumJoints = 17;

enum class SchemaTag { H36M17, BM3D, COCO17 };

inline const char* to_string(SchemaTag tag) {
  switch (tag) {
    case SchemaTag::H36M17: return "h36m17";
    case SchemaTag::BM3D: return "bm3d";
    case SchemaTag::COCO17: return "coco17";
  }
  return "?";
}

inline SchemaTag schema_tag_from_string(std::string_view s) {
  if (s == "h36m17") return SchemaTag::H36M17;
  if (s == "bm3d") return SchemaTag::BM3D;
  if (s == "coco17") return SchemaTag::COCO17;
  throw std::invalid_argument("unknown schema tag: " + std::string(s));
}

namespace detail {
inline constexpr std::array<const char*, kNumJoints> kH36mNames = {
    "Hip",  "RHip",  "RKnee", "RFoot",     "LHip",   "LKnee",  "LFoot",
    "Spine", "Thorax", "Neck", "Head",      "LShoulder", "LElbow", "LWrist",
    "RShoulder", "RElbow", "RWrist"};
}  // namespace detail

inline const char* joint_name(Joint j) {
  const int i = static_cast<int>(j);
  if (i < 0 || i >= kNumJoints) throw std::out_of_range("joint index out of range");
  return detail::kH36mNames[static_cast<size_t>(i)];
}

inline Joint joint_from_index(int i) {
  if (i < 0 || i >= kNumJoints) throw std::out_of_range("joint index out of range: " + std::to_string(i));
  return static_cast<Joint>(i);
}

inline Joint joint_from_name(std::string_view name) {
  for (int i = 0; i < kNumJoints; ++i)
    if (name == detail::kH36mNames[static_cast<size_t>(i)]) return static_cast<Joint>(i);
  throw std::invalid_argument("unknown joint name: " + std::string(name));
}

/// Ordered joint list plus parent links. The parent array forms a tree; for
/// schemas that contain a Hip joint the tree is rooted there.
struct SkeletonSchema {
  SchemaTag tag = SchemaTag::H36M17;
  std::vector<std::string> joints;
  std::vector<int> parents;  // -1 marks the root

  int joint_count() const { return static_cast<int>(joints.size()); }

  int index_of(std::string_view name) const {
    for (size_t i = 0; i < joints.size(); ++i)
      if (joints[i] == name) return static_cast<int>(i);
    return -1;
  }

  bool has_joint(std::string_view name) const { return index_of(name) >= 0; }

  /// Tree validity: exactly one root, all parents in range, acyclic, and
  /// rooted at Hip whenever the schema has one.
  bool valid_tree() const {
    const int n = joint_count();
    if (static_cast<int>(parents.size()) != n) return false;
    int root = -1;
    for (int i = 0; i < n; ++i) {
      if (parents[i] == -1) {
        if (root >= 0) return false;
        root = i;
      } else if (parents[i] < 0 || parents[i] >= n) {
        return false;
      }
    }
    if (root < 0) return false;
    const int hip = index_of("Hip");
    if (hip >= 0 && root != hip) return false;
    for (int i = 0; i < n; ++i) {  // walk to root; cycles exceed n steps
      int cur = i, steps = 0;
      while (cur != -1) {
        cur = parents[cur];
        if (++steps > n) return false;
      }
    }
    return true;
  }

  static const SkeletonSchema& h36m17() {
    static const SkeletonSchema s = [] {
      SkeletonSchema v;
      v.tag = SchemaTag::H36M17;
      v.joints.assign(detail::kH36mNames.begin(), detail::kH36mNames.end());
      v.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
      return v;
    }();
    return s;
  }

  // BlendMimic3D export layout: same joint set as H36M-17, ordered
  // spine-first with left limbs before right.
  static const SkeletonSchema& bm3d() {
    static const SkeletonSchema s = [] {
      SkeletonSchema v;
      v.tag = SchemaTag::BM3D;
      v.joints = {"Hip",  "Spine", "Thorax", "Neck",  "Head",
                  "LHip", "LKnee", "LFoot",  "RHip",  "RKnee", "RFoot",
                  "LShoulder", "LElbow", "LWrist", "RShoulder", "RElbow", "RWrist"};
      v.parents = {-1, 0, 1, 2, 3, 0, 5, 6, 0, 8, 9, 2, 11, 12, 2, 14, 15};
      return v;
    }();
    return s;
  }

  static const SkeletonSchema& coco17() {
    static const SkeletonSchema s = [] {
      SkeletonSchema v;
      v.tag = SchemaTag::COCO17;
      v.joints = {"Nose", "LEye", "REye", "LEar", "REar",
                  "LShoulder", "RShoulder", "LElbow", "RElbow",
                  "LWrist", "RWrist", "LHip", "RHip",
                  "LKnee", "RKnee", "LAnkle", "RAnkle"};
      v.parents = {-1, 0, 0, 1, 2, 0, 0, 5, 6, 7, 8, 5, 6, 11, 12, 13, 14};
      return v;
    }();
    return s;
  }

  static const SkeletonSchema& by_tag(SchemaTag tag) {
    switch (tag) {
      case SchemaTag::H36M17: return h36m17();
      case SchemaTag::BM3D: return bm3d();
      case SchemaTag::COCO17: return coco17();
    }
    throw std::invalid_argument("unknown schema tag");
  }
};

}  // namespace occlubench
