#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "occlubench/container.hpp"
#include "occlubench/skeleton.hpp"

namespace occlubench {

struct MappingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kMissingJoint = -1;

/// Per-target-joint source index, or kMissingJoint when the source schema
/// has no counterpart.
struct JointMapping {
  SchemaTag source = SchemaTag::H36M17;
  SchemaTag target = SchemaTag::H36M17;
  std::vector<int> source_index;  // one entry per target joint

  bool is_permutation() const {
    std::vector<bool> used(source_index.size(), false);
    for (int s : source_index) {
      if (s == kMissingJoint || s < 0 || s >= static_cast<int>(used.size())) return false;
      if (used[static_cast<size_t>(s)]) return false;
      used[static_cast<size_t>(s)] = true;
    }
    return true;
  }

  JointMapping inverse() const {
    if (!is_permutation()) throw MappingError("only permutation mappings are invertible");
    JointMapping inv;
    inv.source = target;
    inv.target = source;
    inv.source_index.assign(source_index.size(), kMissingJoint);
    for (size_t t = 0; t < source_index.size(); ++t)
      inv.source_index[static_cast<size_t>(source_index[t])] = static_cast<int>(t);
    return inv;
  }

  static JointMapping identity(SchemaTag tag) {
    JointMapping m;
    m.source = m.target = tag;
    const int n = SkeletonSchema::by_tag(tag).joint_count();
    m.source_index.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) m.source_index[static_cast<size_t>(i)] = i;
    return m;
  }

  /// Matches joints by name, with the COCO ankle joints standing in for
  /// the H36M feet. Unmatched targets become MISSING.
  static JointMapping by_names(SchemaTag source_tag, SchemaTag target_tag) {
    const auto& src = SkeletonSchema::by_tag(source_tag);
    const auto& tgt = SkeletonSchema::by_tag(target_tag);
    auto find = [&](std::string_view name) {
      int i = src.index_of(name);
      if (i >= 0) return i;
      if (name == "LFoot") return src.index_of("LAnkle");
      if (name == "RFoot") return src.index_of("RAnkle");
      if (name == "LAnkle") return src.index_of("LFoot");
      if (name == "RAnkle") return src.index_of("RFoot");
      return -1;
    };
    JointMapping m;
    m.source = source_tag;
    m.target = target_tag;
    m.source_index.reserve(tgt.joints.size());
    for (const auto& name : tgt.joints) {
      const int i = find(name);
      m.source_index.push_back(i >= 0 ? i : kMissingJoint);
    }
    return m;
  }

  /// Mapping id of the form "<source>:<target>", e.g. "coco17:h36m17".
  static JointMapping builtin(std::string_view id) {
    const size_t colon = id.find(':');
    if (colon == std::string_view::npos)
      throw MappingError("mapping id must be '<source>:<target>', got '" + std::string(id) + "'");
    SchemaTag src, tgt;
    try {
      src = schema_tag_from_string(id.substr(0, colon));
      tgt = schema_tag_from_string(id.substr(colon + 1));
    } catch (const std::invalid_argument& e) {
      throw MappingError(std::string("unknown mapping id: ") + e.what());
    }
    if (src == tgt) return identity(src);
    return by_names(src, tgt);
  }
};

/// Rewrites a container into the mapping's target schema. MISSING targets
/// get NaN coordinates (empty fields on disk), Visible labels and zero
/// confidence; everything else is copied column-for-column.
inline SequenceContainer map_skeleton(const SequenceContainer& in, const JointMapping& mapping) {
  if (in.header.schema != mapping.source)
    throw MappingError("container schema '" + std::string(to_string(in.header.schema)) +
                       "' does not match mapping source '" + std::string(to_string(mapping.source)) + "'");
  const int tgt_joints = static_cast<int>(mapping.source_index.size());
  const int src_joints = in.joints();
  for (int s : mapping.source_index)
    if (s != kMissingJoint && (s < 0 || s >= src_joints))
      throw MappingError("mapping source index out of bounds");

  SequenceContainer out;
  out.header = in.header;
  out.header.schema = mapping.target;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  if (in.is_2d()) {
    const auto& p = in.pose2d();
    PoseSequence2D q(p.frames(), tgt_joints, p.width, p.height, p.fps);
    if (p.occlusion) q.occlusion = OcclusionTrack(p.frames(), tgt_joints);
    if (!p.confidence.empty()) q.confidence.assign(static_cast<size_t>(p.frames()) * tgt_joints, 0.0);
    for (int f = 0; f < p.frames(); ++f)
      for (int t = 0; t < tgt_joints; ++t) {
        const int s = mapping.source_index[static_cast<size_t>(t)];
        if (s == kMissingJoint) {
          q.coords(f, t) = {nan, nan};
        } else {
          q.coords(f, t) = p.coords(f, s);
          if (p.occlusion) q.occlusion->set(f, t, p.occlusion->label(f, s));
          if (!p.confidence.empty())
            q.confidence[static_cast<size_t>(f) * tgt_joints + t] = p.confidence_at(f, s);
        }
      }
    out.payload = std::move(q);
  } else {
    const auto& p = in.pose3d();
    PoseSequence3D q(p.frames(), tgt_joints, p.hypotheses);
    for (int f = 0; f < p.frames(); ++f)
      for (int h = 0; h < p.hypotheses; ++h)
        for (int t = 0; t < tgt_joints; ++t) {
          const int s = mapping.source_index[static_cast<size_t>(t)];
          q.at(f, h, t) = (s == kMissingJoint) ? Vec3{nan, nan, nan} : p.at(f, h, s);
        }
    out.payload = std::move(q);
  }
  return out;
}

namespace detail {

inline bool joint_present_2d(const PoseSequence2D& p, int j) {
  for (int f = 0; f < p.frames(); ++f)
    if (!p.coords(f, j).finite()) return false;
  return true;
}

inline bool joint_present_3d(const PoseSequence3D& p, int j) {
  for (int f = 0; f < p.frames(); ++f)
    for (int h = 0; h < p.hypotheses; ++h)
      if (!p.at(f, h, j).finite()) return false;
  return true;
}

inline bool joint_present(const SequenceContainer& c, int j) {
  return c.is_2d() ? joint_present_2d(c.pose2d(), j) : joint_present_3d(c.pose3d(), j);
}

inline SequenceContainer restrict_joints(const SequenceContainer& c, const std::vector<int>& keep) {
  SequenceContainer out;
  out.header = c.header;
  const int nj = static_cast<int>(keep.size());
  if (c.is_2d()) {
    const auto& p = c.pose2d();
    PoseSequence2D q(p.frames(), nj, p.width, p.height, p.fps);
    if (p.occlusion) q.occlusion = OcclusionTrack(p.frames(), nj);
    if (!p.confidence.empty()) q.confidence.assign(static_cast<size_t>(p.frames()) * nj, 0.0);
    for (int f = 0; f < p.frames(); ++f)
      for (int t = 0; t < nj; ++t) {
        const int s = keep[static_cast<size_t>(t)];
        q.coords(f, t) = p.coords(f, s);
        if (p.occlusion) q.occlusion->set(f, t, p.occlusion->label(f, s));
        if (!p.confidence.empty()) q.confidence[static_cast<size_t>(f) * nj + t] = p.confidence_at(f, s);
      }
    out.payload = std::move(q);
  } else {
    const auto& p = c.pose3d();
    PoseSequence3D q(p.frames(), nj, p.hypotheses);
    for (int f = 0; f < p.frames(); ++f)
      for (int h = 0; h < p.hypotheses; ++h)
        for (int t = 0; t < nj; ++t) q.at(f, h, t) = p.at(f, h, keep[static_cast<size_t>(t)]);
    out.payload = std::move(q);
  }
  return out;
}

}  // namespace detail

/// Both sequences restricted to the joints present (finite in every frame)
/// in both, in target-schema order. The joint list travels with the result
/// for report metadata.
struct AlignmentResult {
  std::vector<std::string> joints;   // names, target-schema order
  std::vector<int> target_indices;   // same joints as indices in the target schema
  SequenceContainer pred;
  SequenceContainer gt;
};

inline AlignmentResult align_for_scoring(const SequenceContainer& pred, const SequenceContainer& gt,
                                         const JointMapping& pred_to_gt) {
  if (pred.frames() != gt.frames())
    throw AlignmentError("frame counts differ: " + std::to_string(pred.frames()) + " vs " +
                         std::to_string(gt.frames()));
  if (gt.header.schema != pred_to_gt.target)
    throw AlignmentError("ground truth schema does not match mapping target");
  const SequenceContainer pred_mapped =
      pred.header.schema == gt.header.schema && pred_to_gt.source == pred_to_gt.target
          ? pred
          : map_skeleton(pred, pred_to_gt);

  const auto& tgt_schema = SkeletonSchema::by_tag(gt.header.schema);
  std::vector<int> common;
  for (int j = 0; j < gt.joints(); ++j)
    if (detail::joint_present(pred_mapped, j) && detail::joint_present(gt, j)) common.push_back(j);
  if (common.empty()) throw AlignmentError("no joints present in both sequences");

  AlignmentResult r;
  r.target_indices = common;
  for (int j : common) r.joints.push_back(tgt_schema.joints[static_cast<size_t>(j)]);
  r.pred = detail::restrict_joints(pred_mapped, common);
  r.gt = detail::restrict_joints(gt, common);
  return r;
}

}  // namespace occlubench
