#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "occlubench/pose.hpp"
#include "occlubench/rng.hpp"

namespace occlubench {

struct MaskError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MaskMode { None, RandK, FromLabels };

struct MaskSpec {
  MaskMode mode = MaskMode::None;
  int k = 0;  // RandK: joints zeroed per frame
  uint64_t seed = 0;
};

struct MaskResult {
  PoseSequence2D seq;
  Mat<uint8_t> guidance;  // 1 = zeroed (treated as missing)
};

/// Occlusion-guidance preprocessing: RandK zeroes exactly k uniformly
/// chosen joints per frame (independently per frame, seeded); FromLabels
/// zeroes the joints whose label is occluded.
inline MaskResult apply_mask(const PoseSequence2D& seq, const MaskSpec& spec) {
  const int joints = seq.joints();
  if (spec.mode == MaskMode::RandK && (spec.k < 0 || spec.k > joints))
    throw MaskError("k must be in [0," + std::to_string(joints) + "], got " + std::to_string(spec.k));
  if (spec.mode == MaskMode::FromLabels && !seq.occlusion)
    throw MaskError("FromLabels masking requires an occlusion track");

  MaskResult r{seq, Mat<uint8_t>(seq.frames(), joints, 0)};
  if (spec.mode == MaskMode::None || (spec.mode == MaskMode::RandK && spec.k == 0)) return r;

  if (spec.mode == MaskMode::FromLabels) {
    for (int f = 0; f < seq.frames(); ++f)
      for (int j = 0; j < joints; ++j)
        if (seq.occlusion->occluded(f, j)) {
          r.seq.coords(f, j) = {0.0, 0.0};
          r.guidance(f, j) = 1;
        }
    return r;
  }

  // RandK: partial Fisher-Yates per frame on a counter-based stream keyed
  // by (seed, frame), so frames are independent and order-free.
  std::vector<int> pool(static_cast<size_t>(joints));
  for (int f = 0; f < seq.frames(); ++f) {
    const CounterRng rng(derive_seed(spec.seed, {static_cast<uint64_t>(f)}));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < spec.k; ++i) {
      const uint64_t pick =
          rng.uniform_int(static_cast<uint64_t>(i), static_cast<uint64_t>(joints - i));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(i) + static_cast<size_t>(pick)]);
      const int j = pool[static_cast<size_t>(i)];
      r.seq.coords(f, j) = {0.0, 0.0};
      r.guidance(f, j) = 1;
    }
  }
  return r;
}

struct InterpolationResult {
  PoseSequence2D seq;  // confidence member filled
};

/// Fills occluded keypoints from the nearest visible instance of the same
/// joint within +/- halfwindow frames (ties resolve to the past frame).
/// Unreachable entries are zeroed with confidence 0; visible entries keep
/// confidence 1; filled entries get 1 - d/(halfwindow+1).
inline InterpolationResult interpolate_occluded(const PoseSequence2D& seq, const OcclusionTrack& labels,
                                                int halfwindow = 40) {
  if (labels.frames() != seq.frames() || labels.joints() != seq.joints())
    throw MaskError("label shape does not match coordinates");
  if (halfwindow < 0) throw MaskError("halfwindow must be non-negative");

  InterpolationResult r{seq};
  r.seq.confidence.assign(static_cast<size_t>(seq.frames()) * static_cast<size_t>(seq.joints()), 1.0);
  for (int j = 0; j < seq.joints(); ++j)
    for (int f = 0; f < seq.frames(); ++f) {
      if (!labels.occluded(f, j)) continue;
      int found = -1, dist = 0;
      for (int d = 1; d <= halfwindow && found < 0; ++d) {
        if (f - d >= 0 && !labels.occluded(f - d, j)) {
          found = f - d;
          dist = d;
        } else if (f + d < seq.frames() && !labels.occluded(f + d, j)) {
          found = f + d;
          dist = d;
        }
      }
      const size_t idx = static_cast<size_t>(f) * static_cast<size_t>(seq.joints()) + static_cast<size_t>(j);
      if (found < 0) {
        r.seq.coords(f, j) = {0.0, 0.0};
        r.seq.confidence[idx] = 0.0;
      } else {
        r.seq.coords(f, j) = seq.coords(found, j);
        r.seq.confidence[idx] = 1.0 - static_cast<double>(dist) / static_cast<double>(halfwindow + 1);
      }
    }
  return r;
}

/// P-Agg: coordinate-wise arithmetic mean over the hypothesis axis.
inline PoseSequence3D aggregate_hypotheses(const PoseSequence3D& pred) {
  if (pred.hypotheses < 1 || pred.coords.cols() == 0)
    throw std::invalid_argument("hypothesis aggregation requires at least one hypothesis");
  if (pred.hypotheses == 1) return pred;
  PoseSequence3D out(pred.frames(), pred.joints(), 1);
  const double inv = 1.0 / static_cast<double>(pred.hypotheses);
  for (int f = 0; f < pred.frames(); ++f)
    for (int j = 0; j < pred.joints(); ++j) {
      Vec3 acc{0.0, 0.0, 0.0};
      for (int h = 0; h < pred.hypotheses; ++h) acc = acc + pred.at(f, h, j);
      out.at(f, j) = acc * inv;
    }
  return out;
}

}  // namespace occlubench
