#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlubench/pose.hpp"
#include "occlubench/rng.hpp"

namespace occlubench {

struct NoiseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Noise level: sigma is a fraction of the average image resolution,
/// sigma_px its pixel-unit standard deviation.
struct NoiseSpec {
  double sigma = 0.0;
  double sigma_px = 0.0;
  uint64_t seed = 0;
  int run = 0;
};

enum class Protocol { P1 = 1, P2 = 2 };

inline const char* to_string(Protocol p) { return p == Protocol::P1 ? "p1" : "p2"; }

/// Sweep configuration. Defaults follow the benchmarked setup: five noise
/// levels with 10 runs each for protocol 1; sigma 0.03 with 5 runs per
/// keypoint over frames [50,150) of the first 243 frames for protocol 2.
struct ProtocolConfig {
  Protocol protocol = Protocol::P1;
  std::vector<double> sigmas = {0.001, 0.005, 0.01, 0.03, 0.05};
  int runs = 10;
  int window_begin = 50;
  int window_end = 150;  // exclusive
  int receptive_field = 243;
  std::vector<int> target_joints;  // P2; empty = all joints
  uint64_t base_seed = 0;

  static ProtocolConfig protocol1_defaults() { return {}; }

  static ProtocolConfig protocol2_defaults() {
    ProtocolConfig c;
    c.protocol = Protocol::P2;
    c.sigmas = {0.03};
    c.runs = 5;
    return c;
  }
};

/// sigma_px = sigma * (w + h) / 2, evaluated as (sigma*w + sigma*h)/2.
inline double sigma_to_px(double sigma, int width, int height) {
  if (sigma < 0.0) throw NoiseError("sigma must be non-negative, got " + std::to_string(sigma));
  if (width <= 0 || height <= 0) throw NoiseError("resolution must be positive");
  return (sigma * width + sigma * height) / 2.0;
}

namespace detail {
/// Per-keypoint perturbation. Indexed by (frame, joint) so draws are
/// independent of evaluation order.
inline Vec2 noise_at(const CounterRng& rng, int frame, int joints, int joint, double sigma_px) {
  const uint64_t pair_index = static_cast<uint64_t>(frame) * static_cast<uint64_t>(joints) +
                              static_cast<uint64_t>(joint);
  return rng.gaussian_pair(pair_index, sigma_px);
}
}  // namespace detail

/// Protocol-1 corruption: every keypoint labeled occluded gets an
/// independent draw from N(0, sigma_px^2 I2); visible keypoints are
/// bit-identical to the input.
inline PoseSequence2D inject_occlusion_noise(const PoseSequence2D& seq, const NoiseSpec& spec) {
  if (!seq.occlusion) throw NoiseError("sequence has no occlusion track");
  if (seq.occlusion->frames() != seq.frames() || seq.occlusion->joints() != seq.joints())
    throw NoiseError("occlusion track shape does not match coordinates");
  PoseSequence2D out = seq;
  if (spec.sigma_px == 0.0) return out;
  const CounterRng rng(spec.seed);
  for (int f = 0; f < seq.frames(); ++f)
    for (int j = 0; j < seq.joints(); ++j)
      if (seq.occlusion->occluded(f, j))
        out.coords(f, j) = seq.coords(f, j) + detail::noise_at(rng, f, seq.joints(), j, spec.sigma_px);
  return out;
}

/// Protocol-2 corruption: perturbs one joint inside [window_begin,
/// window_end); every other entry is bit-identical.
inline PoseSequence2D protocol2_perjoint(const PoseSequence2D& seq, int joint, const NoiseSpec& spec,
                                         int window_begin = 50, int window_end = 150) {
  if (joint < 0 || joint >= seq.joints())
    throw NoiseError("joint index " + std::to_string(joint) + " out of range [0," +
                     std::to_string(seq.joints()) + ")");
  if (window_begin > window_end) throw NoiseError("window begin exceeds window end");
  if (seq.frames() < window_end)
    throw NoiseError("sequence has " + std::to_string(seq.frames()) + " frames, window ends at " +
                     std::to_string(window_end));
  PoseSequence2D out = seq;
  if (spec.sigma_px == 0.0) return out;
  const CounterRng rng(spec.seed);
  for (int f = window_begin; f < window_end; ++f)
    out.coords(f, joint) = seq.coords(f, joint) + detail::noise_at(rng, f, seq.joints(), joint, spec.sigma_px);
  return out;
}

// ---------------------------------------------------------------------------
// Sweep enumeration. The CLI runner and the in-memory sweep below share
// these seed/task definitions, so both paths corrupt bit-identically.

inline uint64_t protocol1_task_seed(const ProtocolConfig& cfg, int sigma_index, int run,
                                    uint64_t sequence_id) {
  return derive_seed(cfg.base_seed, {static_cast<uint64_t>(Protocol::P1),
                                     static_cast<uint64_t>(sigma_index), static_cast<uint64_t>(run),
                                     sequence_id});
}

inline uint64_t protocol2_task_seed(const ProtocolConfig& cfg, int sigma_index, int run,
                                    uint64_t sequence_id, int joint) {
  return derive_seed(cfg.base_seed, {static_cast<uint64_t>(Protocol::P2),
                                     static_cast<uint64_t>(sigma_index), static_cast<uint64_t>(run),
                                     sequence_id, static_cast<uint64_t>(joint)});
}

struct DatasetEntry {
  std::string name;  // stable identity, e.g. "S2|act01|cam0"
  PoseSequence2D seq;
  uint64_t sequence_id() const { return fnv1a64(name); }
};

/// One corrupted copy of the dataset. `baseline` marks the uncorrupted
/// ground-truth case that accompanies every sweep.
struct P1Variant {
  bool baseline = false;
  int sigma_index = -1;
  double sigma = 0.0;
  int run = 0;
  std::vector<PoseSequence2D> sequences;
  std::vector<uint64_t> seeds;  // per sequence; empty for the baseline
};

/// Materializes |sigmas| x runs corrupted dataset copies plus the
/// uncorrupted baseline.
inline std::vector<P1Variant> protocol1_sweep(const std::vector<DatasetEntry>& dataset,
                                              const ProtocolConfig& cfg) {
  std::vector<P1Variant> out;
  P1Variant base;
  base.baseline = true;
  for (const auto& e : dataset) base.sequences.push_back(e.seq);
  out.push_back(std::move(base));
  for (int s = 0; s < static_cast<int>(cfg.sigmas.size()); ++s)
    for (int r = 0; r < cfg.runs; ++r) {
      P1Variant v;
      v.sigma_index = s;
      v.sigma = cfg.sigmas[static_cast<size_t>(s)];
      v.run = r;
      for (const auto& e : dataset) {
        NoiseSpec spec;
        spec.sigma = v.sigma;
        spec.sigma_px = sigma_to_px(v.sigma, e.seq.width, e.seq.height);
        spec.run = r;
        spec.seed = protocol1_task_seed(cfg, s, r, e.sequence_id());
        v.seeds.push_back(spec.seed);
        v.sequences.push_back(inject_occlusion_noise(e.seq, spec));
      }
      out.push_back(std::move(v));
    }
  return out;
}

}  // namespace occlubench
