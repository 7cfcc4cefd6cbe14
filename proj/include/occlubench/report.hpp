#pragma once

#include <compare>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occlubench/geometry.hpp"
#include "occlubench/metrics.hpp"
#include "occlubench/skeleton.hpp"

namespace occlubench {

inline constexpr int kAllJoints = -1;

/// One cell address in the evaluation bundle. `sigma` empty means the
/// clean ground-truth-input baseline ("GT" column); `joint` of kAllJoints
/// is the whole-pose average; `target_joint` names the protocol-2
/// perturbed keypoint.
struct ReportKey {
  std::string model;
  std::string protocol;  // "", "p1", "p2"
  std::optional<double> sigma;
  std::optional<int> run;
  std::string target_joint;
  std::string action;
  std::string camera;
  int joint = kAllJoints;
  Slice slice = Slice::Overall;

  auto operator<=>(const ReportKey&) const = default;

  ReportKey without_run() const {
    ReportKey k = *this;
    k.run.reset();
    return k;
  }

  ReportKey pooled() const {  // across actions and cameras
    ReportKey k = *this;
    k.action.clear();
    k.camera.clear();
    return k;
  }
};

struct RawRecord {
  ReportKey key;  // run is set
  double value_mm = 0.0;
  size_t count = 0;  // (frame, joint) samples behind the value
};

struct StatValue {
  double mean = 0.0;
  double stddev = 0.0;
  size_t runs = 0;
};

/// Raw per-run values plus the aggregates derived from them. Every
/// aggregated cell is recomputable from `raw`.
struct MetricReport {
  std::vector<RawRecord> raw;
  std::map<ReportKey, StatValue> aggregated;  // keys with run cleared

  /// Pools raw rows across (action, camera) per run with sample-count
  /// weights, then aggregates mean +/- sample std across runs.
  void aggregate() {
    struct Pool {
      double weighted = 0.0;
      size_t count = 0;
    };
    std::map<ReportKey, Pool> pooled;  // run retained, action/camera cleared
    for (const auto& r : raw) {
      ReportKey k = r.key.pooled();
      auto& p = pooled[k];
      p.weighted += r.value_mm * static_cast<double>(r.count);
      p.count += r.count;
    }
    std::map<ReportKey, std::vector<double>> runs;  // run cleared as well
    for (const auto& [k, p] : pooled)
      runs[k.without_run()].push_back(p.weighted / static_cast<double>(p.count));
    aggregated.clear();
    for (const auto& [k, values] : runs) {
      const RunAggregate a = aggregate_runs(values);
      aggregated[k] = {a.mean, a.stddev, a.runs};
    }
  }
};

namespace detail {

inline std::string format_mm(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string format_sigma(const std::optional<double>& sigma) {
  if (!sigma) return "gt";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", *sigma);
  return buf;
}

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace detail

/// Raw bundle: one row per (prediction, slice, joint). `value_mm` is the
/// rounded display value; `value_raw` round-trips the exact double so
/// every aggregated cell is recomputable from this file alone.
inline void write_per_run_csv(const MetricReport& report, const SkeletonSchema& schema,
                              const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "model,protocol,sigma,run,target_joint,action,camera,joint,slice,value_mm,value_raw,count\n";
  for (const auto& r : report.raw) {
    const auto& k = r.key;
    char raw[64];
    std::snprintf(raw, sizeof(raw), "%.17g", r.value_mm);
    out << k.model << ',' << k.protocol << ',' << detail::format_sigma(k.sigma) << ','
        << (k.run ? std::to_string(*k.run) : std::string()) << ',' << k.target_joint << ','
        << k.action << ',' << k.camera << ','
        << (k.joint == kAllJoints ? std::string("ALL") : schema.joints[static_cast<size_t>(k.joint)])
        << ',' << to_string(k.slice) << ',' << detail::format_mm(r.value_mm) << ',' << raw << ','
        << r.count << '\n';
  }
}

/// Noise-level table: one row per (model, slice, sigma), whole-pose
/// average pooled over actions and cameras, mean +/- std across runs.
inline void write_noise_table_csv(const MetricReport& report, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "model,protocol,slice,sigma,mean_mm,std_mm,runs\n";
  for (const auto& [k, v] : report.aggregated) {
    if (k.joint != kAllJoints || !k.target_joint.empty()) continue;
    out << k.model << ',' << k.protocol << ',' << to_string(k.slice) << ','
        << detail::format_sigma(k.sigma) << ',' << detail::format_mm(v.mean) << ','
        << detail::format_mm(v.stddev) << ',' << v.runs << '\n';
  }
}

/// Per-joint curves (per-keypoint sensitivity data).
inline void write_per_joint_csv(const MetricReport& report, const SkeletonSchema& schema,
                                const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "model,protocol,sigma,target_joint,joint,slice,mean_mm,std_mm,runs\n";
  for (const auto& [k, v] : report.aggregated) {
    if (k.joint == kAllJoints && k.target_joint.empty()) continue;
    out << k.model << ',' << k.protocol << ',' << detail::format_sigma(k.sigma) << ','
        << k.target_joint << ','
        << (k.joint == kAllJoints ? std::string("ALL") : schema.joints[static_cast<size_t>(k.joint)])
        << ',' << to_string(k.slice) << ',' << detail::format_mm(v.mean) << ','
        << detail::format_mm(v.stddev) << ',' << v.runs << '\n';
  }
}

struct MissingBaseline : MetricError {
  using MetricError::MetricError;
};

/// Looks up the normalized (baseline-subtracted) value for one sigma cell.
inline double normalized_from_report(const MetricReport& report, const ReportKey& key) {
  const auto it = report.aggregated.find(key);
  if (it == report.aggregated.end()) throw MissingBaseline("no entry for the requested key");
  ReportKey base = key;
  base.sigma.reset();
  const auto bit = report.aggregated.find(base);
  if (bit == report.aggregated.end())
    throw MissingBaseline("no GT baseline entry for model '" + key.model + "', slice " +
                          to_string(key.slice));
  return normalized_mpjpe(it->second.mean, bit->second.mean);
}

/// Noise-level deltas against each model's GT baseline row. Cells whose
/// baseline is absent (partial sweeps) are omitted.
inline void write_normalized_csv(const MetricReport& report, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "model,protocol,slice,sigma,delta_mm\n";
  for (const auto& [k, v] : report.aggregated) {
    if (k.joint != kAllJoints || !k.target_joint.empty() || !k.sigma) continue;
    ReportKey base = k;
    base.sigma.reset();
    base.protocol.clear();
    auto it = report.aggregated.find(base);
    if (it == report.aggregated.end()) {
      base.protocol = k.protocol;
      it = report.aggregated.find(base);
    }
    if (it == report.aggregated.end()) continue;
    out << k.model << ',' << k.protocol << ',' << to_string(k.slice) << ','
        << detail::format_sigma(k.sigma) << ','
        << detail::format_mm(normalized_mpjpe(v.mean, it->second.mean)) << '\n';
  }
}

inline void write_duration_csv(const std::vector<DurationStats>& stats, const SkeletonSchema& schema,
                               const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "joint,avg_frames,max_frames\n";
  for (size_t j = 0; j < stats.size(); ++j)
    out << schema.joints[j] << ',' << detail::format_mm(stats[j].avg) << ',' << stats[j].max << '\n';
}

inline void write_histogram_csv(const OcclusionHistogram& hist, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "occluded_joints,frames\n";
  for (size_t i = 0; i < hist.bins.size(); ++i) out << i << ',' << hist.bins[i] << '\n';
}

inline void write_occlusion_summary_csv(const OcclusionHistogram& hist,
                                        const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "frames,mean_occluded_fraction\n";
  out << hist.frames << ',' << detail::format_mm(hist.mean_occluded_fraction) << '\n';
}

/// Table-3 layout: per detector and occlusion category, pixel error mean
/// and standard deviation.
inline void write_detector_stats_csv(
    const std::vector<std::pair<std::string, std::map<OcclusionLabel, CategoryStats>>>& per_detector,
    const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "detector,category,mean_px,std_px,count\n";
  static constexpr const char* names[3] = {"visible", "self_occluded", "externally_occluded"};
  for (const auto& [detector, stats] : per_detector)
    for (int c = 0; c < 3; ++c) {
      const auto it = stats.find(static_cast<OcclusionLabel>(c));
      out << detector << ',' << names[c] << ',';
      if (it == stats.end())
        out << ",,0\n";  // ABSENT category
      else
        out << detail::format_mm(it->second.mean) << ',' << detail::format_mm(it->second.stddev) << ','
            << it->second.count << '\n';
    }
}

/// Matrix layout: row = distance bin, column = orientation bin, empty
/// fields for empty bins. Headers carry the bin lower edges.
inline void write_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  const auto& g = heatmap.grid();
  out << "distance_m\\orientation_deg";
  for (int o = 0; o < g.orientation_bins(); ++o)
    out << ',' << detail::format_mm(g.orientation_edges[static_cast<size_t>(o)]);
  out << '\n';
  for (int d = 0; d < g.distance_bins(); ++d) {
    out << detail::format_mm(g.distance_edges[static_cast<size_t>(d)]);
    for (int o = 0; o < g.orientation_bins(); ++o) {
      out << ',';
      if (const auto m = heatmap.mean(d, o)) out << detail::format_mm(*m);
    }
    out << '\n';
  }
}

inline void write_heatmap_counts_csv(const Heatmap& heatmap, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  const auto& g = heatmap.grid();
  out << "distance_m\\orientation_deg";
  for (int o = 0; o < g.orientation_bins(); ++o)
    out << ',' << detail::format_mm(g.orientation_edges[static_cast<size_t>(o)]);
  out << '\n';
  for (int d = 0; d < g.distance_bins(); ++d) {
    out << detail::format_mm(g.distance_edges[static_cast<size_t>(d)]);
    for (int o = 0; o < g.orientation_bins(); ++o) out << ',' << heatmap.count(d, o);
    out << '\n';
  }
}

inline void write_velocity_csv(const VelocityBins& bins, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "speed_low_px,speed_high_px,frequency,mean_error_mm\n";
  for (size_t b = 0; b + 1 < bins.edges.size(); ++b) {
    out << detail::format_mm(bins.edges[b]) << ',' << detail::format_mm(bins.edges[b + 1]) << ','
        << bins.frequency[b] << ',';
    if (const auto m = bins.mean_error(static_cast<int>(b))) out << detail::format_mm(*m);
    out << '\n';
  }
}

}  // namespace occlubench
