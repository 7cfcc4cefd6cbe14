#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "occlubench/container.hpp"
#include "occlubench/lifters.hpp"
#include "occlubench/manifest.hpp"
#include "occlubench/mapping.hpp"
#include "occlubench/masking.hpp"
#include "occlubench/metrics.hpp"
#include "occlubench/noise.hpp"
#include "occlubench/report.hpp"

namespace occlubench {

/// Bad flags, config keys or mapping ids; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Unreadable, inconsistent or unmatched data; maps to exit code 1.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunnerConfig {
  uint64_t seed = 0;
  int parallelism = 0;  // 0 = number of available processors
  std::string out;
  // corrupt
  std::string dataset;
  std::string protocol = "p1";
  std::vector<double> sigmas;  // empty = protocol defaults
  int runs = 0;                // 0 = protocol default
  std::vector<std::string> p2_joints;  // empty = all joints
  std::vector<int> p2_window;          // [begin, end); empty = {50, 150}
  // convert
  std::string input;
  std::string mapping;
  // evaluate / analyze
  std::string pred;
  std::string gt;
  std::string model;
  std::vector<std::string> slices = {"overall", "visible", "occluded"};
  std::vector<std::string> exclude_joints = {"Hip"};
  bool allow_partial = false;
  std::string which;

  /// Loads a config file; unknown keys are usage errors. Flags given on
  /// the command line override these values.
  static RunnerConfig from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "seed",  "parallelism", "out",    "dataset", "protocol",       "sigmas",
        "runs",  "input",       "mapping", "pred",    "gt",             "model",
        "slices", "exclude_joints", "allow_partial", "which", "p2_joints", "p2_window"};
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    for (const auto& [k, _] : j.items())
      if (!known.count(k)) throw UsageError("unknown config key: '" + k + "'");
    RunnerConfig c;
    try {
      if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
      if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<int>();
      if (j.contains("out")) c.out = j["out"].get<std::string>();
      if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
      if (j.contains("protocol")) c.protocol = j["protocol"].get<std::string>();
      if (j.contains("sigmas")) c.sigmas = j["sigmas"].get<std::vector<double>>();
      if (j.contains("runs")) c.runs = j["runs"].get<int>();
      if (j.contains("p2_joints")) c.p2_joints = j["p2_joints"].get<std::vector<std::string>>();
      if (j.contains("p2_window")) {
        c.p2_window = j["p2_window"].get<std::vector<int>>();
        if (c.p2_window.size() != 2) throw UsageError("p2_window must be [begin, end)");
      }
      if (j.contains("input")) c.input = j["input"].get<std::string>();
      if (j.contains("mapping")) c.mapping = j["mapping"].get<std::string>();
      if (j.contains("pred")) c.pred = j["pred"].get<std::string>();
      if (j.contains("gt")) c.gt = j["gt"].get<std::string>();
      if (j.contains("model")) c.model = j["model"].get<std::string>();
      if (j.contains("slices")) c.slices = j["slices"].get<std::vector<std::string>>();
      if (j.contains("exclude_joints")) c.exclude_joints = j["exclude_joints"].get<std::vector<std::string>>();
      if (j.contains("allow_partial")) c.allow_partial = j["allow_partial"].get<bool>();
      if (j.contains("which")) c.which = j["which"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("bad config value: ") + e.what());
    }
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["parallelism"] = parallelism;
    j["out"] = out;
    j["dataset"] = dataset;
    j["protocol"] = protocol;
    j["sigmas"] = sigmas;
    j["runs"] = runs;
    j["p2_joints"] = p2_joints;
    j["p2_window"] = p2_window;
    j["input"] = input;
    j["mapping"] = mapping;
    j["pred"] = pred;
    j["gt"] = gt;
    j["model"] = model;
    j["slices"] = slices;
    j["exclude_joints"] = exclude_joints;
    j["allow_partial"] = allow_partial;
    j["which"] = which;
    return j;
  }
};

namespace detail {

inline int effective_parallelism(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(0..n-1) on `degree` workers. Tasks must be independent; any
/// first exception is rethrown after all workers join.
inline void parallel_for(size_t n, int degree, const std::function<void(size_t)>& fn) {
  degree = std::max(1, std::min<int>(degree, static_cast<int>(n)));
  if (degree == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(degree));
  for (int w = 0; w < degree; ++w) workers.emplace_back(worker);
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::vector<std::filesystem::path> list_poseq(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".poseq") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

inline std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
  return out;
}

inline std::string output_stem(const ContainerHeader& h) {
  std::string s = sanitize(h.subject) + "_" + sanitize(h.action);
  if (!h.camera_name.empty()) s += "_" + sanitize(h.camera_name);
  return s;
}

inline std::string format_sigma_dir(double sigma) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", sigma);
  return buf;
}

inline PoseSequence2D truncate_frames(const PoseSequence2D& seq, int frames) {
  PoseSequence2D out(frames, seq.joints(), seq.width, seq.height, seq.fps);
  if (seq.occlusion) out.occlusion = OcclusionTrack(frames, seq.joints());
  if (!seq.confidence.empty())
    out.confidence.assign(static_cast<size_t>(frames) * static_cast<size_t>(seq.joints()), 0.0);
  for (int f = 0; f < frames; ++f)
    for (int j = 0; j < seq.joints(); ++j) {
      out.coords(f, j) = seq.coords(f, j);
      if (seq.occlusion) out.occlusion->set(f, j, seq.occlusion->label(f, j));
      if (!seq.confidence.empty())
        out.confidence[static_cast<size_t>(f) * seq.joints() + j] = seq.confidence_at(f, j);
    }
  return out;
}

inline PoseSequence3D truncate_frames(const PoseSequence3D& seq, int frames) {
  PoseSequence3D out(frames, seq.joints(), seq.hypotheses);
  for (int f = 0; f < frames; ++f)
    for (int c = 0; c < seq.coords.cols(); ++c) out.coords(f, c) = seq.coords(f, c);
  return out;
}

inline OcclusionTrack truncate_frames(const OcclusionTrack& track, int frames) {
  OcclusionTrack out(frames, track.joints());
  for (int f = 0; f < frames; ++f)
    for (int j = 0; j < track.joints(); ++j) out.set(f, j, track.label(f, j));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// convert

inline void cmd_convert(const RunnerConfig& cfg) {
  if (cfg.input.empty() || cfg.out.empty() || cfg.mapping.empty())
    throw UsageError("convert requires --input, --mapping and --out");
  JointMapping mapping;
  try {
    mapping = JointMapping::builtin(cfg.mapping);
  } catch (const MappingError& e) {
    throw UsageError(e.what());
  }
  SequenceContainer in;
  try {
    in = read_container(cfg.input);
  } catch (const ParseError& e) {
    throw DataError(e.what());
  }
  SequenceContainer out;
  try {
    out = map_skeleton(in, mapping);
  } catch (const MappingError& e) {
    throw DataError(e.what());
  }
  const std::filesystem::path out_path(cfg.out);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  write_container(out, out_path);
}

// ---------------------------------------------------------------------------
// corrupt

inline RunManifest cmd_corrupt(const RunnerConfig& cfg) {
  if (cfg.dataset.empty() || cfg.out.empty()) throw UsageError("corrupt requires --dataset and --out");
  Protocol protocol;
  if (cfg.protocol == "p1")
    protocol = Protocol::P1;
  else if (cfg.protocol == "p2")
    protocol = Protocol::P2;
  else
    throw UsageError("protocol must be 'p1' or 'p2', got '" + cfg.protocol + "'");

  ProtocolConfig pc = protocol == Protocol::P1 ? ProtocolConfig::protocol1_defaults()
                                               : ProtocolConfig::protocol2_defaults();
  if (!cfg.sigmas.empty()) pc.sigmas = cfg.sigmas;
  if (cfg.runs > 0) pc.runs = cfg.runs;
  if (!cfg.p2_window.empty()) {
    pc.window_begin = cfg.p2_window[0];
    pc.window_end = cfg.p2_window[1];
    if (pc.window_begin < 0 || pc.window_begin > pc.window_end)
      throw UsageError("p2_window must satisfy 0 <= begin <= end");
  }
  for (const auto& name : cfg.p2_joints) {
    const bool known = SkeletonSchema::h36m17().has_joint(name) ||
                       SkeletonSchema::bm3d().has_joint(name) ||
                       SkeletonSchema::coco17().has_joint(name);
    if (!known) throw UsageError("unknown joint in p2_joints: '" + name + "'");
  }
  pc.base_seed = cfg.seed;
  for (double s : pc.sigmas)
    if (s < 0.0) throw UsageError("sigma must be non-negative");

  const auto files = detail::list_poseq(cfg.dataset);
  if (files.empty()) throw DataError("no .poseq files in " + cfg.dataset);

  struct Entry {
    std::filesystem::path path;
    SequenceContainer container;
  };
  std::vector<Entry> entries;
  RunManifest manifest;
  manifest.command = "corrupt";
  manifest.config = cfg.to_json();
  manifest.base_seed = cfg.seed;
  for (const auto& f : files) {
    SequenceContainer c;
    try {
      c = read_container(f);
    } catch (const ParseError& e) {
      throw DataError(e.what());
    }
    if (!c.is_2d()) throw DataError(f.string() + ": corruption needs 2D pixel sequences");
    if (protocol == Protocol::P1 && !c.pose2d().occlusion)
      throw DataError(f.string() + ": protocol 1 requires an occlusion track");
    if (protocol == Protocol::P2 && c.frames() < pc.receptive_field)
      throw DataError(f.string() + ": protocol 2 requires at least " +
                      std::to_string(pc.receptive_field) + " frames, got " + std::to_string(c.frames()));
    if (protocol == Protocol::P2 && c.frames() > pc.receptive_field) {
      c.pose2d() = detail::truncate_frames(c.pose2d(), pc.receptive_field);
    }
    manifest.inputs.push_back({f.string(), digest_file(f)});
    entries.push_back({f, std::move(c)});
  }

  struct Task {
    std::string id;
    uint64_t seed = 0;
    std::filesystem::path out_path;  // relative to out dir
    size_t entry = 0;
    int sigma_index = -1;  // -1 = baseline copy
    int run = 0;
    int joint = -1;  // P2 only
  };
  std::vector<Task> tasks;
  const std::filesystem::path out_root(cfg.out);
  const std::string proto_name = to_string(protocol);

  for (size_t e = 0; e < entries.size(); ++e) {
    const std::string stem = detail::output_stem(entries[e].container.header);
    tasks.push_back({proto_name + "/gt/0/" + entries[e].container.sequence_key(), 0,
                     std::filesystem::path("corrupted") / proto_name / "gt" / "0" / (stem + ".poseq"), e,
                     -1, 0, -1});
  }
  for (int s = 0; s < static_cast<int>(pc.sigmas.size()); ++s) {
    const std::string sig_dir = detail::format_sigma_dir(pc.sigmas[static_cast<size_t>(s)]);
    for (int r = 0; r < pc.runs; ++r)
      for (size_t e = 0; e < entries.size(); ++e) {
        const auto& c = entries[e].container;
        const std::string stem = detail::output_stem(c.header);
        if (protocol == Protocol::P1) {
          const uint64_t seed = protocol1_task_seed(pc, s, r, fnv1a64(c.sequence_key()));
          tasks.push_back({proto_name + "/" + sig_dir + "/" + std::to_string(r) + "/" + c.sequence_key(),
                           seed,
                           std::filesystem::path("corrupted") / proto_name / sig_dir /
                               std::to_string(r) / (stem + ".poseq"),
                           e, s, r, -1});
        } else {
          const auto& schema = SkeletonSchema::by_tag(c.header.schema);
          // Target joints resolve by name against each sequence's schema.
          std::vector<int> joints;
          if (cfg.p2_joints.empty()) {
            for (int j = 0; j < c.joints(); ++j) joints.push_back(j);
          } else {
            for (const auto& name : cfg.p2_joints) {
              const int j = schema.index_of(name);
              if (j < 0)
                throw DataError(entries[e].path.string() + ": schema has no joint '" + name + "'");
              joints.push_back(j);
            }
          }
          for (int j : joints) {
            const uint64_t seed = protocol2_task_seed(pc, s, r, fnv1a64(c.sequence_key()), j);
            const std::string jname = schema.joints[static_cast<size_t>(j)];
            tasks.push_back({proto_name + "/" + sig_dir + "/" + std::to_string(r) + "/" +
                                 c.sequence_key() + "/" + jname,
                             seed,
                             std::filesystem::path("corrupted") / proto_name / sig_dir /
                                 std::to_string(r) / (stem + "." + jname + ".poseq"),
                             e, s, r, j});
          }
        }
      }
  }

  // Directories are created up front; tasks then write disjoint files.
  std::set<std::filesystem::path> dirs;
  for (const auto& t : tasks) dirs.insert((out_root / t.out_path).parent_path());
  for (const auto& d : dirs) std::filesystem::create_directories(d);

  detail::parallel_for(tasks.size(), detail::effective_parallelism(cfg.parallelism), [&](size_t i) {
    const Task& t = tasks[i];
    const auto& src = entries[t.entry].container;
    SequenceContainer out = src;
    out.header.protocol = proto_name;
    if (t.sigma_index >= 0) {
      NoiseSpec spec;
      spec.sigma = pc.sigmas[static_cast<size_t>(t.sigma_index)];
      spec.sigma_px = sigma_to_px(spec.sigma, src.pose2d().width, src.pose2d().height);
      spec.run = t.run;
      spec.seed = t.seed;
      out.header.sigma = spec.sigma;
      out.header.run = t.run;
      out.header.seed = t.seed;
      if (t.joint < 0) {
        out.pose2d() = inject_occlusion_noise(src.pose2d(), spec);
      } else {
        out.pose2d() = protocol2_perjoint(src.pose2d(), t.joint, spec, pc.window_begin, pc.window_end);
        // The perturbed window is the simulated occlusion; the track
        // reflects it so visibility slices line up at evaluation time.
        OcclusionTrack track(out.frames(), out.joints());
        for (int f = pc.window_begin; f < pc.window_end; ++f)
          track.set(f, t.joint, OcclusionLabel::ExternallyOccluded);
        out.pose2d().occlusion = std::move(track);
        out.header.target_joint =
            SkeletonSchema::by_tag(src.header.schema).joints[static_cast<size_t>(t.joint)];
      }
    }
    write_container(out, out_root / t.out_path);
  });

  for (const auto& t : tasks) manifest.tasks.push_back({t.id, t.seed, t.out_path.generic_string()});
  write_manifest(manifest, out_root / "manifest.json");
  return manifest;
}

// ---------------------------------------------------------------------------
// evaluate

namespace detail {

struct GtIndex {
  std::map<std::string, SequenceContainer> gt3d;
  std::map<std::string, SequenceContainer> gt2d;
};

inline GtIndex load_gt_dir(const std::string& dir) {
  GtIndex idx;
  for (const auto& f : list_poseq(dir)) {
    SequenceContainer c;
    try {
      c = read_container(f);
    } catch (const ParseError& e) {
      throw DataError(e.what());
    }
    auto& target = c.is_2d() ? idx.gt2d : idx.gt3d;
    const std::string key = c.sequence_key();
    if (target.count(key)) throw DataError("duplicate ground truth for '" + key + "': " + f.string());
    target.emplace(key, std::move(c));
  }
  return idx;
}

inline std::vector<Slice> parse_slices(const std::vector<std::string>& names) {
  std::vector<Slice> out;
  for (const auto& n : names) {
    try {
      out.push_back(slice_from_string(n));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("at least one slice is required");
  return out;
}

}  // namespace detail

inline MetricReport cmd_evaluate(const RunnerConfig& cfg) {
  if (cfg.pred.empty() || cfg.gt.empty() || cfg.out.empty())
    throw UsageError("evaluate requires --pred, --gt and --out");
  const std::vector<Slice> slices = detail::parse_slices(cfg.slices);
  if (!cfg.model.empty() && is_baseline_model_id(cfg.model)) {
    try {
      lifter_from_model_id(cfg.model);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  const detail::GtIndex gt = detail::load_gt_dir(cfg.gt);
  if (gt.gt3d.empty()) throw DataError("no 3D (mm) ground truth in " + cfg.gt);
  const auto pred_files = detail::list_poseq(cfg.pred);
  if (pred_files.empty()) throw DataError("no .poseq files in " + cfg.pred);

  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.config = cfg.to_json();
  manifest.base_seed = cfg.seed;

  // Pairing pass: every prediction must find its ground truth.
  std::vector<std::string> unmatched;
  std::vector<SequenceContainer> preds(pred_files.size());
  for (size_t i = 0; i < pred_files.size(); ++i) {
    try {
      preds[i] = read_container(pred_files[i]);
    } catch (const ParseError& e) {
      throw DataError(e.what());
    }
    if (!gt.gt3d.count(preds[i].sequence_key()))
      unmatched.push_back(pred_files[i].string() + " (key '" + preds[i].sequence_key() + "')");
    manifest.inputs.push_back({pred_files[i].string(), digest_file(pred_files[i])});
  }
  if (!unmatched.empty() && !cfg.allow_partial) {
    std::string msg = "predictions without ground truth (use --allow-partial to skip):";
    for (const auto& u : unmatched) msg += "\n  " + u;
    throw DataError(msg);
  }

  const auto& schema = SkeletonSchema::h36m17();
  JointExclusion excl;
  try {
    excl = JointExclusion::from_names(schema, cfg.exclude_joints);
  } catch (const MetricError& e) {
    throw UsageError(e.what());
  }

  std::vector<std::vector<RawRecord>> shards(preds.size());
  detail::parallel_for(preds.size(), detail::effective_parallelism(cfg.parallelism), [&](size_t i) {
    const SequenceContainer& pred_c = preds[i];
    const std::string key = pred_c.sequence_key();
    const auto git = gt.gt3d.find(key);
    if (git == gt.gt3d.end()) return;  // allowed partial
    const SequenceContainer& gt_c = git->second;

    PoseSequence3D gt3 = gt_c.pose3d();
    std::optional<OcclusionTrack> labels;
    std::string model_id = cfg.model;

    PoseSequence3D lifted;
    if (pred_c.is_2d()) {
      if (model_id.empty() || !is_baseline_model_id(model_id))
        throw DataError(pred_files[i].string() +
                        ": 2D predictions need a baseline lifter (--model baseline:gt|passthrough|constpose)");
      const PoseSequence2D& p2 = pred_c.pose2d();
      if (p2.frames() > gt3.frames())
        throw DataError(pred_files[i].string() + ": prediction has more frames than ground truth");
      if (p2.frames() < gt3.frames()) gt3 = detail::truncate_frames(gt3, p2.frames());
      const LifterKind kind = lifter_from_model_id(model_id);
      if (kind == LifterKind::Passthrough) {
        std::optional<CameraModel> cam = pred_c.header.camera;
        if (!cam) cam = gt_c.header.camera;
        if (!cam) throw DataError(pred_files[i].string() + ": passthrough lifter needs camera intrinsics");
        lifted = passthrough_lifter(p2, gt3, *cam);
      } else if (kind == LifterKind::GtOracle) {
        lifted = gt_oracle(gt3);
      } else {
        lifted = constant_pose_lifter(gt3);
      }
      if (p2.occlusion) labels = *p2.occlusion;
    } else {
      lifted = pred_c.pose3d().hypotheses > 1 ? aggregate_hypotheses(pred_c.pose3d()) : pred_c.pose3d();
      if (lifted.frames() > gt3.frames())
        throw DataError(pred_files[i].string() + ": prediction has more frames than ground truth");
      if (lifted.frames() < gt3.frames()) gt3 = detail::truncate_frames(gt3, lifted.frames());
      if (model_id.empty()) model_id = pred_c.header.model.empty() ? "model" : pred_c.header.model;
    }
    if (!labels) {
      const auto l2 = gt.gt2d.find(key);
      if (l2 != gt.gt2d.end() && l2->second.pose2d().occlusion) labels = *l2->second.pose2d().occlusion;
    }
    if (labels && labels->frames() > gt3.frames()) labels = detail::truncate_frames(*labels, gt3.frames());

    ReportKey base;
    base.model = model_id;
    base.protocol = pred_c.header.protocol;
    base.sigma = pred_c.header.sigma;
    base.run = pred_c.header.run;
    base.target_joint = pred_c.header.target_joint;
    base.action = pred_c.header.action;
    base.camera = pred_c.header.camera_name;

    auto& records = shards[i];
    for (Slice slice : slices) {
      const OcclusionTrack* track = labels ? &*labels : nullptr;
      if (slice != Slice::Overall && !track)
        throw DataError(pred_files[i].string() + ": slice '" + to_string(slice) +
                        "' requires occlusion labels (none in prediction or 2D ground truth)");
      // Whole-pose average.
      try {
        size_t count = 0;
        for (int f = 0; f < gt3.frames(); ++f)
          for (int j = 0; j < gt3.joints(); ++j) {
            if (excl.excluded(j)) continue;
            if (slice == Slice::Overall || detail::passes_slice(slice, track, f, j)) ++count;
          }
        ReportKey k = base;
        k.joint = kAllJoints;
        k.slice = slice;
        records.push_back({k, mpjpe(lifted, gt3, excl, slice, track), count});
      } catch (const MetricError&) {
        // Empty selection: the cell is absent, never zero.
      }
      // Per-joint values.
      const auto per_joint = per_joint_mpjpe(lifted, gt3, excl, slice, track);
      for (int j = 0; j < static_cast<int>(per_joint.size()); ++j) {
        if (!per_joint[static_cast<size_t>(j)]) continue;
        size_t count = 0;
        for (int f = 0; f < gt3.frames(); ++f)
          if (slice == Slice::Overall || detail::passes_slice(slice, track, f, j)) ++count;
        ReportKey k = base;
        k.joint = j;
        k.slice = slice;
        records.push_back({k, *per_joint[static_cast<size_t>(j)], count});
      }
    }
  });

  MetricReport report;
  for (auto& shard : shards)
    for (auto& r : shard) report.raw.push_back(std::move(r));
  if (report.raw.empty()) throw DataError("no prediction produced any report row");
  report.aggregate();

  const std::filesystem::path out_root(cfg.out);
  write_per_run_csv(report, schema, out_root / "reports" / "per_run.csv");
  write_noise_table_csv(report, out_root / "reports" / "noise_table.csv");
  write_per_joint_csv(report, schema, out_root / "reports" / "per_joint.csv");
  write_normalized_csv(report, out_root / "reports" / "normalized.csv");
  for (const auto& f : pred_files)
    manifest.tasks.push_back({f.string(), 0, "reports/per_run.csv"});
  write_manifest(manifest, out_root / "manifest.json");
  return report;
}

// ---------------------------------------------------------------------------
// analyze

inline void cmd_analyze(const RunnerConfig& cfg) {
  if (cfg.out.empty()) throw UsageError("analyze requires --out");
  const std::filesystem::path reports = std::filesystem::path(cfg.out) / "reports";
  const auto& schema = SkeletonSchema::h36m17();
  JointExclusion excl;
  try {
    excl = JointExclusion::from_names(schema, cfg.exclude_joints);
  } catch (const MetricError& e) {
    throw UsageError(e.what());
  }

  if (cfg.which == "occlusion-stats") {
    if (cfg.dataset.empty()) throw UsageError("occlusion-stats requires --dataset");
    std::vector<std::vector<DurationStats>> per_action;
    OcclusionHistogram hist;
    for (const auto& f : detail::list_poseq(cfg.dataset)) {
      SequenceContainer c = read_container(f);
      if (!c.is_2d() || !c.pose2d().occlusion)
        throw DataError(f.string() + ": occlusion statistics need 2D sequences with occlusion labels");
      per_action.push_back(occlusion_duration_stats(*c.pose2d().occlusion));
      hist = merge_histograms(hist, occluded_count_histogram(*c.pose2d().occlusion));
    }
    if (per_action.empty()) throw DataError("no sequences found in " + cfg.dataset);
    write_duration_csv(combine_duration_stats(per_action), schema, reports / "occlusion_durations.csv");
    write_histogram_csv(hist, reports / "occlusion_histogram.csv");
    write_occlusion_summary_csv(hist, reports / "occlusion_summary.csv");
    return;
  }

  if (cfg.which == "geometry") {
    if (cfg.pred.empty() || cfg.gt.empty()) throw UsageError("geometry requires --pred and --gt");
    const auto gt = detail::load_gt_dir(cfg.gt);
    Heatmap heatmap;
    // Stored 3D poses are camera-space, so the camera sits at the origin
    // looking along +Z; identity extrinsics express exactly that.
    CameraModel identity_ext;
    for (const auto& f : detail::list_poseq(cfg.pred)) {
      SequenceContainer pred_c = read_container(f);
      if (pred_c.is_2d()) throw DataError(f.string() + ": geometry analysis needs 3D predictions");
      const auto git = gt.gt3d.find(pred_c.sequence_key());
      if (git == gt.gt3d.end()) {
        if (cfg.allow_partial) continue;
        throw DataError(f.string() + ": no ground truth for key '" + pred_c.sequence_key() + "'");
      }
      if (!git->second.header.camera)
        throw DataError(git->second.sequence_key() + ": geometry analysis refused, ground truth has no camera");
      const PoseSequence3D pred3 =
          pred_c.pose3d().hypotheses > 1 ? aggregate_hypotheses(pred_c.pose3d()) : pred_c.pose3d();
      PoseSequence3D gt3 = git->second.pose3d();
      if (pred3.frames() < gt3.frames()) gt3 = detail::truncate_frames(gt3, pred3.frames());
      if (pred3.frames() > gt3.frames())
        throw DataError(f.string() + ": prediction has more frames than ground truth");
      for (int fr = 0; fr < gt3.frames(); ++fr) {
        const auto frame = gt3.frame(fr);
        double err_sum = 0.0;
        int err_n = 0;
        for (int j = 0; j < gt3.joints(); ++j) {
          if (excl.excluded(j)) continue;
          err_sum += (pred3.at(fr, j) - gt3.at(fr, j)).norm();
          ++err_n;
        }
        HeatmapSample s;
        s.orientation_deg = orientation_angle(frame, identity_ext, schema);
        s.distance_m = camera_distance(frame, identity_ext);
        s.error_mm = err_sum / std::max(err_n, 1);
        heatmap.add(s);
      }
    }
    write_heatmap_csv(heatmap, reports / "heatmap.csv");
    write_heatmap_counts_csv(heatmap, reports / "heatmap_counts.csv");
    return;
  }

  if (cfg.which == "velocity") {
    if (cfg.dataset.empty() || cfg.pred.empty() || cfg.gt.empty())
      throw UsageError("velocity requires --dataset (2D), --pred and --gt");
    const auto gt = detail::load_gt_dir(cfg.gt);
    const auto gt2d = detail::load_gt_dir(cfg.dataset);
    VelocityBins bins;
    for (const auto& f : detail::list_poseq(cfg.pred)) {
      SequenceContainer pred_c = read_container(f);
      if (pred_c.is_2d()) throw DataError(f.string() + ": velocity analysis needs 3D predictions");
      const auto git = gt.gt3d.find(pred_c.sequence_key());
      const auto g2 = gt2d.gt2d.find(pred_c.sequence_key());
      if (git == gt.gt3d.end() || g2 == gt2d.gt2d.end()) {
        if (cfg.allow_partial) continue;
        throw DataError(f.string() + ": missing 3D ground truth or 2D track for key '" +
                        pred_c.sequence_key() + "'");
      }
      const PoseSequence3D pred3 =
          pred_c.pose3d().hypotheses > 1 ? aggregate_hypotheses(pred_c.pose3d()) : pred_c.pose3d();
      PoseSequence3D gt3 = git->second.pose3d();
      PoseSequence2D seq2 = g2->second.pose2d();
      if (pred3.frames() < gt3.frames()) gt3 = detail::truncate_frames(gt3, pred3.frames());
      if (pred3.frames() < seq2.frames()) seq2 = detail::truncate_frames(seq2, pred3.frames());
      bins.merge(velocity_profile(seq2, pred3, gt3, excl));
    }
    write_velocity_csv(bins, reports / "velocity.csv");
    return;
  }

  if (cfg.which == "detector-stats") {
    if (cfg.pred.empty() || cfg.gt.empty()) throw UsageError("detector-stats requires --pred and --gt");
    const auto gt = detail::load_gt_dir(cfg.gt);
    std::map<OcclusionLabel, std::vector<double>> errors;
    std::string detector = cfg.model;
    for (const auto& f : detail::list_poseq(cfg.pred)) {
      SequenceContainer det_c = read_container(f);
      if (!det_c.is_2d()) throw DataError(f.string() + ": detector statistics need 2D detections");
      if (detector.empty())
        detector = det_c.header.model.empty() ? "detector" : det_c.header.model;
      const auto git = gt.gt2d.find(det_c.sequence_key());
      if (git == gt.gt2d.end()) {
        if (cfg.allow_partial) continue;
        throw DataError(f.string() + ": no 2D ground truth for key '" + det_c.sequence_key() + "'");
      }
      const SequenceContainer& gt_c = git->second;
      if (!gt_c.pose2d().occlusion)
        throw DataError(gt_c.sequence_key() + ": 2D ground truth has no occlusion labels");
      const JointMapping m = JointMapping::by_names(det_c.header.schema, gt_c.header.schema);
      AlignmentResult aligned;
      try {
        aligned = align_for_scoring(det_c, gt_c, m);
      } catch (const AlignmentError& e) {
        throw DataError(f.string() + ": " + e.what());
      }
      const auto& det = aligned.pred.pose2d();
      const auto& gtp = aligned.gt.pose2d();
      const auto& labels = *gtp.occlusion;
      for (int fr = 0; fr < gtp.frames(); ++fr)
        for (int j = 0; j < gtp.joints(); ++j) {
          if (!det.coords(fr, j).finite() || !gtp.coords(fr, j).finite()) continue;
          errors[labels.label(fr, j)].push_back((det.coords(fr, j) - gtp.coords(fr, j)).norm());
        }
    }
    if (errors.empty()) throw DataError("no detections matched the ground truth");
    std::map<OcclusionLabel, CategoryStats> stats;
    for (auto& [cat, v] : errors) {
      CategoryStats s;
      s.count = v.size();
      s.mean = pairwise_sum(v) / static_cast<double>(v.size());
      std::vector<double> sq(v.size());
      for (size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - s.mean) * (v[i] - s.mean);
      s.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size()));
      stats[cat] = s;
    }
    write_detector_stats_csv({{detector, stats}}, reports / "detector_stats.csv");
    return;
  }

  throw UsageError("unknown analysis '" + cfg.which +
                   "' (expected geometry, velocity, occlusion-stats or detector-stats)");
}

}  // namespace occlubench
