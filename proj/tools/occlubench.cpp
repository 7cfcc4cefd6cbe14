#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "occlubench/runner.hpp"
#include "occlubench/version.hpp"

namespace {

using occlubench::RunnerConfig;

// Tracks which flags were passed so they override config-file values.
struct CliValues {
  std::string config;
  uint64_t seed = 0;
  int parallelism = 0;
  std::string out, dataset, protocol, input, mapping, pred, gt, model, which;
  std::vector<double> sigmas;
  int runs = 0;
  std::string slices, exclude_joints;
  bool allow_partial = false;
};

RunnerConfig merge_config(const CliValues& v, const CLI::App& cmd) {
  RunnerConfig cfg;
  if (!v.config.empty()) {
    std::ifstream in(v.config);
    if (!in) throw occlubench::UsageError("cannot open config file: " + v.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw occlubench::UsageError("config is not valid JSON: " + std::string(e.what()));
    }
    cfg = RunnerConfig::from_json(j);
  }
  auto given = [&](const std::string& name) {
    const CLI::Option* opt = cmd.get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--seed")) cfg.seed = v.seed;
  if (given("--parallel")) cfg.parallelism = v.parallelism;
  if (given("--out")) cfg.out = v.out;
  if (given("--dataset")) cfg.dataset = v.dataset;
  if (given("--protocol")) cfg.protocol = v.protocol;
  if (given("--sigma")) cfg.sigmas = v.sigmas;
  if (given("--runs")) cfg.runs = v.runs;
  if (given("--input")) cfg.input = v.input;
  if (given("--mapping")) cfg.mapping = v.mapping;
  if (given("--pred")) cfg.pred = v.pred;
  if (given("--gt")) cfg.gt = v.gt;
  if (given("--model")) cfg.model = v.model;
  if (given("--which")) cfg.which = v.which;
  if (given("--allow-partial")) cfg.allow_partial = true;
  auto split_list = [](const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
      const size_t pos = s.find(',', start);
      if (pos == std::string::npos) {
        if (start < s.size()) out.push_back(s.substr(start));
        break;
      }
      if (pos > start) out.push_back(s.substr(start, pos - start));
      start = pos + 1;
    }
    return out;
  };
  if (given("--slices")) cfg.slices = split_list(v.slices);
  if (given("--exclude-joints")) {
    cfg.exclude_joints.clear();
    for (auto& name : split_list(v.exclude_joints)) {
      if (name == "hip") name = "Hip";  // flag spelling convenience
      cfg.exclude_joints.push_back(name);
    }
  }
  return cfg;
}

void add_common_flags(CLI::App* cmd, CliValues& v) {
  cmd->add_option("--config", v.config, "JSON config file; flags override its keys");
  cmd->add_option("--seed", v.seed, "base seed for all random draws");
  cmd->add_option("--parallel", v.parallelism, "worker count (0 = all processors)");
  cmd->add_option("--out", v.out, "output directory (or file for convert)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occlusion-robustness benchmark harness for 2D-to-3D pose lifting"};
  app.set_version_flag("--version", occlubench::kVersion);
  app.require_subcommand(1);
  CliValues v;

  CLI::App* convert = app.add_subcommand("convert", "rewrite a sequence into another skeleton layout");
  add_common_flags(convert, v);
  convert->add_option("--input", v.input, "input .poseq file");
  convert->add_option("--mapping", v.mapping, "mapping id '<source>:<target>', e.g. coco17:h36m17");

  CLI::App* corrupt = app.add_subcommand("corrupt", "run an occlusion-noise protocol over a dataset");
  add_common_flags(corrupt, v);
  corrupt->add_option("--dataset", v.dataset, "directory of 2D .poseq inputs");
  corrupt->add_option("--protocol", v.protocol, "p1 or p2")->check(CLI::IsMember({"p1", "p2"}));
  corrupt->add_option("--sigma", v.sigmas, "noise level, repeatable (fraction of average resolution)");
  corrupt->add_option("--runs", v.runs, "independent runs per level");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
  add_common_flags(evaluate, v);
  evaluate->add_option("--pred", v.pred, "predictions directory (3D mm, or corrupted 2D for baselines)");
  evaluate->add_option("--gt", v.gt, "ground-truth directory (3D mm + 2D px with labels)");
  evaluate->add_option("--model", v.model, "model id; baseline:gt|passthrough|constpose lift 2D inputs");
  evaluate->add_option("--slices", v.slices, "comma list of overall,visible,occluded");
  evaluate->add_option("--exclude-joints", v.exclude_joints, "comma list of joints to drop (default hip)");
  evaluate->add_flag("--allow-partial", v.allow_partial, "skip predictions without ground truth");

  CLI::App* analyze = app.add_subcommand("analyze", "dataset and geometry analyses");
  add_common_flags(analyze, v);
  analyze->add_option("--which", v.which, "geometry | velocity | occlusion-stats | detector-stats");
  analyze->add_option("--dataset", v.dataset, "2D dataset directory");
  analyze->add_option("--pred", v.pred, "predictions / detections directory");
  analyze->add_option("--gt", v.gt, "ground-truth directory");
  analyze->add_option("--model", v.model, "detector/model label for reports");
  analyze->add_option("--exclude-joints", v.exclude_joints, "comma list of joints to drop (default hip)");
  analyze->add_flag("--allow-partial", v.allow_partial, "skip inputs without ground truth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (convert->parsed()) {
      occlubench::cmd_convert(merge_config(v, *convert));
    } else if (corrupt->parsed()) {
      occlubench::cmd_corrupt(merge_config(v, *corrupt));
    } else if (evaluate->parsed()) {
      occlubench::cmd_evaluate(merge_config(v, *evaluate));
    } else if (analyze->parsed()) {
      occlubench::cmd_analyze(merge_config(v, *analyze));
    }
  } catch (const occlubench::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
