#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "occlubench/rng.hpp"
#include "occlubench/version.hpp"

namespace occlubench {

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string digest_bytes(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

inline std::string digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return digest_bytes(ss.str());
}

struct ManifestInput {
  std::string path;
  std::string digest;
};

struct ManifestTask {
  std::string id;      // e.g. "p1/0.03/4/S2|act01|cam0"
  uint64_t seed = 0;   // 0 when the task draws no randomness
  std::string output;  // path relative to the out directory
};

/// Reproducibility record: identical config and inputs give an identical
/// config digest, and the per-task seeds fully determine every random
/// draw. The timestamp is metadata only and takes no part in any digest.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  uint64_t base_seed = 0;
  std::vector<ManifestInput> inputs;
  std::vector<ManifestTask> tasks;

  std::string config_digest() const { return digest_bytes(config.dump()); }
};

inline std::string current_utc_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["tool"] = "occlubench";
  j["version"] = kVersion;
  j["command"] = m.command;
  j["config"] = m.config;
  j["config_digest"] = m.config_digest();
  j["base_seed"] = m.base_seed;
  j["created_utc"] = current_utc_iso8601();
  auto& inputs = j["inputs"] = nlohmann::json::array();
  for (const auto& in : m.inputs) inputs.push_back({{"path", in.path}, {"digest", in.digest}});
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (const auto& t : m.tasks)
    tasks.push_back({{"id", t.id}, {"seed", t.seed}, {"output", t.output}});
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace occlubench
