#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "occlubench/camera.hpp"
#include "occlubench/pose.hpp"
#include "occlubench/skeleton.hpp"

namespace occlubench {

/// Error with the 1-based line (and, where known, field) that failed.
struct ParseError : std::runtime_error {
  int line;
  std::string field;
  ParseError(std::string msg, int line_, std::string field_ = "")
      : std::runtime_error("line " + std::to_string(line_) +
                           (field_.empty() ? "" : (", field '" + field_ + "'")) + ": " + msg),
        line(line_),
        field(std::move(field_)) {}
};

struct ContainerHeader {
  SchemaTag schema = SchemaTag::H36M17;
  std::string units;  // "px" or "mm"
  int width = 0, height = 0;
  double fps = 0.0;
  std::string subject, action;
  std::string camera_name;  // optional
  std::optional<CameraModel> camera;
  int hypotheses = 1;  // >1 only for mm containers
  // Corruption provenance, present on protocol outputs.
  std::optional<double> sigma;
  std::optional<int> run;
  std::string protocol;      // "", "p1" or "p2"
  std::optional<uint64_t> seed;
  std::string target_joint;  // protocol-2 perturbed joint
  std::string model;         // producing model id, for predictions
};

/// One `.poseq` file: a JSON header line plus one record per frame.
struct SequenceContainer {
  ContainerHeader header;
  std::variant<PoseSequence2D, PoseSequence3D> payload;

  bool is_2d() const { return std::holds_alternative<PoseSequence2D>(payload); }
  PoseSequence2D& pose2d() { return std::get<PoseSequence2D>(payload); }
  const PoseSequence2D& pose2d() const { return std::get<PoseSequence2D>(payload); }
  PoseSequence3D& pose3d() { return std::get<PoseSequence3D>(payload); }
  const PoseSequence3D& pose3d() const { return std::get<PoseSequence3D>(payload); }

  int frames() const {
    return is_2d() ? pose2d().frames() : pose3d().frames();
  }
  int joints() const {
    return is_2d() ? pose2d().joints() : pose3d().joints();
  }

  /// Stable identity used for pairing and seed derivation.
  std::string sequence_key() const {
    return header.subject + "|" + header.action + "|" + header.camera_name;
  }
};

namespace detail {

/// NaN is the in-memory MISSING sentinel; it serializes as an empty field.
inline std::string format_fixed6(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline double parse_coord_field(std::string_view s, int line, const std::string& field) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size())
    throw ParseError("not a number: '" + tmp + "'", line, field);
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline nlohmann::json camera_to_json(const CameraModel& cam) {
  nlohmann::json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["R"] = cam.rotation;
  j["t"] = cam.translation;
  return j;
}

inline CameraModel camera_from_json(const nlohmann::json& j, int w, int h) {
  CameraModel cam;
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  const auto& R = j.at("R");
  const auto& t = j.at("t");
  if (!R.is_array() || R.size() != 9) throw ParseError("camera R must have 9 entries", 1, "camera");
  if (!t.is_array() || t.size() != 3) throw ParseError("camera t must have 3 entries", 1, "camera");
  for (size_t i = 0; i < 9; ++i) cam.rotation[i] = R[i].get<double>();
  for (size_t i = 0; i < 3; ++i) cam.translation[i] = t[i].get<double>();
  cam.width = w;
  cam.height = h;
  return cam;
}

}  // namespace detail

inline std::string serialize_header(const ContainerHeader& h) {
  nlohmann::json j;
  j["schema"] = to_string(h.schema);
  j["units"] = h.units;
  j["width"] = h.width;
  j["height"] = h.height;
  j["fps"] = h.fps;
  j["subject"] = h.subject;
  j["action"] = h.action;
  if (!h.camera_name.empty()) j["camera_name"] = h.camera_name;
  if (h.camera) j["camera"] = detail::camera_to_json(*h.camera);
  if (h.hypotheses != 1) j["hypotheses"] = h.hypotheses;
  if (h.sigma) j["sigma"] = *h.sigma;
  if (h.run) j["run"] = *h.run;
  if (!h.protocol.empty()) j["protocol"] = h.protocol;
  if (h.seed) j["seed"] = *h.seed;
  if (!h.target_joint.empty()) j["joint"] = h.target_joint;
  if (!h.model.empty()) j["model"] = h.model;
  return j.dump();
}

inline ContainerHeader parse_header(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("header is not valid JSON: ") + e.what(), 1);
  }
  ContainerHeader h;
  try {
    const std::string tag = j.at("schema").get<std::string>();
    try {
      h.schema = schema_tag_from_string(tag);
    } catch (const std::invalid_argument&) {
      throw ParseError("unknown schema tag '" + tag + "'", 1, "schema");
    }
    h.units = j.at("units").get<std::string>();
    if (h.units != "px" && h.units != "mm")
      throw ParseError("units must be 'px' or 'mm'", 1, "units");
    h.width = j.at("width").get<int>();
    h.height = j.at("height").get<int>();
    h.fps = j.at("fps").get<double>();
    h.subject = j.at("subject").get<std::string>();
    h.action = j.at("action").get<std::string>();
    if (j.contains("camera_name")) h.camera_name = j["camera_name"].get<std::string>();
    if (j.contains("camera")) h.camera = detail::camera_from_json(j["camera"], h.width, h.height);
    if (j.contains("hypotheses")) h.hypotheses = j["hypotheses"].get<int>();
    if (h.hypotheses < 1) throw ParseError("hypotheses must be >= 1", 1, "hypotheses");
    if (h.hypotheses > 1 && h.units != "mm")
      throw ParseError("hypotheses axis is only valid for mm containers", 1, "hypotheses");
    if (j.contains("sigma")) h.sigma = j["sigma"].get<double>();
    if (j.contains("run")) h.run = j["run"].get<int>();
    if (j.contains("protocol")) h.protocol = j["protocol"].get<std::string>();
    if (j.contains("seed")) h.seed = j["seed"].get<uint64_t>();
    if (j.contains("joint")) h.target_joint = j["joint"].get<std::string>();
    if (j.contains("model")) h.model = j["model"].get<std::string>();
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), 1);
  }
  return h;
}

inline std::string serialize_container(const SequenceContainer& c) {
  std::string out = serialize_header(c.header);
  out += '\n';
  const int joints = c.joints();
  const int hyps = c.is_2d() ? 1 : c.pose3d().hypotheses;
  const OcclusionTrack* occ = nullptr;
  const std::vector<double>* conf = nullptr;
  if (c.is_2d()) {
    if (c.pose2d().occlusion) occ = &*c.pose2d().occlusion;
    if (!c.pose2d().confidence.empty()) conf = &c.pose2d().confidence;
  }
  for (int f = 0; f < c.frames(); ++f) {
    out += std::to_string(f);
    if (c.is_2d()) {
      for (int j = 0; j < joints; ++j) {
        const Vec2 p = c.pose2d().coords(f, j);
        out += ',';
        out += detail::format_fixed6(p.x);
        out += ',';
        out += detail::format_fixed6(p.y);
      }
    } else {
      for (int h = 0; h < hyps; ++h)
        for (int j = 0; j < joints; ++j) {
          const Vec3 p = c.pose3d().at(f, h, j);
          out += ',';
          out += detail::format_fixed6(p.x);
          out += ',';
          out += detail::format_fixed6(p.y);
          out += ',';
          out += detail::format_fixed6(p.z);
        }
    }
    if (occ) {
      out += '|';
      for (int j = 0; j < joints; ++j)
        out += static_cast<char>('0' + static_cast<int>(occ->label(f, j)));
    }
    if (conf) {
      out += '|';
      for (int j = 0; j < joints; ++j) {
        if (j) out += ',';
        out += detail::format_fixed6((*conf)[static_cast<size_t>(f) * joints + j]);
      }
    }
    out += '\n';
  }
  return out;
}

inline SequenceContainer parse_container(std::istream& in, int expected_joints = kNumJoints) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file, expected JSON header", 1);
  SequenceContainer c;
  c.header = parse_header(line);
  const int dims = c.header.units == "px" ? 2 : 3;
  const int joints = expected_joints;
  const int hyps = c.header.hypotheses;
  const int coord_fields = hyps * joints * dims;

  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  const int frames = static_cast<int>(rows.size());

  PoseSequence2D p2;
  PoseSequence3D p3;
  if (dims == 2) {
    p2 = PoseSequence2D(frames, joints, c.header.width, c.header.height, c.header.fps);
  } else {
    p3 = PoseSequence3D(frames, joints, hyps);
  }
  bool has_occ = false, has_conf = false;
  OcclusionTrack occ(frames, joints);
  std::vector<double> conf;

  for (int f = 0; f < frames; ++f) {
    const int lineno = f + 2;
    const auto segs = detail::split(rows[static_cast<size_t>(f)], '|');
    if (segs.size() > 3) throw ParseError("too many '|' segments", lineno);
    const auto fields = detail::split(segs[0], ',');
    if (fields.empty()) throw ParseError("missing frame index", lineno);
    {
      std::string idx(fields[0]);
      char* end = nullptr;
      const long v = std::strtol(idx.c_str(), &end, 10);
      if (end != idx.c_str() + idx.size() || v != f)
        throw ParseError("frame index '" + idx + "' does not match row " + std::to_string(f), lineno, "frame");
    }
    if (static_cast<int>(fields.size()) - 1 != coord_fields)
      throw ParseError("row has " + std::to_string(fields.size() - 1) + " coordinate fields, expected " +
                           std::to_string(coord_fields),
                       lineno);
    if (dims == 2) {
      for (int j = 0; j < joints; ++j) {
        p2.coords(f, j).x = detail::parse_coord_field(fields[1 + 2 * static_cast<size_t>(j)], lineno, "x");
        p2.coords(f, j).y = detail::parse_coord_field(fields[2 + 2 * static_cast<size_t>(j)], lineno, "y");
      }
    } else {
      for (int h = 0; h < hyps; ++h)
        for (int j = 0; j < joints; ++j) {
          const size_t base = 1 + 3 * (static_cast<size_t>(h) * joints + static_cast<size_t>(j));
          p3.at(f, h, j).x = detail::parse_coord_field(fields[base], lineno, "x");
          p3.at(f, h, j).y = detail::parse_coord_field(fields[base + 1], lineno, "y");
          p3.at(f, h, j).z = detail::parse_coord_field(fields[base + 2], lineno, "z");
        }
    }
    const bool row_occ = segs.size() >= 2;
    const bool row_conf = segs.size() >= 3;
    if (f == 0) {
      has_occ = row_occ;
      has_conf = row_conf;
      if (has_conf) conf.assign(static_cast<size_t>(frames) * joints, 0.0);
    } else if (row_occ != has_occ || row_conf != has_conf) {
      throw ParseError("inconsistent optional segments across rows", lineno);
    }
    if (row_occ) {
      if (dims != 2) throw ParseError("occlusion labels are only valid for px containers", lineno);
      if (static_cast<int>(segs[1].size()) != joints)
        throw ParseError("occlusion segment has " + std::to_string(segs[1].size()) + " digits, expected " +
                             std::to_string(joints),
                         lineno);
      for (int j = 0; j < joints; ++j) {
        const char d = segs[1][static_cast<size_t>(j)];
        if (d < '0' || d > '2') throw ParseError("occlusion digit out of range", lineno);
        occ.set(f, j, static_cast<OcclusionLabel>(d - '0'));
      }
    }
    if (row_conf) {
      if (dims != 2) throw ParseError("confidence values are only valid for px containers", lineno);
      const auto cf = detail::split(segs[2], ',');
      if (static_cast<int>(cf.size()) != joints)
        throw ParseError("confidence segment has " + std::to_string(cf.size()) + " values, expected " +
                             std::to_string(joints),
                         lineno);
      for (int j = 0; j < joints; ++j)
        conf[static_cast<size_t>(f) * joints + j] = detail::parse_coord_field(cf[static_cast<size_t>(j)], lineno, "confidence");
    }
  }

  if (dims == 2) {
    if (has_occ) p2.occlusion = std::move(occ);
    if (has_conf) p2.confidence = std::move(conf);
    c.payload = std::move(p2);
  } else {
    c.payload = std::move(p3);
  }
  return c;
}

inline SequenceContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return parse_container(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line, e.field);
  }
}

inline void write_container(const SequenceContainer& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << serialize_container(c);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace detail {
inline bool same_double(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b;
}
}  // namespace detail

/// Structural equality; NaN coordinates compare equal (MISSING == MISSING).
inline bool structurally_equal(const SequenceContainer& a, const SequenceContainer& b) {
  const auto& ha = a.header;
  const auto& hb = b.header;
  if (ha.schema != hb.schema || ha.units != hb.units || ha.width != hb.width || ha.height != hb.height ||
      ha.fps != hb.fps || ha.subject != hb.subject || ha.action != hb.action ||
      ha.camera_name != hb.camera_name || ha.hypotheses != hb.hypotheses || ha.sigma != hb.sigma ||
      ha.run != hb.run || ha.protocol != hb.protocol || ha.seed != hb.seed ||
      ha.target_joint != hb.target_joint || ha.model != hb.model)
    return false;
  if (ha.camera.has_value() != hb.camera.has_value()) return false;
  if (ha.camera) {
    const auto& ca = *ha.camera;
    const auto& cb = *hb.camera;
    if (ca.fx != cb.fx || ca.fy != cb.fy || ca.cx != cb.cx || ca.cy != cb.cy ||
        ca.rotation != cb.rotation || ca.translation != cb.translation)
      return false;
  }
  if (a.is_2d() != b.is_2d() || a.frames() != b.frames() || a.joints() != b.joints()) return false;
  if (a.is_2d()) {
    const auto& pa = a.pose2d();
    const auto& pb = b.pose2d();
    for (int f = 0; f < pa.frames(); ++f)
      for (int j = 0; j < pa.joints(); ++j)
        if (!detail::same_double(pa.coords(f, j).x, pb.coords(f, j).x) ||
            !detail::same_double(pa.coords(f, j).y, pb.coords(f, j).y))
          return false;
    if (pa.occlusion.has_value() != pb.occlusion.has_value()) return false;
    if (pa.occlusion && !(*pa.occlusion == *pb.occlusion)) return false;
    if (pa.confidence.size() != pb.confidence.size()) return false;
    for (size_t i = 0; i < pa.confidence.size(); ++i)
      if (!detail::same_double(pa.confidence[i], pb.confidence[i])) return false;
  } else {
    const auto& pa = a.pose3d();
    const auto& pb = b.pose3d();
    if (pa.hypotheses != pb.hypotheses) return false;
    for (int f = 0; f < pa.frames(); ++f)
      for (int c2 = 0; c2 < pa.coords.cols(); ++c2) {
        const Vec3 va = pa.coords(f, c2);
        const Vec3 vb = pb.coords(f, c2);
        if (!detail::same_double(va.x, vb.x) || !detail::same_double(va.y, vb.y) ||
            !detail::same_double(va.z, vb.z))
          return false;
      }
  }
  return true;
}

}  // namespace occlubench
