#include "fmreg/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

namespace fmreg {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> pose_to_doubles(const SE3& pose) {
  const Eigen::Matrix4d m = pose.matrix();
  std::vector<double> v(16);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) v[r * 4 + c] = m(r, c);
  }
  return v;
}

SE3 pose_from_doubles(const std::vector<double>& v, const std::string& where) {
  if (v.size() != 16) {
    throw SchemaViolation(where + ": pose must have 16 doubles");
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = v[r * 4 + c];
  }
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-12) {
    throw InvalidPose(where + ": bottom row is not (0,0,0,1)");
  }
  const SE3 pose = SE3::from_matrix(m);
  if (!pose.is_valid(1e-9)) {
    throw InvalidPose(where + ": rotation block is not orthonormal");
  }
  return pose;
}

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw SchemaViolation(where + ": unknown field '" + key + "'");
    }
  }
}

std::string require_string(const json& obj, const std::string& key,
                           const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    throw SchemaViolation(where + ": missing string field '" + key + "'");
  }
  return obj[key].get<std::string>();
}

std::vector<double> require_pose_array(const json& obj, const std::string& key,
                                       const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_array()) {
    throw SchemaViolation(where + ": missing pose array '" + key + "'");
  }
  std::vector<double> v;
  for (const auto& x : obj[key]) {
    if (!x.is_number()) throw SchemaViolation(where + ": pose array '" + key + "' must be numeric");
    v.push_back(x.get<double>());
  }
  return v;
}

json camera_to_json(const PinholeCamera& cam) {
  return json{{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx},
              {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

PinholeCamera camera_from_json(const json& obj, const std::string& where) {
  check_keys(obj, {"fx", "fy", "cx", "cy", "width", "height"}, where + ".camera");
  PinholeCamera cam;
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) {
    if (!obj.contains(key) || !obj[key].is_number()) {
      throw SchemaViolation(where + ".camera: missing numeric field '" +
                            std::string(key) + "'");
    }
  }
  cam.fx = obj["fx"].get<double>();
  cam.fy = obj["fy"].get<double>();
  cam.cx = obj["cx"].get<double>();
  cam.cy = obj["cy"].get<double>();
  cam.width = obj["width"].get<int>();
  cam.height = obj["height"].get<int>();
  if (!cam.is_valid()) throw SchemaViolation(where + ".camera: invalid intrinsics");
  return cam;
}

}  // namespace

void save_manifest(const std::string& path, const TripletManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
  out << json{{"version", manifest.version}}.dump() << '\n';
  for (const TripletEntry& e : manifest.entries) {
    json files{{"r0_image", e.r0_image}, {"r0_depth", e.r0_depth},
               {"r0_seg", e.r0_seg},     {"r1_image", e.r1_image},
               {"r1_depth", e.r1_depth}, {"r1_seg", e.r1_seg},
               {"q_image", e.q_image},   {"q_seg", e.q_seg}};
    json obj{{"id", e.id},
             {"ref_seq", e.ref_seq},
             {"query_seq", e.query_seq},
             {"camera", camera_to_json(e.camera)},
             {"files", files},
             {"that_r0_r1", pose_to_doubles(e.that_r0_r1)}};
    if (e.gt_t_q_r0) obj["gt_t_q_r0"] = pose_to_doubles(*e.gt_t_q_r0);
    out << obj.dump() << '\n';
  }
  if (!out) throw std::runtime_error("save_manifest: write failed for " + path);
}

TripletManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaViolation("load_manifest: cannot open " + path);
  const fs::path base = fs::path(path).parent_path();

  TripletManifest manifest;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& err) {
      throw SchemaViolation("manifest line " + std::to_string(lineno) + ": " +
                            err.what());
    }

    if (lineno == 1) {
      check_keys(obj, {"version"}, "manifest header");
      manifest.version = require_string(obj, "version", "manifest header");
      if (manifest.version != kManifestVersion) {
        throw SchemaViolation("manifest header: unsupported version '" +
                              manifest.version + "'");
      }
      continue;
    }

    TripletEntry e;
    const std::string where =
        "entry at line " + std::to_string(lineno);
    check_keys(obj,
               {"id", "ref_seq", "query_seq", "camera", "files", "that_r0_r1",
                "gt_t_q_r0"},
               where);
    e.id = require_string(obj, "id", where);
    const std::string named = "entry '" + e.id + "'";
    if (!obj.contains("ref_seq") || !obj["ref_seq"].is_number_integer() ||
        !obj.contains("query_seq") || !obj["query_seq"].is_number_integer()) {
      throw SchemaViolation(named + ": missing integer sequence ids");
    }
    e.ref_seq = obj["ref_seq"].get<int>();
    e.query_seq = obj["query_seq"].get<int>();
    if (!obj.contains("camera") || !obj["camera"].is_object()) {
      throw SchemaViolation(named + ": missing camera object");
    }
    e.camera = camera_from_json(obj["camera"], named);

    if (!obj.contains("files") || !obj["files"].is_object()) {
      throw SchemaViolation(named + ": missing files object");
    }
    const json& files = obj["files"];
    check_keys(files,
               {"r0_image", "r0_depth", "r0_seg", "r1_image", "r1_depth",
                "r1_seg", "q_image", "q_seg"},
               named + ".files");
    e.r0_image = require_string(files, "r0_image", named);
    e.r0_depth = require_string(files, "r0_depth", named);
    e.r0_seg = require_string(files, "r0_seg", named);
    e.r1_image = require_string(files, "r1_image", named);
    e.r1_depth = require_string(files, "r1_depth", named);
    e.r1_seg = require_string(files, "r1_seg", named);
    e.q_image = require_string(files, "q_image", named);
    e.q_seg = require_string(files, "q_seg", named);
    for (const std::string* f : {&e.r0_image, &e.r0_depth, &e.r0_seg,
                                 &e.r1_image, &e.r1_depth, &e.r1_seg,
                                 &e.q_image, &e.q_seg}) {
      if (!fs::exists(base / *f)) {
        throw SchemaViolation(named + ": referenced file missing: " + *f);
      }
    }

    e.that_r0_r1 =
        pose_from_doubles(require_pose_array(obj, "that_r0_r1", named),
                          named + ".that_r0_r1");
    if (obj.contains("gt_t_q_r0")) {
      e.gt_t_q_r0 = pose_from_doubles(
          require_pose_array(obj, "gt_t_q_r0", named), named + ".gt_t_q_r0");
    }
    manifest.entries.push_back(std::move(e));
  }
  if (lineno == 0) throw SchemaViolation("load_manifest: empty file " + path);
  return manifest;
}

}  // namespace fmreg
