#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "fmreg/camera.hpp"

namespace fmreg {

class SchemaViolation : public std::runtime_error {
 public:
  explicit SchemaViolation(const std::string& what) : std::runtime_error(what) {}
};

class InvalidPose : public std::runtime_error {
 public:
  explicit InvalidPose(const std::string& what) : std::runtime_error(what) {}
};

/// One triplet record. File paths are relative to the manifest's
/// directory. The query frame carries no depth.
struct TripletEntry {
  std::string id;
  int ref_seq = 0;
  int query_seq = 0;
  PinholeCamera camera;
  std::string r0_image, r0_depth, r0_seg;
  std::string r1_image, r1_depth, r1_seg;
  std::string q_image, q_seg;
  SE3 that_r0_r1;
  std::optional<SE3> gt_t_q_r0;  // evaluation only
};

constexpr const char* kManifestVersion = "fmreg.triplets.v1";

struct TripletManifest {
  std::string version = kManifestVersion;
  std::vector<TripletEntry> entries;
};

/**
 * Line-delimited manifest: a version record on the first line, then one
 * JSON object per triplet. Poses are 16 row-major doubles of the 4x4
 * homogeneous matrix. Loading validates strictly: unknown fields and
 * non-rigid poses are rejected with the offending entry named, and
 * every referenced file must exist.
 */
TripletManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const TripletManifest& manifest);

/// Pose <-> 16 row-major doubles.
std::vector<double> pose_to_doubles(const SE3& pose);
SE3 pose_from_doubles(const std::vector<double>& v, const std::string& where);

}  // namespace fmreg
