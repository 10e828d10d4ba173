#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include "fmreg/kvconfig.hpp"
#include "fmreg/manifest.hpp"
#include "fmreg/pfm.hpp"
#include "fmreg/synth.hpp"
#include "oracles.hpp"

using namespace fmreg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fmreg_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("io") {

TEST_CASE("pfm round trip is bitwise exact for 1, 3, and odd channel counts") {
  TempDir dir;
  std::mt19937_64 rng(3);
  for (int channels : {1, 3, 6, 16}) {
    ImageBuffer img(13, 9, channels);
    for (float& v : img.data()) {
      v = static_cast<float>(2000.0 * uniform01(rng) - 1000.0);
    }
    const std::string path = dir.file("roundtrip.pfm");
    write_pfm(path, img);
    const ImageBuffer back = read_pfm(path);
    CHECK(back.width() == 13);
    CHECK(back.height() == 9);
    CHECK(back.channels() == channels);
    CHECK(back.data() == img.data());
  }
}

TEST_CASE("1x1 single-channel layout: 12-byte header, 4-byte payload") {
  TempDir dir;
  ImageBuffer img(1, 1, 1, 3.5f);
  const std::string path = dir.file("single.pfm");
  write_pfm(path, img);
  // "Pf\n1 1\n-1.0\n" + one float32
  CHECK(fs::file_size(path) == 12 + 4);
  std::ifstream in(path, std::ios::binary);
  std::string header(12, '\0');
  in.read(header.data(), 12);
  CHECK(header == "Pf\n1 1\n-1.0\n");
  const ImageBuffer back = read_pfm(path);
  CHECK(back.at(0, 0) == 3.5f);
}

TEST_CASE("malformed pfm headers are rejected") {
  TempDir dir;
  auto write_raw = [&](const std::string& name, const std::string& bytes) {
    std::ofstream out(dir.file(name), std::ios::binary);
    out << bytes;
    return dir.file(name);
  };
  CHECK_THROWS_AS(read_pfm(write_raw("zero.pfm", "PC0\n2 2\n-1.0\n")), MalformedHeader);
  CHECK_THROWS_AS(read_pfm(write_raw("magic.pfm", "Px\n2 2\n-1.0\n")), MalformedHeader);
  CHECK_THROWS_AS(read_pfm(write_raw("scale.pfm", "Pf\n2 2\n1.0\n")), MalformedHeader);
  CHECK_THROWS_AS(read_pfm(write_raw("dims.pfm", "Pf\n-3 2\n-1.0\n")), MalformedHeader);
  CHECK_THROWS_AS(read_pfm(dir.file("missing.pfm")), MalformedHeader);
}

TEST_CASE("truncated pfm payloads are detected") {
  TempDir dir;
  ImageBuffer img(8, 8, 1, 1.0f);
  const std::string path = dir.file("truncated.pfm");
  write_pfm(path, img);
  fs::resize_file(path, fs::file_size(path) - 17);
  CHECK_THROWS_AS(read_pfm(path), TruncatedData);
}

TEST_CASE("manifest save/load round trip") {
  TempDir dir;
  // Minimal referenced files so existence validation passes.
  ImageBuffer dummy(4, 4, 1, 1.0f);
  for (const char* name :
       {"r0i.pfm", "r0d.pfm", "r0s.pfm", "r1i.pfm", "r1d.pfm", "r1s.pfm",
        "qi.pfm", "qs.pfm"}) {
    write_pfm(dir.file(name), dummy);
  }

  std::mt19937_64 rng(7);
  TripletManifest manifest;
  for (int i = 0; i < 3; ++i) {
    TripletEntry e;
    e.id = "t" + std::to_string(i);
    e.ref_seq = i % 2;
    e.query_seq = i;
    e.camera = {120.0, 120.0, 79.5, 47.5, 160, 96};
    e.r0_image = "r0i.pfm";
    e.r0_depth = "r0d.pfm";
    e.r0_seg = "r0s.pfm";
    e.r1_image = "r1i.pfm";
    e.r1_depth = "r1d.pfm";
    e.r1_seg = "r1s.pfm";
    e.q_image = "qi.pfm";
    e.q_seg = "qs.pfm";
    e.that_r0_r1 = oracles::random_pose(rng, 1.0, 1.0);
    if (i != 1) e.gt_t_q_r0 = oracles::random_pose(rng, 1.0, 1.0);
    manifest.entries.push_back(e);
  }
  const std::string path = dir.file("manifest.jsonl");
  save_manifest(path, manifest);
  const TripletManifest loaded = load_manifest(path);
  REQUIRE(loaded.entries.size() == 3);
  CHECK(loaded.version == kManifestVersion);
  for (int i = 0; i < 3; ++i) {
    const TripletEntry& a = manifest.entries[i];
    const TripletEntry& b = loaded.entries[i];
    CHECK(a.id == b.id);
    CHECK(a.ref_seq == b.ref_seq);
    CHECK(a.query_seq == b.query_seq);
    CHECK(a.camera.fx == b.camera.fx);
    CHECK((a.that_r0_r1.matrix() - b.that_r0_r1.matrix()).norm() == 0.0);
    CHECK(a.gt_t_q_r0.has_value() == b.gt_t_q_r0.has_value());
  }
}

TEST_CASE("manifest validation names the offending entry") {
  TempDir dir;
  ImageBuffer dummy(2, 2, 1, 1.0f);
  for (const char* name :
       {"a.pfm", "b.pfm", "c.pfm", "d.pfm", "e.pfm", "f.pfm", "g.pfm", "h.pfm"}) {
    write_pfm(dir.file(name), dummy);
  }
  const std::string files =
      R"("files":{"r0_image":"a.pfm","r0_depth":"b.pfm","r0_seg":"c.pfm",)"
      R"("r1_image":"d.pfm","r1_depth":"e.pfm","r1_seg":"f.pfm",)"
      R"("q_image":"g.pfm","q_seg":"h.pfm"})";
  const std::string camera =
      R"("camera":{"fx":100.0,"fy":100.0,"cx":50.0,"cy":50.0,"width":101,"height":101})";
  const std::string identity =
      R"([1.0,0,0,0, 0,1.0,0,0, 0,0,1.0,0, 0,0,0,1.0])";

  auto write_manifest = [&](const std::string& name, const std::string& entry) {
    std::ofstream out(dir.file(name));
    out << R"({"version":"fmreg.triplets.v1"})" << "\n" << entry << "\n";
    return dir.file(name);
  };

  // Non-orthonormal pose.
  const std::string bad_pose = write_manifest(
      "bad_pose.jsonl", R"({"id":"tX","ref_seq":0,"query_seq":0,)" + camera + "," +
                            files +
                            R"(,"that_r0_r1":[2.0,0,0,0, 0,1.0,0,0, 0,0,1.0,0, 0,0,0,1.0]})");
  CHECK_THROWS_WITH_AS(load_manifest(bad_pose),
                       doctest::Contains("entry 'tX'"), InvalidPose);

  // Unknown field.
  const std::string unknown = write_manifest(
      "unknown.jsonl", R"({"id":"tY","ref_seq":0,"query_seq":0,"surprise":1,)" +
                           camera + "," + files + R"(,"that_r0_r1":)" + identity + "}");
  CHECK_THROWS_WITH_AS(load_manifest(unknown), doctest::Contains("surprise"),
                       SchemaViolation);

  // Missing referenced file.
  const std::string missing = write_manifest(
      "missing.jsonl",
      R"({"id":"tZ","ref_seq":0,"query_seq":0,)" + camera + "," +
          std::string(
              R"("files":{"r0_image":"nope.pfm","r0_depth":"b.pfm","r0_seg":"c.pfm",)"
              R"("r1_image":"d.pfm","r1_depth":"e.pfm","r1_seg":"f.pfm",)"
              R"("q_image":"g.pfm","q_seg":"h.pfm"})") +
          R"(,"that_r0_r1":)" + identity + "}");
  CHECK_THROWS_WITH_AS(load_manifest(missing), doctest::Contains("nope.pfm"),
                       SchemaViolation);

  // Wrong version tag.
  std::ofstream out(dir.file("version.jsonl"));
  out << R"({"version":"other.v9"})" << "\n";
  out.close();
  CHECK_THROWS_AS(load_manifest(dir.file("version.jsonl")), SchemaViolation);
}

TEST_CASE("a 1000-entry manifest loads in under a second") {
  TempDir dir;
  ImageBuffer dummy(2, 2, 1, 1.0f);
  for (const char* name :
       {"a.pfm", "b.pfm", "c.pfm", "d.pfm", "e.pfm", "f.pfm", "g.pfm", "h.pfm"}) {
    write_pfm(dir.file(name), dummy);
  }
  TripletManifest manifest;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    TripletEntry e;
    e.id = "t" + std::to_string(i);
    e.camera = {100.0, 100.0, 49.5, 49.5, 100, 100};
    e.r0_image = "a.pfm";
    e.r0_depth = "b.pfm";
    e.r0_seg = "c.pfm";
    e.r1_image = "d.pfm";
    e.r1_depth = "e.pfm";
    e.r1_seg = "f.pfm";
    e.q_image = "g.pfm";
    e.q_seg = "h.pfm";
    e.that_r0_r1 = oracles::random_pose(rng, 1.0, 1.0);
    manifest.entries.push_back(e);
  }
  const std::string path = dir.file("big.jsonl");
  save_manifest(path, manifest);

  const auto start = std::chrono::steady_clock::now();
  const TripletManifest loaded = load_manifest(path);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(loaded.entries.size() == 1000);
  CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() < 1000);
}

TEST_CASE("kv config parses values, ranges, and defaults") {
  const SceneConfig cfg = parse_scene_config_text(
      "# a comment\n"
      "seed = 9\n"
      "width = 128\n"
      "height = 80\n"
      "gain = 0.8 1.2\n"
      "depth_noise_sigma = 0.01\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.width == 128);
  CHECK(cfg.gain.lo == 0.8);
  CHECK(cfg.gain.hi == 1.2);
  CHECK(cfg.depth_noise_sigma == 0.01);
  // Unspecified keys keep their documented defaults.
  CHECK(cfg.plane_count == 3);
  CHECK(cfg.min_overlap == 0.6);
}

TEST_CASE("kv config rejects unknown keys, typos, and bad values") {
  CHECK_THROWS_WITH_AS(parse_scene_config_text("widht = 128\n"),
                       doctest::Contains("widht"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config_text("width = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config_text("gain = 0.8\n"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config_text("width = 128\nwidth = 64\n"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config_text("not a key value line\n"), ConfigError);
  // Valid syntax, degenerate semantics.
  CHECK_THROWS_AS(parse_scene_config_text("baseline = 2.0 1.0\n"), DegenerateConfig);
}

}  // TEST_SUITE
