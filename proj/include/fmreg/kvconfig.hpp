#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmreg/synth.hpp"

namespace fmreg {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/**
 * Flat `key = value` text config. '#' starts a comment, blank lines are
 * ignored, ranges take two numbers. Every key has a default; keys the
 * consumer never declared are an error, so typos cannot silently fall
 * back to defaults.
 */
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  int get_int(const std::string& key, int def);
  double get_double(const std::string& key, double def);
  uint64_t get_uint64(const std::string& key, uint64_t def);
  Range get_range(const std::string& key, Range def);

  /// Throws ConfigError naming every key that was never consumed.
  void reject_unknown_keys() const;

 private:
  std::vector<std::string> tokens(const std::string& key, size_t expected);

  std::map<std::string, std::string> values_;
  std::map<std::string, bool> consumed_;
};

/// SceneConfig from a config file; every field optional with the
/// documented default. Unknown keys are rejected.
SceneConfig parse_scene_config(const std::string& path);
SceneConfig parse_scene_config_text(const std::string& text);

}  // namespace fmreg
