#include "fmreg/kvconfig.hpp"

#include <fstream>
#include <sstream>

namespace fmreg {

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      // must be blank after comment stripping
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw ConfigError("config: line " + std::to_string(lineno) +
                          " is not 'key = value'");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " has an empty key or value");
    }
    if (cfg.values_.count(key)) {
      throw ConfigError("config: duplicate key '" + key + "'");
    }
    cfg.values_[key] = value;
    cfg.consumed_[key] = false;
  }
  return cfg;
}

std::vector<std::string> KvConfig::tokens(const std::string& key,
                                          size_t expected) {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  consumed_[key] = true;
  std::istringstream in(it->second);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  if (out.size() != expected) {
    throw ConfigError("config: key '" + key + "' expects " +
                      std::to_string(expected) + " value(s)");
  }
  return out;
}

namespace {

double to_double(const std::string& key, const std::string& tok) {
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + tok + "'");
  }
}

}  // namespace

int KvConfig::get_int(const std::string& key, int def) {
  const auto t = tokens(key, 1);
  if (t.empty()) return def;
  const double v = to_double(key, t[0]);
  if (v != static_cast<int>(v)) {
    throw ConfigError("config: key '" + key + "' expects an integer");
  }
  return static_cast<int>(v);
}

double KvConfig::get_double(const std::string& key, double def) {
  const auto t = tokens(key, 1);
  if (t.empty()) return def;
  return to_double(key, t[0]);
}

uint64_t KvConfig::get_uint64(const std::string& key, uint64_t def) {
  const auto t = tokens(key, 1);
  if (t.empty()) return def;
  try {
    return std::stoull(t[0]);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an unsigned integer");
  }
}

Range KvConfig::get_range(const std::string& key, Range def) {
  const auto t = tokens(key, 2);
  if (t.empty()) return def;
  return Range(to_double(key, t[0]), to_double(key, t[1]));
}

void KvConfig::reject_unknown_keys() const {
  std::string unknown;
  for (const auto& [key, used] : consumed_) {
    if (!used) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) {
    throw ConfigError("config: unknown key(s): " + unknown);
  }
}

SceneConfig parse_scene_config_text(const std::string& text) {
  KvConfig kv = KvConfig::parse_string(text);
  SceneConfig cfg;
  cfg.seed = kv.get_uint64("seed", cfg.seed);
  cfg.width = kv.get_int("width", cfg.width);
  cfg.height = kv.get_int("height", cfg.height);
  cfg.plane_count = kv.get_int("plane_count", cfg.plane_count);
  cfg.plane_extent = kv.get_range("plane_extent", cfg.plane_extent);
  cfg.texture_octaves = kv.get_int("texture_octaves", cfg.texture_octaves);
  cfg.distractor_count = kv.get_int("distractor_count", cfg.distractor_count);
  cfg.distractor_size = kv.get_range("distractor_size", cfg.distractor_size);
  cfg.distractor_speed = kv.get_range("distractor_speed", cfg.distractor_speed);
  cfg.gain = kv.get_range("gain", cfg.gain);
  cfg.bias = kv.get_range("bias", cfg.bias);
  cfg.depth_noise_sigma = kv.get_double("depth_noise_sigma", cfg.depth_noise_sigma);
  cfg.baseline = kv.get_range("baseline", cfg.baseline);
  cfg.query_offset_translation =
      kv.get_range("query_offset_translation", cfg.query_offset_translation);
  cfg.query_offset_rotation =
      kv.get_range("query_offset_rotation", cfg.query_offset_rotation);
  cfg.min_overlap = kv.get_double("min_overlap", cfg.min_overlap);
  kv.reject_unknown_keys();
  cfg.validate();
  return cfg;
}

SceneConfig parse_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_config_text(ss.str());
}

}  // namespace fmreg
