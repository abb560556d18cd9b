#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spcnn/errors.hpp"
#include "spcnn/net.hpp"
#include "spcnn/optimizer.hpp"

namespace spcnn {

enum class Profile { Paper, Desk };

inline Profile profile_from_string(const std::string& s) {
  if (s == "paper") return Profile::Paper;
  if (s == "desk") return Profile::Desk;
  throw ConfigError("unknown profile '" + s + "' (expected paper or desk)");
}

/// The stock tower geometry: conv1 96@11 s4, pool 3 s2, conv2 256@5 pad2,
/// pool 3 s2, conv3 384@3 pad1, conv4 384@3 pad1, conv5 256@3 pad1,
/// pool 3 s2.
inline std::vector<LayerDesc> paper_tower() {
  return {conv_layer(96, 11, 4, 0), relu_layer(), pool_layer(3, 2),
          conv_layer(256, 5, 1, 2), relu_layer(), pool_layer(3, 2),
          conv_layer(384, 3, 1, 1), relu_layer(),
          conv_layer(384, 3, 1, 1), relu_layer(),
          conv_layer(256, 3, 1, 1), relu_layer(), pool_layer(3, 2)};
}

/// Scaled-down tower with the same conventions, sized for 64/32 px inputs.
inline std::vector<LayerDesc> desk_tower() {
  return {conv_layer(12, 5, 2, 0), relu_layer(), pool_layer(3, 2),
          conv_layer(24, 3, 1, 1), relu_layer(), pool_layer(3, 2),
          conv_layer(24, 3, 1, 1), relu_layer(), pool_layer(3, 2)};
}

inline std::vector<LayerDesc> tower_layers(const std::string& stream_profile) {
  if (stream_profile == "paper") return paper_tower();
  if (stream_profile == "desk") return desk_tower();
  throw ConfigError("unknown stream profile '" + stream_profile + "' (expected paper or desk)");
}

struct RunConfig {
  Profile profile = Profile::Desk;
  std::string output_dir = "out";
  // [network]
  int pyramid_levels = 2;
  std::string stream_profile = "desk";
  int fc6 = 128;
  int fc7 = 128;
  int class_count = 8;
  float dropout_rate = 0.5f;
  bool share_quadrant_weights = false;
  // [train]
  TrainConfig train;
  // [data]
  std::string manifest;
  int canonical_size = 64;
};

inline RunConfig default_config(Profile p) {
  RunConfig cfg;
  cfg.profile = p;
  if (p == Profile::Paper) {
    cfg.stream_profile = "paper";
    cfg.fc6 = 4096;
    cfg.fc7 = 4096;
    cfg.canonical_size = 256;
    cfg.train.batch_size = 256;
    cfg.train.iterations = 32000;
    cfg.train.snapshot_interval = 1000;
  } else {
    cfg.stream_profile = "desk";
    cfg.fc6 = 128;
    cfg.fc7 = 128;
    cfg.canonical_size = 64;
    cfg.train.batch_size = 32;
    cfg.train.iterations = 2000;
    cfg.train.snapshot_interval = 500;
  }
  return cfg;
}

/// Streams for the configured pyramid: level l contributes 4^l streams at
/// input size canonical/2^l, all with the same tower geometry.
inline NetworkSpec build_network_spec(const RunConfig& cfg) {
  NetworkSpec spec;
  spec.pyramid_levels = cfg.pyramid_levels;
  spec.fc6_width = cfg.fc6;
  spec.fc7_width = cfg.fc7;
  spec.class_count = cfg.class_count;
  spec.dropout_rate = cfg.dropout_rate;
  spec.share_quadrant_weights = cfg.share_quadrant_weights;
  spec.streams.clear();
  const std::vector<LayerDesc> tower = tower_layers(cfg.stream_profile);
  for (int level = 0; level < cfg.pyramid_levels; ++level) {
    const int count = 1 << (2 * level);
    const int input = cfg.canonical_size >> level;
    for (int i = 0; i < count; ++i) spec.streams.push_back(StreamSpec{input, tower});
  }
  validate_spec(spec);
  return spec;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

struct ConfigLine {
  int line_no = 0;
  std::string section;
  std::string key;
  std::string value;
};

inline std::vector<ConfigLine> scan_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::vector<ConfigLine> lines;
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "network" && section != "train" && section != "data")
        throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    ConfigLine cl;
    cl.line_no = line_no;
    cl.section = section;
    cl.key = trim(line.substr(0, eq));
    cl.value = trim(line.substr(eq + 1));
    if (cl.key.empty() || cl.value.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key or value");
    lines.push_back(std::move(cl));
  }
  return lines;
}

}  // namespace detail

// Plain-text config: `[section] key = value`. The optional top-level
// `profile` key selects the default set; explicit keys override it.
// Unknown sections or keys are rejected.
inline RunConfig parse_config_file(const std::string& path) {
  const std::vector<detail::ConfigLine> lines = detail::scan_config(path);

  Profile profile = Profile::Desk;
  for (const auto& cl : lines)
    if (cl.section.empty() && cl.key == "profile") profile = profile_from_string(cl.value);
  RunConfig cfg = default_config(profile);

  for (const auto& cl : lines) {
    const std::string where = path + ":" + std::to_string(cl.line_no);
    auto to_int = [&](const std::string& v) {
      try {
        return std::stoll(v);
      } catch (const std::exception&) {
        throw ConfigError(where + ": expected an integer, got '" + v + "'");
      }
    };
    auto to_float = [&](const std::string& v) {
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        throw ConfigError(where + ": expected a number, got '" + v + "'");
      }
    };
    if (cl.section.empty()) {
      if (cl.key == "profile")
        ;  // already applied
      else if (cl.key == "output_dir")
        cfg.output_dir = cl.value;
      else
        throw ConfigError(where + ": unknown key '" + cl.key + "'");
    } else if (cl.section == "network") {
      if (cl.key == "pyramid_levels")
        cfg.pyramid_levels = static_cast<int>(to_int(cl.value));
      else if (cl.key == "stream_profile")
        cfg.stream_profile = cl.value;
      else if (cl.key == "fc6")
        cfg.fc6 = static_cast<int>(to_int(cl.value));
      else if (cl.key == "fc7")
        cfg.fc7 = static_cast<int>(to_int(cl.value));
      else if (cl.key == "class_count")
        cfg.class_count = static_cast<int>(to_int(cl.value));
      else if (cl.key == "dropout_rate")
        cfg.dropout_rate = static_cast<float>(to_float(cl.value));
      else if (cl.key == "share_quadrant_weights")
        cfg.share_quadrant_weights = detail::parse_bool(cl.value, where);
      else
        throw ConfigError(where + ": unknown key '" + cl.key + "' in [network]");
    } else if (cl.section == "train") {
      if (cl.key == "alpha")
        cfg.train.alpha = static_cast<float>(to_float(cl.value));
      else if (cl.key == "momentum")
        cfg.train.momentum = static_cast<float>(to_float(cl.value));
      else if (cl.key == "weight_decay")
        cfg.train.weight_decay = static_cast<float>(to_float(cl.value));
      else if (cl.key == "batch_size")
        cfg.train.batch_size = static_cast<int>(to_int(cl.value));
      else if (cl.key == "iterations")
        cfg.train.iterations = to_int(cl.value);
      else if (cl.key == "seed")
        cfg.train.seed = static_cast<uint64_t>(to_int(cl.value));
      else if (cl.key == "snapshot_interval")
        cfg.train.snapshot_interval = to_int(cl.value);
      else if (cl.key == "lr_schedule") {
        if (cl.value == "fixed")
          cfg.train.schedule = LrSchedule::Fixed;
        else if (cl.value == "step")
          cfg.train.schedule = LrSchedule::Step;
        else
          throw ConfigError(where + ": unknown lr_schedule '" + cl.value + "'");
      } else if (cl.key == "lr_gamma")
        cfg.train.lr_gamma = static_cast<float>(to_float(cl.value));
      else if (cl.key == "lr_step")
        cfg.train.lr_step = to_int(cl.value);
      else if (cl.key == "decay_biases")
        cfg.train.decay_biases = detail::parse_bool(cl.value, where);
      else
        throw ConfigError(where + ": unknown key '" + cl.key + "' in [train]");
    } else if (cl.section == "data") {
      if (cl.key == "manifest")
        cfg.manifest = cl.value;
      else if (cl.key == "canonical_size")
        cfg.canonical_size = static_cast<int>(to_int(cl.value));
      else
        throw ConfigError(where + ": unknown key '" + cl.key + "' in [data]");
    }
  }
  cfg.train.validate();
  return cfg;
}

}  // namespace spcnn
