#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spcnn/errors.hpp"
#include "spcnn/image.hpp"
#include "spcnn/ppm.hpp"
#include "spcnn/pyramid.hpp"
#ifdef SPCNN_WITH_PNG
#include "spcnn/png.hpp"
#endif

namespace spcnn {

enum class SampleKind { Image, FrameSequence };
enum class SplitRole { Train, Test };

struct SampleEntry {
  std::string path;  // as written in the manifest; relative paths resolve against the manifest dir
  int label = 0;
  SampleKind kind = SampleKind::Image;
  SplitRole role = SplitRole::Train;
};

/// Labeled samples plus the class vocabulary. Train entries are images
/// only; frame sequences (videos) may appear in the test split.
struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<SampleEntry> entries;
  std::string base_dir;
};

struct SplitStats {
  int64_t train = 0;
  int64_t test = 0;
  std::vector<int64_t> per_class_train;
  std::vector<int64_t> per_class_test;
};

inline SplitStats split_stats(const DatasetManifest& m) {
  SplitStats s;
  s.per_class_train.assign(m.class_names.size(), 0);
  s.per_class_test.assign(m.class_names.size(), 0);
  for (const SampleEntry& e : m.entries) {
    if (e.role == SplitRole::Train) {
      ++s.train;
      ++s.per_class_train[static_cast<size_t>(e.label)];
    } else {
      ++s.test;
      ++s.per_class_test[static_cast<size_t>(e.label)];
    }
  }
  return s;
}

inline std::string resolve_path(const DatasetManifest& m, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || m.base_dir.empty()) return path;
  return (std::filesystem::path(m.base_dir) / p).string();
}

// Manifest text format, line oriented:
//   classes: name,name,...
//   <role>\t<kind>\t<label>\t<path>
// role is train|test, kind is image|video, label is a class index or a
// class name. '#' lines and blank lines are ignored.
inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);

  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();

  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::set<std::string> seen_paths;
  auto fail = [&](const std::string& msg) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      const std::string prefix = "classes:";
      if (line.rfind(prefix, 0) != 0) fail("expected 'classes:' header before entries");
      std::string rest = line.substr(prefix.size());
      std::istringstream ss(rest);
      std::string name;
      while (std::getline(ss, name, ',')) {
        const auto b = name.find_first_not_of(" \t");
        const auto e = name.find_last_not_of(" \t");
        if (b == std::string::npos) fail("empty class name in header");
        m.class_names.push_back(name.substr(b, e - b + 1));
      }
      if (m.class_names.empty()) fail("no classes in header");
      have_header = true;
      continue;
    }

    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) fail("expected 4 tab-separated fields, got " + std::to_string(fields.size()));

    SampleEntry e;
    if (fields[0] == "train")
      e.role = SplitRole::Train;
    else if (fields[0] == "test")
      e.role = SplitRole::Test;
    else
      fail("unknown role '" + fields[0] + "'");

    if (fields[1] == "image")
      e.kind = SampleKind::Image;
    else if (fields[1] == "video")
      e.kind = SampleKind::FrameSequence;
    else
      fail("unknown kind '" + fields[1] + "'");

    const std::string& label = fields[2];
    if (!label.empty() && std::all_of(label.begin(), label.end(), [](char c) { return std::isdigit(c); })) {
      e.label = std::stoi(label);
      if (e.label < 0 || e.label >= static_cast<int>(m.class_names.size()))
        fail("label index " + label + " out of range [0," + std::to_string(m.class_names.size()) + ")");
    } else {
      const auto it = std::find(m.class_names.begin(), m.class_names.end(), label);
      if (it == m.class_names.end()) fail("unknown class name '" + label + "'");
      e.label = static_cast<int>(it - m.class_names.begin());
    }

    e.path = fields[3];
    if (e.path.empty()) fail("empty path");
    if (!seen_paths.insert(e.path).second) fail("duplicate path '" + e.path + "'");
    if (e.kind == SampleKind::FrameSequence && e.role == SplitRole::Train)
      fail("video entries are test-only; '" + e.path + "' is listed as train");

    m.entries.push_back(std::move(e));
  }
  if (!have_header) throw DataError(path + ": missing 'classes:' header");
  return m;
}

inline std::string manifest_to_text(const DatasetManifest& m) {
  std::ostringstream os;
  os << "classes: ";
  for (size_t i = 0; i < m.class_names.size(); ++i) os << (i ? "," : "") << m.class_names[i];
  os << "\n";
  for (const SampleEntry& e : m.entries)
    os << (e.role == SplitRole::Train ? "train" : "test") << "\t"
       << (e.kind == SampleKind::Image ? "image" : "video") << "\t" << e.label << "\t" << e.path
       << "\n";
  return os.str();
}

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  out << manifest_to_text(m);
  if (!out) throw IoError("short write to " + path);
}

inline RasterImage load_image(const std::string& path) {
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".ppm") return load_ppm(path);
#ifdef SPCNN_WITH_PNG
  if (ext == ".png") return load_png(path);
#endif
  throw DataError(path + ": unsupported image format '" + ext + "'");
}

// Frames of a video, one image file per frame, in lexicographic filename
// order. Frame files must use zero-padded names for the order to be
// numeric.
inline std::vector<std::string> list_frames(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(dir + ": not a frame directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  if (names.empty()) throw DataError(dir + ": frame directory is empty");
  std::sort(names.begin(), names.end());
  std::vector<std::string> paths;
  paths.reserve(names.size());
  for (const std::string& n : names) paths.push_back((fs::path(dir) / n).string());
  return paths;
}

inline std::vector<RasterImage> load_frame_sequence(const std::string& dir) {
  std::vector<RasterImage> frames;
  for (const std::string& p : list_frames(dir)) frames.push_back(load_image(p));
  return frames;
}

// Per-pixel, per-channel mean over all train images after resize to the
// canonical resolution, accumulated in 64-bit floats.
inline MeanImage compute_mean_image(const DatasetManifest& m, int canonical) {
  std::vector<double> acc(static_cast<size_t>(3) * canonical * canonical, 0.0);
  int64_t count = 0;
  for (const SampleEntry& e : m.entries) {
    if (e.role != SplitRole::Train) continue;
    if (e.kind != SampleKind::Image)
      throw DataError("train entry '" + e.path + "' is not an image");
    const RasterImage img = resize_bilinear(load_image(resolve_path(m, e.path)), canonical, canonical);
    const Tensor t = image_to_chw(img);
    for (int64_t i = 0; i < t.size(); ++i) acc[static_cast<size_t>(i)] += static_cast<double>(t[i]);
    ++count;
  }
  if (count == 0) throw ConfigError("mean image: training split is empty");
  MeanImage mean;
  mean.values = Tensor({3, canonical, canonical});
  for (size_t i = 0; i < acc.size(); ++i)
    mean.values[static_cast<int64_t>(i)] = static_cast<float>(acc[i] / static_cast<double>(count));
  return mean;
}

}  // namespace spcnn
