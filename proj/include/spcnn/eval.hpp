#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "spcnn/dataset.hpp"
#include "spcnn/errors.hpp"
#include "spcnn/net.hpp"
#include "spcnn/pyramid.hpp"

namespace spcnn {

/// Per-class count matrix; rows are actual classes, columns predictions.
struct ConfusionMatrix {
  int k = 0;
  std::vector<int64_t> counts;

  explicit ConfusionMatrix(int classes = 0)
      : k(classes), counts(static_cast<size_t>(classes) * classes, 0) {}

  int64_t& at(int actual, int predicted) {
    return counts[static_cast<size_t>(actual) * k + predicted];
  }
  int64_t at(int actual, int predicted) const {
    return counts[static_cast<size_t>(actual) * k + predicted];
  }
  int64_t row_sum(int actual) const {
    int64_t s = 0;
    for (int p = 0; p < k; ++p) s += at(actual, p);
    return s;
  }
  bool row_defined(int actual) const { return row_sum(actual) > 0; }

  // Row percentages, 100*count/rowSum. Rows with no counts are undefined
  // and returned as NaN; check row_defined.
  std::vector<double> row_normalized() const {
    std::vector<double> out(static_cast<size_t>(k) * k, std::nan(""));
    for (int a = 0; a < k; ++a) {
      const int64_t rs = row_sum(a);
      if (rs == 0) continue;
      for (int p = 0; p < k; ++p)
        out[static_cast<size_t>(a) * k + p] = 100.0 * static_cast<double>(at(a, p)) / static_cast<double>(rs);
    }
    return out;
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<std::pair<int, int>>& pairs, int k) {
  ConfusionMatrix cm(k);
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto [actual, predicted] = pairs[i];
    if (actual < 0 || actual >= k || predicted < 0 || predicted >= k)
      throw DataError("confusion matrix: pair " + std::to_string(i) + " (" +
                      std::to_string(actual) + "," + std::to_string(predicted) +
                      ") outside [0," + std::to_string(k) + ")");
    ++cm.at(actual, predicted);
  }
  return cm;
}

/// Mean of the diagonal of a row-normalized percentage matrix (mean
/// per-class recall).
inline double average_accuracy_rownorm(const std::vector<double>& rownorm, int k) {
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += rownorm[static_cast<size_t>(i) * k + i];
  return sum / k;
}

inline double average_accuracy(const ConfusionMatrix& cm) {
  std::string empty;
  for (int a = 0; a < cm.k; ++a)
    if (!cm.row_defined(a)) empty += (empty.empty() ? "" : ", ") + std::to_string(a);
  if (!empty.empty())
    throw DataError("average accuracy undefined: no samples for class(es) " + empty);
  return average_accuracy_rownorm(cm.row_normalized(), cm.k);
}

// Mean per-class recall over classes that have samples; equals
// average_accuracy when every class is populated.
inline double average_accuracy_defined(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int defined = 0;
  const std::vector<double> rn = cm.row_normalized();
  for (int a = 0; a < cm.k; ++a) {
    if (!cm.row_defined(a)) continue;
    sum += rn[static_cast<size_t>(a) * cm.k + a];
    ++defined;
  }
  if (defined == 0) throw DataError("average accuracy undefined: empty confusion matrix");
  return sum / defined;
}

struct Prediction {
  std::vector<float> scores;  // softmax probabilities, length K
  int predicted = 0;          // argmax, ties to the lowest class index
};

namespace detail {

inline int argmax_lowest(const std::vector<float>& v) {
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace detail

/// Resize, pyramid split, mean-subtract, forward in inference mode,
/// softmax.
inline Prediction predict_image(const NetworkSpec& spec, const NetworkState& state,
                                const MeanImage& mean, const RasterImage& img) {
  const int canonical = spec.streams[0].input_size;
  std::vector<Tensor> regions = preprocess_image(img, canonical, spec.pyramid_levels, mean);
  std::vector<Tensor> batches;
  batches.reserve(regions.size());
  for (Tensor& r : regions)
    batches.push_back(r.reshaped({1, r.dim(0), r.dim(1), r.dim(2)}));
  const Tensor logits = forward(spec, state, batches, false);
  const Tensor probs = softmax_rows(logits);
  Prediction p;
  p.scores.assign(probs.data(), probs.data() + probs.size());
  p.predicted = detail::argmax_lowest(p.scores);
  return p;
}

/// Video decision: arithmetic mean of the per-frame score vectors, then
/// argmax. Accumulation is in double, so repeated identical frames return
/// exactly the single-frame scores.
inline Prediction predict_video(const NetworkSpec& spec, const NetworkState& state,
                                const MeanImage& mean, const std::vector<RasterImage>& frames) {
  if (frames.empty()) throw DataError("predict_video: no frames");
  std::vector<double> acc(static_cast<size_t>(spec.class_count), 0.0);
  for (const RasterImage& f : frames) {
    const Prediction p = predict_image(spec, state, mean, f);
    for (int c = 0; c < spec.class_count; ++c) acc[static_cast<size_t>(c)] += p.scores[static_cast<size_t>(c)];
  }
  Prediction out;
  out.scores.resize(static_cast<size_t>(spec.class_count));
  for (int c = 0; c < spec.class_count; ++c)
    out.scores[static_cast<size_t>(c)] = static_cast<float>(acc[static_cast<size_t>(c)] / frames.size());
  out.predicted = detail::argmax_lowest(out.scores);
  return out;
}

struct SampleRecord {
  std::string path;
  int actual = 0;
  int predicted = 0;
  float score_true = 0.0f;
  float score_pred = 0.0f;
};

struct EvalResult {
  ConfusionMatrix cm;
  double average_accuracy = 0.0;
  std::vector<SampleRecord> records;
};

/// The evaluation protocol: images through predict_image, frame sequences
/// through predict_video, aggregated into a confusion matrix and mean
/// per-class recall. A sample that fails to load aborts the run.
inline EvalResult evaluate(const NetworkSpec& spec, const NetworkState& state,
                           const MeanImage& mean, const DatasetManifest& manifest,
                           SplitRole role = SplitRole::Test) {
  if (static_cast<int>(manifest.class_names.size()) != spec.class_count)
    throw ConfigError("evaluate: manifest has " + std::to_string(manifest.class_names.size()) +
                      " classes, network expects " + std::to_string(spec.class_count));
  EvalResult res;
  res.cm = ConfusionMatrix(spec.class_count);
  for (const SampleEntry& e : manifest.entries) {
    if (e.role != role) continue;
    const std::string full = resolve_path(manifest, e.path);
    Prediction p;
    if (e.kind == SampleKind::Image)
      p = predict_image(spec, state, mean, load_image(full));
    else
      p = predict_video(spec, state, mean, load_frame_sequence(full));
    ++res.cm.at(e.label, p.predicted);
    res.records.push_back({e.path, e.label, p.predicted, p.scores[static_cast<size_t>(e.label)],
                           p.scores[static_cast<size_t>(p.predicted)]});
  }
  if (res.records.empty()) throw ConfigError("evaluate: selected split is empty");
  res.average_accuracy = average_accuracy_defined(res.cm);
  return res;
}

// Report files: counts CSV, row-normalized CSV (one decimal), and a
// plain-text summary. Header row carries predicted class names, first
// column the actual class names.

inline std::string counts_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  std::string out = "actual";
  for (const std::string& n : names) out += "," + n;
  out += "\n";
  for (int a = 0; a < cm.k; ++a) {
    out += names[static_cast<size_t>(a)];
    for (int p = 0; p < cm.k; ++p) out += "," + std::to_string(cm.at(a, p));
    out += "\n";
  }
  return out;
}

inline std::string rownorm_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  const std::vector<double> rn = cm.row_normalized();
  std::string out = "actual";
  for (const std::string& n : names) out += "," + n;
  out += "\n";
  char buf[32];
  for (int a = 0; a < cm.k; ++a) {
    out += names[static_cast<size_t>(a)];
    for (int p = 0; p < cm.k; ++p) {
      if (cm.row_defined(a))
        std::snprintf(buf, sizeof buf, "%.1f", rn[static_cast<size_t>(a) * cm.k + p]);
      else
        std::snprintf(buf, sizeof buf, "nan");
      out += ",";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline void emit_report(const ConfusionMatrix& cm, double avg_acc,
                        const std::vector<std::string>& names, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto write = [&](const std::string& file, const std::string& content) {
    std::ofstream out(fs::path(out_dir) / file);
    if (!out) throw IoError("cannot write " + file + " in " + out_dir);
    out << content;
    if (!out) throw IoError("short write to " + file);
  };
  write("confusion_counts.csv", counts_csv(cm, names));
  write("confusion_rownorm.csv", rownorm_csv(cm, names));
  char buf[64];
  std::snprintf(buf, sizeof buf, "average_accuracy=%.2f\n", avg_acc);
  write("summary.txt", buf);
}

inline void write_sample_log(const std::vector<SampleRecord>& records,
                             const std::vector<std::string>& names, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "path,actual,predicted,score_true,score_pred\n";
  char buf[64];
  for (const SampleRecord& r : records) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", static_cast<double>(r.score_true),
                  static_cast<double>(r.score_pred));
    out << r.path << "," << names[static_cast<size_t>(r.actual)] << ","
        << names[static_cast<size_t>(r.predicted)] << buf;
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace spcnn
