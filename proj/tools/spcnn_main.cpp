// spcnn command-line tool: training, evaluation, prediction, shape
// auditing, gradient checking, and synthetic-data generation.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spcnn/spcnn.hpp"

namespace fs = std::filesystem;
using namespace spcnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

RunConfig load_run_config(const std::string& config_path) {
  if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path);
  return parse_config_file(config_path);
}

DatasetManifest load_manifest_checked(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("manifest not found: " + path);
  return load_manifest(path);
}

int cmd_train(const std::string& config_path, int64_t iterations_override, int64_t seed_override,
              const std::string& out_override) {
  RunConfig cfg = load_run_config(config_path);
  if (iterations_override >= 0) cfg.train.iterations = iterations_override;
  if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (cfg.manifest.empty()) throw ConfigError(config_path + ": [data] manifest is required");

  const DatasetManifest manifest = load_manifest_checked(cfg.manifest);
  if (static_cast<int>(manifest.class_names.size()) != cfg.class_count)
    throw ConfigError("manifest has " + std::to_string(manifest.class_names.size()) +
                      " classes but config expects " + std::to_string(cfg.class_count));

  const NetworkSpec spec = build_network_spec(cfg);
  NetworkState state = init_params(spec, cfg.train.seed);

  fs::create_directories(cfg.output_dir);
  std::printf("computing mean image over %" PRId64 " train entries\n", split_stats(manifest).train);
  TrainData data;
  data.manifest = &manifest;
  data.canonical = cfg.canonical_size;
  data.mean = compute_mean_image(manifest, cfg.canonical_size);
  save_tensor_file((fs::path(cfg.output_dir) / "mean_image.bin").string(), data.mean.values);

  std::ofstream metrics(fs::path(cfg.output_dir) / "metrics.log");
  std::ofstream accuracy(fs::path(cfg.output_dir) / "train_accuracy.log");
  if (!metrics || !accuracy) throw IoError("cannot write logs in " + cfg.output_dir);

  TrainCallbacks cb;
  cb.on_iteration = [&](int64_t iter, float loss, float lr) {
    char line[96];
    std::snprintf(line, sizeof line, "iter %" PRId64 " loss %.6g lr %.6g", iter,
                  static_cast<double>(loss), static_cast<double>(lr));
    metrics << line << "\n";
  };
  cb.on_accuracy = [&](int64_t iter, double acc) {
    char line[96];
    std::snprintf(line, sizeof line, "iter %" PRId64 " train_acc %.4f", iter, acc);
    accuracy << line << "\n";
    std::printf("%s\n", line);
  };
  cb.on_snapshot = [&](int64_t iter, const Checkpoint& ck) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%06" PRId64 ".spcn", iter);
    save_checkpoint((fs::path(cfg.output_dir) / name).string(), ck);
  };

  const TrainResult result = train(spec, std::move(state), data, cfg.train, cb);
  metrics.close();
  accuracy.close();

  const std::string final_path = (fs::path(cfg.output_dir) / "checkpoint.spcn").string();
  save_checkpoint(final_path, result.checkpoint);
  std::printf("final checkpoint: %s (%" PRIu64 " iterations)\n", final_path.c_str(),
              result.checkpoint.iteration);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const DatasetManifest manifest = load_manifest_checked(manifest_path);
  if (static_cast<int>(manifest.class_names.size()) != ck.spec.class_count)
    throw ConfigError("checkpoint expects " + std::to_string(ck.spec.class_count) +
                      " classes, manifest has " + std::to_string(manifest.class_names.size()));
  const EvalResult res = evaluate(ck.spec, ck.state, ck.mean, manifest, SplitRole::Test);
  emit_report(res.cm, res.average_accuracy, manifest.class_names, out_dir);
  write_sample_log(res.records, manifest.class_names, (fs::path(out_dir) / "predictions.csv").string());
  std::printf("average_accuracy=%.2f\n", res.average_accuracy);
  return kExitOk;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& input, bool video) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  Prediction p;
  if (video)
    p = predict_video(ck.spec, ck.state, ck.mean, load_frame_sequence(input));
  else
    p = predict_image(ck.spec, ck.state, ck.mean, load_image(input));
  const std::vector<std::string> names = [&] {
    std::vector<std::string> n;
    for (int c = 0; c < ck.spec.class_count; ++c) n.push_back("class" + std::to_string(c));
    return n;
  }();
  std::printf("%s", names[static_cast<size_t>(p.predicted)].c_str());
  for (float s : p.scores) std::printf(" %.6f", static_cast<double>(s));
  std::printf("\n");
  return kExitOk;
}

int cmd_shapes(const std::string& config_path, const std::string& profile_name) {
  RunConfig cfg;
  if (!config_path.empty())
    cfg = load_run_config(config_path);
  else
    cfg = default_config(profile_from_string(profile_name));
  const NetworkSpec spec = build_network_spec(cfg);
  for (size_t i = 0; i < spec.streams.size(); ++i) {
    const ShapeReport rep = infer_shapes(spec.streams[i]);
    std::printf("stream %zu input %d\n", i, spec.streams[i].input_size);
    for (const LayerShape& ls : rep.layers)
      std::printf("  %-8s %dx%dx%d\n", ls.name.c_str(), ls.channels, ls.height, ls.width);
    std::printf("  flatten  %" PRId64 "\n", rep.flattened_width);
  }
  std::printf("concat_width=%" PRId64 "\n", concat_width(spec));
  return kExitOk;
}

int cmd_gradcheck(uint64_t seed, bool sabotage) {
  const std::vector<GradCheckRow> rows = run_gradcheck_suite(seed, sabotage);
  bool ok = true;
  for (const GradCheckRow& r : rows) {
    const bool pass = r.error < r.threshold;
    ok = ok && pass;
    std::printf("%-12s max_rel_error %.3e (threshold %.0e) %s\n", r.name.c_str(), r.error,
                r.threshold, pass ? "ok" : "FAIL");
  }
  if (!ok) {
    std::fprintf(stderr, "error: gradient check failed\n");
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_synth(int classes, int per_class, const std::string& out_dir, uint64_t seed, int size,
              int noise) {
  SynthConfig cfg;
  cfg.class_count = classes;
  cfg.samples_per_class = per_class;
  cfg.canonical_size = size;
  cfg.seed = seed;
  cfg.noise = noise;
  const std::string manifest = gen_synthetic(cfg, out_dir);
  std::printf("%s\n", manifest.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatial-pyramid multi-stream convolutional classifier"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, manifest_path, input_path, profile_name;
  int64_t iterations_override = -1, seed_override = -1;
  uint64_t seed = 1;
  bool video = false, sabotage = false;
  int classes = 8, per_class = 50, size = 64, noise = 8;

  CLI::App* train = app.add_subcommand("train", "train a network from a config file");
  train->add_option("--config", config_path, "run config file")->required();
  train->add_option("--iterations", iterations_override, "override [train] iterations");
  train->add_option("--seed", seed_override, "override [train] seed");
  train->add_option("--out", out_dir, "override output directory");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest's test split");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval->add_option("--manifest", manifest_path, "dataset manifest")->required();
  eval->add_option("--out", out_dir, "report output directory")->required();

  CLI::App* predict = app.add_subcommand("predict", "classify one image or frame directory");
  predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  predict->add_option("--input", input_path, "image file, or frame directory with --video")->required();
  predict->add_flag("--video", video, "treat input as a frame directory");

  CLI::App* shapes = app.add_subcommand("shapes", "print per-stream shape tables and concat width");
  shapes->add_option("--config", config_path, "run config file");
  shapes->add_option("--profile", profile_name, "built-in profile (paper|desk)")->default_val("desk");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check suite");
  gradcheck->add_option("--seed", seed, "rng seed")->default_val(1);
  gradcheck->add_flag("--sabotage", sabotage, "corrupt one analytic gradient (harness self-test)");

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic quadrant dataset");
  synth->add_option("--classes", classes, "class count (2..16)")->default_val(8);
  synth->add_option("--per-class", per_class, "train samples per class")->default_val(50);
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--seed", seed, "rng seed")->default_val(1);
  synth->add_option("--size", size, "canonical image size")->default_val(64);
  synth->add_option("--noise", noise, "per-pixel uniform noise amplitude")->default_val(8);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed())
      return cmd_train(config_path, iterations_override, seed_override, out_dir);
    if (eval->parsed()) return cmd_eval(checkpoint_path, manifest_path, out_dir);
    if (predict->parsed()) return cmd_predict(checkpoint_path, input_path, video);
    if (shapes->parsed()) return cmd_shapes(config_path, profile_name);
    if (gradcheck->parsed()) return cmd_gradcheck(seed, sabotage);
    if (synth->parsed()) return cmd_synth(classes, per_class, out_dir, seed, size, noise);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
