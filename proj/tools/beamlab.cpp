// Command-line front end: dataset generation, training, paired evaluation,
// the full accuracy-vs-M sweep, the timing calculator, and pattern export.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beamlab/config.hpp"
#include "beamlab/experiment.hpp"
#include "beamlab/ia.hpp"
#include "beamlab/rng.hpp"
#include "beamlab/scene.hpp"

namespace fs = std::filesystem;
using namespace beamlab;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  bool paper_scale = false;

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config(config_path);
    }
    if (paper_scale) cfg.sample_count = 1000000;
    if (samples) cfg.sample_count = *samples;
    if (seed) cfg.master_seed = *seed;
    cfg.validate();
    return cfg;
  }
};

Dataset build_dataset(const ExperimentConfig& cfg, Condition condition,
                      const std::string& scene_out) {
  SceneConfig scene_cfg{cfg.sample_count, cfg.half_side_m,
                        cfg.exclusion_radius_m,
                        rng::substream(cfg.master_seed, "scene").next_u64()};
  const std::vector<Receiver> receivers = sample_receivers(scene_cfg);
  if (!scene_out.empty()) save_scene(scene_out, receivers);
  const PatternTable pattern(cfg.array);
  SplitSpec split_spec = cfg.split;
  split_spec.seed = rng::substream(cfg.master_seed, "split").next_u64();
  const std::uint64_t data_seed =
      rng::substream(cfg.master_seed, "shadow-" + to_string(condition))
          .next_u64();
  return generate(receivers, pattern, cfg.channel_for(condition), cfg.budget,
                  data_seed, split_spec, cfg.per_sample_normalization);
}

int cmd_gen_data(const GlobalOptions& global, const std::string& condition,
                 const std::string& out, const std::string& scene_out,
                 const std::string& text_out) {
  const ExperimentConfig cfg = global.resolve();
  const Condition cond = condition_from_string(condition);
  const Dataset ds = build_dataset(cfg, cond, scene_out);
  save_dataset(out, ds);
  if (!text_out.empty()) export_dataset_text(text_out, ds, 100);
  std::printf("dataset: samples=%zu condition=%s seed=%llu file=%s\n",
              ds.sample_count(), to_string(cond).c_str(),
              static_cast<unsigned long long>(cfg.master_seed), out.c_str());
  return 0;
}

int cmd_train(const GlobalOptions& global, const std::string& dataset_path,
              int m, const std::string& out, const std::string& history_out) {
  const ExperimentConfig cfg = global.resolve();
  if (!fs::exists(dataset_path)) {
    throw std::runtime_error("train: dataset file not found: " + dataset_path);
  }
  const Dataset ds = load_dataset(dataset_path);
  const SplitIndices splits = split(ds);
  const BeamSubset subset = BeamSubset::uniform(m);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed =
      rng::substream(cfg.master_seed,
                     "train-" + to_string(ds.channel.condition), m)
          .next_u64();
  auto [model, history] = train(ds, splits, subset, train_cfg);
  save_checkpoint(out, model);
  if (!history_out.empty()) save_history_csv(history_out, history);
  std::printf("trained: m=%d epochs=%d final_val_acc=%.4f checkpoint=%s\n", m,
              train_cfg.epochs_for(m), history.val_accuracy.back(),
              out.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path,
             const std::string& dataset_path,
             const std::string& predictions_out) {
  const Model<double> model = load_checkpoint(checkpoint_path);
  const Dataset ds = load_dataset(dataset_path);
  const SplitIndices splits = split(ds);

  BeamSubset subset;
  subset.m = static_cast<int>(model.subset_indices.size());
  subset.indices = model.subset_indices;

  const std::vector<double> features = select_features(ds, subset);
  const auto width = static_cast<std::size_t>(subset.m);
  std::vector<PredictionRecord> deepia_records;
  std::vector<PredictionRecord> cbs_records;
  deepia_records.reserve(splits.test.size());
  cbs_records.reserve(splits.test.size());
  for (std::size_t row : splits.test) {
    const std::span<const double> rss(features.data() + row * width, width);
    const int truth = ds.labels[row];
    deepia_records.push_back({row, deepia_predict(model, rss, subset).index,
                              truth, Method::DeepIa, subset.m});
    cbs_records.push_back(
        {row, cbs_predict(rss, subset).index, truth, Method::Cbs, subset.m});
  }
  std::printf("eval: m=%d test_rows=%zu deepia_acc=%.4f cbs_acc=%.4f\n",
              subset.m, splits.test.size(), accuracy(deepia_records),
              accuracy(cbs_records));
  if (!predictions_out.empty()) {
    std::vector<PredictionRecord> all = deepia_records;
    all.insert(all.end(), cbs_records.begin(), cbs_records.end());
    write_predictions_csv(predictions_out, all);
  }
  return 0;
}

int cmd_sweep(const GlobalOptions& global, const std::string& out_dir) {
  const ExperimentConfig cfg = global.resolve();
  fs::create_directories(out_dir);
  const ExperimentReport report =
      run(cfg, [](const std::string& msg) { std::puts(msg.c_str()); });
  const fs::path dir(out_dir);
  write_report_csv(dir / "report.csv", report);
  write_curves_csv(dir / "curves.csv", report);
  {
    std::ofstream timing_out(dir / "timing.csv");
    write_timing_report(timing_out, cfg.timing, cfg.carrier_hz);
  }
  for (const CellResult& cell : report.cells) {
    const std::string name = "history_" + to_string(cell.condition) + "_m" +
                             std::to_string(cell.m) + ".csv";
    save_history_csv(dir / name, cell.history);
  }
  std::printf("sweep: %zu cells, report=%s\n", report.cells.size(),
              (dir / "report.csv").string().c_str());
  return 0;
}

int cmd_timing(const GlobalOptions& global, std::optional<int> m,
               std::optional<double> speed, std::optional<double> carrier,
               std::optional<int> comparators, std::optional<double> period) {
  ExperimentConfig cfg;
  if (!global.config_path.empty()) cfg = load_config(global.config_path);
  TimingConfig timing = cfg.timing;
  if (comparators) timing.comparator_count = *comparators;
  if (period) timing.comparator_period_us = *period;
  const double fc = carrier.value_or(cfg.carrier_hz);
  if (m) {
    std::printf("sweep_time_ms=%.6g\n", sweep_time_ms(*m, timing));
    std::printf("cbs_prediction_time_us=%.6g\n",
                cbs_prediction_time_us(*m, timing));
    std::printf("dnn_latency_us=%.6g\n", timing.dnn_latency_us);
  }
  if (speed) {
    std::printf("coherence_time_ms=%.6g\n", coherence_time_ms(fc, *speed));
  }
  if (!m && !speed) {
    write_timing_report(std::cout, timing, fc);
  }
  return 0;
}

int cmd_export_pattern(const GlobalOptions& global, const std::string& out) {
  const ExperimentConfig cfg =
      global.config_path.empty() ? ExperimentConfig{} : load_config(global.config_path);
  PatternTable(cfg.array).export_text(out);
  std::printf("pattern: file=%s resolution_deg=%.4g\n", out.c_str(),
              cfg.array.table_resolution_deg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beamlab: mmWave beam-prediction simulation laboratory"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path,
                 "JSON configuration file (defaults reproduce the standard "
                 "setting)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "master seed override");
  std::size_t samples_value = 0;
  auto* samples_opt =
      app.add_option("--samples", samples_value, "receiver count override");
  app.add_flag("--paper-scale", global.paper_scale,
               "use 1e6 receivers instead of the desk-scale 1e5");

  auto* gen = app.add_subcommand("gen-data", "generate a dataset file");
  std::string gen_condition = "LoS";
  std::string gen_out = "dataset.blds";
  std::string gen_scene_out;
  std::string gen_text_out;
  gen->add_option("--condition", gen_condition, "LoS or NLoS");
  gen->add_option("--out", gen_out, "output dataset file");
  gen->add_option("--scene-out", gen_scene_out, "also save the scene as text");
  gen->add_option("--text-out", gen_text_out,
                  "also save a 100-row text preview");

  auto* train_cmd = app.add_subcommand("train", "train one classifier");
  std::string train_dataset;
  int train_m = 24;
  std::string train_out = "model.blck";
  std::string train_history;
  train_cmd->add_option("--dataset", train_dataset, "dataset file")
      ->required();
  train_cmd->add_option("--m", train_m, "swept subset size");
  train_cmd->add_option("--out", train_out, "checkpoint file");
  train_cmd->add_option("--history", train_history, "training history CSV");

  auto* eval_cmd =
      app.add_subcommand("eval", "paired evaluation on the test split");
  std::string eval_checkpoint;
  std::string eval_dataset;
  std::string eval_predictions;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")
      ->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset file")->required();
  eval_cmd->add_option("--predictions", eval_predictions,
                       "per-receiver prediction CSV");

  auto* sweep_cmd =
      app.add_subcommand("sweep", "full accuracy-vs-M comparison");
  std::string sweep_out = "sweep_out";
  sweep_cmd->add_option("--out-dir", sweep_out, "output directory");

  auto* timing_cmd = app.add_subcommand("timing", "IA time-budget calculator");
  int timing_m = 0;
  double timing_speed = 0.0;
  double timing_carrier = 0.0;
  int timing_comparators = 0;
  double timing_period = 0.0;
  auto* tm = timing_cmd->add_option("--m", timing_m, "beams swept");
  auto* tv = timing_cmd->add_option("--v", timing_speed, "receiver speed m/s");
  auto* tf = timing_cmd->add_option("--fc", timing_carrier, "carrier Hz");
  auto* tc = timing_cmd->add_option("--comparators", timing_comparators,
                                    "comparator count (1 or 2)");
  auto* tt = timing_cmd->add_option("--T", timing_period,
                                    "comparator period, microseconds");

  auto* pattern_cmd =
      app.add_subcommand("export-pattern", "write the beam pattern table");
  std::string pattern_out = "pattern.txt";
  pattern_cmd->add_option("--out", pattern_out, "output text file");

  CLI11_PARSE(app, argc, argv);

  if (*seed_opt) global.seed = seed_value;
  if (*samples_opt) global.samples = samples_value;

  try {
    if (gen->parsed()) {
      return cmd_gen_data(global, gen_condition, gen_out, gen_scene_out,
                          gen_text_out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(global, train_dataset, train_m, train_out,
                       train_history);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_checkpoint, eval_dataset, eval_predictions);
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep(global, sweep_out);
    }
    if (timing_cmd->parsed()) {
      return cmd_timing(global, *tm ? std::optional<int>(timing_m) : std::nullopt,
                        *tv ? std::optional<double>(timing_speed) : std::nullopt,
                        *tf ? std::optional<double>(timing_carrier) : std::nullopt,
                        *tc ? std::optional<int>(timing_comparators) : std::nullopt,
                        *tt ? std::optional<double>(timing_period) : std::nullopt);
    }
    if (pattern_cmd->parsed()) {
      return cmd_export_pattern(global, pattern_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
