#include "beamlab/experiment.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "beamlab/ia.hpp"
#include "beamlab/rng.hpp"
#include "beamlab/scene.hpp"

namespace beamlab {

void ExperimentConfig::validate() const {
  if (sample_count < 100) {
    throw std::invalid_argument("experiment: sample_count must be >= 100");
  }
  if (conditions.empty()) {
    throw std::invalid_argument("experiment: no channel conditions selected");
  }
  if (m_values.empty()) {
    throw std::invalid_argument("experiment: no subset sizes selected");
  }
  for (int m : m_values) {
    BeamSubset::uniform(m);     // rejects unsupported sizes
    (void)train.epochs_for(m);  // rejects sizes without an epoch count
  }
  array.validate();
  split.validate();
  channel_for(Condition::Los).validate();
  channel_for(Condition::Nlos).validate();
  SceneConfig{sample_count, half_side_m, exclusion_radius_m, 0}.validate();
}

ChannelParams ExperimentConfig::channel_for(Condition condition) const {
  ChannelParams params;
  params.condition = condition;
  params.carrier_hz = carrier_hz;
  params.ref_distance_m = ref_distance_m;
  if (condition == Condition::Los) {
    params.ple = los_ple;
    params.shadow_sigma_db = los_shadow_sigma_db;
  } else {
    params.ple = nlos_ple;
    params.shadow_sigma_db = nlos_shadow_sigma_db;
  }
  return params;
}

const CellResult& ExperimentReport::cell(Condition condition, int m) const {
  for (const CellResult& c : cells) {
    if (c.condition == condition && c.m == m) return c;
  }
  throw std::out_of_range("report: no cell for " + to_string(condition) +
                          " m=" + std::to_string(m));
}

std::uint64_t experiment_config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = rng::hash_label("beamlab-experiment-config-v1");
  auto fold = [&h](std::uint64_t v) { h = rng::mix(h, v); };
  auto fold_f = [&fold](double v) { fold(std::bit_cast<std::uint64_t>(v)); };
  fold(cfg.sample_count);
  for (Condition c : cfg.conditions) fold(c == Condition::Los ? 0 : 1);
  for (int m : cfg.m_values) fold(static_cast<std::uint64_t>(m));
  fold_f(cfg.half_side_m);
  fold_f(cfg.exclusion_radius_m);
  fold(static_cast<std::uint64_t>(cfg.array.elements_x));
  fold(static_cast<std::uint64_t>(cfg.array.elements_y));
  fold_f(cfg.array.element_spacing_wl);
  fold_f(cfg.array.endfire_spacing_wl);
  fold_f(cfg.array.boresight_elevation_deg);
  fold_f(cfg.array.backlobe_penalty_db);
  fold_f(cfg.array.table_resolution_deg);
  fold_f(cfg.budget.tx_power_dbm);
  fold_f(cfg.budget.rx_gain_dbi);
  fold_f(cfg.carrier_hz);
  fold_f(cfg.ref_distance_m);
  fold_f(cfg.los_ple);
  fold_f(cfg.los_shadow_sigma_db);
  fold_f(cfg.nlos_ple);
  fold_f(cfg.nlos_shadow_sigma_db);
  fold_f(cfg.split.train_frac);
  fold_f(cfg.split.val_frac);
  fold_f(cfg.split.test_frac);
  fold_f(cfg.train.learning_rate);
  fold(static_cast<std::uint64_t>(cfg.train.batch_size));
  for (const auto& [m, epochs] : cfg.train.epochs_by_m) {
    fold(static_cast<std::uint64_t>(m));
    fold(static_cast<std::uint64_t>(epochs));
  }
  fold_f(cfg.train.adam_beta1);
  fold_f(cfg.train.adam_beta2);
  fold_f(cfg.train.adam_eps);
  fold_f(cfg.train.bn_momentum);
  fold_f(cfg.train.bn_epsilon);
  fold(cfg.train.batchnorm_after_activation ? 1 : 0);
  fold(cfg.per_sample_normalization ? 1 : 0);
  fold(cfg.master_seed);
  return h;
}

namespace {

CellResult evaluate_cell(const ExperimentConfig& cfg, const Dataset& ds,
                         const SplitIndices& splits, Condition condition,
                         int m, const Logger& log) {
  const BeamSubset subset = BeamSubset::uniform(m);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed =
      rng::substream(cfg.master_seed, "train-" + to_string(condition), m)
          .next_u64();

  const auto train_start = std::chrono::steady_clock::now();
  auto [model, history] = train(ds, splits, subset, train_cfg);
  const double train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    train_start)
          .count();

  const std::vector<double> features = select_features(ds, subset);
  const auto width = static_cast<std::size_t>(m);

  CellResult cell;
  cell.condition = condition;
  cell.m = m;
  cell.train_epochs = train_cfg.epochs_for(m);
  cell.sweep_ms = sweep_time_ms(m, cfg.timing);
  cell.train_seconds = train_seconds;
  cell.history = std::move(history);

  std::size_t deepia_hits = 0;
  std::size_t cbs_hits = 0;
  std::size_t in_subset = 0;
  constexpr std::size_t kChunk = 8192;
  Matrix<double> batch;
  for (std::size_t begin = 0; begin < splits.test.size(); begin += kChunk) {
    const std::size_t count = std::min(kChunk, splits.test.size() - begin);
    batch = Matrix<double>(count, width);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t row = splits.test[begin + i];
      const double* src = features.data() + row * width;
      std::copy(src, src + width, batch.row(i));
    }
    const std::vector<BeamLabel> predictions = predict_batch(model, batch);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t row = splits.test[begin + i];
      const int truth = ds.labels[row];
      if (predictions[i].index == truth) ++deepia_hits;
      if (cbs_predict(batch.row_span(i), subset).index == truth) ++cbs_hits;
      if (std::find(subset.indices.begin(), subset.indices.end(), truth) !=
          subset.indices.end()) {
        ++in_subset;
      }
    }
  }
  const auto test_count = static_cast<double>(splits.test.size());
  cell.deepia_accuracy_pct = 100.0 * deepia_hits / test_count;
  cell.cbs_accuracy_pct = 100.0 * cbs_hits / test_count;
  cell.subset_ceiling_pct = 100.0 * in_subset / test_count;

  if (log) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "%s m=%2d: DeepIA %.2f%%  CBS %.2f%%  ceiling %.2f%%  "
                  "(train %.0f s)",
                  to_string(condition).c_str(), m, cell.deepia_accuracy_pct,
                  cell.cbs_accuracy_pct, cell.subset_ceiling_pct,
                  cell.train_seconds);
    log(msg);
  }
  return cell;
}

}  // namespace

ExperimentReport run(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  ExperimentReport report;
  report.master_seed = cfg.master_seed;
  report.config_hash = experiment_config_hash(cfg);
  report.sample_count = cfg.sample_count;

  SceneConfig scene_cfg{cfg.sample_count, cfg.half_side_m,
                        cfg.exclusion_radius_m,
                        rng::substream(cfg.master_seed, "scene").next_u64()};
  if (log) log("sampling " + std::to_string(cfg.sample_count) + " receivers");
  const std::vector<Receiver> receivers = sample_receivers(scene_cfg);
  const PatternTable pattern(cfg.array);

  for (Condition condition : cfg.conditions) {
    SplitSpec split_spec = cfg.split;
    split_spec.seed = rng::substream(cfg.master_seed, "split").next_u64();
    const std::uint64_t data_seed =
        rng::substream(cfg.master_seed, "shadow-" + to_string(condition))
            .next_u64();
    if (log) log("generating " + to_string(condition) + " dataset");
    const Dataset ds =
        generate(receivers, pattern, cfg.channel_for(condition), cfg.budget,
                 data_seed, split_spec, cfg.per_sample_normalization);
    const SplitIndices splits = split(ds);
    for (int m : cfg.m_values) {
      report.cells.push_back(
          evaluate_cell(cfg, ds, splits, condition, m, log));
    }
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path,
                      const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("report: cannot open " + path.string());
  }
  char line[256];
  out << "# beamlab report v" << report.version << '\n';
  std::snprintf(line, sizeof(line), "# master_seed=%llu config_hash=%016llx\n",
                static_cast<unsigned long long>(report.master_seed),
                static_cast<unsigned long long>(report.config_hash));
  out << line;
  out << "# sample_count=" << report.sample_count << '\n';
  out << "condition,m,method,accuracy_pct,subset_ceiling_pct,train_epochs,"
         "sweep_time_ms\n";
  for (const CellResult& cell : report.cells) {
    for (Method method : {Method::DeepIa, Method::Cbs}) {
      std::snprintf(line, sizeof(line), "%s,%d,%s,%.4f,%.4f,%d,%.6g\n",
                    to_string(cell.condition).c_str(), cell.m,
                    to_string(method).c_str(),
                    method == Method::DeepIa ? cell.deepia_accuracy_pct
                                             : cell.cbs_accuracy_pct,
                    cell.subset_ceiling_pct, cell.train_epochs, cell.sweep_ms);
      out << line;
    }
  }
}

void write_curves_csv(const std::filesystem::path& path,
                      const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("report: cannot open " + path.string());
  }
  out << "condition,method,m,accuracy_pct\n";
  char line[128];
  for (Method method : {Method::DeepIa, Method::Cbs}) {
    for (const CellResult& cell : report.cells) {
      std::snprintf(line, sizeof(line), "%s,%s,%d,%.4f\n",
                    to_string(cell.condition).c_str(),
                    to_string(method).c_str(), cell.m,
                    method == Method::DeepIa ? cell.deepia_accuracy_pct
                                             : cell.cbs_accuracy_pct);
      out << line;
    }
  }
}

}  // namespace beamlab
