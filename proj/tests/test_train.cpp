#include <chrono>
#include <filesystem>
#include <fstream>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <doctest.h>

#include "beamlab/dataset.hpp"
#include "beamlab/nn.hpp"

using namespace beamlab;

namespace {

Dataset tiny_dataset(std::uint64_t seed, std::size_t count = 3000) {
  SceneConfig scene_cfg{count, 25.0, 1.0, seed};
  return generate(sample_receivers(scene_cfg), PatternTable{ArrayConfig{}},
                  ChannelParams::los(), LinkBudget{}, seed + 1,
                  SplitSpec{0.65, 0.15, 0.20, seed + 2});
}

TrainConfig quick_config(std::uint64_t seed, int epochs) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.batch_size = 256;
  for (auto& [m, e] : cfg.epochs_by_m) e = epochs;
  return cfg;
}

bool models_identical(const Model<double>& a, const Model<double>& b) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].weight != b.layers[l].weight) return false;
    if (a.layers[l].bias != b.layers[l].bias) return false;
  }
  for (std::size_t l = 0; l < a.norms.size(); ++l) {
    if (a.norms[l].scale != b.norms[l].scale) return false;
    if (a.norms[l].shift != b.norms[l].shift) return false;
    if (a.norms[l].running_mean != b.norms[l].running_mean) return false;
    if (a.norms[l].running_var != b.norms[l].running_var) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("history length equals the configured epoch count") {
  const Dataset ds = tiny_dataset(101, 1500);
  const auto [model, history] =
      train(ds, split(ds), BeamSubset::uniform(6), quick_config(1, 4));
  CHECK(history.train_loss.size() == 4);
  CHECK(history.val_loss.size() == 4);
  CHECK(history.val_accuracy.size() == 4);
  CHECK(model.subset_indices == BeamSubset::uniform(6).indices);
  CHECK(model.norm_max_linear == ds.norm_max_linear);
}

TEST_CASE("training is bit-exact across repeated runs") {
  const Dataset ds = tiny_dataset(103, 2000);
  const SplitIndices splits = split(ds);
  const BeamSubset subset = BeamSubset::uniform(24);
  const TrainConfig cfg = quick_config(7, 2);
  const auto [model_a, history_a] = train(ds, splits, subset, cfg);
  const auto [model_b, history_b] = train(ds, splits, subset, cfg);
  CHECK(models_identical(model_a, model_b));
  CHECK(history_a.train_loss == history_b.train_loss);
  CHECK(history_a.val_loss == history_b.val_loss);
  CHECK(history_a.val_accuracy == history_b.val_accuracy);

  TrainConfig other = cfg;
  other.seed = 8;
  const auto [model_c, history_c] = train(ds, splits, subset, other);
  CHECK(!models_identical(model_a, model_c));
}

#ifdef _OPENMP
TEST_CASE("results do not depend on the thread count") {
  const Dataset ds = tiny_dataset(107, 1500);
  const SplitIndices splits = split(ds);
  const BeamSubset subset = BeamSubset::uniform(12);
  const TrainConfig cfg = quick_config(11, 2);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto [model_single, history_single] = train(ds, splits, subset, cfg);
  omp_set_num_threads(2);
  const auto [model_multi, history_multi] = train(ds, splits, subset, cfg);
  omp_set_num_threads(saved);
  CHECK(models_identical(model_single, model_multi));
  CHECK(history_single.train_loss == history_multi.train_loss);
}
#endif

TEST_CASE("loss decreases on an easy noise-free problem") {
  SceneConfig scene_cfg{3000, 25.0, 1.0, 109};
  ChannelParams channel = ChannelParams::los();
  channel.shadow_sigma_db = 0.0;
  const Dataset ds =
      generate(sample_receivers(scene_cfg), PatternTable{ArrayConfig{}},
               channel, LinkBudget{}, 110, SplitSpec{0.65, 0.15, 0.20, 111});
  const auto [model, history] =
      train(ds, split(ds), BeamSubset::uniform(24), quick_config(13, 6));
  CHECK(history.train_loss.back() < history.train_loss.front());
  CHECK(history.val_accuracy.back() > 0.5);
}

TEST_CASE("training time grows roughly linearly with the epoch count") {
  const Dataset ds = tiny_dataset(113, 2500);
  const SplitIndices splits = split(ds);
  const BeamSubset subset = BeamSubset::uniform(24);
  auto timed = [&](int epochs) {
    const TrainConfig cfg = quick_config(17, epochs);
    const auto t0 = std::chrono::steady_clock::now();
    train(ds, splits, subset, cfg);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
  };
  timed(1);  // warm caches and the allocator
  const double one = timed(1);
  const double five = timed(5);
  // Coarse smoke bound, not a benchmark: 5 epochs should cost noticeably
  // more than 1 and no more than ~3x the proportional amount.
  CHECK(five > 2.0 * one);
  CHECK(five < 15.0 * one);
}

TEST_CASE("history CSV has one row per epoch") {
  TrainHistory history;
  history.train_loss = {3.1, 2.0, 1.2};
  history.val_loss = {3.0, 2.1, 1.4};
  history.val_accuracy = {0.1, 0.4, 0.6};
  const auto path =
      std::filesystem::temp_directory_path() / "bl_history.csv";
  save_history_csv(path, history);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train_loss,val_loss,val_acc");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
