#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "beamlab/antenna.hpp"
#include "beamlab/channel.hpp"
#include "beamlab/dataset.hpp"
#include "beamlab/nn.hpp"
#include "beamlab/timing.hpp"

namespace beamlab {

inline constexpr const char* kVersionString = "0.1.0";

/// Everything one accuracy-vs-M comparison needs. Seeds for the scene,
/// shadowing, weight init, and shuffling all derive from master_seed through
/// labeled substreams, so adding an m value or a condition never perturbs
/// the randomness of the other cells.
struct ExperimentConfig {
  std::size_t sample_count = 100000;  ///< desk scale; paper scale is 1e6
  std::vector<Condition> conditions = {Condition::Los, Condition::Nlos};
  std::vector<int> m_values = {2, 4, 6, 8, 12, 24};

  double half_side_m = 25.0;
  double exclusion_radius_m = 1.0;
  ArrayConfig array;
  LinkBudget budget;
  double carrier_hz = 28e9;
  double ref_distance_m = 1.0;
  double los_ple = 1.9;
  double los_shadow_sigma_db = 1.1;
  double nlos_ple = 4.5;
  double nlos_shadow_sigma_db = 10.0;
  SplitSpec split;
  TrainConfig train;
  TimingConfig timing;
  /// Comparison mode: normalize each row by its own maximum instead of the
  /// training-split maximum (erases per-link scale information).
  bool per_sample_normalization = false;
  std::uint64_t master_seed = 1;

  void validate() const;
  ChannelParams channel_for(Condition condition) const;
};

struct CellResult {
  Condition condition = Condition::Los;
  int m = 0;
  double deepia_accuracy_pct = 0.0;
  double cbs_accuracy_pct = 0.0;
  /// 100 * fraction of test receivers whose true beam is in the swept
  /// subset — the structural ceiling no subset-restricted argmax can exceed.
  double subset_ceiling_pct = 0.0;
  int train_epochs = 0;
  double sweep_ms = 0.0;
  double train_seconds = 0.0;
  TrainHistory history;
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::uint64_t master_seed = 0;
  std::uint64_t config_hash = 0;
  std::string version = kVersionString;
  std::size_t sample_count = 0;

  const CellResult& cell(Condition condition, int m) const;
};

std::uint64_t experiment_config_hash(const ExperimentConfig& cfg);

using Logger = std::function<void(const std::string&)>;

/// Full accuracy-vs-M comparison: one scene per master seed, one dataset per
/// channel condition reused across every m, CBS and the classifier evaluated
/// on identical test rows. Deterministic end to end.
ExperimentReport run(const ExperimentConfig& cfg, const Logger& log = {});

/// condition,m,method rows plus a provenance comment block.
void write_report_csv(const std::filesystem::path& path,
                      const ExperimentReport& report);

/// Long-form accuracy curves for plotting.
void write_curves_csv(const std::filesystem::path& path,
                      const ExperimentReport& report);

}  // namespace beamlab
