#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "beamlab/antenna.hpp"
#include "beamlab/channel.hpp"
#include "beamlab/scene.hpp"

namespace beamlab {

/// Evenly spaced subset of the 24 beams actually swept: stride 24/m starting
/// at beam 1, e.g. m = 4 -> {1, 7, 13, 19}. Only divisors of 24 from
/// {2, 4, 6, 8, 12, 24} are meaningful subset sizes.
struct BeamSubset {
  int m = 0;
  std::vector<int> indices;

  static BeamSubset uniform(int m);

  friend bool operator==(const BeamSubset&, const BeamSubset&) = default;
};

struct SplitSpec {
  double train_frac = 0.65;
  double val_frac = 0.15;
  double test_frac = 0.20;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Disjoint row-index sets produced by a seeded shuffle; a pure function of
/// (sample_count, spec), so any consumer can re-derive the same partition.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(std::size_t sample_count, const SplitSpec& spec);

/// Per-receiver RSS over all 24 beams, in linear milliwatts normalized by the
/// maximum over the training split (stored as norm_max_linear). Values are
/// clamped into [0, 1]; only validation/test rows can ever hit the clamp,
/// and only when they exceed everything seen in training.
struct Dataset {
  int n_beams = kNumBeams;
  std::vector<double> features;  ///< sample_count x n_beams, row-major
  std::vector<std::uint8_t> labels;
  double norm_max_linear = 1.0;
  ChannelParams channel;
  LinkBudget budget;
  std::uint64_t seed = 0;
  SplitSpec split_spec;

  std::size_t sample_count() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(n_beams),
            static_cast<std::size_t>(n_beams)};
  }
};

/// Synthesizes the full 24-beam RSS matrix for a scene. Shadow fading is
/// drawn independently per (receiver, beam) measurement from a substream
/// keyed by (seed, receiver, beam); see the channel docs for why
/// per-measurement draws matter under max-normalization. Subsetting to M
/// beams happens later, so one dataset serves every subset size.
///
/// per_sample_normalization divides each row by its own maximum instead of
/// the training-split maximum. That erases per-link scale information (every
/// row's best beam reads exactly 1.0), so it exists for comparison runs
/// only; norm_max_linear is stored as 1 in that mode.
Dataset generate(const std::vector<Receiver>& receivers,
                 const PatternTable& pattern, const ChannelParams& channel,
                 const LinkBudget& budget, std::uint64_t seed,
                 const SplitSpec& split_spec,
                 bool per_sample_normalization = false);

SplitIndices split(const Dataset& ds);

/// Column projection onto the subset's beams, order preserving:
/// sample_count x subset.m, row-major.
std::vector<double> select_features(const Dataset& ds,
                                    const BeamSubset& subset);

/// Versioned binary container (documented in the README): little-endian
/// header, float32 features row-major, uint8 labels. Bit-identical for
/// identical inputs.
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

/// Lossy text view (receiver, per-beam normalized RSS, true beam).
void export_dataset_text(const std::filesystem::path& path, const Dataset& ds,
                         std::size_t max_rows = 0);

}  // namespace beamlab
