#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "beamlab/dataset.hpp"
#include "beamlab/rng.hpp"

using namespace beamlab;
namespace fs = std::filesystem;

namespace {

const PatternTable& shared_table() {
  static const PatternTable table{ArrayConfig{}};
  return table;
}

Dataset small_dataset(std::uint64_t seed, double sigma = 1.1,
                      std::size_t count = 2000) {
  SceneConfig scene_cfg{count, 25.0, 1.0, seed};
  ChannelParams channel = ChannelParams::los();
  channel.shadow_sigma_db = sigma;
  return generate(sample_receivers(scene_cfg), shared_table(), channel,
                  LinkBudget{}, seed + 1, SplitSpec{0.65, 0.15, 0.20, seed + 2});
}

std::vector<char> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Angular law of positions uniform over a square: within each 45-degree
// octant the density is sec^2 of the angle to the nearest edge normal,
// divided by 8 (it doubles at the diagonals). Exact sector masses follow by
// piecewise tan integration; the angle-independent exclusion disk cancels.
double square_angle_mass(double lo_deg, double hi_deg) {
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  double mass = 0.0;
  double a = lo_deg;
  while (a < hi_deg - 1e-12) {
    const auto block = static_cast<long>(std::floor(a / 45.0 + 1e-12));
    const double block_end = 45.0 * (block + 1);
    const double b = std::min(hi_deg, block_end);
    const bool ascending = ((block % 2) + 2) % 2 == 0;
    const double u = ascending ? a - 45.0 * block : block_end - b;
    const double v = ascending ? b - 45.0 * block : block_end - a;
    mass += (std::tan(v * kDegToRad) - std::tan(u * kDegToRad)) / 8.0;
    a = b;
  }
  return mass;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("uniform subsets are evenly spaced from beam 1") {
  CHECK(BeamSubset::uniform(4).indices == std::vector<int>{1, 7, 13, 19});
  CHECK(BeamSubset::uniform(6).indices ==
        std::vector<int>{1, 5, 9, 13, 17, 21});
  CHECK(BeamSubset::uniform(2).indices == std::vector<int>{1, 13});
  std::vector<int> full(24);
  for (int i = 0; i < 24; ++i) full[i] = i + 1;
  CHECK(BeamSubset::uniform(24).indices == full);
}

TEST_CASE("unsupported subset sizes are rejected") {
  CHECK_THROWS_AS(BeamSubset::uniform(5), std::invalid_argument);
  CHECK_THROWS_AS(BeamSubset::uniform(3), std::invalid_argument);
  CHECK_THROWS_AS(BeamSubset::uniform(0), std::invalid_argument);
}

TEST_CASE("split of 100 samples is 65/15/20") {
  const SplitIndices idx = split_indices(100, SplitSpec{0.65, 0.15, 0.20, 9});
  CHECK(idx.train.size() == 65);
  CHECK(idx.val.size() == 15);
  CHECK(idx.test.size() == 20);
}

TEST_CASE("splits partition the index range") {
  const SplitIndices idx = split_indices(997, SplitSpec{0.65, 0.15, 0.20, 5});
  std::vector<bool> seen(997, false);
  for (const auto* part : {&idx.train, &idx.val, &idx.test}) {
    for (std::size_t i : *part) {
      REQUIRE(i < 997);
      REQUIRE(!seen[i]);
      seen[i] = true;
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
}

TEST_CASE("split is a pure function of count and spec") {
  const SplitSpec spec{0.65, 0.15, 0.20, 31};
  CHECK(split_indices(5000, spec).train == split_indices(5000, spec).train);
  SplitSpec other = spec;
  other.seed = 32;
  CHECK(split_indices(5000, spec).train != split_indices(5000, other).train);
}

TEST_CASE("split fractions must sum to one") {
  CHECK_THROWS_AS(split_indices(10, SplitSpec{0.6, 0.1, 0.2, 0}),
                  std::invalid_argument);
}

TEST_CASE("features are normalized into [0, 1] with the max in training") {
  const Dataset ds = small_dataset(17);
  double max_seen = 0.0;
  for (double f : ds.features) {
    REQUIRE(f >= 0.0);
    REQUIRE(f <= 1.0);
    max_seen = std::max(max_seen, f);
  }
  CHECK(max_seen == 1.0);
  // The exact 1.0 must appear in a training row.
  const SplitIndices idx = split(ds);
  bool in_train = false;
  for (std::size_t row : idx.train) {
    for (double f : ds.row(row)) {
      if (f == 1.0) in_train = true;
    }
  }
  CHECK(in_train);
}

TEST_CASE("de-normalizing training rows recovers linear RSS") {
  const std::uint64_t seed = 23;
  SceneConfig scene_cfg{1500, 25.0, 1.0, seed};
  const auto receivers = sample_receivers(scene_cfg);
  const ChannelParams channel = ChannelParams::los();
  const SplitSpec spec{0.65, 0.15, 0.20, seed};
  const Dataset ds = generate(receivers, shared_table(), channel, LinkBudget{},
                              seed, spec);
  // Oracle: recompute the linear RSS directly from the channel model with
  // the same substream draws.
  const SplitIndices idx = split(ds);
  for (std::size_t row : idx.train) {
    for (int beam = 1; beam <= kNumBeams; ++beam) {
      auto shadows = rng::substream(seed, "shadow",
                                    row * kNumBeams + (beam - 1));
      const double shadow = channel.shadow_sigma_db * shadows.next_gaussian();
      const double expected = dbm_to_linear_mw(
          rss_dbm(shared_table(), receivers[row], beam, channel, LinkBudget{},
                  shadow));
      const double recovered =
          ds.row(row)[beam - 1] * ds.norm_max_linear;
      REQUIRE(std::abs(recovered - expected) <= 1e-12 * expected);
    }
  }
}

TEST_CASE("with shadowing off the labeled beam has the strongest feature") {
  const Dataset ds = small_dataset(29, 0.0);
  for (std::size_t k = 0; k < ds.sample_count(); ++k) {
    const auto row = ds.row(k);
    const auto best =
        static_cast<int>(std::max_element(row.begin(), row.end()) -
                         row.begin()) + 1;
    REQUIRE(best == static_cast<int>(ds.labels[k]));
  }
}

TEST_CASE("per-sample normalization puts every row's maximum at one") {
  SceneConfig scene_cfg{400, 25.0, 1.0, 97};
  const auto receivers = sample_receivers(scene_cfg);
  const Dataset ds =
      generate(receivers, shared_table(), ChannelParams::nlos(), LinkBudget{},
               98, SplitSpec{0.65, 0.15, 0.20, 99},
               /*per_sample_normalization=*/true);
  CHECK(ds.norm_max_linear == 1.0);
  for (std::size_t k = 0; k < ds.sample_count(); ++k) {
    const auto row = ds.row(k);
    CHECK(*std::max_element(row.begin(), row.end()) == 1.0);
  }
}

TEST_CASE("generation is deterministic") {
  const Dataset a = small_dataset(41);
  const Dataset b = small_dataset(41);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.norm_max_linear == b.norm_max_linear);
}

TEST_CASE("label frequencies follow the square's angular law") {
  SceneConfig scene_cfg{100000, 25.0, 1.0, 57};
  const auto receivers = sample_receivers(scene_cfg);
  std::vector<std::size_t> counts(25, 0);
  for (const Receiver& r : receivers) {
    ++counts[true_beam(r.azimuth_int).index];
  }
  // A beam's label covers the integer angles of its sector, i.e. the
  // continuous range [boresight - 7, boresight + 8) before flooring.
  double mass_total = 0.0;
  for (int beam = 1; beam <= 24; ++beam) {
    const double boresight = 15.0 * (beam - 1);
    const double expected =
        square_angle_mass(boresight - 7.0, boresight + 8.0);
    mass_total += expected;
    const double frac = static_cast<double>(counts[beam]) / receivers.size();
    CAPTURE(beam);
    CHECK(std::abs(frac - expected) < 0.005);
  }
  CHECK(mass_total == doctest::Approx(1.0).epsilon(1e-9));
  // Uniform positions on a square are not uniform in angle: beams toward
  // the diagonals carry nearly twice the mass of beams along the axes.
  CHECK(square_angle_mass(-7.0, 8.0) < 0.034);                 // beam 1
  CHECK(square_angle_mass(38.0, 53.0) > 0.057);                // beam 4
}

TEST_CASE("select_features projects the requested columns in order") {
  const Dataset ds = small_dataset(61, 1.1, 300);
  const BeamSubset subset = BeamSubset::uniform(4);
  const auto projected = select_features(ds, subset);
  REQUIRE(projected.size() == ds.sample_count() * 4);
  for (std::size_t k = 0; k < ds.sample_count(); ++k) {
    const auto row = ds.row(k);
    for (std::size_t j = 0; j < 4; ++j) {
      REQUIRE(projected[k * 4 + j] == row[subset.indices[j] - 1]);
    }
  }
  // The full subset is the identity projection.
  const auto identity = select_features(ds, BeamSubset::uniform(24));
  CHECK(identity == ds.features);
}

TEST_CASE("subsetting commutes with splitting") {
  const Dataset ds = small_dataset(67, 1.1, 500);
  const BeamSubset subset = BeamSubset::uniform(6);
  const SplitIndices idx = split(ds);
  const auto projected = select_features(ds, subset);
  // Project-then-split equals split-then-project, row by row.
  for (std::size_t row : idx.test) {
    const auto full_row = ds.row(row);
    for (std::size_t j = 0; j < subset.indices.size(); ++j) {
      REQUIRE(projected[row * subset.indices.size() + j] ==
              full_row[subset.indices[j] - 1]);
    }
  }
}

TEST_CASE("binary container round trip") {
  const Dataset ds = small_dataset(71, 10.0, 400);
  const auto path = fs::temp_directory_path() / "bl_dataset.blds";
  save_dataset(path, ds);
  const Dataset loaded = load_dataset(path);
  CHECK(loaded.sample_count() == ds.sample_count());
  CHECK(loaded.labels == ds.labels);
  CHECK(loaded.norm_max_linear == ds.norm_max_linear);
  CHECK(loaded.channel.ple == ds.channel.ple);
  CHECK(loaded.channel.shadow_sigma_db == ds.channel.shadow_sigma_db);
  CHECK(loaded.split_spec.seed == ds.split_spec.seed);
  CHECK(loaded.seed == ds.seed);
  // Features survive as float32.
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    REQUIRE(loaded.features[i] ==
            static_cast<double>(static_cast<float>(ds.features[i])));
  }
  std::filesystem::remove(path);
}

TEST_CASE("identical inputs write identical bytes") {
  const auto path_a = fs::temp_directory_path() / "bl_ds_a.blds";
  const auto path_b = fs::temp_directory_path() / "bl_ds_b.blds";
  save_dataset(path_a, small_dataset(73, 1.1, 300));
  save_dataset(path_b, small_dataset(73, 1.1, 300));
  CHECK(file_bytes(path_a) == file_bytes(path_b));
  fs::remove(path_a);
  fs::remove(path_b);
}

TEST_CASE("truncated files are rejected cleanly") {
  const Dataset ds = small_dataset(79, 1.1, 200);
  const auto path = fs::temp_directory_path() / "bl_ds_trunc.blds";
  save_dataset(path, ds);
  const auto bytes = file_bytes(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "not a dataset";
  }
  CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("text export mirrors the feature table") {
  const Dataset ds = small_dataset(83, 1.1, 50);
  const auto path = fs::temp_directory_path() / "bl_ds.txt";
  export_dataset_text(path, ds, 10);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("beam_1") != std::string::npos);
  CHECK(header.find("true_beam") != std::string::npos);
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 10);
  fs::remove(path);
}

}  // TEST_SUITE
