#include "beamlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "beamlab/io.hpp"
#include "beamlab/rng.hpp"

namespace beamlab {
namespace {

constexpr char kMagic[5] = "BLDS";
constexpr std::uint32_t kVersion = 1;

}  // namespace

BeamSubset BeamSubset::uniform(int m) {
  switch (m) {
    case 2:
    case 4:
    case 6:
    case 8:
    case 12:
    case 24:
      break;
    default:
      throw std::invalid_argument(
          "beam subset: m must be one of {2, 4, 6, 8, 12, 24}");
  }
  BeamSubset subset;
  subset.m = m;
  const int stride = kNumBeams / m;
  for (int i = 0; i < m; ++i) {
    subset.indices.push_back(1 + i * stride);
  }
  return subset;
}

void SplitSpec::validate() const {
  if (!(train_frac >= 0.0) || !(val_frac >= 0.0) || !(test_frac >= 0.0)) {
    throw std::invalid_argument("split: fractions must be nonnegative");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
}

SplitIndices split_indices(std::size_t sample_count, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto stream = rng::substream(spec.seed, "split");
  for (std::size_t i = sample_count; i > 1; --i) {
    std::swap(order[i - 1], order[stream.next_below(i)]);
  }
  const auto n_train =
      static_cast<std::size_t>(std::llround(spec.train_frac * sample_count));
  const auto n_val =
      static_cast<std::size_t>(std::llround(spec.val_frac * sample_count));
  if (n_train + n_val > sample_count) {
    throw std::invalid_argument("split: rounding exceeded the sample count");
  }
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

Dataset generate(const std::vector<Receiver>& receivers,
                 const PatternTable& pattern, const ChannelParams& channel,
                 const LinkBudget& budget, std::uint64_t seed,
                 const SplitSpec& split_spec, bool per_sample_normalization) {
  channel.validate();
  split_spec.validate();
  const std::size_t count = receivers.size();
  Dataset ds;
  ds.channel = channel;
  ds.budget = budget;
  ds.seed = seed;
  ds.split_spec = split_spec;
  ds.features.resize(count * kNumBeams);
  ds.labels.resize(count);

  for (std::size_t k = 0; k < count; ++k) {
    const Receiver& r = receivers[k];
    ds.labels[k] = static_cast<std::uint8_t>(true_beam(r.azimuth_int).index);
    for (int i = 1; i <= kNumBeams; ++i) {
      auto shadows =
          rng::substream(seed, "shadow", k * kNumBeams + (i - 1));
      const double x = channel.shadow_sigma_db * shadows.next_gaussian();
      const double dbm = rss_dbm(pattern, r, i, channel, budget, x);
      ds.features[k * kNumBeams + (i - 1)] = dbm_to_linear_mw(dbm);
    }
  }

  if (per_sample_normalization) {
    for (std::size_t k = 0; k < count; ++k) {
      double* row = ds.features.data() + k * kNumBeams;
      double row_max = 0.0;
      for (int i = 0; i < kNumBeams; ++i) row_max = std::max(row_max, row[i]);
      if (!(row_max > 0.0)) {
        throw std::runtime_error("dataset: row has no positive RSS");
      }
      for (int i = 0; i < kNumBeams; ++i) {
        row[i] = std::min(row[i] / row_max, 1.0);
      }
    }
    ds.norm_max_linear = 1.0;
    return ds;
  }

  // Normalization constant comes from the training rows only; validation and
  // test rows never leak into it.
  const SplitIndices idx = split_indices(count, split_spec);
  double max_linear = 0.0;
  for (std::size_t row : idx.train) {
    for (int i = 0; i < kNumBeams; ++i) {
      max_linear = std::max(max_linear, ds.features[row * kNumBeams + i]);
    }
  }
  if (!(max_linear > 0.0)) {
    throw std::runtime_error("dataset: training split has no positive RSS");
  }
  ds.norm_max_linear = max_linear;
  for (double& f : ds.features) {
    f = std::min(f / max_linear, 1.0);
  }
  return ds;
}

SplitIndices split(const Dataset& ds) {
  return split_indices(ds.sample_count(), ds.split_spec);
}

std::vector<double> select_features(const Dataset& ds,
                                    const BeamSubset& subset) {
  if (subset.indices.empty() ||
      subset.m != static_cast<int>(subset.indices.size())) {
    throw std::invalid_argument("select_features: malformed subset");
  }
  for (int beam : subset.indices) {
    if (beam < 1 || beam > ds.n_beams) {
      throw std::out_of_range("select_features: beam index out of range");
    }
  }
  const std::size_t count = ds.sample_count();
  std::vector<double> out(count * subset.indices.size());
  for (std::size_t k = 0; k < count; ++k) {
    const auto row = ds.row(k);
    for (std::size_t j = 0; j < subset.indices.size(); ++j) {
      out[k * subset.indices.size() + j] = row[subset.indices[j] - 1];
    }
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("dataset: cannot open " + path.string());
  }
  io::write_magic(out, kMagic);
  io::write_u32(out, kVersion);
  io::write_u64(out, ds.sample_count());
  io::write_u32(out, static_cast<std::uint32_t>(ds.n_beams));
  io::write_u8(out, ds.channel.condition == Condition::Los ? 0 : 1);
  io::write_f64(out, ds.channel.ple);
  io::write_f64(out, ds.channel.shadow_sigma_db);
  io::write_f64(out, ds.channel.carrier_hz);
  io::write_f64(out, ds.channel.ref_distance_m);
  io::write_f64(out, ds.budget.tx_power_dbm);
  io::write_f64(out, ds.budget.rx_gain_dbi);
  io::write_u64(out, ds.seed);
  io::write_f64(out, ds.split_spec.train_frac);
  io::write_f64(out, ds.split_spec.val_frac);
  io::write_f64(out, ds.split_spec.test_frac);
  io::write_u64(out, ds.split_spec.seed);
  io::write_f64(out, ds.norm_max_linear);
  for (double f : ds.features) {
    io::write_f32(out, static_cast<float>(f));
  }
  io::write_bytes(out, ds.labels.data(), ds.labels.size());
  if (!out) {
    throw std::runtime_error("dataset: write failed for " + path.string());
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("dataset: cannot open " + path.string());
  }
  io::expect_magic(in, kMagic, "dataset");
  const std::uint32_t version = io::read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("dataset: unsupported version " +
                             std::to_string(version));
  }
  Dataset ds;
  const std::uint64_t count = io::read_u64(in);
  ds.n_beams = static_cast<int>(io::read_u32(in));
  if (ds.n_beams != kNumBeams) {
    throw std::runtime_error("dataset: unexpected beam count");
  }
  ds.channel.condition = io::read_u8(in) == 0 ? Condition::Los : Condition::Nlos;
  ds.channel.ple = io::read_f64(in);
  ds.channel.shadow_sigma_db = io::read_f64(in);
  ds.channel.carrier_hz = io::read_f64(in);
  ds.channel.ref_distance_m = io::read_f64(in);
  ds.budget.tx_power_dbm = io::read_f64(in);
  ds.budget.rx_gain_dbi = io::read_f64(in);
  ds.seed = io::read_u64(in);
  ds.split_spec.train_frac = io::read_f64(in);
  ds.split_spec.val_frac = io::read_f64(in);
  ds.split_spec.test_frac = io::read_f64(in);
  ds.split_spec.seed = io::read_u64(in);
  ds.norm_max_linear = io::read_f64(in);
  ds.features.resize(count * static_cast<std::size_t>(ds.n_beams));
  for (double& f : ds.features) {
    f = static_cast<double>(io::read_f32(in));
  }
  ds.labels.resize(count);
  io::read_bytes(in, ds.labels.data(), ds.labels.size());
  for (std::uint8_t label : ds.labels) {
    if (label < 1 || label > kNumBeams) {
      throw std::runtime_error("dataset: label out of range");
    }
  }
  return ds;
}

void export_dataset_text(const std::filesystem::path& path, const Dataset& ds,
                         std::size_t max_rows) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("dataset: cannot open " + path.string());
  }
  out << "# receiver";
  for (int i = 1; i <= ds.n_beams; ++i) out << " beam_" << i;
  out << " true_beam\n";
  const std::size_t rows =
      max_rows == 0 ? ds.sample_count() : std::min(max_rows, ds.sample_count());
  char cell[32];
  for (std::size_t k = 0; k < rows; ++k) {
    out << k;
    for (double f : ds.row(k)) {
      std::snprintf(cell, sizeof(cell), " %.9g", f);
      out << cell;
    }
    out << ' ' << static_cast<int>(ds.labels[k]) << '\n';
  }
  if (!out) {
    throw std::runtime_error("dataset: write failed for " + path.string());
  }
}

}  // namespace beamlab
