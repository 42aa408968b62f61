#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "beamlab/nn.hpp"
#include "beamlab/rng.hpp"
#include "support/gradcheck.hpp"

using namespace beamlab;
using testsupport::max_gradient_error;
using testsupport::random_batch;
using testsupport::random_labels;
namespace fs = std::filesystem;

TEST_SUITE("nn") {

TEST_CASE("initialization is deterministic and fan-scaled") {
  const Architecture arch = Architecture::for_input(24);
  const auto a = init_model<double>(arch, 5);
  const auto b = init_model<double>(arch, 5);
  REQUIRE(a.layers.size() == 6);
  REQUIRE(a.norms.size() == 5);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weight == b.layers[l].weight);
    // Biases start at zero.
    for (double bias : a.layers[l].bias) REQUIRE(bias == 0.0);
  }
  const auto c = init_model<double>(arch, 6);
  CHECK(a.layers[0].weight != c.layers[0].weight);

  // Sample variance per layer within 10% of the scheme's nominal
  // limit^2 / 3 = 2 / (fan_in + fan_out).
  int fan_in = arch.input_width;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const int fan_out = l < arch.hidden.size() ? arch.hidden[l]
                                               : arch.output_width;
    const auto& w = a.layers[l].weight;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      sum += w.data()[i];
      sum_sq += w.data()[i] * w.data()[i];
    }
    const double mean = sum / w.size();
    const double variance = sum_sq / w.size() - mean * mean;
    const double nominal = 2.0 / (fan_in + fan_out);
    CAPTURE(l);
    CHECK(variance == doctest::Approx(nominal).epsilon(0.10));
    fan_in = fan_out;
  }
}

TEST_CASE("softmax rows are probability vectors") {
  auto model = init_model<double>(Architecture::for_input(6), 11);
  const auto batch = random_batch<double>(64, 6, 3);
  ForwardCache<double> cache;
  const auto probs = forward(model, batch, Mode::Train, &cache);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      REQUIRE(probs(i, j) >= 0.0);
      REQUIRE(probs(i, j) <= 1.0);
      sum += probs(i, j);
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("inference does not mutate the model") {
  auto model = init_model<double>(Architecture::for_input(6), 13);
  const auto batch = random_batch<double>(8, 6, 5);
  const auto first = infer(model, batch);
  const auto second = infer(model, batch);
  CHECK(first == second);
}

TEST_CASE("train mode requires batch statistics") {
  auto model = init_model<double>(Architecture::for_input(6), 13);
  const auto batch = random_batch<double>(1, 6, 5);
  CHECK_THROWS_AS(forward(model, batch, Mode::Train), std::invalid_argument);
  CHECK_NOTHROW(infer(model, batch));  // singleton inference is fine
}

TEST_CASE("width mismatches are rejected") {
  auto model = init_model<double>(Architecture::for_input(6), 13);
  const auto batch = random_batch<double>(8, 8, 5);
  CHECK_THROWS_AS(forward(model, batch, Mode::Train), std::invalid_argument);
  std::vector<double> row(8, 0.1);
  CHECK_THROWS_AS(predict(model, std::span<const double>(row)),
                  std::invalid_argument);
}

TEST_CASE("identical inputs stay identical through the net") {
  auto model = init_model<double>(Architecture::for_input(6), 17);
  Matrix<double> zeros(16, 6);  // all-zero batch, zero biases
  ForwardCache<double> cache;
  const auto probs = forward(model, zeros, Mode::Train, &cache, false);
  for (std::size_t i = 1; i < probs.rows(); ++i) {
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      REQUIRE(probs(i, j) == probs(0, j));
    }
  }
}

TEST_CASE("cross entropy of exact predictions") {
  Matrix<double> probs(2, 24);
  probs(0, 4) = 1.0;   // true class 5 predicted with certainty
  probs(1, 10) = 1.0;  // true class 11
  const std::vector<std::uint8_t> labels{5, 11};
  CHECK(cross_entropy_loss(probs, labels) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cross entropy of uniform predictions is log 24") {
  Matrix<double> probs(3, 24);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    probs.data()[i] = 1.0 / 24.0;
  }
  const std::vector<std::uint8_t> labels{1, 12, 24};
  CHECK(cross_entropy_loss(probs, labels) ==
        doctest::Approx(std::log(24.0)).epsilon(1e-12));
}

TEST_CASE("loss is nonnegative and floors the log argument") {
  Matrix<double> probs(1, 24);
  probs(0, 0) = 1.0;  // true class 2 has probability zero
  const std::vector<std::uint8_t> labels{2};
  const double loss = cross_entropy_loss(probs, labels);
  CHECK(loss >= 0.0);
  CHECK(loss == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("analytic gradients match central differences") {
  // The full Table-I stack in double precision, 32-sample batch, h = 1e-5.
  auto model = init_model<double>(Architecture::for_input(6), 19);
  const auto batch = random_batch<double>(32, 6, 7);
  const auto labels = random_labels(32, 7);
  const double worst = max_gradient_error(model, batch, labels, 1e-5);
  CHECK(worst < 1e-4);
}

TEST_CASE("gradients also match with normalization before activation") {
  Architecture arch = Architecture::for_input(6);
  arch.batchnorm_after_activation = false;
  auto model = init_model<double>(arch, 23);
  const auto batch = random_batch<double>(32, 6, 11);
  const auto labels = random_labels(32, 11);
  const double worst = max_gradient_error(model, batch, labels, 1e-5);
  CHECK(worst < 1e-4);
}

TEST_CASE("float mode gradients within the relaxed tolerance") {
  auto model = init_model<float>(Architecture::for_input(6), 29);
  const auto batch = random_batch<float>(32, 6, 13);
  const auto labels = random_labels(32, 13);
  const double error = testsupport::float_gradient_error(model, batch, labels);
  CHECK(error < 1e-2);
}

TEST_CASE("a zero learning rate leaves parameters untouched") {
  auto model = init_model<double>(Architecture::for_input(6), 31);
  const auto before = model;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  auto adam = make_adam_state(model);
  const auto batch = random_batch<double>(32, 6, 17);
  const auto labels = random_labels(32, 17);
  backward_and_step(model, batch, labels, adam, cfg);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    CHECK(model.layers[l].weight == before.layers[l].weight);
    CHECK(model.layers[l].bias == before.layers[l].bias);
  }
}

TEST_CASE("repeated steps overfit a small batch") {
  auto model = init_model<double>(Architecture::for_input(6), 37);
  TrainConfig cfg;
  auto adam = make_adam_state(model);
  const auto batch = random_batch<double>(64, 6, 19);
  const auto labels = random_labels(64, 19);
  double loss = 0.0;
  for (int step = 0; step < 500; ++step) {
    loss = backward_and_step(model, batch, labels, adam, cfg);
    if (loss < 0.01) break;
  }
  CHECK(loss < 0.01);
}

TEST_CASE("batch statistics after normalization match scale and shift") {
  auto model = init_model<double>(Architecture::for_input(6), 41);
  // The default 1e-5 epsilon deliberately biases the normalized variance by
  // v/(v+eps); drop it to isolate the statistics themselves.
  model.bn_epsilon = 1e-14;
  // Perturb the learnable BN parameters so the check is nontrivial.
  for (auto& bn : model.norms) {
    for (std::size_t j = 0; j < bn.scale.size(); ++j) {
      bn.scale[j] = 1.0 + 0.1 * static_cast<double>(j % 5);
      bn.shift[j] = 0.2 * static_cast<double>(j % 3);
    }
  }
  const auto batch = random_batch<double>(256, 6, 23);
  ForwardCache<double> cache;
  forward(model, batch, Mode::Train, &cache, false);
  std::size_t live_features = 0;
  for (std::size_t l = 0; l < model.norms.size(); ++l) {
    const auto& out = cache.block_out[l];
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t b = 0; b < out.rows(); ++b) {
        sum += out(b, j);
        sum_sq += out(b, j) * out(b, j);
      }
      const double mean = sum / out.rows();
      const double var = sum_sq / out.rows() - mean * mean;
      const double scale = model.norms[l].scale[j];
      const double shift = model.norms[l].shift[j];
      REQUIRE(std::abs(mean - shift) < 1e-6);
      // A constant feature (e.g. a dead ReLU unit) has no variance to
      // restore; normalization maps it to the shift with variance zero.
      const double input_var =
          1.0 / (cache.inv_std[l][j] * cache.inv_std[l][j]) -
          model.bn_epsilon;
      if (input_var < 1e-8) continue;
      ++live_features;
      REQUIRE(std::abs(var - scale * scale) < 1e-4);
    }
  }
  CHECK(live_features > 500);  // the check must not be vacuous
}

TEST_CASE("prediction takes the argmax with ties to the lowest index") {
  auto model = init_model<double>(Architecture::for_input(4), 43);
  // Rig the output layer so the logits are constant: every class ties.
  auto& out_layer = model.layers.back();
  out_layer.weight = Matrix<double>(24, 64);
  std::fill(out_layer.bias.begin(), out_layer.bias.end(), 0.0);
  std::vector<double> row{0.1, 0.2, 0.3, 0.4};
  CHECK(predict(model, std::span<const double>(row)).index == 1);

  // Break the tie in favor of beam 9 only.
  out_layer.bias[8] = 1.0;
  CHECK(predict(model, std::span<const double>(row)).index == 9);
  // Exact tie between beams 3 and 9 resolves to 3.
  out_layer.bias[2] = 1.0;
  CHECK(predict(model, std::span<const double>(row)).index == 3);
}

TEST_CASE("batch prediction equals row-by-row prediction") {
  auto model = init_model<double>(Architecture::for_input(6), 47);
  const auto batch = random_batch<double>(40, 6, 29);
  const auto batched = predict_batch(model, batch);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    REQUIRE(batched[i] == predict(model, batch.row_span(i)));
  }
}

TEST_CASE("checkpoint round trip reproduces the forward pass exactly") {
  auto model = init_model<double>(Architecture::for_input(6), 53);
  model.norm_max_linear = 3.14e-7;
  model.subset_indices = {1, 5, 9, 13, 17, 21};
  // Push some training through so running stats are nontrivial.
  TrainConfig cfg;
  auto adam = make_adam_state(model);
  const auto batch = random_batch<double>(64, 6, 31);
  const auto labels = random_labels(64, 31);
  for (int step = 0; step < 5; ++step) {
    backward_and_step(model, batch, labels, adam, cfg);
  }
  const auto path = fs::temp_directory_path() / "bl_model.blck";
  save_checkpoint(path, model);
  const Model<double> loaded = load_checkpoint(path);
  CHECK(loaded.norm_max_linear == model.norm_max_linear);
  CHECK(loaded.subset_indices == model.subset_indices);
  const auto probe = random_batch<double>(16, 6, 37);
  CHECK(infer(loaded, probe) == infer(model, probe));
  fs::remove(path);
}

TEST_CASE("damaged checkpoints are rejected") {
  auto model = init_model<double>(Architecture::for_input(6), 59);
  model.subset_indices = {1, 5, 9, 13, 17, 21};
  const auto path = fs::temp_directory_path() / "bl_model_trunc.blck";
  save_checkpoint(path, model);
  std::vector<char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 3));
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("epoch table covers exactly the supported subset sizes") {
  const TrainConfig cfg;
  CHECK(cfg.epochs_for(2) == 35);
  CHECK(cfg.epochs_for(4) == 55);
  CHECK(cfg.epochs_for(6) == 65);
  CHECK(cfg.epochs_for(8) == 70);
  CHECK(cfg.epochs_for(12) == 75);
  CHECK(cfg.epochs_for(24) == 90);
  CHECK_THROWS_AS(cfg.epochs_for(5), std::invalid_argument);
}

}  // TEST_SUITE
