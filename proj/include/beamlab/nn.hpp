#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "beamlab/dataset.hpp"
#include "beamlab/mat.hpp"
#include "beamlab/scene.hpp"

namespace beamlab {

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1, Sigmoid = 2 };

/// Feed-forward classifier: M inputs, hidden widths 64-128-256-128-64 with
/// ReLU/Tanh/Sigmoid/ReLU/Tanh, softmax over the 24 beams. Every hidden
/// block is batch normalized; by default normalization follows the
/// activation (dense -> activation -> BN), with batchnorm_after_activation
/// = false switching to the dense -> BN -> activation ordering for
/// comparison.
struct Architecture {
  int input_width = 0;
  std::vector<int> hidden = {64, 128, 256, 128, 64};
  int output_width = kNumBeams;
  std::vector<Activation> activations = {Activation::Relu, Activation::Tanh,
                                         Activation::Sigmoid, Activation::Relu,
                                         Activation::Tanh};
  bool batchnorm_after_activation = true;

  static Architecture for_input(int input_width);
  void validate() const;
  std::size_t dense_count() const { return hidden.size() + 1; }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 1024;
  std::map<int, int> epochs_by_m = {{2, 35}, {4, 55},  {6, 65},
                                    {8, 70}, {12, 75}, {24, 90}};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  bool batchnorm_after_activation = true;

  int epochs_for(int m) const;
};

template <typename Real>
struct Dense {
  Matrix<Real> weight;     ///< [out x in]
  std::vector<Real> bias;  ///< [out]
};

template <typename Real>
struct BatchNorm {
  std::vector<Real> scale;
  std::vector<Real> shift;
  std::vector<Real> running_mean;
  std::vector<Real> running_var;
};

template <typename Real>
struct Model {
  Architecture arch;
  std::vector<Dense<Real>> layers;
  std::vector<BatchNorm<Real>> norms;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  /// Dataset normalization constant, carried so inference can normalize raw
  /// linear RSS the same way training data was normalized.
  double norm_max_linear = 1.0;
  /// Beams feeding the input, in column order.
  std::vector<int> subset_indices;
};

enum class Mode { Train, Infer };

/// Intermediate tensors captured by a Train-mode forward pass; exactly what
/// the analytic backward pass reads (activation derivatives come from the
/// activation outputs, so pre-activation values are not kept).
template <typename Real>
struct ForwardCache {
  Matrix<Real> input;
  std::vector<Matrix<Real>> act_out;    ///< activation outputs
  std::vector<Matrix<Real>> normalized; ///< BN x-hat
  std::vector<Matrix<Real>> block_out;  ///< block outputs fed to next layer
  std::vector<std::vector<Real>> inv_std;
  Matrix<Real> probs;
};

template <typename Real>
struct Gradients {
  std::vector<Matrix<Real>> weight;
  std::vector<std::vector<Real>> bias;
  std::vector<std::vector<Real>> scale;
  std::vector<std::vector<Real>> shift;
};

template <typename Real>
struct AdamState {
  Gradients<Real> first;
  Gradients<Real> second;
  long step = 0;
};

/// Glorot-uniform weights (fan-based limit sqrt(6/(fan_in+fan_out))), zero
/// biases, BN scale 1 / shift 0 / running stats zeroed. Deterministic per
/// seed.
template <typename Real>
Model<Real> init_model(const Architecture& arch, std::uint64_t seed);

/// Runs the network. Train mode normalizes with batch statistics (batch size
/// >= 2 required) and, when update_running_stats is set, folds them into the
/// running estimates; Infer mode reads the running estimates and never
/// mutates the model. Returns the softmax probabilities, one row per sample.
template <typename Real>
Matrix<Real> forward(Model<Real>& model, const Matrix<Real>& batch, Mode mode,
                     ForwardCache<Real>* cache = nullptr,
                     bool update_running_stats = true);

template <typename Real>
Matrix<Real> infer(const Model<Real>& model, const Matrix<Real>& batch);

/// Mean cross entropy, -log of the true-class probability floored at 1e-12.
template <typename Real>
double cross_entropy_loss(const Matrix<Real>& probs,
                          std::span<const std::uint8_t> labels);

/// Analytic gradients for the Train-mode graph captured in the cache.
template <typename Real>
Gradients<Real> backward(const Model<Real>& model,
                         const ForwardCache<Real>& cache,
                         std::span<const std::uint8_t> labels);

template <typename Real>
AdamState<Real> make_adam_state(const Model<Real>& model);

template <typename Real>
void adam_step(Model<Real>& model, const Gradients<Real>& grads,
               AdamState<Real>& state, const TrainConfig& cfg);

/// Train-mode forward, backward, Adam update. Returns the batch loss.
/// Throws if the loss or any gradient is non-finite.
template <typename Real>
double backward_and_step(Model<Real>& model, const Matrix<Real>& batch,
                         std::span<const std::uint8_t> labels,
                         AdamState<Real>& state, const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
};

void save_history_csv(const std::filesystem::path& path,
                      const TrainHistory& history);

/// Full training loop at the per-M epoch count from the config: seeded
/// shuffles, fixed batch size, per-epoch validation pass. The running
/// statistics handed to inference are measured, not the in-training EMA: a
/// training-split subsample after each epoch (for the validation history)
/// and the full training split after the last one. Bit-identical results
/// for identical seeds.
std::pair<Model<double>, TrainHistory> train(const Dataset& ds,
                                             const SplitIndices& splits,
                                             const BeamSubset& subset,
                                             const TrainConfig& cfg);

/// Argmax over the 24 outputs, ties to the lowest beam index.
template <typename Real>
BeamLabel predict(const Model<Real>& model, std::span<const Real> features);

template <typename Real>
std::vector<BeamLabel> predict_batch(const Model<Real>& model,
                                     const Matrix<Real>& batch);

/// Versioned binary checkpoint: architecture, subset identity, all
/// parameters and BN running statistics, and the dataset normalization
/// constant. load -> forward is bit-identical to the saved model's forward.
void save_checkpoint(const std::filesystem::path& path,
                     const Model<double>& model);
Model<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace beamlab
