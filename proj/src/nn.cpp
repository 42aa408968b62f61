#include "beamlab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "beamlab/io.hpp"
#include "beamlab/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace beamlab {
namespace {

// Activation and gradient buffers are a few MB each and turn over once per
// batch. glibc's default mmap threshold routes them through mmap/munmap,
// whose page churn costs more than the math at these sizes; keep such
// blocks on the heap so they get reused.
void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 64 * 1024 * 1024);
    return true;
  }();
  (void)done;
#endif
}

constexpr char kMagic[5] = "BLCK";
constexpr std::uint32_t kVersion = 1;
constexpr double kProbFloor = 1e-12;

template <typename Real>
Real activate(Activation a, Real x) {
  switch (a) {
    case Activation::Relu:
      return x > Real{0} ? x : Real{0};
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Sigmoid:
      return Real{1} / (Real{1} + std::exp(-x));
  }
  throw std::logic_error("nn: unknown activation");
}

// Derivative expressed through the activation's output, which all three
// activations admit.
template <typename Real>
Real activation_grad_from_output(Activation a, Real out) {
  switch (a) {
    case Activation::Relu:
      return out > Real{0} ? Real{1} : Real{0};
    case Activation::Tanh:
      return Real{1} - out * out;
    case Activation::Sigmoid:
      return out * (Real{1} - out);
  }
  throw std::logic_error("nn: unknown activation");
}

template <typename Real>
void add_bias_rows(Matrix<Real>& m, const std::vector<Real>& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Real* row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += bias[j];
  }
}

template <typename Real>
void add_bias_and_activate(Matrix<Real>& m, const std::vector<Real>& bias,
                           Activation a) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Real* row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      row[j] = activate(a, row[j] + bias[j]);
    }
  }
}

template <typename Real>
void softmax_rows(Matrix<Real>& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Real* row = m.row(i);
    Real peak = row[0];
    for (std::size_t j = 1; j < m.cols(); ++j) peak = std::max(peak, row[j]);
    Real sum = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      row[j] = std::exp(row[j] - peak);
      sum += row[j];
    }
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] /= sum;
  }
}

// Forward batch normalization with batch statistics; fills x-hat, the batch
// means, and the reciprocal standard deviations.
template <typename Real>
Matrix<Real> batchnorm_train(const Matrix<Real>& a, const BatchNorm<Real>& bn,
                             double epsilon, Matrix<Real>& normalized,
                             std::vector<Real>& mean_out,
                             std::vector<Real>& inv_std_out,
                             std::vector<Real>& var_out) {
  const std::size_t batch = a.rows();
  const std::size_t width = a.cols();
  mean_out.assign(width, Real{0});
  var_out.assign(width, Real{0});
  inv_std_out.assign(width, Real{0});
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* row = a.row(b);
    for (std::size_t j = 0; j < width; ++j) mean_out[j] += row[j];
  }
  for (std::size_t j = 0; j < width; ++j) mean_out[j] /= static_cast<Real>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* row = a.row(b);
    for (std::size_t j = 0; j < width; ++j) {
      const Real d = row[j] - mean_out[j];
      var_out[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < width; ++j) {
    var_out[j] /= static_cast<Real>(batch);
    inv_std_out[j] =
        Real{1} / std::sqrt(var_out[j] + static_cast<Real>(epsilon));
  }
  normalized = Matrix<Real>(batch, width);
  Matrix<Real> out(batch, width);
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* row = a.row(b);
    Real* nrow = normalized.row(b);
    Real* orow = out.row(b);
    for (std::size_t j = 0; j < width; ++j) {
      nrow[j] = (row[j] - mean_out[j]) * inv_std_out[j];
      orow[j] = bn.scale[j] * nrow[j] + bn.shift[j];
    }
  }
  return out;
}

template <typename Real>
Matrix<Real> batchnorm_infer(const Matrix<Real>& a, const BatchNorm<Real>& bn,
                             double epsilon) {
  Matrix<Real> out(a.rows(), a.cols());
  const std::size_t width = a.cols();
  std::vector<Real> inv_std(width);
  for (std::size_t j = 0; j < width; ++j) {
    inv_std[j] =
        Real{1} / std::sqrt(bn.running_var[j] + static_cast<Real>(epsilon));
  }
  for (std::size_t b = 0; b < a.rows(); ++b) {
    const Real* row = a.row(b);
    Real* orow = out.row(b);
    for (std::size_t j = 0; j < width; ++j) {
      orow[j] =
          bn.scale[j] * (row[j] - bn.running_mean[j]) * inv_std[j] +
          bn.shift[j];
    }
  }
  return out;
}

// Gradient through the batch-statistics normalization. dGamma/dBeta are
// accumulated into grads; returns the gradient with respect to the BN input.
template <typename Real>
Matrix<Real> batchnorm_backward(const Matrix<Real>& d_out,
                                const Matrix<Real>& normalized,
                                const std::vector<Real>& inv_std,
                                const BatchNorm<Real>& bn,
                                std::vector<Real>& d_scale,
                                std::vector<Real>& d_shift) {
  const std::size_t batch = d_out.rows();
  const std::size_t width = d_out.cols();
  d_scale.assign(width, Real{0});
  d_shift.assign(width, Real{0});
  std::vector<Real> sum_dxhat(width, Real{0});
  std::vector<Real> sum_dxhat_xhat(width, Real{0});
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* drow = d_out.row(b);
    const Real* nrow = normalized.row(b);
    for (std::size_t j = 0; j < width; ++j) {
      d_scale[j] += drow[j] * nrow[j];
      d_shift[j] += drow[j];
      const Real dxhat = drow[j] * bn.scale[j];
      sum_dxhat[j] += dxhat;
      sum_dxhat_xhat[j] += dxhat * nrow[j];
    }
  }
  Matrix<Real> d_in(batch, width);
  const Real inv_batch = Real{1} / static_cast<Real>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* drow = d_out.row(b);
    const Real* nrow = normalized.row(b);
    Real* irow = d_in.row(b);
    for (std::size_t j = 0; j < width; ++j) {
      const Real dxhat = drow[j] * bn.scale[j];
      irow[j] = inv_std[j] *
                (dxhat - (sum_dxhat[j] + nrow[j] * sum_dxhat_xhat[j]) *
                             inv_batch);
    }
  }
  return d_in;
}

template <typename Real>
Gradients<Real> make_gradients(const Model<Real>& model) {
  Gradients<Real> g;
  for (const auto& layer : model.layers) {
    g.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
    g.bias.emplace_back(layer.bias.size(), Real{0});
  }
  for (const auto& bn : model.norms) {
    g.scale.emplace_back(bn.scale.size(), Real{0});
    g.shift.emplace_back(bn.shift.size(), Real{0});
  }
  return g;
}

template <typename Real>
void adam_update(std::span<Real> param, std::span<const Real> grad,
                 std::span<Real> first, std::span<Real> second,
                 const TrainConfig& cfg, double bias1, double bias2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    first[i] = static_cast<Real>(cfg.adam_beta1) * first[i] +
               static_cast<Real>(1.0 - cfg.adam_beta1) * grad[i];
    second[i] = static_cast<Real>(cfg.adam_beta2) * second[i] +
                static_cast<Real>(1.0 - cfg.adam_beta2) * grad[i] * grad[i];
    const Real m_hat = first[i] / static_cast<Real>(bias1);
    const Real v_hat = second[i] / static_cast<Real>(bias2);
    param[i] -= static_cast<Real>(cfg.learning_rate) * m_hat /
                (std::sqrt(v_hat) + static_cast<Real>(cfg.adam_eps));
  }
}

template <typename Real>
bool all_finite(std::span<const Real> values) {
  for (Real v : values) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

}  // namespace

Architecture Architecture::for_input(int input_width) {
  Architecture arch;
  arch.input_width = input_width;
  arch.validate();
  return arch;
}

void Architecture::validate() const {
  if (input_width < 1 || output_width < 1) {
    throw std::invalid_argument("nn: layer widths must be positive");
  }
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("nn: layer widths must be positive");
  }
  if (activations.size() != hidden.size()) {
    throw std::invalid_argument(
        "nn: one activation per hidden layer required");
  }
}

int TrainConfig::epochs_for(int m) const {
  auto it = epochs_by_m.find(m);
  if (it == epochs_by_m.end()) {
    throw std::invalid_argument("nn: no epoch count configured for m = " +
                                std::to_string(m));
  }
  return it->second;
}

template <typename Real>
Model<Real> init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Model<Real> model;
  model.arch = arch;
  int fan_in = arch.input_width;
  for (std::size_t l = 0; l < arch.dense_count(); ++l) {
    const int fan_out = l < arch.hidden.size()
                            ? arch.hidden[l]
                            : arch.output_width;
    auto stream = rng::substream(seed, "init-layer", l);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Dense<Real> layer;
    layer.weight = Matrix<Real>(static_cast<std::size_t>(fan_out),
                                static_cast<std::size_t>(fan_in));
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] =
          static_cast<Real>(stream.next_uniform(-limit, limit));
    }
    layer.bias.assign(static_cast<std::size_t>(fan_out), Real{0});
    model.layers.push_back(std::move(layer));
    if (l < arch.hidden.size()) {
      BatchNorm<Real> bn;
      bn.scale.assign(static_cast<std::size_t>(fan_out), Real{1});
      bn.shift.assign(static_cast<std::size_t>(fan_out), Real{0});
      bn.running_mean.assign(static_cast<std::size_t>(fan_out), Real{0});
      bn.running_var.assign(static_cast<std::size_t>(fan_out), Real{0});
      model.norms.push_back(std::move(bn));
    }
    fan_in = fan_out;
  }
  return model;
}

namespace {

// Per-layer first and second moments accumulated across evaluation chunks,
// used to rebuild the running statistics from actual data.
template <typename Real>
struct BnStatsCollector {
  std::vector<std::vector<Real>> mean_sum;
  std::vector<std::vector<Real>> var_sum;
  double weight = 0.0;
};

}  // namespace

template <typename Real>
static Matrix<Real> forward_impl(Model<Real>& model, const Matrix<Real>& batch,
                                 Mode mode, ForwardCache<Real>* cache,
                                 bool update_running_stats,
                                 BnStatsCollector<Real>* collector);

template <typename Real>
Matrix<Real> forward(Model<Real>& model, const Matrix<Real>& batch, Mode mode,
                     ForwardCache<Real>* cache, bool update_running_stats) {
  return forward_impl<Real>(model, batch, mode, cache, update_running_stats,
                            nullptr);
}

template <typename Real>
static Matrix<Real> forward_impl(Model<Real>& model, const Matrix<Real>& batch,
                                 Mode mode, ForwardCache<Real>* cache,
                                 bool update_running_stats,
                                 BnStatsCollector<Real>* collector) {
  if (batch.cols() != static_cast<std::size_t>(model.arch.input_width)) {
    throw std::invalid_argument("nn: batch width does not match the model");
  }
  if (mode == Mode::Train && batch.rows() < 2) {
    throw std::invalid_argument(
        "nn: Train-mode forward needs at least 2 samples for batch stats");
  }
  tune_allocator();
  const std::size_t hidden_count = model.arch.hidden.size();
  if (cache) {
    *cache = ForwardCache<Real>{};
    cache->input = batch;
    cache->act_out.resize(hidden_count);
    cache->normalized.resize(hidden_count);
    cache->block_out.resize(hidden_count);
    cache->inv_std.resize(hidden_count);
  }
  const bool post_act_bn = model.arch.batchnorm_after_activation;
  // Stages hand tensors forward by move; `current` always points at the
  // live input of the next layer (inside the cache when one is recording).
  Matrix<Real> scratch;
  const Matrix<Real>* current = &batch;
  std::vector<Real> mean, inv_std, var;
  for (std::size_t l = 0; l < hidden_count; ++l) {
    Matrix<Real> z;
    matmul_nt(*current, model.layers[l].weight, z);

    auto apply_bn = [&](const Matrix<Real>& in) {
      if (mode == Mode::Infer) {
        return batchnorm_infer(in, model.norms[l], model.bn_epsilon);
      }
      Matrix<Real> normalized;
      Matrix<Real> out = batchnorm_train(in, model.norms[l], model.bn_epsilon,
                                         normalized, mean, inv_std, var);
      if (update_running_stats) {
        BatchNorm<Real>& bn = model.norms[l];
        const auto batch_n = static_cast<Real>(in.rows());
        const Real momentum = static_cast<Real>(model.bn_momentum);
        for (std::size_t j = 0; j < bn.running_mean.size(); ++j) {
          bn.running_mean[j] =
              (Real{1} - momentum) * bn.running_mean[j] + momentum * mean[j];
          // Running variance keeps the unbiased estimate.
          bn.running_var[j] = (Real{1} - momentum) * bn.running_var[j] +
                              momentum * var[j] * batch_n / (batch_n - Real{1});
        }
      }
      if (collector) {
        const auto batch_n = static_cast<Real>(in.rows());
        auto& mean_sum = collector->mean_sum[l];
        auto& var_sum = collector->var_sum[l];
        for (std::size_t j = 0; j < mean.size(); ++j) {
          mean_sum[j] += batch_n * mean[j];
          var_sum[j] += batch_n * var[j] * batch_n / (batch_n - Real{1});
        }
      }
      if (cache) {
        cache->normalized[l] = std::move(normalized);
        cache->inv_std[l] = inv_std;
      }
      return out;
    };

    Matrix<Real> block;
    if (post_act_bn) {
      add_bias_and_activate(z, model.layers[l].bias,
                            model.arch.activations[l]);
      if (cache) {
        cache->act_out[l] = std::move(z);
        block = apply_bn(cache->act_out[l]);
      } else {
        block = apply_bn(z);
      }
    } else {
      add_bias_rows(z, model.layers[l].bias);
      block = apply_bn(z);
      const Activation a = model.arch.activations[l];
      for (std::size_t i = 0; i < block.size(); ++i) {
        block.data()[i] = activate(a, block.data()[i]);
      }
    }
    if (cache) {
      cache->block_out[l] = std::move(block);
      current = &cache->block_out[l];
    } else {
      scratch = std::move(block);
      current = &scratch;
    }
  }
  Matrix<Real> logits;
  matmul_nt(*current, model.layers[hidden_count].weight, logits);
  add_bias_rows(logits, model.layers[hidden_count].bias);
  softmax_rows(logits);
  if (cache) cache->probs = logits;
  return logits;
}

template <typename Real>
Matrix<Real> infer(const Model<Real>& model, const Matrix<Real>& batch) {
  // Infer mode never touches the model; the const_cast only satisfies the
  // shared signature.
  return forward<Real>(const_cast<Model<Real>&>(model), batch, Mode::Infer,
                       nullptr, false);
}

template <typename Real>
double cross_entropy_loss(const Matrix<Real>& probs,
                          std::span<const std::uint8_t> labels) {
  if (probs.rows() != labels.size()) {
    throw std::invalid_argument("nn: probs/labels size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const int cls = labels[i] - 1;
    if (cls < 0 || cls >= static_cast<int>(probs.cols())) {
      throw std::out_of_range("nn: label outside the output range");
    }
    total -= std::log(
        std::max(static_cast<double>(probs(i, cls)), kProbFloor));
  }
  return total / static_cast<double>(probs.rows());
}

template <typename Real>
Gradients<Real> backward(const Model<Real>& model,
                         const ForwardCache<Real>& cache,
                         std::span<const std::uint8_t> labels) {
  const std::size_t hidden_count = model.arch.hidden.size();
  const std::size_t batch = cache.input.rows();
  Gradients<Real> grads = make_gradients(model);

  // Softmax + cross entropy collapse to (P - onehot) / batch.
  Matrix<Real> delta = cache.probs;
  const Real inv_batch = Real{1} / static_cast<Real>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    Real* row = delta.row(i);
    for (std::size_t j = 0; j < delta.cols(); ++j) row[j] *= inv_batch;
    row[labels[i] - 1] -= inv_batch;
  }

  const Matrix<Real>* layer_in =
      hidden_count > 0 ? &cache.block_out[hidden_count - 1] : &cache.input;
  matmul_tn(delta, *layer_in, grads.weight[hidden_count]);
  for (std::size_t i = 0; i < batch; ++i) {
    const Real* row = delta.row(i);
    for (std::size_t j = 0; j < delta.cols(); ++j) {
      grads.bias[hidden_count][j] += row[j];
    }
  }
  Matrix<Real> d_block;
  matmul_nn(delta, model.layers[hidden_count].weight, d_block);

  for (std::size_t l = hidden_count; l-- > 0;) {
    const Activation act = model.arch.activations[l];
    Matrix<Real> d_linear;
    if (model.arch.batchnorm_after_activation) {
      Matrix<Real> d_act =
          batchnorm_backward(d_block, cache.normalized[l], cache.inv_std[l],
                             model.norms[l], grads.scale[l], grads.shift[l]);
      for (std::size_t i = 0; i < d_act.size(); ++i) {
        d_act.data()[i] *= activation_grad_from_output(
            act, cache.act_out[l].data()[i]);
      }
      d_linear = std::move(d_act);
    } else {
      Matrix<Real> d_bn_out = d_block;
      for (std::size_t i = 0; i < d_bn_out.size(); ++i) {
        d_bn_out.data()[i] *= activation_grad_from_output(
            act, cache.block_out[l].data()[i]);
      }
      d_linear =
          batchnorm_backward(d_bn_out, cache.normalized[l], cache.inv_std[l],
                             model.norms[l], grads.scale[l], grads.shift[l]);
    }
    const Matrix<Real>* input =
        l > 0 ? &cache.block_out[l - 1] : &cache.input;
    matmul_tn(d_linear, *input, grads.weight[l]);
    for (std::size_t i = 0; i < batch; ++i) {
      const Real* row = d_linear.row(i);
      for (std::size_t j = 0; j < d_linear.cols(); ++j) {
        grads.bias[l][j] += row[j];
      }
    }
    if (l > 0) {
      matmul_nn(d_linear, model.layers[l].weight, d_block);
    }
  }
  return grads;
}

template <typename Real>
AdamState<Real> make_adam_state(const Model<Real>& model) {
  AdamState<Real> state;
  state.first = make_gradients(model);
  state.second = make_gradients(model);
  return state;
}

template <typename Real>
void adam_step(Model<Real>& model, const Gradients<Real>& grads,
               AdamState<Real>& state, const TrainConfig& cfg) {
  ++state.step;
  const double bias1 = 1.0 - std::pow(cfg.adam_beta1, state.step);
  const double bias2 = 1.0 - std::pow(cfg.adam_beta2, state.step);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    adam_update<Real>({model.layers[l].weight.data(),
                       model.layers[l].weight.size()},
                      {grads.weight[l].data(), grads.weight[l].size()},
                      {state.first.weight[l].data(),
                       state.first.weight[l].size()},
                      {state.second.weight[l].data(),
                       state.second.weight[l].size()},
                      cfg, bias1, bias2);
    adam_update<Real>(model.layers[l].bias, grads.bias[l],
                      state.first.bias[l], state.second.bias[l], cfg, bias1,
                      bias2);
  }
  for (std::size_t l = 0; l < model.norms.size(); ++l) {
    adam_update<Real>(model.norms[l].scale, grads.scale[l],
                      state.first.scale[l], state.second.scale[l], cfg, bias1,
                      bias2);
    adam_update<Real>(model.norms[l].shift, grads.shift[l],
                      state.first.shift[l], state.second.shift[l], cfg, bias1,
                      bias2);
  }
}

template <typename Real>
double backward_and_step(Model<Real>& model, const Matrix<Real>& batch,
                         std::span<const std::uint8_t> labels,
                         AdamState<Real>& state, const TrainConfig& cfg) {
  ForwardCache<Real> cache;
  forward(model, batch, Mode::Train, &cache, true);
  const double batch_loss = cross_entropy_loss(cache.probs, labels);
  if (!std::isfinite(batch_loss)) {
    throw std::runtime_error("nn: non-finite training loss at step " +
                             std::to_string(state.step + 1));
  }
  Gradients<Real> grads = backward(model, cache, labels);
  for (std::size_t l = 0; l < grads.weight.size(); ++l) {
    if (!all_finite<Real>({grads.weight[l].data(), grads.weight[l].size()}) ||
        !all_finite<Real>(grads.bias[l])) {
      throw std::runtime_error("nn: non-finite gradient in dense layer " +
                               std::to_string(l + 1));
    }
  }
  for (std::size_t l = 0; l < grads.scale.size(); ++l) {
    if (!all_finite<Real>(grads.scale[l]) ||
        !all_finite<Real>(grads.shift[l])) {
      throw std::runtime_error(
          "nn: non-finite gradient in batch norm layer " +
          std::to_string(l + 1));
    }
  }
  adam_step(model, grads, state, cfg);
  return batch_loss;
}

void save_history_csv(const std::filesystem::path& path,
                      const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("nn: cannot open " + path.string());
  }
  out << "epoch,train_loss,val_loss,val_acc\n";
  char line[128];
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", e + 1,
                  history.train_loss[e], history.val_loss[e],
                  history.val_accuracy[e]);
    out << line;
  }
}

namespace {

// Gathers dataset rows (already projected onto the subset columns) into a
// dense batch.
void gather_rows(const std::vector<double>& features, std::size_t width,
                 std::span<const std::size_t> rows, std::size_t begin,
                 std::size_t count, Matrix<double>& batch,
                 const std::vector<std::uint8_t>& all_labels,
                 std::vector<std::uint8_t>& labels) {
  batch = Matrix<double>(count, width);
  labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = rows[begin + i];
    const double* src_row = features.data() + src * width;
    std::copy(src_row, src_row + width, batch.row(i));
    labels[i] = all_labels[src];
  }
}

// Rebuilds the running statistics from data: the batch means and unbiased
// variances of every normalization input are averaged (sample-weighted) over
// chunks of the given rows and written into the model. The within-training
// EMA starts from zeroed statistics and, with these heavy-tailed features,
// its estimate is dominated by whichever recent batches held a
// near-transmitter receiver; inference needs statistics measured under the
// final weights instead.
void recalibrate_running_stats(Model<double>& model,
                               const std::vector<double>& features,
                               std::size_t width,
                               std::span<const std::size_t> rows) {
  constexpr std::size_t kChunk = 4096;
  BnStatsCollector<double> collector;
  collector.mean_sum.resize(model.norms.size());
  collector.var_sum.resize(model.norms.size());
  for (std::size_t l = 0; l < model.norms.size(); ++l) {
    collector.mean_sum[l].assign(model.norms[l].running_mean.size(), 0.0);
    collector.var_sum[l].assign(model.norms[l].running_var.size(), 0.0);
  }
  Matrix<double> batch;
  for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
    const std::size_t count = std::min(kChunk, rows.size() - begin);
    if (count < 2) break;  // a singleton tail has no batch statistics
    batch = Matrix<double>(count, width);
    for (std::size_t i = 0; i < count; ++i) {
      const double* src = features.data() + rows[begin + i] * width;
      std::copy(src, src + width, batch.row(i));
    }
    forward_impl<double>(model, batch, Mode::Train, nullptr, false,
                         &collector);
    collector.weight += static_cast<double>(count);
  }
  if (collector.weight <= 0.0) return;
  for (std::size_t l = 0; l < model.norms.size(); ++l) {
    BatchNorm<double>& bn = model.norms[l];
    for (std::size_t j = 0; j < bn.running_mean.size(); ++j) {
      bn.running_mean[j] = collector.mean_sum[l][j] / collector.weight;
      bn.running_var[j] = collector.var_sum[l][j] / collector.weight;
    }
  }
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate_split(Model<double>& model,
                          const std::vector<double>& features,
                          std::size_t width,
                          std::span<const std::size_t> rows,
                          const std::vector<std::uint8_t>& all_labels) {
  constexpr std::size_t kChunk = 8192;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  Matrix<double> batch;
  std::vector<std::uint8_t> labels;
  for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
    const std::size_t count = std::min(kChunk, rows.size() - begin);
    gather_rows(features, width, rows, begin, count, batch, all_labels,
                labels);
    const Matrix<double> probs = infer(model, batch);
    loss_sum += cross_entropy_loss(probs, labels) * count;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < probs.cols(); ++j) {
        if (probs(i, j) > probs(i, best)) best = j;
      }
      if (static_cast<int>(best) + 1 == labels[i]) ++correct;
    }
  }
  EvalResult result;
  result.loss = loss_sum / static_cast<double>(rows.size());
  result.accuracy =
      static_cast<double>(correct) / static_cast<double>(rows.size());
  return result;
}

}  // namespace

std::pair<Model<double>, TrainHistory> train(const Dataset& ds,
                                             const SplitIndices& splits,
                                             const BeamSubset& subset,
                                             const TrainConfig& cfg) {
  const int epochs = cfg.epochs_for(subset.m);
  if (cfg.batch_size < 2) {
    throw std::invalid_argument("nn: batch size must be >= 2");
  }
  Architecture arch = Architecture::for_input(subset.m);
  arch.batchnorm_after_activation = cfg.batchnorm_after_activation;

  Model<double> model =
      init_model<double>(arch, rng::substream(cfg.seed, "init").next_u64());
  model.bn_momentum = cfg.bn_momentum;
  model.bn_epsilon = cfg.bn_epsilon;
  model.norm_max_linear = ds.norm_max_linear;
  model.subset_indices = subset.indices;

  const std::vector<double> features = select_features(ds, subset);
  const auto width = static_cast<std::size_t>(subset.m);

  AdamState<double> adam = make_adam_state(model);
  TrainHistory history;
  std::vector<std::size_t> order(splits.train.begin(), splits.train.end());
  Matrix<double> batch;
  std::vector<std::uint8_t> labels;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    auto shuffle = rng::substream(cfg.seed, "shuffle", epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.next_below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.batch_size),
                   order.size() - begin);
      if (count < 2) break;  // a singleton tail has no batch statistics
      gather_rows(features, width, order, begin, count, batch, ds.labels,
                  labels);
      loss_sum += backward_and_step(model, batch, labels, adam, cfg) * count;
      seen += count;
    }
    history.train_loss.push_back(loss_sum / static_cast<double>(seen));
    // Inference statistics for the per-epoch validation pass come from a
    // measured subsample of this epoch's shuffled order, not the EMA.
    const std::size_t probe = std::min<std::size_t>(8192, order.size());
    recalibrate_running_stats(model, features, width,
                              std::span(order).subspan(0, probe));
    const EvalResult val =
        evaluate_split(model, features, width, splits.val, ds.labels);
    history.val_loss.push_back(val.loss);
    history.val_accuracy.push_back(val.accuracy);
  }
  // Final statistics: exact over the full training split.
  recalibrate_running_stats(model, features, width, splits.train);
  return {std::move(model), std::move(history)};
}

template <typename Real>
std::vector<BeamLabel> predict_batch(const Model<Real>& model,
                                     const Matrix<Real>& batch) {
  const Matrix<Real> probs = infer(model, batch);
  std::vector<BeamLabel> out(batch.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.cols(); ++j) {
      if (probs(i, j) > probs(i, best)) best = j;
    }
    out[i] = BeamLabel{static_cast<int>(best) + 1};
  }
  return out;
}

template <typename Real>
BeamLabel predict(const Model<Real>& model, std::span<const Real> features) {
  if (features.size() != static_cast<std::size_t>(model.arch.input_width)) {
    throw std::invalid_argument("nn: feature width does not match the model");
  }
  Matrix<Real> batch(1, features.size());
  std::copy(features.begin(), features.end(), batch.row(0));
  return predict_batch(model, batch)[0];
}

void save_checkpoint(const std::filesystem::path& path,
                     const Model<double>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open " + path.string());
  }
  io::write_magic(out, kMagic);
  io::write_u32(out, kVersion);
  io::write_u8(out, model.arch.batchnorm_after_activation ? 1 : 0);
  io::write_u32(out, static_cast<std::uint32_t>(model.arch.input_width));
  io::write_u32(out, static_cast<std::uint32_t>(model.arch.output_width));
  io::write_u32(out, static_cast<std::uint32_t>(model.arch.hidden.size()));
  for (int w : model.arch.hidden) {
    io::write_u32(out, static_cast<std::uint32_t>(w));
  }
  for (Activation a : model.arch.activations) {
    io::write_u8(out, static_cast<std::uint8_t>(a));
  }
  io::write_u32(out, static_cast<std::uint32_t>(model.subset_indices.size()));
  for (int beam : model.subset_indices) {
    io::write_u8(out, static_cast<std::uint8_t>(beam));
  }
  io::write_f64(out, model.norm_max_linear);
  io::write_f64(out, model.bn_momentum);
  io::write_f64(out, model.bn_epsilon);
  for (const auto& layer : model.layers) {
    io::write_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    io::write_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      io::write_f64(out, layer.weight.data()[i]);
    }
    for (double b : layer.bias) io::write_f64(out, b);
  }
  for (const auto& bn : model.norms) {
    io::write_u32(out, static_cast<std::uint32_t>(bn.scale.size()));
    for (double v : bn.scale) io::write_f64(out, v);
    for (double v : bn.shift) io::write_f64(out, v);
    for (double v : bn.running_mean) io::write_f64(out, v);
    for (double v : bn.running_var) io::write_f64(out, v);
  }
  if (!out) {
    throw std::runtime_error("checkpoint: write failed for " + path.string());
  }
}

Model<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open " + path.string());
  }
  io::expect_magic(in, kMagic, "checkpoint");
  const std::uint32_t version = io::read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  }
  Model<double> model;
  model.arch.batchnorm_after_activation = io::read_u8(in) != 0;
  model.arch.input_width = static_cast<int>(io::read_u32(in));
  model.arch.output_width = static_cast<int>(io::read_u32(in));
  const std::uint32_t hidden_count = io::read_u32(in);
  if (hidden_count > 64) {
    throw std::runtime_error("checkpoint: implausible layer count");
  }
  model.arch.hidden.resize(hidden_count);
  for (auto& w : model.arch.hidden) w = static_cast<int>(io::read_u32(in));
  model.arch.activations.resize(hidden_count);
  for (auto& a : model.arch.activations) {
    const std::uint8_t raw = io::read_u8(in);
    if (raw > static_cast<std::uint8_t>(Activation::Sigmoid)) {
      throw std::runtime_error("checkpoint: unknown activation id");
    }
    a = static_cast<Activation>(raw);
  }
  model.arch.validate();
  const std::uint32_t subset_count = io::read_u32(in);
  if (subset_count != static_cast<std::uint32_t>(model.arch.input_width)) {
    throw std::runtime_error(
        "checkpoint: subset size does not match the input width");
  }
  model.subset_indices.resize(subset_count);
  for (auto& beam : model.subset_indices) beam = io::read_u8(in);
  model.norm_max_linear = io::read_f64(in);
  model.bn_momentum = io::read_f64(in);
  model.bn_epsilon = io::read_f64(in);
  int fan_in = model.arch.input_width;
  for (std::size_t l = 0; l < model.arch.dense_count(); ++l) {
    const int fan_out = l < model.arch.hidden.size()
                            ? model.arch.hidden[l]
                            : model.arch.output_width;
    const std::uint32_t rows = io::read_u32(in);
    const std::uint32_t cols = io::read_u32(in);
    if (rows != static_cast<std::uint32_t>(fan_out) ||
        cols != static_cast<std::uint32_t>(fan_in)) {
      throw std::runtime_error("checkpoint: dense layer shape mismatch");
    }
    Dense<double> layer;
    layer.weight = Matrix<double>(rows, cols);
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = io::read_f64(in);
    }
    layer.bias.resize(rows);
    for (double& b : layer.bias) b = io::read_f64(in);
    model.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  for (std::size_t l = 0; l < model.arch.hidden.size(); ++l) {
    const std::uint32_t width = io::read_u32(in);
    if (width != static_cast<std::uint32_t>(model.arch.hidden[l])) {
      throw std::runtime_error("checkpoint: batch norm shape mismatch");
    }
    BatchNorm<double> bn;
    bn.scale.resize(width);
    bn.shift.resize(width);
    bn.running_mean.resize(width);
    bn.running_var.resize(width);
    for (double& v : bn.scale) v = io::read_f64(in);
    for (double& v : bn.shift) v = io::read_f64(in);
    for (double& v : bn.running_mean) v = io::read_f64(in);
    for (double& v : bn.running_var) {
      v = io::read_f64(in);
      if (v < 0.0) {
        throw std::runtime_error("checkpoint: negative running variance");
      }
    }
    model.norms.push_back(std::move(bn));
  }
  return model;
}

// The float instantiation is the reduced-precision mode; double is the
// default everywhere else in the project.
template Model<double> init_model<double>(const Architecture&, std::uint64_t);
template Model<float> init_model<float>(const Architecture&, std::uint64_t);
template Matrix<double> forward<double>(Model<double>&, const Matrix<double>&,
                                        Mode, ForwardCache<double>*, bool);
template Matrix<float> forward<float>(Model<float>&, const Matrix<float>&,
                                      Mode, ForwardCache<float>*, bool);
template Matrix<double> infer<double>(const Model<double>&,
                                      const Matrix<double>&);
template Matrix<float> infer<float>(const Model<float>&, const Matrix<float>&);
template double cross_entropy_loss<double>(const Matrix<double>&,
                                           std::span<const std::uint8_t>);
template double cross_entropy_loss<float>(const Matrix<float>&,
                                          std::span<const std::uint8_t>);
template Gradients<double> backward<double>(const Model<double>&,
                                            const ForwardCache<double>&,
                                            std::span<const std::uint8_t>);
template Gradients<float> backward<float>(const Model<float>&,
                                          const ForwardCache<float>&,
                                          std::span<const std::uint8_t>);
template AdamState<double> make_adam_state<double>(const Model<double>&);
template AdamState<float> make_adam_state<float>(const Model<float>&);
template void adam_step<double>(Model<double>&, const Gradients<double>&,
                                AdamState<double>&, const TrainConfig&);
template void adam_step<float>(Model<float>&, const Gradients<float>&,
                               AdamState<float>&, const TrainConfig&);
template double backward_and_step<double>(Model<double>&,
                                          const Matrix<double>&,
                                          std::span<const std::uint8_t>,
                                          AdamState<double>&,
                                          const TrainConfig&);
template double backward_and_step<float>(Model<float>&, const Matrix<float>&,
                                         std::span<const std::uint8_t>,
                                         AdamState<float>&,
                                         const TrainConfig&);
template BeamLabel predict<double>(const Model<double>&,
                                   std::span<const double>);
template BeamLabel predict<float>(const Model<float>&, std::span<const float>);
template std::vector<BeamLabel> predict_batch<double>(const Model<double>&,
                                                      const Matrix<double>&);
template std::vector<BeamLabel> predict_batch<float>(const Model<float>&,
                                                     const Matrix<float>&);

}  // namespace beamlab
