#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dncnn/dataset.hpp"
#include "dncnn/history.hpp"
#include "dncnn/metrics.hpp"
#include "dncnn/model.hpp"

namespace dncnn {

enum class OptimizerKind { sgd, adam };
/// residual: the network predicts y - x. direct: it predicts x.
enum class TargetMode { residual, direct };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view s);

struct TrainConfig {
    int epochs = 50;
    std::size_t batch_size = 128;
    double lr_start = 1e-1;
    double lr_end = 1e-4;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    OptimizerKind optimizer = OptimizerKind::sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    bool deterministic = false;
    int eval_every = 1;
    bool augment = true;
    int threads = 1;

    /// Throws ConfigError when an invariant is violated.
    void validate(bool use_bn) const;
};

/// Momentum buffers (SGD) or first/second moments (Adam), shaped like the
/// trainable parameters.
struct OptimizerState {
    Gradients<float> first;
    Gradients<float> second;
    std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(const Model<float>& model);

template <class T>
struct LossResult {
    double loss = 0.0;
    BasicTensor<T> grad;
};

/// (1 / 2N) sum_i ||pred_i - target_i||^2 with target y - x (residual) or x
/// (direct); N is the batch size. grad = (pred - target) / N.
template <class T>
LossResult<T> residual_loss(const BasicTensor<T>& pred, const BasicTensor<T>& y,
                            const BasicTensor<T>& x, TargetMode mode);

/// buf <- momentum * buf + grad (+ weight_decay * w for conv weights only);
/// param <- param - lr * buf.
void sgd_step(Model<float>& model, const Gradients<float>& grads, OptimizerState& state, double lr,
              const TrainConfig& cfg);

/// Bias-corrected Adam with the same coupled L2 decay subset as sgd_step.
void adam_step(Model<float>& model, const Gradients<float>& grads, OptimizerState& state,
               double lr, const TrainConfig& cfg);

/// lr_start * (lr_end / lr_start)^(e / (epochs - 1)).
double lr_at_epoch(int epoch, const TrainConfig& cfg);

struct Variant {
    NetworkSpec spec;
    TargetMode target = TargetMode::residual;
};

/// The four residual-learning x batch-normalization combinations.
Variant make_variant(NetworkSpec spec, bool use_rl, bool use_bn);
std::string variant_label(bool use_rl, bool use_bn);

struct ValidationSet {
    std::vector<NamedImage> images;
    DegradationSpec degrade = Awgn{25.0};
    std::uint64_t seed = 0;
};

struct TrainResult {
    Model<float> model;
    History history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Epoch loop: shuffle, augment and degrade each patch on the fly, step the
/// optimizer, and record loss, LR and (infer-mode) validation PSNR.
TrainResult train(Model<float> model, const PatchDataset& data, const ValidationSet& val,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// One mini-batch of clean patches and their degraded inputs.
struct Batch {
    Tensor y;
    Tensor x;
};

Batch make_batch(const PatchDataset& data, const std::vector<std::size_t>& indices,
                 const SeededRng& rng, bool augment);

/// Caps the BLAS worker pool.
void set_compute_threads(int threads);

}  // namespace dncnn
