#include "dncnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <cblas.h>

#include "dncnn/error.hpp"
#include "text.hpp"

namespace dncnn {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw RangeError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

void TrainConfig::validate(bool use_bn) const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch must be at least 1");
    if (use_bn && batch_size < 2) throw ConfigError("batch must be at least 2 with batchnorm");
    if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam betas must be in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
    if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
}

void set_compute_threads(int threads) { openblas_set_num_threads(std::max(1, threads)); }

OptimizerState make_optimizer_state(const Model<float>& model) {
    OptimizerState s;
    for (const Layer<float>& l : model.layers) {
        LayerGrads<float> g;
        g.weights = Tensor(l.conv.weights.shape());
        if (l.conv.bias) g.bias = std::vector<float>(l.conv.bias->size(), 0.0f);
        if (l.bn) {
            g.gamma = std::vector<float>(l.bn->gamma.size(), 0.0f);
            g.beta = std::vector<float>(l.bn->beta.size(), 0.0f);
        }
        s.first.layers.push_back(g);
        s.second.layers.push_back(std::move(g));
    }
    return s;
}

template <class T>
LossResult<T> residual_loss(const BasicTensor<T>& pred, const BasicTensor<T>& y,
                            const BasicTensor<T>& x, TargetMode mode) {
    if (pred.shape() != y.shape() || pred.shape() != x.shape()) {
        throw ShapeError("residual_loss: shapes " + pred.shape().str() + ", " + y.shape().str() +
                         ", " + x.shape().str());
    }
    const std::size_t batch = pred.shape().n;
    if (batch == 0) throw ShapeError("residual_loss: empty batch");
    LossResult<T> r;
    r.grad = BasicTensor<T>(pred.shape());
    auto p = pred.data();
    auto py = y.data();
    auto px = x.data();
    auto g = r.grad.data();
    const T inv_n = T(1) / T(batch);
    double sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const T target = mode == TargetMode::residual ? py[i] - px[i] : px[i];
        const T d = p[i] - target;
        sq += double(d) * double(d);
        g[i] = d * inv_n;
    }
    r.loss = sq / (2.0 * double(batch));
    return r;
}

template LossResult<float> residual_loss(const Tensor&, const Tensor&, const Tensor&, TargetMode);
template LossResult<double> residual_loss(const TensorD&, const TensorD&, const TensorD&,
                                          TargetMode);

namespace {

void check_grads(const Model<float>& model, const Gradients<float>& grads,
                 const OptimizerState& state) {
    if (grads.layers.size() != model.layers.size() ||
        state.first.layers.size() != model.layers.size()) {
        throw ShapeError("optimizer: gradient/state structure does not match the model");
    }
}

// Applies `update(param, grad, slot_a, slot_b, decay)` to every trainable
// scalar, with decay = weight_decay for conv weights and 0 elsewhere.
template <class Update>
void for_each_param(Model<float>& model, const Gradients<float>& grads, OptimizerState& state,
                    float weight_decay, Update&& update) {
    auto run = [&](std::span<float> p, std::span<const float> g, std::span<float> a,
                   std::span<float> b, float decay) {
        if (p.size() != g.size() || p.size() != a.size()) {
            throw ShapeError("optimizer: parameter and gradient sizes differ");
        }
        for (std::size_t i = 0; i < p.size(); ++i) update(p[i], g[i], a[i], b[i], decay);
    };
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        Layer<float>& l = model.layers[li];
        const LayerGrads<float>& g = grads.layers[li];
        LayerGrads<float>& a = state.first.layers[li];
        LayerGrads<float>& b = state.second.layers[li];
        run(l.conv.weights.data(), g.weights.data(), a.weights.data(), b.weights.data(),
            weight_decay);
        if (l.conv.bias) run(*l.conv.bias, *g.bias, *a.bias, *b.bias, 0.0f);
        if (l.bn) {
            run(l.bn->gamma, *g.gamma, *a.gamma, *b.gamma, 0.0f);
            run(l.bn->beta, *g.beta, *a.beta, *b.beta, 0.0f);
        }
    }
    ++model.revision;
}

}  // namespace

void sgd_step(Model<float>& model, const Gradients<float>& grads, OptimizerState& state, double lr,
              const TrainConfig& cfg) {
    check_grads(model, grads, state);
    const float mom = float(cfg.momentum);
    const float rate = float(lr);
    for_each_param(model, grads, state, float(cfg.weight_decay),
                   [&](float& p, float g, float& buf, float&, float decay) {
                       buf = mom * buf + (g + decay * p);
                       p -= rate * buf;
                   });
    ++state.step;
}

void adam_step(Model<float>& model, const Gradients<float>& grads, OptimizerState& state,
               double lr, const TrainConfig& cfg) {
    check_grads(model, grads, state);
    ++state.step;
    const double t = double(state.step);
    const float b1 = float(cfg.adam_beta1);
    const float b2 = float(cfg.adam_beta2);
    const float c1 = float(1.0 / (1.0 - std::pow(cfg.adam_beta1, t)));
    const float c2 = float(1.0 / (1.0 - std::pow(cfg.adam_beta2, t)));
    const float eps = float(cfg.adam_eps);
    const float rate = float(lr);
    for_each_param(model, grads, state, float(cfg.weight_decay),
                   [&](float& p, float g, float& m, float& v, float decay) {
                       const float gd = g + decay * p;
                       m = b1 * m + (1.0f - b1) * gd;
                       v = b2 * v + (1.0f - b2) * gd * gd;
                       const float m_hat = m * c1;
                       const float v_hat = v * c2;
                       p -= rate * m_hat / (std::sqrt(v_hat) + eps);
                   });
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) {
        throw RangeError("lr_at_epoch: epoch " + std::to_string(epoch) + " outside [0, " +
                         std::to_string(cfg.epochs) + ")");
    }
    if (cfg.epochs == 1) return cfg.lr_start;
    const double frac = double(epoch) / double(cfg.epochs - 1);
    if (epoch == cfg.epochs - 1) return cfg.lr_end;
    return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

Variant make_variant(NetworkSpec spec, bool use_rl, bool use_bn) {
    spec.use_residual = use_rl;
    spec.use_bn = use_bn;
    return {spec, use_rl ? TargetMode::residual : TargetMode::direct};
}

std::string variant_label(bool use_rl, bool use_bn) {
    return std::string(use_rl ? "RL" : "noRL") + "_" + (use_bn ? "BN" : "noBN");
}

Batch make_batch(const PatchDataset& data, const std::vector<std::size_t>& indices,
                 const SeededRng& rng, bool augment_patches) {
    if (indices.empty()) throw SizeError("make_batch: empty batch");
    const Image& first = data.clean.at(indices.front());
    const Shape shape{indices.size(), first.c, first.h, first.w};
    Batch b{Tensor(shape), Tensor(shape)};
    for (std::size_t i = 0; i < indices.size(); ++i) {
        SeededRng r = rng.derive(i);
        const Image& clean = data.clean.at(indices[i]);
        const int k = augment_patches ? int(r.uniform_int(0, 7)) : 0;
        const Image x = augment(clean, k);
        const Degraded d = degrade(x, data.degrade, r);
        auto ys = b.y.sample(i);
        auto xs = b.x.sample(i);
        std::copy(d.input.data.begin(), d.input.data.end(), ys.begin());
        std::copy(x.data.begin(), x.data.end(), xs.begin());
    }
    return b;
}

TrainResult train(Model<float> model, const PatchDataset& data, const ValidationSet& val,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate(model.spec.use_bn);
    if (data.size() == 0) throw SizeError("train: dataset is empty");
    if (cfg.batch_size > data.size()) {
        throw ConfigError("batch size " + std::to_string(cfg.batch_size) + " exceeds dataset size " +
                          std::to_string(data.size()));
    }
    set_compute_threads(cfg.deterministic ? 1 : cfg.threads);

    const TargetMode target = model.spec.use_residual ? TargetMode::residual : TargetMode::direct;
    OptimizerState state = make_optimizer_state(model);
    const SeededRng run(cfg.seed);
    TrainResult result;
    std::uint64_t step = 0;

    std::vector<std::size_t> order(data.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(epoch, cfg);
        std::iota(order.begin(), order.end(), std::size_t(0));
        SeededRng shuffle = run.derive({1, std::uint64_t(epoch)});
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = std::size_t(shuffle.uniform_int(0, std::int64_t(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> idx(order.begin() + long(start), order.begin() + long(end));
            const Batch batch =
                make_batch(data, idx, run.derive({2, std::uint64_t(epoch), batch_index}), cfg.augment);

            ForwardResult<float> fwd = forward(model, batch.y, Mode::train);
            const LossResult<float> loss = residual_loss(fwd.out, batch.y, batch.x, target);
            if (!std::isfinite(loss.loss)) {
                throw DivergedError("training diverged: non-finite loss at step " +
                                        std::to_string(step) + " (epoch " +
                                        std::to_string(epoch) + ")",
                                    step);
            }
            const Gradients<float> grads = backward(fwd.updated, fwd.tape, loss.grad);
            model = std::move(fwd.updated);
            if (cfg.optimizer == OptimizerKind::sgd) {
                sgd_step(model, grads, state, lr, cfg);
            } else {
                adam_step(model, grads, state, lr, cfg);
            }
            loss_sum += loss.loss * double(idx.size());
            seen += idx.size();
            ++step;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / double(seen);
        if (!val.images.empty() && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs)) {
            rec.val_psnr = evaluate(model, val.images, val.degrade, val.seed).mean_psnr;
        }
        result.history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    result.model = std::move(model);
    return result;
}

std::string History::to_csv() const {
    std::ostringstream out;
    out << "epoch,lr,train_loss,val_psnr\n";
    for (const EpochRecord& r : epochs) {
        out << r.epoch << "," << detail::shortest(r.lr) << "," << detail::shortest(r.train_loss)
            << ",";
        if (r.val_psnr) out << detail::shortest(*r.val_psnr);
        out << "\n";
    }
    return out.str();
}

void History::save_csv(const std::filesystem::path& path) const {
    detail::write_text(path, to_csv());
}

}  // namespace dncnn
