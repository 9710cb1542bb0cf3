#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dncnn/layers.hpp"

namespace dncnn {

/// Architecture of a DnCNN: `depth` 3x3 conv layers, the first with ReLU,
/// the middle ones with (optional) batch normalization and ReLU, the last
/// one linear. With `use_residual` the output is read as the noise estimate.
struct NetworkSpec {
    int depth = 17;
    int hidden_channels = 64;
    int image_channels = 1;
    bool use_bn = true;
    bool use_residual = true;

    /// Throws SpecError when an invariant is violated.
    void validate() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Side length of the square input region that influences one output pixel.
int receptive_field(int depth);

template <class T>
struct Layer {
    ConvParams<T> conv;
    std::optional<BatchNormParams<T>> bn;
    bool relu = true;

    friend bool operator==(const Layer&, const Layer&) = default;
};

template <class T>
struct Model {
    NetworkSpec spec;
    std::vector<Layer<T>> layers;
    /// Bumped whenever trainable parameters change; tapes record it.
    std::uint64_t revision = 0;

    /// Trainable scalars: conv weights, biases, gamma and beta.
    std::size_t parameter_count() const;
};

template <class T>
struct LayerTape {
    BasicTensor<T> input;
    std::optional<BnCache<T>> bn;
    std::optional<ReluMask> relu;
};

/// Per-layer forward caches, in forward order.
template <class T>
struct Tape {
    std::uint64_t revision = 0;
    std::vector<LayerTape<T>> layers;
};

template <class T>
struct LayerGrads {
    BasicTensor<T> weights;
    std::optional<std::vector<T>> bias;
    std::optional<std::vector<T>> gamma;
    std::optional<std::vector<T>> beta;
};

template <class T>
struct Gradients {
    std::vector<LayerGrads<T>> layers;
};

template <class T>
struct ForwardResult {
    BasicTensor<T> out;
    Tape<T> tape;  // empty in infer mode
    Model<T> updated;
};

/// He-initialized network. BN layers start at gamma `bn_gamma`, beta 0 and
/// stats (0, 1). A small gamma keeps the initial residual near the noise
/// scale, which matters for short runs.
template <class T>
Model<T> build_network(const NetworkSpec& spec, SeededRng& rng, double bn_gamma = 1.0);

/// Forward pass. Train mode records a tape and returns the model with
/// updated BN running statistics; infer mode leaves the model unchanged.
template <class T>
ForwardResult<T> forward(const Model<T>& model, const BasicTensor<T>& y, Mode mode);

/// Infer-mode forward without the tape or model copy.
template <class T>
BasicTensor<T> infer(const Model<T>& model, const BasicTensor<T>& y);

/// Clean estimate: y - R(y) for residual models, F(y) otherwise. Unclamped.
template <class T>
BasicTensor<T> denoise(const Model<T>& model, const BasicTensor<T>& y);

template <class T>
Gradients<T> backward(const Model<T>& model, const Tape<T>& tape, const BasicTensor<T>& grad_out);

template <class To, class From>
Model<To> model_cast(const Model<From>& model);

void save_model(const Model<float>& model, const std::filesystem::path& path);
Model<float> load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_model(const Model<float>& model);
Model<float> decode_model(const std::vector<std::uint8_t>& bytes);

}  // namespace dncnn
