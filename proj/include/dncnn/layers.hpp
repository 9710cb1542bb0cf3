#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dncnn/rng.hpp"
#include "dncnn/tensor.hpp"

namespace dncnn {

enum class Mode { train, infer };

/// 3x3 convolution parameters. `weights` is (c_out, c_in, 3, 3).
template <class T>
struct ConvParams {
    BasicTensor<T> weights;
    std::optional<std::vector<T>> bias;

    std::size_t c_out() const { return weights.shape().n; }
    std::size_t c_in() const { return weights.shape().c; }

    friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

template <class T>
struct BatchNormParams {
    std::vector<T> gamma;
    std::vector<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T eps = T(1e-4);
    T momentum = T(0.9);

    std::size_t channels() const { return gamma.size(); }

    /// gamma = 1, beta = 0, running stats (0, 1).
    static BatchNormParams identity(std::size_t channels);

    friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

/// State a train-mode batchnorm_forward leaves for batchnorm_backward.
template <class T>
struct BnCache {
    bool from_train = false;
    BasicTensor<T> normalized;  // x_hat
    std::vector<T> inv_std;
    std::vector<T> gamma;
};

template <class T>
struct BnForward {
    BasicTensor<T> output;
    BnCache<T> cache;
    BatchNormParams<T> params;
};

/// One byte per element: 1 where the ReLU input was strictly positive.
struct ReluMask {
    Shape shape;
    std::vector<std::uint8_t> bits;
};

template <class T>
struct ReluForward {
    BasicTensor<T> output;
    ReluMask mask;
};

template <class T>
struct ConvGrads {
    BasicTensor<T> input;  // empty when not requested
    BasicTensor<T> weights;
    std::optional<std::vector<T>> bias;
};

template <class T>
struct BnGrads {
    BasicTensor<T> input;
    std::vector<T> gamma;
    std::vector<T> beta;
};

/// Same-size cross-correlation: stride 1, zero padding 1.
template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvParams<T>& params);

/// Gradients of sum(grad_out * conv2d_forward(input, params)). Pass
/// `want_input = false` to skip the input gradient (first layer).
template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const ConvParams<T>& params,
                             const BasicTensor<T>& grad_out, bool want_input = true);

/// Per-channel normalization over (n, h, w). Train mode uses the biased batch
/// variance and returns updated running statistics; infer mode uses the
/// running statistics and returns the parameters unchanged.
template <class T>
BnForward<T> batchnorm_forward(const BasicTensor<T>& input, const BatchNormParams<T>& params,
                               Mode mode);

template <class T>
BnGrads<T> batchnorm_backward(const BnCache<T>& cache, const BasicTensor<T>& grad_out);

template <class T>
ReluForward<T> relu_forward(const BasicTensor<T>& input);

template <class T>
BasicTensor<T> relu_backward(const ReluMask& mask, const BasicTensor<T>& grad_out);

/// N(0, 2 / fan_in) samples with fan_in = c_in * 3 * 3.
template <class T>
BasicTensor<T> he_init(Shape shape, SeededRng& rng);

}  // namespace dncnn
