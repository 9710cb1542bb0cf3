#include "dncnn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "blas.hpp"

namespace dncnn {
namespace {

constexpr std::size_t kTaps = 9;

// col[(ci*9 + ky*3 + kx) * hw + y*w + x] = in[ci][y+ky-1][x+kx-1], zero outside.
template <class T>
void im2col(std::span<const T> in, std::size_t channels, std::size_t h, std::size_t w,
            std::vector<T>& col) {
    const std::size_t hw = h * w;
    col.resize(channels * kTaps * hw);
    for (std::size_t ci = 0; ci < channels; ++ci) {
        const T* src = in.data() + ci * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* dst = col.data() + (ci * kTaps + std::size_t(ky * 3 + kx)) * hw;
                const int dy = ky - 1;
                const int dx = kx - 1;
                // Columns [x0, x1) read inside the row; the rest are padding.
                const std::size_t x0 = dx < 0 ? 1 : 0;
                const std::size_t x1 = dx > 0 ? w - 1 : w;
                for (std::size_t y = 0; y < h; ++y) {
                    T* out = dst + y * w;
                    const long sy = long(y) + dy;
                    if (sy < 0 || sy >= long(h) || x1 <= x0) {
                        std::fill(out, out + w, T(0));
                        continue;
                    }
                    const T* row = src + std::size_t(sy) * w;
                    if (x0 > 0) out[0] = T(0);
                    if (x1 < w) out[w - 1] = T(0);
                    std::copy(row + long(x0) + dx, row + long(x1) + dx, out + x0);
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add columns back onto the image.
template <class T>
void col2im(const std::vector<T>& col, std::size_t channels, std::size_t h, std::size_t w,
            std::span<T> out_img) {
    const std::size_t hw = h * w;
    std::fill(out_img.begin(), out_img.end(), T(0));
    for (std::size_t ci = 0; ci < channels; ++ci) {
        T* dst = out_img.data() + ci * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* src = col.data() + (ci * kTaps + std::size_t(ky * 3 + kx)) * hw;
                const int dy = ky - 1;
                const int dx = kx - 1;
                const std::size_t x0 = dx < 0 ? 1 : 0;
                const std::size_t x1 = dx > 0 ? w - 1 : w;
                if (x1 <= x0) continue;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = long(y) + dy;
                    if (sy < 0 || sy >= long(h)) continue;
                    T* row = dst + std::size_t(sy) * w;
                    const T* in = src + y * w;
                    for (std::size_t x = x0; x < x1; ++x) row[long(x) + dx] += in[x];
                }
            }
        }
    }
}

template <class T>
void check_conv(const BasicTensor<T>& input, const ConvParams<T>& params) {
    const Shape& ws = params.weights.shape();
    if (ws.h != 3 || ws.w != 3) {
        throw ShapeError("conv kernel must be 3x3, got " + ws.str());
    }
    if (input.shape().c != ws.c) {
        throw ShapeError("conv input has " + std::to_string(input.shape().c) +
                         " channels, layer expects " + std::to_string(ws.c));
    }
    if (params.bias && params.bias->size() != ws.n) {
        throw ShapeError("conv bias length does not match output channels");
    }
}

// Double-precision sums with independent lanes so the loop pipelines; the
// lane count is fixed, so results do not depend on the build.
template <class T>
double lane_sum(std::span<const T> v, double shift) {
    double acc[8] = {};
    const std::size_t n = v.size();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t l = 0; l < 8; ++l) acc[l] += double(v[i + l]) - shift;
    for (; i < n; ++i) acc[0] += double(v[i]) - shift;
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <class T>
double lane_sq_sum(std::span<const T> v, double shift) {
    double acc[8] = {};
    const std::size_t n = v.size();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t l = 0; l < 8; ++l) {
            const double d = double(v[i + l]) - shift;
            acc[l] += d * d;
        }
    for (; i < n; ++i) {
        const double d = double(v[i]) - shift;
        acc[0] += d * d;
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <class T>
double lane_dot(std::span<const T> a, std::span<const T> b) {
    double acc[8] = {};
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t l = 0; l < 8; ++l) acc[l] += double(a[i + l]) * double(b[i + l]);
    for (; i < n; ++i) acc[0] += double(a[i]) * double(b[i]);
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace

template <class T>
BatchNormParams<T> BatchNormParams<T>::identity(std::size_t channels) {
    BatchNormParams p;
    p.gamma.assign(channels, T(1));
    p.beta.assign(channels, T(0));
    p.running_mean.assign(channels, T(0));
    p.running_var.assign(channels, T(1));
    return p;
}

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvParams<T>& params) {
    check_conv(input, params);
    const Shape& s = input.shape();
    const std::size_t c_out = params.c_out();
    const std::size_t k = s.c * kTaps;
    const std::size_t hw = s.plane();
    BasicTensor<T> out(Shape{s.n, c_out, s.h, s.w});
    if (out.empty()) return out;
    std::vector<T> col;
    for (std::size_t n = 0; n < s.n; ++n) {
        im2col<T>(input.sample(n), s.c, s.h, s.w, col);
        T* dst = out.sample(n).data();
        detail::gemm(false, false, int(c_out), int(hw), int(k), T(1), params.weights.data().data(),
                     int(k), col.data(), int(hw), T(0), dst, int(hw));
        if (params.bias) {
            for (std::size_t co = 0; co < c_out; ++co) {
                const T b = (*params.bias)[co];
                T* p = dst + co * hw;
                for (std::size_t i = 0; i < hw; ++i) p[i] += b;
            }
        }
    }
    return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const ConvParams<T>& params,
                             const BasicTensor<T>& grad_out, bool want_input) {
    check_conv(input, params);
    const Shape& s = input.shape();
    const std::size_t c_out = params.c_out();
    if (grad_out.shape() != Shape{s.n, c_out, s.h, s.w}) {
        throw ShapeError("conv grad_out shape " + grad_out.shape().str() + " does not match " +
                         Shape{s.n, c_out, s.h, s.w}.str());
    }
    const std::size_t k = s.c * kTaps;
    const std::size_t hw = s.plane();

    ConvGrads<T> g;
    g.weights = BasicTensor<T>(params.weights.shape());
    if (want_input) g.input = BasicTensor<T>(s);
    if (params.bias) {
        std::vector<T> gb(c_out, T(0));
        for (std::size_t n = 0; n < s.n; ++n) {
            for (std::size_t co = 0; co < c_out; ++co) {
                T acc = T(0);
                for (T v : grad_out.plane(n, co)) acc += v;
                gb[co] += acc;
            }
        }
        g.bias = std::move(gb);
    }
    if (hw == 0) return g;

    std::vector<T> col;
    std::vector<T> grad_col(want_input ? k * hw : 0);
    for (std::size_t n = 0; n < s.n; ++n) {
        const T* gy = grad_out.sample(n).data();
        im2col<T>(input.sample(n), s.c, s.h, s.w, col);
        detail::gemm(false, true, int(c_out), int(k), int(hw), T(1), gy, int(hw), col.data(),
                     int(hw), n == 0 ? T(0) : T(1), g.weights.data().data(), int(k));
        if (want_input) {
            detail::gemm(true, false, int(k), int(hw), int(c_out), T(1),
                         params.weights.data().data(), int(k), gy, int(hw), T(0), grad_col.data(),
                         int(hw));
            col2im<T>(grad_col, s.c, s.h, s.w, g.input.sample(n));
        }
    }
    return g;
}

template <class T>
BnForward<T> batchnorm_forward(const BasicTensor<T>& input, const BatchNormParams<T>& params,
                               Mode mode) {
    const Shape& s = input.shape();
    const std::size_t channels = s.c;
    if (params.gamma.size() != channels || params.beta.size() != channels ||
        params.running_mean.size() != channels || params.running_var.size() != channels) {
        throw ShapeError("batchnorm parameters have " + std::to_string(params.gamma.size()) +
                         " channels, input has " + std::to_string(channels));
    }
    const std::size_t hw = s.plane();
    const std::size_t m = s.n * hw;

    BnForward<T> r;
    r.output = BasicTensor<T>(s);
    r.params = params;

    if (mode == Mode::infer) {
        for (std::size_t c = 0; c < channels; ++c) {
            const T inv = T(1) / std::sqrt(params.running_var[c] + params.eps);
            const T mean = params.running_mean[c];
            const T g = params.gamma[c];
            const T b = params.beta[c];
            for (std::size_t n = 0; n < s.n; ++n) {
                auto src = input.plane(n, c);
                auto dst = r.output.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) dst[i] = g * ((src[i] - mean) * inv) + b;
            }
        }
        return r;
    }

    if (m < 2) {
        throw DegenerateBatchError("train-mode batchnorm needs at least 2 values per channel, got " +
                                   std::to_string(m));
    }
    r.cache.from_train = true;
    r.cache.normalized = BasicTensor<T>(s);
    r.cache.inv_std.resize(channels);
    r.cache.gamma = params.gamma;
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) sum += lane_sum(input.plane(n, c), 0.0);
        const double mean = sum / double(m);
        double sq = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) sq += lane_sq_sum(input.plane(n, c), mean);
        const double var = sq / double(m);
        const T inv = T(1.0 / std::sqrt(var + double(params.eps)));
        r.cache.inv_std[c] = inv;
        const T tm = T(mean);
        const T g = params.gamma[c];
        const T b = params.beta[c];
        for (std::size_t n = 0; n < s.n; ++n) {
            auto src = input.plane(n, c);
            auto xh = r.cache.normalized.plane(n, c);
            auto dst = r.output.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                xh[i] = (src[i] - tm) * inv;
                dst[i] = g * xh[i] + b;
            }
        }
        const T mom = params.momentum;
        r.params.running_mean[c] = mom * params.running_mean[c] + (T(1) - mom) * T(mean);
        r.params.running_var[c] = mom * params.running_var[c] + (T(1) - mom) * T(var);
    }
    return r;
}

template <class T>
BnGrads<T> batchnorm_backward(const BnCache<T>& cache, const BasicTensor<T>& grad_out) {
    if (!cache.from_train) {
        throw UsageError("batchnorm_backward needs a cache from a train-mode forward");
    }
    const Shape& s = cache.normalized.shape();
    if (grad_out.shape() != s) {
        throw ShapeError("batchnorm grad_out shape " + grad_out.shape().str() + " vs " + s.str());
    }
    const std::size_t channels = s.c;
    const std::size_t hw = s.plane();
    const double m = double(s.n * hw);

    BnGrads<T> g;
    g.input = BasicTensor<T>(s);
    g.gamma.assign(channels, T(0));
    g.beta.assign(channels, T(0));
    for (std::size_t c = 0; c < channels; ++c) {
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            sum_dy += lane_sum(grad_out.plane(n, c), 0.0);
            sum_dy_xhat += lane_dot(grad_out.plane(n, c), cache.normalized.plane(n, c));
        }
        g.gamma[c] = T(sum_dy_xhat);
        g.beta[c] = T(sum_dy);
        const T factor = cache.gamma[c] * cache.inv_std[c];
        const T mean_dy = T(sum_dy / m);
        const T mean_dy_xhat = T(sum_dy_xhat / m);
        for (std::size_t n = 0; n < s.n; ++n) {
            auto dy = grad_out.plane(n, c);
            auto xh = cache.normalized.plane(n, c);
            auto dx = g.input.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                dx[i] = factor * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
            }
        }
    }
    return g;
}

template <class T>
ReluForward<T> relu_forward(const BasicTensor<T>& input) {
    ReluForward<T> r;
    r.output = BasicTensor<T>(input.shape());
    r.mask.shape = input.shape();
    r.mask.bits.resize(input.size());
    const T* src = input.data().data();
    T* dst = r.output.data().data();
    std::uint8_t* bits = r.mask.bits.data();
    const std::size_t count = input.size();
    for (std::size_t i = 0; i < count; ++i) {
        const T v = src[i];
        dst[i] = v > T(0) ? v : T(0);
    }
    for (std::size_t i = 0; i < count; ++i) bits[i] = src[i] > T(0);
    return r;
}

template <class T>
BasicTensor<T> relu_backward(const ReluMask& mask, const BasicTensor<T>& grad_out) {
    if (mask.shape != grad_out.shape()) {
        throw ShapeError("relu mask shape " + mask.shape.str() + " vs grad " +
                         grad_out.shape().str());
    }
    BasicTensor<T> g(grad_out.shape());
    const T* src = grad_out.data().data();
    T* dst = g.data().data();
    const std::uint8_t* bits = mask.bits.data();
    const std::size_t count = grad_out.size();
    for (std::size_t i = 0; i < count; ++i) dst[i] = bits[i] ? src[i] : T(0);
    return g;
}

template <class T>
BasicTensor<T> he_init(Shape shape, SeededRng& rng) {
    if (shape.h != 3 || shape.w != 3 || shape.c == 0) {
        throw ShapeError("he_init expects a (c_out, c_in, 3, 3) weight shape, got " + shape.str());
    }
    const double stddev = std::sqrt(2.0 / double(shape.c * kTaps));
    BasicTensor<T> w(shape);
    for (T& v : w.data()) v = T(rng.normal() * stddev);
    return w;
}

#define DNCNN_INSTANTIATE_LAYERS(T)                                                              \
    template struct BatchNormParams<T>;                                                          \
    template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const ConvParams<T>&);         \
    template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const ConvParams<T>&,           \
                                          const BasicTensor<T>&, bool);                          \
    template BnForward<T> batchnorm_forward(const BasicTensor<T>&, const BatchNormParams<T>&,    \
                                            Mode);                                               \
    template BnGrads<T> batchnorm_backward(const BnCache<T>&, const BasicTensor<T>&);            \
    template ReluForward<T> relu_forward(const BasicTensor<T>&);                                 \
    template BasicTensor<T> relu_backward(const ReluMask&, const BasicTensor<T>&);               \
    template BasicTensor<T> he_init(Shape, SeededRng&);

DNCNN_INSTANTIATE_LAYERS(float)
DNCNN_INSTANTIATE_LAYERS(double)

#undef DNCNN_INSTANTIATE_LAYERS

}  // namespace dncnn
