#include <doctest.h>

#include <cmath>
#include <functional>

#include "dncnn/error.hpp"
#include "dncnn/layers.hpp"
#include "oracle.hpp"

using namespace dncnn;
using oracle::random_tensor;

namespace {

// sum(w * f(x)) as a scalar probe for finite differences.
double probe(const TensorD& out, const TensorD& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central differences of `f` w.r.t. every entry of `x`, compared to `analytic`.
void check_fd(std::span<double> x, std::span<const double> analytic,
              const std::function<double()>& f, double tol = 1e-5) {
    REQUIRE(x.size() == analytic.size());
    const double h = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double down = f();
        x[i] = keep;
        worst = std::max(worst, rel_err((up - down) / (2 * h), analytic[i]));
    }
    CHECK(worst < tol);
}

ConvParams<double> random_conv(std::size_t c_out, std::size_t c_in, bool bias, SeededRng& rng) {
    ConvParams<double> p;
    p.weights = random_tensor<double>({c_out, c_in, 3, 3}, rng);
    if (bias) {
        p.bias = std::vector<double>(c_out);
        for (double& b : *p.bias) b = rng.uniform(-1, 1);
    }
    return p;
}

}  // namespace

TEST_CASE("conv matches a direct nested-loop cross-correlation") {
    SeededRng rng(11);
    for (auto [n, ci, co, h, w] : {std::array<std::size_t, 5>{1, 1, 1, 1, 1},
                                   {2, 3, 4, 5, 7},
                                   {1, 2, 3, 2, 9},
                                   {3, 1, 2, 6, 1}}) {
        const TensorD x = random_tensor<double>({n, ci, h, w}, rng);
        const ConvParams<double> p = random_conv(co, ci, true, rng);
        const TensorD got = conv2d_forward(x, p);
        const TensorD want = oracle::conv2d(x, p.weights, *p.bias);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv float path agrees with the oracle") {
    SeededRng rng(12);
    const TensorD x = random_tensor<double>({2, 3, 8, 6}, rng);
    const ConvParams<double> p = random_conv(5, 3, false, rng);
    ConvParams<float> pf{tensor_cast<float>(p.weights), std::nullopt};
    const Tensor got = conv2d_forward(tensor_cast<float>(x), pf);
    const TensorD want = oracle::conv2d(x, p.weights, {});
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
}

TEST_CASE("single pixel through a unit center kernel reproduces the input") {
    ConvParams<float> p{Tensor({1, 1, 3, 3}, std::vector<float>{0, 0, 0, 0, 1, 0, 0, 0, 0}),
                        std::nullopt};
    const Tensor x({1, 1, 1, 1}, std::vector<float>{0.75f});
    CHECK(conv2d_forward(x, p)[0] == 0.75f);
}

TEST_CASE("conv shape errors") {
    SeededRng rng(1);
    ConvParams<float> p{Tensor({2, 3, 3, 3}, 0.f), std::nullopt};
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 2, 4, 4}, 0.f), p), ShapeError);
    ConvParams<float> k5{Tensor({2, 3, 5, 5}, 0.f), std::nullopt};
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 3, 4, 4}, 0.f), k5), ShapeError);
}

TEST_CASE("conv gradients match finite differences") {
    SeededRng rng(21);
    TensorD x = random_tensor<double>({2, 3, 5, 4}, rng);
    ConvParams<double> p = random_conv(4, 3, true, rng);
    const TensorD w = random_tensor<double>({2, 4, 5, 4}, rng);
    const ConvGrads<double> g = conv2d_backward(x, p, w);
    auto f = [&] { return probe(conv2d_forward(x, p), w); };
    SUBCASE("input") { check_fd(x.data(), g.input.data(), f); }
    SUBCASE("weights") { check_fd(p.weights.data(), g.weights.data(), f); }
    SUBCASE("bias") { check_fd(*p.bias, *g.bias, f); }
}

TEST_CASE("conv backward can skip the input gradient") {
    SeededRng rng(22);
    const TensorD x = random_tensor<double>({1, 1, 4, 4}, rng);
    const ConvGrads<double> g = conv2d_backward(x, random_conv(2, 1, false, rng),
                                                random_tensor<double>({1, 2, 4, 4}, rng), false);
    CHECK(g.input.size() == 0);
    CHECK_FALSE(g.bias.has_value());
}

TEST_CASE("batchnorm train mode normalizes, infer mode uses running stats") {
    SeededRng rng(31);
    const TensorD x = random_tensor<double>({4, 2, 3, 3}, rng);
    auto params = BatchNormParams<double>::identity(2);
    const BnForward<double> fw = batchnorm_forward(x, params, Mode::train);
    const std::size_t m = 4 * 9;
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0, out_mean = 0.0, out_var = 0.0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t i = 0; i < 9; ++i) {
                mean += x.at(n, c, i / 3, i % 3) / m;
                out_mean += fw.output.at(n, c, i / 3, i % 3) / m;
            }
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t i = 0; i < 9; ++i) {
                var += std::pow(x.at(n, c, i / 3, i % 3) - mean, 2) / m;
                out_var += std::pow(fw.output.at(n, c, i / 3, i % 3) - out_mean, 2) / m;
            }
        CHECK(out_mean == doctest::Approx(0.0).epsilon(1e-12).scale(1));
        CHECK(out_var == doctest::Approx(var / (var + 1e-4)).epsilon(1e-10));
        CHECK(fw.params.running_mean[c] == doctest::Approx(0.1 * mean));
        CHECK(fw.params.running_var[c] == doctest::Approx(0.9 + 0.1 * var));
    }
    BatchNormParams<double> fixed = BatchNormParams<double>::identity(2);
    fixed.running_mean = {0.5, -0.5};
    fixed.running_var = {4.0, 0.25};
    fixed.gamma = {2.0, 1.0};
    fixed.beta = {0.0, 1.0};
    const BnForward<double> inf = batchnorm_forward(x, fixed, Mode::infer);
    CHECK(inf.params == fixed);
    CHECK(inf.output.at(1, 0, 2, 1) ==
          doctest::Approx(2.0 * (x.at(1, 0, 2, 1) - 0.5) / std::sqrt(4.0 + 1e-4)));
    CHECK(inf.output.at(3, 1, 0, 0) ==
          doctest::Approx((x.at(3, 1, 0, 0) + 0.5) / std::sqrt(0.25 + 1e-4) + 1.0));
}

TEST_CASE("batchnorm gradients match finite differences") {
    SeededRng rng(32);
    TensorD x = random_tensor<double>({3, 2, 3, 2}, rng);
    auto params = BatchNormParams<double>::identity(2);
    params.gamma = {1.5, -0.7};
    params.beta = {0.2, 0.1};
    const TensorD w = random_tensor<double>(x.shape(), rng);
    const BnForward<double> fw = batchnorm_forward(x, params, Mode::train);
    const BnGrads<double> g = batchnorm_backward(fw.cache, w);
    auto f = [&] { return probe(batchnorm_forward(x, params, Mode::train).output, w); };
    SUBCASE("input") { check_fd(x.data(), g.input.data(), f); }
    SUBCASE("gamma") { check_fd(params.gamma, g.gamma, f); }
    SUBCASE("beta") { check_fd(params.beta, g.beta, f); }
}

TEST_CASE("batchnorm rejects a single-element channel in train mode") {
    auto params = BatchNormParams<float>::identity(1);
    CHECK_THROWS_AS(batchnorm_forward(Tensor({1, 1, 1, 1}, 0.5f), params, Mode::train),
                    DegenerateBatchError);
    CHECK_NOTHROW(batchnorm_forward(Tensor({1, 1, 1, 1}, 0.5f), params, Mode::infer));
}

TEST_CASE("batchnorm backward refuses an infer-mode cache") {
    auto params = BatchNormParams<float>::identity(1);
    const auto fw = batchnorm_forward(Tensor({2, 1, 2, 2}, 0.5f), params, Mode::infer);
    CHECK_THROWS_AS(batchnorm_backward(fw.cache, Tensor({2, 1, 2, 2}, 1.f)), UsageError);
}

TEST_CASE("relu and its mask") {
    const Tensor x({1, 1, 1, 4}, std::vector<float>{-1.f, 0.f, 2.f, 3.f});
    const ReluForward<float> r = relu_forward(x);
    CHECK(r.output == Tensor({1, 1, 1, 4}, std::vector<float>{0.f, 0.f, 2.f, 3.f}));
    const Tensor g = relu_backward(r.mask, Tensor({1, 1, 1, 4}, std::vector<float>{5, 6, 7, 8}));
    CHECK(g == Tensor({1, 1, 1, 4}, std::vector<float>{0.f, 0.f, 7.f, 8.f}));
    CHECK_THROWS_AS(relu_backward(r.mask, Tensor({1, 1, 2, 2}, 0.f)), ShapeError);
}

TEST_CASE("He initialization has the fan-in variance") {
    SeededRng rng(41);
    const Tensor w = he_init<float>({64, 32, 3, 3}, rng);
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        mean += w[i];
        sq += double(w[i]) * w[i];
    }
    mean /= double(w.size());
    const double var = sq / double(w.size()) - mean * mean;
    const double want = 2.0 / (32 * 9);
    // 18432 samples: the sample variance is within a few percent.
    CHECK(std::abs(mean) < 4 * std::sqrt(want / double(w.size())));
    CHECK(var == doctest::Approx(want).epsilon(0.05));
    SeededRng again(41);
    CHECK(he_init<float>({64, 32, 3, 3}, again) == w);
}
