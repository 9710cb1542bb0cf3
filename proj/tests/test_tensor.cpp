#include <doctest.h>

#include <limits>

#include "dncnn/error.hpp"
#include "dncnn/tensor.hpp"

using namespace dncnn;

namespace {
Tensor row(std::vector<float> v) {
    const std::size_t n = v.size();
    return Tensor({1, 1, 1, n}, std::move(v));
}
}  // namespace

TEST_CASE("tensor_new fills") {
    const Tensor z = tensor_new<float>({1, 1, 2, 2});
    CHECK(z.size() == 4);
    for (float v : z.data()) CHECK(v == 0.0f);
    const Tensor one = tensor_new<float>({1, 1, 1, 1}, 3.5f);
    CHECK(one[0] == 3.5f);
    const TensorD ones = tensor_new<double>({2, 3, 4, 5}, 1.0);
    CHECK(ones.size() == 120);
    double sum = 0.0;
    for (double v : ones.data()) sum += v;
    CHECK(sum == 120.0);
}

TEST_CASE("overflowing shapes are rejected") {
    const std::size_t big = std::numeric_limits<std::size_t>::max() / 2;
    CHECK_THROWS_AS(tensor_new<float>({big, 4, 1, 1}), SizeError);
    CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST_CASE("elementwise operations") {
    CHECK(sub(row({1, 2}), row({1, 2})) == row({0, 0}));
    CHECK(add(row({1, 2}), row({3, 4})) == row({4, 6}));
    CHECK(elementwise(row({2, 3}), row({4, 5}), ElementwiseOp::mul) == row({8, 15}));
    CHECK_THROWS_AS(add(row({1, 2}), row({1, 2, 3})), ShapeError);
    CHECK_THROWS_AS(add(Tensor({1, 1, 2, 1}, 0.f), Tensor({1, 1, 1, 2}, 0.f)), ShapeError);
}

TEST_CASE("scale") {
    CHECK(scale(row({1, -2}), 0.0f) == row({0, 0}));
    CHECK(scale(row({1, -2}), -1.0f) == row({-1, 2}));
    CHECK(scale(row({0.5f}), 4.0f) == row({2}));
}

TEST_CASE("frobenius_sq") {
    CHECK(frobenius_sq(tensor_new<float>({1, 1, 3, 3})) == 0.0);
    CHECK(frobenius_sq(row({3, 4})) == 25.0);
    CHECK(frobenius_sq(tensor_new<float>({1, 1, 2, 2}, 1.0f)) == 4.0);
}

TEST_CASE("indexing is NCHW with width innermost") {
    Tensor t({2, 3, 4, 5});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = float(i);
    CHECK(t.at(1, 2, 3, 4) == float(t.size() - 1));
    CHECK(t.at(0, 1, 0, 0) == 20.0f);
    CHECK(t.plane(1, 0)[0] == 60.0f);
    CHECK(t.sample(1).size() == 60);
    CHECK(tensor_cast<double>(t).at(1, 0, 2, 3) == 73.0);
}
