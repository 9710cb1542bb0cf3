#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "dncnn/error.hpp"

namespace dncnn {

/// Dimensions of a batch of images, batch-major, width innermost.
struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    /// Number of elements; throws SizeError if the product overflows.
    std::size_t count() const {
        std::size_t total = 1;
        for (std::size_t d : {n, c, h, w}) {
            if (d != 0 && total > std::numeric_limits<std::size_t>::max() / d) {
                throw SizeError("tensor shape " + str() + " overflows addressable size");
            }
            total *= d;
        }
        return total;
    }

    std::size_t plane() const { return h * w; }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

enum class Precision { single, double_ };

/// Dense 4-D array of real scalars in NCHW order.
template <class T>
class BasicTensor {
    static_assert(std::is_floating_point_v<T>);

public:
    using value_type = T;
    static constexpr Precision precision =
        std::is_same_v<T, float> ? Precision::single : Precision::double_;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(shape) {
        std::size_t count = shape.count();
        if (count > std::vector<T>().max_size()) {
            throw SizeError("tensor shape " + shape.str() + " overflows addressable size");
        }
        data_.assign(count, fill);
    }

    BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape.count()) {
            throw ShapeError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape.str());
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[index(n, c, y, x)];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[index(n, c, y, x)];
    }

    /// The h*w plane of sample n, channel c.
    std::span<T> plane(std::size_t n, std::size_t c) noexcept {
        return std::span<T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
    }
    std::span<const T> plane(std::size_t n, std::size_t c) const noexcept {
        return std::span<const T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
    }

    /// All channels of sample n.
    std::span<T> sample(std::size_t n) noexcept {
        return std::span<T>(data_).subspan(index(n, 0, 0, 0), shape_.c * shape_.plane());
    }
    std::span<const T> sample(std::size_t n) const noexcept {
        return std::span<const T>(data_).subspan(index(n, 0, 0, 0), shape_.c * shape_.plane());
    }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

enum class ElementwiseOp { add, sub, mul };

template <class T>
BasicTensor<T> tensor_new(Shape shape, T fill = T(0)) {
    return BasicTensor<T>(shape, fill);
}

template <class T>
BasicTensor<T> elementwise(const BasicTensor<T>& a, const BasicTensor<T>& b, ElementwiseOp op) {
    if (a.shape() != b.shape()) {
        throw ShapeError("elementwise: shape " + a.shape().str() + " vs " + b.shape().str());
    }
    BasicTensor<T> out(a.shape());
    auto pa = a.data();
    auto pb = b.data();
    auto po = out.data();
    switch (op) {
        case ElementwiseOp::add:
            for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + pb[i];
            break;
        case ElementwiseOp::sub:
            for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] - pb[i];
            break;
        case ElementwiseOp::mul:
            for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * pb[i];
            break;
    }
    return out;
}

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(a, b, ElementwiseOp::add);
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(a, b, ElementwiseOp::sub);
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
    BasicTensor<T> out = a;
    for (T& v : out.data()) v *= s;
    return out;
}

/// Sum of squared elements, accumulated in double.
template <class T>
double frobenius_sq(const BasicTensor<T>& a) {
    double acc = 0.0;
    for (T v : a.data()) acc += double(v) * double(v);
    return acc;
}

template <class To, class From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& a) {
    std::vector<To> data(a.data().begin(), a.data().end());
    return BasicTensor<To>(a.shape(), std::move(data));
}

}  // namespace dncnn
