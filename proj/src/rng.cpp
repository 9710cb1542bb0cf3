#include "dncnn/rng.hpp"

#include <cmath>
#include <numbers>

#include "dncnn/error.hpp"

namespace dncnn {

std::int64_t SeededRng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw RangeError("uniform_int: empty range");
    const std::uint64_t range = std::uint64_t(hi) - std::uint64_t(lo) + 1;
    if (range == 0) return std::int64_t(engine_());  // full 64-bit span
    // Reject the low zone that would bias the modulo.
    const std::uint64_t limit = (0 - range) % range;
    for (;;) {
        std::uint64_t r = engine_();
        if (r >= limit) return lo + std::int64_t(r % range);
    }
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return radius * std::cos(theta);
}

}  // namespace dncnn
