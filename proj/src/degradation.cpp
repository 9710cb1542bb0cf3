#include "dncnn/degradation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

#include "dncnn/error.hpp"

namespace dncnn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, end);
    if (s.find_first_of(".en") == std::string::npos) s += ".0";
    return s;
}

double parse_double(std::string_view s, std::string_view token) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
        throw RangeError("invalid number '" + std::string(s) + "' in '" + std::string(token) + "'");
    }
    return v;
}

int parse_int(std::string_view s, std::string_view token) {
    int v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
        throw RangeError("invalid integer '" + std::string(s) + "' in '" + std::string(token) + "'");
    }
    return v;
}

// Keys cubic convolution kernel with a = -0.5.
double cubic(double x) {
    const double ax = std::abs(x);
    const double ax2 = ax * ax;
    const double ax3 = ax2 * ax;
    if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
    if (ax < 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
    return 0.0;
}

struct Taps {
    std::size_t count = 0;
    std::vector<std::size_t> index;  // out_len * count
    std::vector<double> weight;
};

Taps resize_taps(std::size_t in_len, std::size_t out_len) {
    const double scale = double(out_len) / double(in_len);
    const bool shrink = scale < 1.0;
    const double width = shrink ? 4.0 / scale : 4.0;
    Taps t;
    t.count = std::size_t(std::ceil(width)) + 2;
    t.index.resize(out_len * t.count);
    t.weight.resize(out_len * t.count);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double u = (double(i) + 0.5) / scale - 0.5;
        const long left = long(std::floor(u - width / 2.0));
        double total = 0.0;
        for (std::size_t k = 0; k < t.count; ++k) {
            const long j = left + long(k);
            const double d = u - double(j);
            const double wgt = shrink ? scale * cubic(scale * d) : cubic(d);
            t.index[i * t.count + k] = std::size_t(std::clamp(j, 0L, long(in_len) - 1));
            t.weight[i * t.count + k] = wgt;
            total += wgt;
        }
        for (std::size_t k = 0; k < t.count; ++k) t.weight[i * t.count + k] /= total;
    }
    return t;
}

std::array<double, 64> dct_basis() {
    std::array<double, 64> c{};
    for (int u = 0; u < 8; ++u) {
        const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
        for (int x = 0; x < 8; ++x) {
            c[u * 8 + x] = alpha * std::cos((2.0 * x + 1.0) * u * std::numbers::pi / 16.0);
        }
    }
    return c;
}

constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

void jpeg_plane(const float* src, float* dst, std::size_t h, std::size_t w,
                const std::array<int, 64>& table) {
    static const std::array<double, 64> c = dct_basis();
    const std::size_t ph = (h + 7) / 8 * 8;
    const std::size_t pw = (w + 7) / 8 * 8;
    double block[64];
    double tmp[64];
    for (std::size_t by = 0; by < ph; by += 8) {
        for (std::size_t bx = 0; bx < pw; bx += 8) {
            for (std::size_t y = 0; y < 8; ++y) {
                const std::size_t sy = std::min(by + y, h - 1);
                for (std::size_t x = 0; x < 8; ++x) {
                    const std::size_t sx = std::min(bx + x, w - 1);
                    block[y * 8 + x] = double(src[sy * w + sx]) * 255.0 - 128.0;
                }
            }
            // Forward DCT: F = C * B * C^T.
            for (int u = 0; u < 8; ++u) {
                for (int x = 0; x < 8; ++x) {
                    double acc = 0.0;
                    for (int y = 0; y < 8; ++y) acc += c[u * 8 + y] * block[y * 8 + x];
                    tmp[u * 8 + x] = acc;
                }
            }
            for (int u = 0; u < 8; ++u) {
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int x = 0; x < 8; ++x) acc += tmp[u * 8 + x] * c[v * 8 + x];
                    const double q = table[u * 8 + v];
                    block[u * 8 + v] = std::round(acc / q) * q;
                }
            }
            // Inverse DCT: B = C^T * F * C.
            for (int y = 0; y < 8; ++y) {
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int u = 0; u < 8; ++u) acc += c[u * 8 + y] * block[u * 8 + v];
                    tmp[y * 8 + v] = acc;
                }
            }
            for (std::size_t y = 0; y < 8; ++y) {
                for (std::size_t x = 0; x < 8; ++x) {
                    double acc = 0.0;
                    for (std::size_t v = 0; v < 8; ++v) acc += tmp[y * 8 + v] * c[v * 8 + x];
                    if (by + y < h && bx + x < w) {
                        const double px = std::clamp(acc + 128.0, 0.0, 255.0);
                        dst[(by + y) * w + bx + x] = float(px / 255.0);
                    }
                }
            }
        }
    }
}

}  // namespace

void validate(const DegradationSpec& spec) {
    std::visit(Overloaded{
                   [](const Awgn& a) {
                       if (!(a.sigma >= 0.0)) throw RangeError("awgn sigma must be >= 0");
                   },
                   [](const AwgnRange& a) {
                       if (!(a.lo >= 0.0 && a.lo <= a.hi && a.hi <= kMaxBlindSigma)) {
                           throw RangeError("awgn range must satisfy 0 <= lo <= hi <= 55");
                       }
                   },
                   [](const Bicubic& b) {
                       if (b.factor < 2 || b.factor > 4) {
                           throw RangeError("bicubic factor must be 2, 3 or 4");
                       }
                   },
                   [](const Jpeg& j) {
                       if (j.quality < kMinDatasetQuality || j.quality > kMaxDatasetQuality) {
                           throw RangeError("jpeg quality must be in [5, 99]");
                       }
                   },
                   [](const JpegRange& j) {
                       if (j.lo < kMinDatasetQuality || j.lo > j.hi || j.hi > kMaxDatasetQuality) {
                           throw RangeError("jpeg quality range must lie in [5, 99]");
                       }
                   },
                   [](const MultiTask& m) {
                       double total = 0.0;
                       for (double w : m.weights) {
                           if (!(w >= 0.0) || !std::isfinite(w)) {
                               throw RangeError("multi-task weights must be finite and >= 0");
                           }
                           total += w;
                       }
                       if (total <= 0.0) throw RangeError("multi-task weights sum to zero");
                   },
               },
               spec);
}

std::string format_spec(const DegradationSpec& spec) {
    return std::visit(
        Overloaded{
            [](const Awgn& a) { return "awgn:" + format_double(a.sigma); },
            [](const AwgnRange& a) {
                return "awgn:" + format_double(a.lo) + "-" + format_double(a.hi);
            },
            [](const Bicubic& b) { return "bicubic:" + std::to_string(b.factor); },
            [](const Jpeg& j) { return "jpeg:" + std::to_string(j.quality); },
            [](const JpegRange& j) {
                return "jpeg:" + std::to_string(j.lo) + "-" + std::to_string(j.hi);
            },
            [](const MultiTask& m) {
                return "multi:" + format_double(m.weights[0]) + "," + format_double(m.weights[1]) +
                       "," + format_double(m.weights[2]);
            },
        },
        spec);
}

DegradationSpec parse_spec(std::string_view token) {
    const auto colon = token.find(':');
    if (colon == std::string_view::npos) {
        throw RangeError("degradation token '" + std::string(token) + "' lacks ':'");
    }
    const std::string_view kind = token.substr(0, colon);
    const std::string_view arg = token.substr(colon + 1);
    DegradationSpec spec;
    if (kind == "awgn") {
        if (auto dash = arg.find('-'); dash != std::string_view::npos) {
            spec = AwgnRange{parse_double(arg.substr(0, dash), token),
                             parse_double(arg.substr(dash + 1), token)};
        } else {
            spec = Awgn{parse_double(arg, token)};
        }
    } else if (kind == "bicubic") {
        spec = Bicubic{parse_int(arg, token)};
    } else if (kind == "jpeg") {
        if (auto dash = arg.find('-'); dash != std::string_view::npos) {
            spec = JpegRange{parse_int(arg.substr(0, dash), token),
                             parse_int(arg.substr(dash + 1), token)};
        } else {
            spec = Jpeg{parse_int(arg, token)};
        }
    } else if (kind == "multi") {
        MultiTask m;
        std::size_t start = 0;
        for (int i = 0; i < 3; ++i) {
            const auto comma = arg.find(',', start);
            if ((i < 2) == (comma == std::string_view::npos)) {
                throw RangeError("multi token needs three comma-separated weights");
            }
            const auto piece = arg.substr(start, i < 2 ? comma - start : std::string_view::npos);
            m.weights[std::size_t(i)] = parse_double(piece, token);
            start = comma + 1;
        }
        spec = m;
    } else {
        throw RangeError("unknown degradation kind '" + std::string(kind) + "'");
    }
    validate(spec);
    return spec;
}

std::string DegradationDescriptor::token() const {
    switch (kind) {
        case Kind::awgn:
            return "awgn:" + format_double(param);
        case Kind::bicubic:
            return "bicubic:" + std::to_string(int(param));
        case Kind::jpeg:
            return "jpeg:" + std::to_string(int(param));
    }
    return {};
}

DegradationDescriptor DegradationDescriptor::parse(std::string_view token) {
    const DegradationSpec spec = parse_spec(token);
    if (auto* a = std::get_if<Awgn>(&spec)) return {Kind::awgn, a->sigma};
    if (auto* b = std::get_if<Bicubic>(&spec)) return {Kind::bicubic, double(b->factor)};
    if (auto* j = std::get_if<Jpeg>(&spec)) return {Kind::jpeg, double(j->quality)};
    throw RangeError("'" + std::string(token) + "' is not a concrete degradation");
}

Image gaussian_noise(const Image& x, double sigma_255, SeededRng& rng) {
    if (!(sigma_255 >= 0.0)) throw RangeError("gaussian_noise: sigma must be >= 0");
    Image y = x;
    const double stddev = sigma_255 / 255.0;
    for (float& v : y.data) v += float(stddev * rng.normal());
    return y;
}

double sample_sigma(double lo, double hi, SeededRng& rng) {
    if (hi < lo) throw RangeError("sample_sigma: lo > hi");
    if (lo == hi) return lo;
    return std::min(rng.uniform(lo, hi), hi);
}

Image bicubic_resize(const Image& x, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw SizeError("bicubic_resize: output size must be >= 1");
    if (x.h == 0 || x.w == 0) throw SizeError("bicubic_resize: empty input");
    const Taps rows = resize_taps(x.h, out_h);
    const Taps cols = resize_taps(x.w, out_w);
    Image out(x.c, out_h, out_w);
    std::vector<double> tmp(out_h * x.w);
    for (std::size_t ch = 0; ch < x.c; ++ch) {
        const float* src = &x.data[ch * x.h * x.w];
        for (std::size_t i = 0; i < out_h; ++i) {
            for (std::size_t xx = 0; xx < x.w; ++xx) {
                double acc = 0.0;
                for (std::size_t k = 0; k < rows.count; ++k) {
                    acc += rows.weight[i * rows.count + k] *
                           double(src[rows.index[i * rows.count + k] * x.w + xx]);
                }
                tmp[i * x.w + xx] = acc;
            }
        }
        float* dst = &out.data[ch * out_h * out_w];
        for (std::size_t i = 0; i < out_h; ++i) {
            for (std::size_t j = 0; j < out_w; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < cols.count; ++k) {
                    acc += cols.weight[j * cols.count + k] *
                           tmp[i * x.w + cols.index[j * cols.count + k]];
                }
                dst[i * out_w + j] = float(acc);
            }
        }
    }
    return out;
}

Image sisr_degrade(const Image& x, int factor) {
    if (factor < 1) throw RangeError("sisr_degrade: factor must be positive");
    const auto f = std::size_t(factor);
    if (x.h < f || x.w < f) {
        throw SizeError("sisr_degrade: image " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                        " smaller than factor " + std::to_string(factor));
    }
    const Image small = bicubic_resize(x, x.h / f, x.w / f);
    return bicubic_resize(small, x.h, x.w);
}

std::array<int, 64> jpeg_quant_table(int quality) {
    if (quality < 1 || quality > 100) {
        throw RangeError("jpeg quality must be in [1, 100], got " + std::to_string(quality));
    }
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<int, 64> t{};
    for (std::size_t i = 0; i < 64; ++i) t[i] = std::clamp((kLumaBase[i] * scale + 50) / 100, 1, 255);
    return t;
}

Image jpeg_degrade(const Image& x, int quality) {
    const std::array<int, 64> table = jpeg_quant_table(quality);
    Image out(x.c, x.h, x.w);
    if (x.h == 0 || x.w == 0) return out;
    const std::size_t plane = x.h * x.w;
    for (std::size_t ch = 0; ch < x.c; ++ch) {
        jpeg_plane(&x.data[ch * plane], &out.data[ch * plane], x.h, x.w, table);
    }
    return out;
}

DegradationDescriptor sample_descriptor(const DegradationSpec& spec, SeededRng& rng) {
    using Kind = DegradationDescriptor::Kind;
    return std::visit(
        Overloaded{
            [](const Awgn& a) { return DegradationDescriptor{Kind::awgn, a.sigma}; },
            [&](const AwgnRange& a) {
                return DegradationDescriptor{Kind::awgn, sample_sigma(a.lo, a.hi, rng)};
            },
            [](const Bicubic& b) { return DegradationDescriptor{Kind::bicubic, double(b.factor)}; },
            [](const Jpeg& j) { return DegradationDescriptor{Kind::jpeg, double(j.quality)}; },
            [&](const JpegRange& j) {
                return DegradationDescriptor{Kind::jpeg, double(rng.uniform_int(j.lo, j.hi))};
            },
            [&](const MultiTask& m) {
                std::size_t active = 0;
                std::size_t only = 0;
                double total = 0.0;
                for (std::size_t i = 0; i < 3; ++i) {
                    if (m.weights[i] > 0.0) {
                        ++active;
                        only = i;
                    }
                    total += m.weights[i];
                }
                std::size_t pick = only;
                if (active > 1) {
                    // Single-kind mixtures draw nothing here, so they replay the
                    // corresponding range spec exactly.
                    const double u = rng.uniform01() * total;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < 3; ++i) {
                        if (m.weights[i] <= 0.0) continue;
                        acc += m.weights[i];
                        pick = i;
                        if (u < acc) break;
                    }
                }
                switch (pick) {
                    case 0:
                        return DegradationDescriptor{Kind::awgn,
                                                     sample_sigma(0.0, kMaxBlindSigma, rng)};
                    case 1:
                        return DegradationDescriptor{Kind::bicubic, double(rng.uniform_int(2, 4))};
                    default:
                        return DegradationDescriptor{
                            Kind::jpeg,
                            double(rng.uniform_int(kMinDatasetQuality, kMaxDatasetQuality))};
                }
            },
        },
        spec);
}

Image apply_descriptor(const Image& x, const DegradationDescriptor& d, SeededRng& rng) {
    switch (d.kind) {
        case DegradationDescriptor::Kind::awgn:
            return gaussian_noise(x, d.param, rng);
        case DegradationDescriptor::Kind::bicubic:
            return sisr_degrade(x, int(d.param));
        case DegradationDescriptor::Kind::jpeg:
            return jpeg_degrade(x, int(d.param));
    }
    return x;
}

Degraded degrade(const Image& x, const DegradationSpec& spec, SeededRng& rng) {
    validate(spec);
    Degraded r;
    r.label = sample_descriptor(spec, rng);
    r.input = apply_descriptor(x, r.label, rng);
    r.residual_target = r.input;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        r.residual_target.data[i] = r.input.data[i] - x.data[i];
    }
    return r;
}

}  // namespace dncnn
