#include "dncnn/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "dncnn/error.hpp"

namespace dncnn {
namespace {

class HeaderParser {
public:
    HeaderParser(const std::vector<std::uint8_t>& b, std::size_t start) : bytes_(b), pos_(start) {}

    std::size_t offset() const { return pos_; }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + std::size_t(bytes_[pos_] - '0');
            if (value > (1u << 24)) throw FormatError(std::string(what) + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw FormatError(std::string("expected ") + what, start);
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw FormatError("expected whitespace after maxval", pos_);
        }
        ++pos_;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const auto ch = bytes_[pos_];
            if (ch == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(ch)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_;
};

std::uint8_t to_byte(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return std::uint8_t(std::floor(c * 255.0f + 0.5f));
}

}  // namespace

Image decode_pnm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError("not a binary PGM/PPM file (expected P5 or P6)", 0);
    }
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;
    HeaderParser p(bytes, 2);
    const std::size_t width = p.number("width");
    const std::size_t height = p.number("height");
    const std::size_t maxval_at = p.offset();
    const std::size_t maxval = p.number("maxval");
    if (maxval != 255) {
        throw FormatError("unsupported maxval " + std::to_string(maxval) + " (only 255)",
                          maxval_at);
    }
    if (width == 0 || height == 0) throw FormatError("image has zero size", maxval_at);
    p.single_whitespace();

    const std::size_t start = p.offset();
    const std::size_t pixels = width * height;
    if (bytes.size() - start < pixels * channels) {
        throw FormatError("truncated raster: expected " + std::to_string(pixels * channels) +
                              " bytes",
                          bytes.size());
    }
    Image img(channels, height, width);
    for (std::size_t i = 0; i < pixels; ++i) {
        for (std::size_t ch = 0; ch < channels; ++ch) {
            img.data[ch * pixels + i] = float(bytes[start + i * channels + ch]) / 255.0f;
        }
    }
    return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& img) {
    if (img.c != 1 && img.c != 3) throw ShapeError("PNM export needs 1 or 3 channels");
    const std::string header = std::string(img.c == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const std::size_t pixels = img.h * img.w;
    out.reserve(out.size() + pixels * img.c);
    for (std::size_t i = 0; i < pixels; ++i) {
        for (std::size_t ch = 0; ch < img.c; ++ch) out.push_back(to_byte(img.data[ch * pixels + i]));
    }
    return out;
}

Image load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_pnm(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what(), e.offset());
    }
}

void save_image(const Image& img, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
}

Image to_luma(const Image& img) {
    if (img.c == 1) return img;
    if (img.c != 3) throw ShapeError("to_luma needs 1 or 3 channels");
    Image out(1, img.h, img.w);
    const std::size_t n = img.h * img.w;
    for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = 0.299f * img.data[i] + 0.587f * img.data[n + i] + 0.114f * img.data[2 * n + i];
    }
    return out;
}

Image clamp01(Image img) {
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width) {
    if (top + height > img.h || left + width > img.w) {
        throw SizeError("crop window exceeds image bounds");
    }
    Image out(img.c, height, width);
    for (std::size_t ch = 0; ch < img.c; ++ch) {
        for (std::size_t y = 0; y < height; ++y) {
            const float* src = &img.data[(ch * img.h + top + y) * img.w + left];
            std::copy(src, src + width, &out.data[(ch * height + y) * width]);
        }
    }
    return out;
}

Tensor to_tensor(const Image& img) {
    return Tensor(Shape{1, img.c, img.h, img.w}, img.data);
}

Image from_tensor(const Tensor& t, std::size_t n) {
    const Shape& s = t.shape();
    if (n >= s.n) throw ShapeError("from_tensor: sample index out of range");
    Image img(s.c, s.h, s.w);
    auto src = t.sample(n);
    std::copy(src.begin(), src.end(), img.data.begin());
    return img;
}

}  // namespace dncnn
