#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dncnn/tensor.hpp"

namespace dncnn {

/// Planar image with c in {1, 3}, intensities nominally in [0, 1].
struct Image {
    std::size_t c = 1;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<float> data;

    Image() = default;
    Image(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
        : c(channels), h(height), w(width), data(channels * height * width, fill) {}

    std::size_t size() const noexcept { return data.size(); }

    float& at(std::size_t ch, std::size_t y, std::size_t x) noexcept {
        return data[(ch * h + y) * w + x];
    }
    float at(std::size_t ch, std::size_t y, std::size_t x) const noexcept {
        return data[(ch * h + y) * w + x];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Binary PGM (P5) or PPM (P6) with maxval 255. Byte k maps to k / 255.
Image decode_pnm(const std::vector<std::uint8_t>& bytes);
/// Clamps to [0, 1] and rounds half up to bytes.
std::vector<std::uint8_t> encode_pnm(const Image& img);

Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

/// BT.601 luma; single-channel images are returned unchanged.
Image to_luma(const Image& img);

Image clamp01(Image img);

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width);

/// (1, c, h, w) tensor.
Tensor to_tensor(const Image& img);
/// Sample `n` of a batch tensor.
Image from_tensor(const Tensor& t, std::size_t n = 0);

}  // namespace dncnn
