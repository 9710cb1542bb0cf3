#include <doctest.h>

#include <filesystem>
#include <string>

#include "dncnn/error.hpp"
#include "dncnn/image.hpp"
#include "dncnn/rng.hpp"

using namespace dncnn;

namespace {

std::vector<std::uint8_t> bytes(const std::string& header, std::vector<std::uint8_t> raster) {
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), raster.begin(), raster.end());
    return out;
}

}  // namespace

TEST_CASE("P5 decoding maps byte k to k/255") {
    const Image img = decode_pnm(bytes("P5 2 2 255\n", {0, 128, 255, 64}));
    CHECK(img.c == 1);
    CHECK(img.h == 2);
    CHECK(img.w == 2);
    CHECK(img.data == std::vector<float>{0.0f, 128.0f / 255.0f, 1.0f, 64.0f / 255.0f});
}

TEST_CASE("headers may carry comments; P6 is planar after decoding") {
    const Image img = decode_pnm(bytes("P6\n# made by hand\n2 1\n255\n", {10, 20, 30, 40, 50, 60}));
    CHECK(img.c == 3);
    CHECK(img.at(0, 0, 1) == 40.0f / 255.0f);
    CHECK(img.at(2, 0, 0) == 30.0f / 255.0f);
}

TEST_CASE("malformed files") {
    CHECK_THROWS_AS(decode_pnm(bytes("P5 2 2 65535\n", {0, 0, 0, 0, 0, 0, 0, 0})), FormatError);
    CHECK_THROWS_AS(decode_pnm(bytes("P5 2 2 255\n", {0, 1, 2})), FormatError);
    CHECK_THROWS_AS(decode_pnm(bytes("P2 2 2 255\n", {0, 1, 2, 3})), FormatError);
    CHECK_THROWS_AS(decode_pnm(bytes("P5 2", {})), FormatError);
    CHECK_THROWS_AS(load_image("/nonexistent/image.pgm"), Error);
}

TEST_CASE("byte-valued images round-trip exactly") {
    SeededRng rng(5);
    for (std::size_t c : {std::size_t(1), std::size_t(3)}) {
        Image img(c, 7, 5);
        for (float& v : img.data) v = float(rng.uniform_int(0, 255)) / 255.0f;
        const auto path = std::filesystem::temp_directory_path() /
                          ("dncnn_test_image_" + std::to_string(c) + (c == 1 ? ".pgm" : ".ppm"));
        save_image(img, path);
        CHECK(load_image(path) == img);
        std::filesystem::remove(path);
    }
}

TEST_CASE("encoding clamps and rounds half up") {
    Image img(1, 1, 4);
    img.data = {-0.3f, 1.7f, 0.5f / 255.0f, 2.5f / 255.0f};
    const auto b = encode_pnm(img);
    const std::vector<std::uint8_t> raster(b.end() - 4, b.end());
    CHECK(raster == std::vector<std::uint8_t>{0, 255, 1, 3});
}

TEST_CASE("luma, crop and tensor views") {
    Image rgb(3, 1, 1);
    rgb.data = {1.0f, 0.0f, 0.0f};
    CHECK(to_luma(rgb).data[0] == doctest::Approx(0.299f));
    Image img(1, 3, 4);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = float(i);
    const Image part = crop(img, 1, 2, 2, 2);
    CHECK(part.data == std::vector<float>{6, 7, 10, 11});
    CHECK_THROWS_AS(crop(img, 2, 0, 2, 2), SizeError);
    CHECK(from_tensor(to_tensor(img)) == img);
}
