#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dncnn/error.hpp"
#include "dncnn/metrics.hpp"
#include "dncnn/model.hpp"

using namespace dncnn;

namespace {

Image natural(const char* name = "camera_0.pgm") {
    return load_image(std::string(DNCNN_TEST_DATA) + "/heldout/" + name);
}

Model<float> zero_model(bool residual) {
    SeededRng rng(1);
    Model<float> m = build_network<float>({3, 4, 1, false, residual}, rng);
    for (Layer<float>& l : m.layers) {
        for (float& w : l.conv.weights.data()) w = 0.0f;
        for (float& b : *l.conv.bias) b = 0.0f;
    }
    return m;
}

History history(std::size_t epochs, double base) {
    History h;
    for (std::size_t e = 0; e < epochs; ++e) h.epochs.push_back({int(e), 0.1, 1.0, base + double(e)});
    return h;
}

}  // namespace

TEST_CASE("PSNR closed forms") {
    const Image x = natural();
    CHECK(psnr(x, x) == kPsnrCap);
    Image a(1, 10, 10, 0.2f);
    Image b(1, 10, 10, 0.2f);
    // MSE 0.01 from a 0.1 offset on every pixel; a, b are floats so the
    // difference carries float rounding, which the double-precision
    // reference below reproduces.
    for (float& v : b.data) v += 0.1f;
    const double mse = std::pow(double(b.data[0]) - double(a.data[0]), 2);
    CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse)) < 1e-9);
    CHECK(std::abs(10.0 * std::log10(1.0 / mse) - 20.0) < 1e-5);

    Image c(1, 4, 4, 0.0f);
    Image d(1, 4, 4, 1.0f);
    CHECK(std::abs(psnr(c, d) - 0.0) < 1e-9);
    CHECK(std::abs(psnr(c, d, 255.0) - 10.0 * std::log10(255.0 * 255.0)) < 1e-9);
    Image e(1, 4, 4, 0.0f);
    Image f(1, 4, 4, float(1.0 / 255.0));
    const double step = double(float(1.0 / 255.0));
    CHECK(std::abs(psnr(e, f) - 10.0 * std::log10(1.0 / (step * step))) < 1e-9);
    CHECK(psnr(e, f) == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK_THROWS_AS(psnr(a, Image(1, 10, 11)), ShapeError);
}

TEST_CASE("SSIM identity, symmetry and the two-constant case") {
    const Image x = natural();
    const Image y = natural("camera_1.pgm");
    CHECK(std::abs(ssim(x, x) - 1.0) < 1e-9);
    CHECK(std::abs(ssim(x, y) - ssim(y, x)) < 1e-12);
    CHECK(ssim(x, y) < 1.0);
    const double m1 = double(0.2f), m2 = double(0.7f);
    const double c1 = 0.01 * 0.01;
    const double want = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
    const double got = ssim(Image(1, 16, 16, 0.2f), Image(1, 16, 16, 0.7f));
    CHECK(got < 1.0);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK_THROWS_AS(ssim(Image(1, 10, 20), Image(1, 10, 20)), SizeError);
}

TEST_CASE("PSNR falls as noise grows") {
    const Image x = natural();
    double prev = kPsnrCap + 1;
    for (double sigma : {0.0, 5.0, 15.0, 25.0, 50.0}) {
        SeededRng rng(3);
        const double p = psnr(gaussian_noise(x, sigma, rng), x);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("evaluation of the zero residual model equals the noisy baseline") {
    const std::vector<NamedImage> imgs{{"a", natural()}, {"b", natural("chelsea_0.pgm")}};
    const MetricReport noisy = evaluate_degraded(imgs, Awgn{25}, 7);
    const MetricReport model = evaluate(zero_model(true), imgs, Awgn{25}, 7);
    REQUIRE(model.rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        // evaluate clamps the estimate to [0, 1]; the baseline does too.
        CHECK(model.rows[i].psnr_db == doctest::Approx(noisy.rows[i].psnr_db).epsilon(1e-12));
    }
    const MetricReport clean = evaluate(zero_model(true), imgs, Awgn{0}, 7);
    for (const MetricRow& r : clean.rows) CHECK(r.psnr_db == kPsnrCap);
    CHECK(clean.mean_psnr == kPsnrCap);
    const std::string csv = model.to_csv();
    CHECK(csv.rfind("image,degradation,psnr_db,ssim\n", 0) == 0);
    CHECK(csv.find("\nMEAN,") != std::string::npos);
}

TEST_CASE("curve emission") {
    const std::string one = emit_curves({{"RL_BN", history(3, 20)}});
    CHECK(std::count(one.begin(), one.end(), '\n') == 4);
    CHECK(one.rfind("epoch,RL_BN\n", 0) == 0);
    const std::string four = emit_curves({{"RL_BN", history(2, 1)},
                                          {"RL_noBN", history(2, 2)},
                                          {"noRL_BN", history(2, 3)},
                                          {"noRL_noBN", history(2, 4)}});
    CHECK(four.substr(0, four.find('\n')) == "epoch,RL_BN,RL_noBN,noRL_BN,noRL_noBN");
    const auto path = std::filesystem::temp_directory_path() / "dncnn_test_curves_empty.csv";
    std::filesystem::remove(path);
    CHECK_THROWS_AS(save_curves({}, path), ShapeError);
    CHECK_FALSE(std::filesystem::exists(path));
    CHECK_THROWS_AS(emit_curves({{"a", history(2, 1)}, {"b", history(3, 1)}}), ShapeError);
}
