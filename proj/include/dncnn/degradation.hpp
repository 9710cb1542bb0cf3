#pragma once

#include <array>
#include <string>
#include <string_view>
#include <variant>

#include "dncnn/image.hpp"
#include "dncnn/rng.hpp"

namespace dncnn {

/// Upper end of the blind noise range, on the 0-255 scale.
inline constexpr double kMaxBlindSigma = 55.0;
inline constexpr int kMinDatasetQuality = 5;
inline constexpr int kMaxDatasetQuality = 99;

// Noise levels are quoted on the 0-255 scale.
struct Awgn {
    double sigma = 25.0;
};
struct AwgnRange {
    double lo = 0.0;
    double hi = kMaxBlindSigma;
};
struct Bicubic {
    int factor = 2;
};
struct Jpeg {
    int quality = 50;
};
struct JpegRange {
    int lo = kMinDatasetQuality;
    int hi = kMaxDatasetQuality;
};
/// Mixture over {AWGN, bicubic SISR, JPEG}. The chosen kind then draws its
/// parameter: sigma uniform in [0, 55], factor uniform in {2, 3, 4}, quality
/// uniform in [5, 99].
struct MultiTask {
    std::array<double, 3> weights{1.0, 1.0, 1.0};
};

using DegradationSpec = std::variant<Awgn, AwgnRange, Bicubic, Jpeg, JpegRange, MultiTask>;

void validate(const DegradationSpec& spec);

/// Text token: `awgn:25.0`, `awgn:0.0-55.0`, `bicubic:3`, `jpeg:10`,
/// `jpeg:5-99`, `multi:1,1,1`.
std::string format_spec(const DegradationSpec& spec);
DegradationSpec parse_spec(std::string_view token);

/// The concrete corruption applied to one image.
struct DegradationDescriptor {
    enum class Kind { awgn, bicubic, jpeg };
    Kind kind = Kind::awgn;
    double param = 0.0;

    /// `awgn:25.0`, `bicubic:3`, `jpeg:10`.
    std::string token() const;
    static DegradationDescriptor parse(std::string_view token);

    friend bool operator==(const DegradationDescriptor&, const DegradationDescriptor&) = default;
};

/// y = x + v with v ~ N(0, (sigma_255 / 255)^2) per element. Not clamped.
Image gaussian_noise(const Image& x, double sigma_255, SeededRng& rng);

/// Uniform continuous sample in [lo, hi].
double sample_sigma(double lo, double hi, SeededRng& rng);

/// Separable bicubic resampling (Keys kernel, a = -0.5) with half-pixel
/// centers and replicated borders. When shrinking, the kernel is widened by
/// the inverse scale (antialiasing); weights are normalized to sum to 1.
Image bicubic_resize(const Image& x, std::size_t out_h, std::size_t out_w);

/// Bicubic downscale by `factor` (floor sizes) and back up to the input size.
Image sisr_degrade(const Image& x, int factor);

/// Baseline luminance quantization table for `quality` in [1, 100], row-major.
std::array<int, 64> jpeg_quant_table(int quality);

/// Pixel-domain effect of baseline JPEG: 8x8 DCT, quantization with the
/// quality-scaled luminance table, dequantization, inverse DCT, clamp.
/// Multi-channel images are coded channel by channel.
Image jpeg_degrade(const Image& x, int quality);

struct Degraded {
    Image input;
    Image residual_target;  // input - x
    DegradationDescriptor label;
};

Degraded degrade(const Image& x, const DegradationSpec& spec, SeededRng& rng);

/// The concrete corruption `degrade` would apply, without applying it.
DegradationDescriptor sample_descriptor(const DegradationSpec& spec, SeededRng& rng);
Image apply_descriptor(const Image& x, const DegradationDescriptor& d, SeededRng& rng);

}  // namespace dncnn
