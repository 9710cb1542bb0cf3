#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dncnn/degradation.hpp"
#include "dncnn/history.hpp"
#include "dncnn/image.hpp"
#include "dncnn/model.hpp"

namespace dncnn {

/// Returned by psnr when the images are identical.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE) over all pixels and channels.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over the valid region of an 11x11 Gaussian window (std 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Channels are scored separately
/// and averaged.
double ssim(const Image& a, const Image& b);

struct NamedImage {
    std::string name;
    Image image;
};

struct MetricRow {
    std::string image;
    std::string degradation;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    std::string model_file;
    std::string mode;
    std::uint64_t seed = 0;
    std::string timestamp;

    /// `image,degradation,psnr_db,ssim` rows and a trailing MEAN row.
    std::string to_csv() const;
    void save_csv(const std::filesystem::path& path) const;
};

/// Recomputes the aggregate means from the rows.
void finalize(MetricReport& report);

/// Degrades every image with a per-image stream of `seed`, denoises in infer
/// mode, clamps to [0, 1] and scores against the clean image.
MetricReport evaluate(const Model<float>& model, const std::vector<NamedImage>& images,
                      const DegradationSpec& spec, std::uint64_t seed);

/// Scores the degraded inputs themselves, clamped like restored outputs (the
/// do-nothing baseline).
MetricReport evaluate_degraded(const std::vector<NamedImage>& images, const DegradationSpec& spec,
                               std::uint64_t seed);

/// `epoch,<label1>,<label2>,...` of validation PSNR per epoch.
std::string emit_curves(const std::vector<std::pair<std::string, History>>& histories);
void save_curves(const std::vector<std::pair<std::string, History>>& histories,
                 const std::filesystem::path& path);

std::vector<NamedImage> load_named_images(const std::vector<std::string>& paths, int channels);

}  // namespace dncnn
