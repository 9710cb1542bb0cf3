#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dncnn/degradation.hpp"
#include "dncnn/image.hpp"
#include "dncnn/rng.hpp"

namespace dncnn {

/// S: one fixed noise level. B: blind noise in [0, 55]. Three: noise, SISR
/// and JPEG mixed.
enum class TaskMode { S, B, Three };
enum class DatasetScale { paper, desk };

std::string to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view s);

std::size_t default_patch_size(TaskMode mode);
/// Patch count at paper scale.
std::size_t paper_patch_count(TaskMode mode);

struct PatchPosition {
    std::size_t src_index = 0;
    std::size_t top = 0;
    std::size_t left = 0;

    friend bool operator==(const PatchPosition&, const PatchPosition&) = default;
};

struct Manifest {
    std::vector<std::string> sources;
    std::size_t patch = 0;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    TaskMode mode = TaskMode::S;
    DegradationSpec degrade = Awgn{25.0};
    int channels = 1;
    DatasetScale scale = DatasetScale::desk;
    std::size_t desk_factor = 100;
    std::vector<PatchPosition> positions;

    std::string to_text() const;
    static Manifest parse(const std::string& text);

    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);
};

/// Clean patches plus the degradation applied to them at batch time.
struct PatchDataset {
    std::vector<Image> clean;
    DegradationSpec degrade = Awgn{25.0};
    Manifest manifest;

    std::size_t size() const { return clean.size(); }
};

struct PatchSet {
    std::vector<Image> patches;
    std::vector<PatchPosition> positions;
};

/// `count` square crops at uniform random positions of uniformly chosen
/// images. Patch i depends only on (rng seed, i). `names` label errors.
PatchSet extract_patches(const std::vector<Image>& images, std::size_t patch, std::size_t count,
                         const SeededRng& rng, const std::vector<std::string>& names = {});

/// Element k of the dihedral group D4 on a square patch: k % 4 quarter turns
/// counter-clockwise, followed by a horizontal mirror when k >= 4.
Image augment(const Image& patch, int k);

struct DatasetOptions {
    TaskMode mode = TaskMode::S;
    double sigma = 25.0;  // S mode only
    std::vector<std::string> sources;
    DatasetScale scale = DatasetScale::desk;
    std::size_t desk_factor = 100;
    std::size_t patch = 0;  // 0: mode default
    std::size_t count = 0;  // 0: derived from mode and scale
    int channels = 1;
    std::uint64_t seed = 0;
    std::optional<DegradationSpec> degrade;  // overrides the mode default
};

/// Degradation a mode trains on: Awgn{sigma}, AwgnRange{0, 55} or MultiTask.
DegradationSpec mode_degradation(TaskMode mode, double sigma);
std::size_t resolved_patch_count(const DatasetOptions& opts);

/// Files named by `list`; directories expand to their sorted .pgm/.ppm files.
std::vector<std::string> expand_sources(const std::vector<std::string>& list);
/// Loads images, converting to luma when `channels` is 1.
std::vector<Image> load_sources(const std::vector<std::string>& paths, int channels);

PatchDataset build_dataset(const DatasetOptions& opts);
/// Recrops the recorded positions; bitwise identical to the original build.
PatchDataset rebuild_dataset(const Manifest& manifest);

}  // namespace dncnn
