#include "dncnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dncnn/error.hpp"

namespace dncnn {

std::string to_string(TaskMode mode) {
    switch (mode) {
        case TaskMode::S:
            return "S";
        case TaskMode::B:
            return "B";
        case TaskMode::Three:
            return "3";
    }
    return "?";
}

TaskMode parse_task_mode(std::string_view s) {
    if (s == "S" || s == "s") return TaskMode::S;
    if (s == "B" || s == "b") return TaskMode::B;
    if (s == "3" || s == "Three" || s == "three") return TaskMode::Three;
    throw RangeError("unknown task mode '" + std::string(s) + "' (expected S, B or 3)");
}

std::size_t default_patch_size(TaskMode mode) { return mode == TaskMode::S ? 40 : 50; }

std::size_t paper_patch_count(TaskMode mode) {
    switch (mode) {
        case TaskMode::S:
            return 128 * 1600;
        case TaskMode::B:
            return 128 * 3000;
        case TaskMode::Three:
            return 128 * 8000;
    }
    return 0;
}

DegradationSpec mode_degradation(TaskMode mode, double sigma) {
    switch (mode) {
        case TaskMode::S:
            return Awgn{sigma};
        case TaskMode::B:
            return AwgnRange{0.0, kMaxBlindSigma};
        case TaskMode::Three:
            return MultiTask{};
    }
    return Awgn{sigma};
}

std::size_t resolved_patch_count(const DatasetOptions& opts) {
    if (opts.count) return opts.count;
    const std::size_t paper = paper_patch_count(opts.mode);
    if (opts.scale == DatasetScale::paper) return paper;
    if (opts.desk_factor == 0) throw RangeError("desk_factor must be positive");
    return paper / opts.desk_factor;
}

PatchSet extract_patches(const std::vector<Image>& images, std::size_t patch, std::size_t count,
                         const SeededRng& rng, const std::vector<std::string>& names) {
    PatchSet out;
    if (count == 0) return out;
    if (images.empty()) throw SizeError("extract_patches: no source images");
    if (patch == 0) throw SizeError("extract_patches: patch size must be positive");
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].h < patch || images[i].w < patch) {
            const std::string name = i < names.size() ? names[i] : "image #" + std::to_string(i);
            throw SizeError(name + " (" + std::to_string(images[i].h) + "x" +
                            std::to_string(images[i].w) + ") is smaller than patch " +
                            std::to_string(patch));
        }
    }
    out.patches.reserve(count);
    out.positions.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        SeededRng r = rng.derive(i);
        PatchPosition p;
        p.src_index = std::size_t(r.uniform_int(0, std::int64_t(images.size()) - 1));
        const Image& src = images[p.src_index];
        p.top = std::size_t(r.uniform_int(0, std::int64_t(src.h - patch)));
        p.left = std::size_t(r.uniform_int(0, std::int64_t(src.w - patch)));
        out.patches.push_back(crop(src, p.top, p.left, patch, patch));
        out.positions.push_back(p);
    }
    return out;
}

Image augment(const Image& patch, int k) {
    if (patch.h != patch.w) throw ShapeError("augment needs a square patch");
    if (k < 0 || k >= 8) throw RangeError("augment: k must be in [0, 8)");
    if (k == 0) return patch;
    const std::size_t n = patch.h;
    const int turns = k % 4;
    const bool mirror = k >= 4;
    Image out(patch.c, n, n);
    for (std::size_t ch = 0; ch < patch.c; ++ch) {
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                // Output pixel (y, x): undo the mirror, then the quarter turns.
                std::size_t sy = y;
                std::size_t sx = mirror ? n - 1 - x : x;
                for (int t = 0; t < turns; ++t) {
                    // Inverse of one CCW turn: (y, x) <- (x, n-1-y).
                    const std::size_t ny = sx;
                    const std::size_t nx = n - 1 - sy;
                    sy = ny;
                    sx = nx;
                }
                out.at(ch, y, x) = patch.at(ch, sy, sx);
            }
        }
    }
    return out;
}

std::vector<std::string> expand_sources(const std::vector<std::string>& list) {
    std::vector<std::string> out;
    for (const std::string& entry : list) {
        const std::filesystem::path p(entry);
        if (std::filesystem::is_directory(p)) {
            std::vector<std::string> found;
            for (const auto& e : std::filesystem::directory_iterator(p)) {
                const auto ext = e.path().extension();
                if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) {
                    found.push_back(e.path().string());
                }
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(entry);
        }
    }
    return out;
}

std::vector<Image> load_sources(const std::vector<std::string>& paths, int channels) {
    std::vector<Image> images;
    images.reserve(paths.size());
    for (const std::string& p : paths) {
        Image img = load_image(p);
        if (channels == 1) {
            img = to_luma(img);
        } else if (img.c != std::size_t(channels)) {
            throw ShapeError(p + " has " + std::to_string(img.c) + " channels, expected " +
                             std::to_string(channels));
        }
        images.push_back(std::move(img));
    }
    return images;
}

PatchDataset build_dataset(const DatasetOptions& opts) {
    if (opts.sources.empty()) throw SizeError("build_dataset: no sources given");
    Manifest m;
    m.sources = expand_sources(opts.sources);
    if (m.sources.empty()) throw SizeError("build_dataset: source list expands to no images");
    m.patch = opts.patch ? opts.patch : default_patch_size(opts.mode);
    m.count = resolved_patch_count(opts);
    m.seed = opts.seed;
    m.mode = opts.mode;
    m.degrade = opts.degrade ? *opts.degrade : mode_degradation(opts.mode, opts.sigma);
    validate(m.degrade);
    m.channels = opts.channels;
    m.scale = opts.scale;
    m.desk_factor = opts.desk_factor;

    const std::vector<Image> images = load_sources(m.sources, m.channels);
    PatchSet set = extract_patches(images, m.patch, m.count, SeededRng(m.seed), m.sources);
    m.positions = std::move(set.positions);

    PatchDataset ds;
    ds.clean = std::move(set.patches);
    ds.degrade = m.degrade;
    ds.manifest = std::move(m);
    return ds;
}

PatchDataset rebuild_dataset(const Manifest& manifest) {
    const std::vector<Image> images = load_sources(manifest.sources, manifest.channels);
    PatchDataset ds;
    ds.degrade = manifest.degrade;
    ds.manifest = manifest;
    ds.clean.reserve(manifest.positions.size());
    for (const PatchPosition& p : manifest.positions) {
        if (p.src_index >= images.size()) throw SizeError("manifest names a missing source index");
        ds.clean.push_back(crop(images[p.src_index], p.top, p.left, manifest.patch, manifest.patch));
    }
    return ds;
}

// --- manifest text ---------------------------------------------------------

std::string Manifest::to_text() const {
    std::ostringstream out;
    for (const std::string& s : sources) out << "source=" << s << "\n";
    out << "patch=" << patch << "\n";
    out << "count=" << count << "\n";
    out << "seed=" << seed << "\n";
    out << "mode=" << to_string(mode) << "\n";
    out << "degrade=" << format_spec(degrade) << "\n";
    out << "channels=" << channels << "\n";
    out << "scale=" << (scale == DatasetScale::paper ? std::string("paper")
                                                      : "desk:" + std::to_string(desk_factor))
        << "\n";
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const PatchPosition& p = positions[i];
        out << i << "," << p.src_index << "," << p.top << "," << p.left << "\n";
    }
    return out.str();
}

namespace {

template <class U>
U parse_unsigned(std::string_view s, std::size_t offset) {
    U v{};
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
        throw FormatError("invalid number '" + std::string(s) + "' in manifest", offset);
    }
    return v;
}

}  // namespace

Manifest Manifest::parse(const std::string& text) {
    Manifest m;
    m.sources.clear();
    bool have_patch = false;
    bool have_count = false;
    std::size_t line_start = 0;
    while (line_start < text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string_view line(text.data() + line_start, line_end - line_start);
        const std::size_t at = line_start;
        line_start = line_end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        if (auto eq = line.find('='); eq != std::string_view::npos) {
            const std::string_view key = line.substr(0, eq);
            const std::string_view val = line.substr(eq + 1);
            try {
                if (key == "source") {
                    m.sources.emplace_back(val);
                } else if (key == "patch") {
                    m.patch = parse_unsigned<std::size_t>(val, at);
                    have_patch = true;
                } else if (key == "count") {
                    m.count = parse_unsigned<std::size_t>(val, at);
                    have_count = true;
                } else if (key == "seed") {
                    m.seed = parse_unsigned<std::uint64_t>(val, at);
                } else if (key == "mode") {
                    m.mode = parse_task_mode(val);
                } else if (key == "degrade") {
                    m.degrade = parse_spec(val);
                } else if (key == "channels") {
                    m.channels = int(parse_unsigned<unsigned>(val, at));
                } else if (key == "scale") {
                    if (val == "paper") {
                        m.scale = DatasetScale::paper;
                    } else if (val.starts_with("desk:")) {
                        m.scale = DatasetScale::desk;
                        m.desk_factor = parse_unsigned<std::size_t>(val.substr(5), at);
                    } else {
                        throw FormatError("invalid scale '" + std::string(val) + "'", at);
                    }
                } else {
                    throw FormatError("unknown manifest key '" + std::string(key) + "'", at);
                }
            } catch (const RangeError& e) {
                throw FormatError(e.what(), at);
            }
            continue;
        }

        std::size_t fields[4];
        std::size_t start = 0;
        for (int i = 0; i < 4; ++i) {
            const std::size_t comma = line.find(',', start);
            const bool last = i == 3;
            if (last != (comma == std::string_view::npos)) {
                throw FormatError("patch line needs idx,src_index,top,left", at);
            }
            fields[i] = parse_unsigned<std::size_t>(
                line.substr(start, last ? std::string_view::npos : comma - start), at);
            start = comma + 1;
        }
        if (fields[0] != m.positions.size()) {
            throw FormatError("patch lines out of order", at);
        }
        m.positions.push_back({fields[1], fields[2], fields[3]});
    }
    if (!have_patch || !have_count) throw FormatError("manifest lacks patch= or count=", text.size());
    if (m.positions.size() != m.count) {
        throw FormatError("manifest lists " + std::to_string(m.positions.size()) +
                              " patches, count says " + std::to_string(m.count),
                          text.size());
    }
    return m;
}

void Manifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << to_text();
    if (!out) throw Error("failed writing " + path.string());
}

Manifest Manifest::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open manifest " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

}  // namespace dncnn
