#include "dncnn/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "dncnn/dataset.hpp"
#include "dncnn/error.hpp"
#include "text.hpp"

namespace dncnn {
namespace {

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> g{};
    double total = 0.0;
    const double center = double(kWindow / 2);
    for (std::size_t i = 0; i < kWindow; ++i) {
        const double d = double(i) - center;
        g[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
        total += g[i];
    }
    for (double& v : g) v /= total;
    return g;
}

// Separable valid-region filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w) {
    static const std::array<double, kWindow> g = gaussian_window();
    const std::size_t oh = h - kWindow + 1;
    const std::size_t ow = w - kWindow + 1;
    std::vector<double> tmp(h * ow);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * src[y * w + x + k];
            tmp[y * ow + x] = acc;
        }
    }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * tmp[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    }
    return out;
}

double ssim_plane(const float* a, const float* b, std::size_t h, std::size_t w) {
    constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
    constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
    const std::size_t n = h * w;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = a[i];
        y[i] = b[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mu_x = filter_valid(x, h, w);
    const auto mu_y = filter_valid(y, h, w);
    const auto e_xx = filter_valid(xx, h, w);
    const auto e_yy = filter_valid(yy, h, w);
    const auto e_xy = filter_valid(xy, h, w);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mxy = mu_x[i] * mu_y[i];
        const double mxx = mu_x[i] * mu_x[i];
        const double myy = mu_y[i] * mu_y[i];
        const double vx = e_xx[i] - mxx;
        const double vy = e_yy[i] - myy;
        const double cov = e_xy[i] - mxy;
        total += ((2.0 * mxy + c1) * (2.0 * cov + c2)) / ((mxx + myy + c1) * (vx + vy + c2));
    }
    return total / double(mu_x.size());
}

void check_same(const Image& a, const Image& b, const char* what) {
    if (a.c != b.c || a.h != b.h || a.w != b.w) {
        throw ShapeError(std::string(what) + ": image shapes differ");
    }
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
    check_same(a, b, "psnr");
    if (a.data.empty()) throw ShapeError("psnr: empty images");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        sq += d * d;
    }
    const double mse = sq / double(a.data.size());
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Image& a, const Image& b) {
    check_same(a, b, "ssim");
    if (a.h < kWindow || a.w < kWindow) {
        throw SizeError("ssim needs images of at least 11x11, got " + std::to_string(a.h) + "x" +
                        std::to_string(a.w));
    }
    double total = 0.0;
    const std::size_t plane = a.h * a.w;
    for (std::size_t ch = 0; ch < a.c; ++ch) {
        total += ssim_plane(&a.data[ch * plane], &b.data[ch * plane], a.h, a.w);
    }
    return total / double(a.c);
}

void finalize(MetricReport& report) {
    double p = 0.0;
    double s = 0.0;
    for (const MetricRow& r : report.rows) {
        p += r.psnr_db;
        s += r.ssim;
    }
    const double n = report.rows.empty() ? 1.0 : double(report.rows.size());
    report.mean_psnr = p / n;
    report.mean_ssim = s / n;
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out << "image,degradation,psnr_db,ssim\n";
    for (const MetricRow& r : rows) {
        out << r.image << "," << r.degradation << "," << detail::shortest(r.psnr_db) << ","
            << detail::shortest(r.ssim) << "\n";
    }
    out << "MEAN,," << detail::shortest(mean_psnr) << "," << detail::shortest(mean_ssim) << "\n";
    return out.str();
}

void MetricReport::save_csv(const std::filesystem::path& path) const {
    detail::write_text(path, to_csv());
}

namespace {

template <class Restore>
MetricReport run_report(const std::vector<NamedImage>& images, const DegradationSpec& spec,
                        std::uint64_t seed, Restore&& restore) {
    validate(spec);
    MetricReport report;
    report.seed = seed;
    report.rows.resize(images.size());
    const SeededRng root(seed);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const NamedImage& item = images[i];
        try {
            SeededRng rng = root.derive(i);
            Degraded d = degrade(item.image, spec, rng);
            const Image restored = clamp01(restore(d.input));
            MetricRow& row = report.rows[i];
            row.image = item.name;
            row.degradation = d.label.token();
            row.psnr_db = psnr(restored, item.image);
            row.ssim = ssim(restored, item.image);
        } catch (const Error& e) {
            throw Error("evaluating " + item.name + ": " + e.what());
        }
    }
    finalize(report);
    return report;
}

}  // namespace

MetricReport evaluate(const Model<float>& model, const std::vector<NamedImage>& images,
                      const DegradationSpec& spec, std::uint64_t seed) {
    return run_report(images, spec, seed, [&](const Image& input) {
        return from_tensor(denoise(model, to_tensor(input)));
    });
}

MetricReport evaluate_degraded(const std::vector<NamedImage>& images, const DegradationSpec& spec,
                               std::uint64_t seed) {
    return run_report(images, spec, seed, [](const Image& input) { return input; });
}

std::string emit_curves(const std::vector<std::pair<std::string, History>>& histories) {
    if (histories.empty()) throw ShapeError("emit_curves: no histories");
    const std::size_t epochs = histories.front().second.epochs.size();
    for (const auto& [label, h] : histories) {
        if (h.epochs.size() != epochs) {
            throw ShapeError("emit_curves: history '" + label + "' has " +
                             std::to_string(h.epochs.size()) + " epochs, expected " +
                             std::to_string(epochs));
        }
        if (label.empty() || label.find_first_of(",\n") != std::string::npos) {
            throw ShapeError("emit_curves: invalid label '" + label + "'");
        }
    }
    std::ostringstream out;
    out << "epoch";
    for (const auto& entry : histories) out << "," << entry.first;
    out << "\n";
    for (std::size_t e = 0; e < epochs; ++e) {
        out << histories.front().second.epochs[e].epoch;
        for (const auto& entry : histories) {
            out << ",";
            const auto& v = entry.second.epochs[e].val_psnr;
            if (v) out << detail::shortest(*v);
        }
        out << "\n";
    }
    return out.str();
}

void save_curves(const std::vector<std::pair<std::string, History>>& histories,
                 const std::filesystem::path& path) {
    const std::string text = emit_curves(histories);  // throws before touching the file
    detail::write_text(path, text);
}

std::vector<NamedImage> load_named_images(const std::vector<std::string>& paths, int channels) {
    std::vector<NamedImage> out;
    const std::vector<Image> images = load_sources(paths, channels);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        out.push_back({std::filesystem::path(paths[i]).filename().string(), images[i]});
    }
    return out;
}

}  // namespace dncnn
