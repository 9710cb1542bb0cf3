#include "dncnn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>

#include "dncnn/config.hpp"
#include "dncnn/dataset.hpp"
#include "dncnn/error.hpp"
#include "dncnn/metrics.hpp"
#include "dncnn/model.hpp"
#include "dncnn/train.hpp"
#include "text.hpp"

namespace dncnn {
namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool deterministic = false;
    std::string model;
    std::vector<std::string> in;
    std::string out;
    std::optional<double> sigma;
    std::optional<int> factor;
    std::optional<int> quality;
    std::string optimizer;
    std::vector<std::string> overrides;  // key=value
};

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunConfig load_config(const Options& o) {
    RunConfig cfg = o.config.empty() ? parse_config_text("") : parse_config(o.config);
    for (const std::string& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) cfg.set("seed", std::to_string(*o.seed));
    if (o.threads) {
        cfg.set("threads", std::to_string(*o.threads));
    } else if (const char* env = std::getenv("DNCNN_THREADS"); env && *env) {
        cfg.set("threads", env);
    }
    if (o.deterministic) cfg.set("deterministic", "true");
    if (!o.optimizer.empty()) cfg.set("optimizer", o.optimizer);
    return cfg;
}

fs::path output_path(const std::string& flag, const std::string& key_value, const RunConfig& cfg,
                     const char* fallback) {
    if (!flag.empty()) return flag;
    if (!key_value.empty()) return key_value;
    return fs::path(cfg.out_dir) / fallback;
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
    return fs::path(p.string() + suffix);
}

void print_warnings(const RunConfig& cfg, std::ostream& err) {
    for (const std::string& w : cfg.warnings) err << "warning: " << w << "\n";
}

// At most one of --sigma/--factor/--quality; nullopt when none was given.
std::optional<DegradationSpec> flag_degradation(const Options& o) {
    const int given = int(o.sigma.has_value()) + int(o.factor.has_value()) + int(o.quality.has_value());
    if (given > 1) throw ConfigError("give only one of --sigma, --factor, --quality");
    if (o.sigma) {
        if (*o.sigma < 0.0) throw ConfigError("--sigma must be >= 0");
        return Awgn{*o.sigma};
    }
    if (o.factor) {
        if (*o.factor < 2 || *o.factor > 4) throw ConfigError("--factor must be 2, 3 or 4");
        return Bicubic{*o.factor};
    }
    if (o.quality) {
        if (*o.quality < 1 || *o.quality > 100) throw ConfigError("--quality must be in [1, 100]");
        return Jpeg{*o.quality};
    }
    return std::nullopt;
}

PatchDataset dataset_for(const RunConfig& cfg) {
    if (!cfg.manifest.empty()) return rebuild_dataset(Manifest::load(cfg.manifest));
    require_key(cfg, "sources");
    return build_dataset(cfg.dataset_options());
}

ValidationSet validation_for(const RunConfig& cfg) {
    ValidationSet val;
    if (!cfg.val_sources.empty()) {
        val.images = load_named_images(expand_sources(cfg.val_sources), cfg.model.image_channels);
    }
    val.degrade = cfg.val_degrade;
    val.seed = cfg.seed;
    return val;
}

Model<float> initial_model(const RunConfig& cfg, const NetworkSpec& spec) {
    if (!cfg.init_model.empty()) {
        Model<float> m = load_model(cfg.init_model);
        if (!(m.spec == spec)) {
            throw ConfigError("init_model " + cfg.init_model +
                              " does not match the configured network");
        }
        return m;
    }
    SeededRng rng = SeededRng(cfg.seed).derive(0);
    return build_network<float>(spec, rng, cfg.bn_gamma);
}

EpochCallback progress(std::ostream& out, const std::string& label) {
    return [&out, label](const EpochRecord& r) {
        out << label << "epoch " << r.epoch << " lr " << r.lr << " loss " << r.train_loss;
        if (r.val_psnr) out << " val_psnr " << *r.val_psnr;
        out << std::endl;
    };
}

int cmd_build_data(const Options& o, std::ostream& out, std::ostream& err) {
    RunConfig cfg = load_config(o);
    print_warnings(cfg, err);
    require_key(cfg, "sources");
    const PatchDataset ds = build_dataset(cfg.dataset_options());
    const fs::path path = output_path(o.out, cfg.manifest_out, cfg, "manifest.txt");
    ensure_parent(path);
    ds.manifest.save(path);
    cfg.write_echo(with_suffix(path, ".cfg"));
    out << "wrote " << ds.size() << " patches of " << ds.manifest.patch << "x" << ds.manifest.patch
        << " to " << path.string() << "\n";
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    RunConfig cfg = load_config(o);
    print_warnings(cfg, err);
    const PatchDataset ds = dataset_for(cfg);
    const ValidationSet val = validation_for(cfg);
    Model<float> model = initial_model(cfg, cfg.model);

    const fs::path model_path = output_path(o.out, cfg.model_out, cfg, "model.dncnn");
    ensure_parent(model_path);
    cfg.write_echo(with_suffix(model_path, ".cfg"));

    TrainResult r = train(std::move(model), ds, val, cfg.train, progress(out, ""));
    save_model(r.model, model_path);
    const fs::path hist = cfg.history_out.empty() ? with_suffix(model_path, ".history.csv")
                                                  : fs::path(cfg.history_out);
    ensure_parent(hist);
    r.history.save_csv(hist);
    out << "saved " << model_path.string() << "\n";
    return kExitOk;
}

int cmd_denoise(const Options& o, std::ostream& out, std::ostream&) {
    if (o.model.empty() || o.in.size() != 1 || o.out.empty()) {
        throw ConfigError("denoise needs --model, one --in, and --out");
    }
    const fs::path in = o.in.front();
    if (fs::exists(o.out) && fs::equivalent(in, o.out)) {
        throw ConfigError("--out must differ from --in");
    }
    const Model<float> model = load_model(o.model);
    Image img = load_image(in);
    if (model.spec.image_channels == 1) img = to_luma(img);
    if (img.c != std::size_t(model.spec.image_channels)) {
        throw ShapeError("image has " + std::to_string(img.c) + " channels, model expects " +
                         std::to_string(model.spec.image_channels));
    }
    const Image clean = clamp01(from_tensor(denoise(model, to_tensor(img))));
    ensure_parent(o.out);
    save_image(clean, o.out);
    out << "wrote " << o.out << "\n";
    return kExitOk;
}

int cmd_degrade(const Options& o, std::ostream& out, std::ostream&) {
    if (o.in.size() != 1 || o.out.empty()) throw ConfigError("degrade needs one --in and --out");
    const std::optional<DegradationSpec> spec = flag_degradation(o);
    if (!spec) throw ConfigError("degrade needs one of --sigma, --factor, --quality");
    const Image x = load_image(o.in.front());
    SeededRng rng(o.seed.value_or(0));
    Image y;
    if (auto* j = std::get_if<Jpeg>(&*spec)) {
        y = jpeg_degrade(x, j->quality);  // accepts the full [1, 100] range
    } else {
        y = degrade(x, *spec, rng).input;
    }
    ensure_parent(o.out);
    save_image(y, o.out);
    out << "wrote " << o.out << " (" << format_spec(*spec) << ")\n";
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.model.empty()) throw ConfigError("eval needs --model");
    RunConfig cfg = load_config(o);
    print_warnings(cfg, err);
    const Model<float> model = load_model(o.model);
    std::vector<std::string> paths = o.in.empty() ? cfg.val_sources : o.in;
    if (paths.empty()) throw ConfigError("eval needs --in images or the val_sources key");
    const std::vector<NamedImage> images =
        load_named_images(expand_sources(paths), model.spec.image_channels);
    DegradationSpec spec = flag_degradation(o).value_or(cfg.val_degrade);

    MetricReport report = evaluate(model, images, spec, cfg.seed);
    report.model_file = o.model;
    report.mode = format_spec(spec);
    report.timestamp = utc_timestamp();
    const fs::path path = output_path(o.out, cfg.report_out, cfg, "report.csv");
    ensure_parent(path);
    report.save_csv(path);
    cfg.set("val_degrade", format_spec(spec));
    cfg.write_echo(with_suffix(path, ".cfg"));
    out << "mean psnr " << report.mean_psnr << " dB, mean ssim " << report.mean_ssim << " over "
        << report.rows.size() << " images (" << report.mode << ", model " << report.model_file
        << ", seed " << report.seed << ", " << report.timestamp << ")\n";
    return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
    RunConfig cfg = load_config(o);
    print_warnings(cfg, err);
    require_key(cfg, "val_sources");
    const PatchDataset ds = dataset_for(cfg);
    const ValidationSet val = validation_for(cfg);
    const fs::path dir = o.out.empty() ? fs::path(cfg.out_dir) : fs::path(o.out);
    fs::create_directories(dir);
    const std::string opt = to_string(cfg.train.optimizer);
    const fs::path curves =
        cfg.curves_out.empty() ? dir / ("curves_" + opt + ".csv") : fs::path(cfg.curves_out);
    ensure_parent(curves);
    cfg.write_echo(with_suffix(curves, ".cfg"));

    std::vector<std::pair<std::string, History>> histories;
    for (const auto& [rl, bn] : {std::pair{true, true}, {true, false}, {false, true}, {false, false}}) {
        const Variant v = make_variant(cfg.model, rl, bn);
        const std::string label = variant_label(rl, bn);
        TrainResult r = train(initial_model(cfg, v.spec), ds, val, cfg.train,
                              progress(out, label + " "));
        save_model(r.model, dir / (label + "_" + opt + ".dncnn"));
        r.history.save_csv(dir / (label + "_" + opt + ".history.csv"));
        histories.emplace_back(label, std::move(r.history));
    }
    save_curves(histories, curves);
    out << "wrote " << curves.string() << "\n";
    return kExitOk;
}

int cmd_inspect(const Options& o, std::ostream& out, std::ostream&) {
    if (o.model.empty()) throw ConfigError("inspect-model needs --model");
    const Model<float> m = load_model(o.model);
    out << "depth " << m.spec.depth << "\n"
        << "hidden_channels " << m.spec.hidden_channels << "\n"
        << "image_channels " << m.spec.image_channels << "\n"
        << "batch_norm " << (m.spec.use_bn ? "yes" : "no") << "\n"
        << "residual " << (m.spec.use_residual ? "yes" : "no") << "\n"
        << "receptive_field " << receptive_field(m.spec.depth) << "x"
        << receptive_field(m.spec.depth) << "\n"
        << "parameters " << m.parameter_count() << "\n";
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const Layer<float>& l = m.layers[i];
        out << "layer " << i + 1 << ": conv " << l.conv.c_in() << "->" << l.conv.c_out()
            << (l.conv.bias ? " +bias" : "") << (l.bn ? " +bn" : "") << (l.relu ? " +relu" : "")
            << "\n";
    }
    return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"DnCNN denoiser: datasets, training, evaluation", "dncnn"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "run configuration file");
        sub->add_option("--seed", o.seed, "root seed");
        sub->add_option("--threads", o.threads, "worker threads (fallback: DNCNN_THREADS)");
        sub->add_flag("--deterministic", o.deterministic, "bitwise reproducible run");
        sub->add_option("--set", o.overrides, "override a config key (key=value), repeatable");
    };

    auto* build = app.add_subcommand("build-data", "sample patches and write a manifest");
    common(build);
    build->add_option("--out", o.out, "manifest path");

    auto* tr = app.add_subcommand("train", "train a model");
    common(tr);
    tr->add_option("--out", o.out, "model path");
    tr->add_option("--optimizer", o.optimizer, "sgd or adam");

    auto* den = app.add_subcommand("denoise", "restore one image");
    common(den);
    den->add_option("--model", o.model)->required();
    den->add_option("--in", o.in)->required();
    den->add_option("--out", o.out)->required();

    auto* deg = app.add_subcommand("degrade", "corrupt one image");
    common(deg);
    deg->add_option("--in", o.in)->required();
    deg->add_option("--out", o.out)->required();
    deg->add_option("--sigma", o.sigma, "AWGN level, 0-255 scale");
    deg->add_option("--factor", o.factor, "bicubic SISR factor");
    deg->add_option("--quality", o.quality, "JPEG quality");

    auto* ev = app.add_subcommand("eval", "score a model on an image set");
    common(ev);
    ev->add_option("--model", o.model)->required();
    ev->add_option("--in", o.in, "images or directories");
    ev->add_option("--out", o.out, "report CSV path");
    ev->add_option("--sigma", o.sigma);
    ev->add_option("--factor", o.factor);
    ev->add_option("--quality", o.quality);

    auto* abl = app.add_subcommand("ablate", "train the four RL x BN variants");
    common(abl);
    abl->add_option("--out", o.out, "output directory");
    abl->add_option("--optimizer", o.optimizer, "sgd or adam");

    auto* ins = app.add_subcommand("inspect-model", "describe a model file");
    common(ins);
    ins->add_option("--model", o.model)->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (build->parsed()) return cmd_build_data(o, out, err);
        if (tr->parsed()) return cmd_train(o, out, err);
        if (den->parsed()) return cmd_denoise(o, out, err);
        if (deg->parsed()) return cmd_degrade(o, out, err);
        if (ev->parsed()) return cmd_eval(o, out, err);
        if (abl->parsed()) return cmd_ablate(o, out, err);
        if (ins->parsed()) return cmd_inspect(o, out, err);
    } catch (const DivergedError& e) {
        err << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const RangeError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << "error: no subcommand\n";
    return kExitUsage;
}

}  // namespace dncnn
