#include "dncnn/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dncnn/error.hpp"
#include "text.hpp"

namespace dncnn {

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        // model
        {"depth", "17", "number of conv layers (>= 2)"},
        {"hidden", "64", "feature maps per hidden layer"},
        {"channels", "1", "image channels, 1 or 3"},
        {"residual", "true", "predict the noise (true) or the clean image (false)"},
        {"bn", "true", "batch normalization in the middle layers"},
        {"bn_gamma", "1", "initial BN scale of a freshly built network"},
        // training
        {"epochs", "50", "training epochs"},
        {"batch", "128", "mini-batch size"},
        {"lr_start", "0.1", "learning rate of the first epoch"},
        {"lr_end", "0.0001", "learning rate of the last epoch"},
        {"momentum", "0.9", "SGD momentum"},
        {"weight_decay", "0.0001", "L2 decay on conv weights"},
        {"optimizer", "sgd", "sgd or adam"},
        {"adam_beta1", "0.9", "Adam first-moment decay"},
        {"adam_beta2", "0.999", "Adam second-moment decay"},
        {"adam_eps", "1e-08", "Adam denominator epsilon"},
        {"eval_every", "1", "epochs between validation passes"},
        {"augment", "true", "random dihedral transform per patch and step"},
        {"deterministic", "false", "single-threaded, bitwise reproducible runs"},
        {"threads", "1", "BLAS worker threads"},
        {"seed", "0", "root seed for every random stream"},
        {"init_model", "", "model file to start from instead of He initialization"},
        // data
        {"mode", "S", "S (fixed sigma), B (blind sigma) or 3 (noise, SISR, JPEG)"},
        {"sources", nullptr, "comma-separated training images or directories"},
        {"manifest", "", "dataset manifest to rebuild instead of sampling sources"},
        {"patch", "0", "patch side, 0 for the mode default (40 for S, 50 otherwise)"},
        {"count", "0", "patch count, 0 for the mode and scale default"},
        {"scale", "desk", "paper or desk"},
        {"desk_factor", "100", "desk scale divides paper patch counts by this"},
        {"sigma", "25", "noise level of mode S, 0-255 scale"},
        {"degrade", "", "training degradation token overriding the mode default"},
        {"val_sources", "", "comma-separated validation images or directories"},
        {"val_degrade", "awgn:25.0", "validation degradation token"},
        // outputs
        {"out_dir", ".", "directory for outputs without an explicit path"},
        {"model_out", "", "trained model path"},
        {"history_out", "", "training history CSV path"},
        {"manifest_out", "", "dataset manifest path"},
        {"report_out", "", "evaluation report CSV path"},
        {"curves_out", "", "ablation curve CSV path"},
    };
    return keys;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        const std::string item =
            trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos
                                                                               : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

bool is_known(const std::string& key) {
    const auto& keys = config_keys();
    return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return key == k.name; });
}

class Resolver {
public:
    Resolver(const std::map<std::string, std::string>& values,
             const std::map<std::string, std::size_t>& lines)
        : values_(values), lines_(lines) {}

    const std::string& str(const std::string& key) const { return values_.at(key); }

    bool flag(const std::string& key) const {
        const std::string& v = str(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        fail(key, "expected a boolean, got '" + v + "'");
    }

    template <class I>
    I integer(const std::string& key) const {
        const std::string& v = str(key);
        I out{};
        auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || end != v.data() + v.size()) {
            fail(key, "expected an integer, got '" + v + "'");
        }
        return out;
    }

    double real(const std::string& key) const {
        const std::string& v = str(key);
        double out = 0.0;
        auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out)) {
            fail(key, "expected a number, got '" + v + "'");
        }
        return out;
    }

    template <class F>
    auto wrap(const std::string& key, F&& f) const {
        try {
            return f();
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            fail(key, e.what());
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const auto it = lines_.find(key);
        throw ConfigError(key + ": " + what, it == lines_.end() ? 0 : it->second);
    }

private:
    const std::map<std::string, std::string>& values_;
    const std::map<std::string, std::size_t>& lines_;
};

void resolve(RunConfig& cfg, const std::map<std::string, std::size_t>& lines) {
    const Resolver r(cfg.values, lines);

    cfg.model.depth = r.integer<int>("depth");
    cfg.model.hidden_channels = r.integer<int>("hidden");
    cfg.model.image_channels = r.integer<int>("channels");
    cfg.model.use_residual = r.flag("residual");
    cfg.model.use_bn = r.flag("bn");
    cfg.bn_gamma = r.real("bn_gamma");
    if (!(cfg.bn_gamma > 0.0)) r.fail("bn_gamma", "must be positive");
    r.wrap("depth", [&] {
        cfg.model.validate();
        return 0;
    });

    TrainConfig& t = cfg.train;
    t.epochs = r.integer<int>("epochs");
    t.batch_size = r.integer<std::size_t>("batch");
    t.lr_start = r.real("lr_start");
    t.lr_end = r.real("lr_end");
    t.momentum = r.real("momentum");
    t.weight_decay = r.real("weight_decay");
    t.optimizer = r.wrap("optimizer", [&] { return parse_optimizer(r.str("optimizer")); });
    t.adam_beta1 = r.real("adam_beta1");
    t.adam_beta2 = r.real("adam_beta2");
    t.adam_eps = r.real("adam_eps");
    t.eval_every = r.integer<int>("eval_every");
    t.augment = r.flag("augment");
    t.deterministic = r.flag("deterministic");
    t.threads = r.integer<int>("threads");
    cfg.seed = r.integer<std::uint64_t>("seed");
    t.seed = cfg.seed;
    try {
        t.validate(cfg.model.use_bn);
    } catch (const ConfigError& e) {
        throw ConfigError(e.what(), 0);
    }
    cfg.init_model = r.str("init_model");

    cfg.mode = r.wrap("mode", [&] { return parse_task_mode(r.str("mode")); });
    cfg.sources = split_list(r.str("sources"));
    cfg.manifest = r.str("manifest");
    cfg.patch = r.integer<std::size_t>("patch");
    cfg.count = r.integer<std::size_t>("count");
    const std::string& scale = r.str("scale");
    if (scale == "paper") {
        cfg.scale = DatasetScale::paper;
    } else if (scale == "desk") {
        cfg.scale = DatasetScale::desk;
    } else {
        r.fail("scale", "expected paper or desk, got '" + scale + "'");
    }
    cfg.desk_factor = r.integer<std::size_t>("desk_factor");
    if (cfg.desk_factor == 0) r.fail("desk_factor", "must be positive");
    cfg.sigma = r.real("sigma");
    if (cfg.sigma < 0.0) r.fail("sigma", "must be >= 0");
    if (r.str("degrade").empty()) {
        cfg.degrade.reset();
    } else {
        cfg.degrade = r.wrap("degrade", [&] { return parse_spec(r.str("degrade")); });
    }
    cfg.val_sources = split_list(r.str("val_sources"));
    cfg.val_degrade = r.wrap("val_degrade", [&] { return parse_spec(r.str("val_degrade")); });

    cfg.out_dir = r.str("out_dir");
    cfg.model_out = r.str("model_out");
    cfg.history_out = r.str("history_out");
    cfg.manifest_out = r.str("manifest_out");
    cfg.report_out = r.str("report_out");
    cfg.curves_out = r.str("curves_out");
}

struct Parsed {
    RunConfig cfg;
    std::map<std::string, std::size_t> lines;
};

Parsed parse_lines(const std::string& text) {
    Parsed p;
    for (const ConfigKey& k : config_keys()) p.cfg.values[k.name] = k.default_value ? k.default_value : "";
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key=value", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!is_known(key)) throw ConfigError("unknown key '" + key + "'", lineno);
        if (auto it = p.lines.find(key); it != p.lines.end()) {
            p.cfg.warnings.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key +
                                     "' overrides line " + std::to_string(it->second));
        }
        p.cfg.values[key] = value;
        p.lines[key] = lineno;
    }
    return p;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    Parsed p = parse_lines(text);
    resolve(p.cfg, p.lines);
    return std::move(p.cfg);
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_config_text(text);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what(), e.line());
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!is_known(key)) throw ConfigError("unknown key '" + key + "'");
    values[key] = value;
    resolve(*this, {});
}

void require_key(const RunConfig& cfg, const std::string& key) {
    const auto it = cfg.values.find(key);
    if (it == cfg.values.end() || trim(it->second).empty()) {
        throw ConfigError("missing required key '" + key + "'");
    }
}

DatasetOptions RunConfig::dataset_options() const {
    DatasetOptions o;
    o.mode = mode;
    o.sigma = sigma;
    o.sources = sources;
    o.scale = scale;
    o.desk_factor = desk_factor;
    o.patch = patch;
    o.count = count;
    o.channels = model.image_channels;
    o.seed = seed;
    o.degrade = degrade;
    return o;
}

std::string RunConfig::echo() const {
    std::ostringstream out;
    out << "# effective configuration\n";
    for (const ConfigKey& k : config_keys()) out << k.name << "=" << values.at(k.name) << "\n";
    return out.str();
}

void RunConfig::write_echo(const std::filesystem::path& path) const {
    detail::write_text(path, echo());
}

}  // namespace dncnn
