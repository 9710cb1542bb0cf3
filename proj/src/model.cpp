#include "dncnn/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace dncnn {

void NetworkSpec::validate() const {
    if (depth < 2) throw SpecError("depth must be at least 2, got " + std::to_string(depth));
    if (hidden_channels < 1) throw SpecError("hidden_channels must be positive");
    if (image_channels != 1 && image_channels != 3) {
        throw SpecError("image_channels must be 1 or 3, got " + std::to_string(image_channels));
    }
}

int receptive_field(int depth) {
    if (depth < 1) throw RangeError("receptive_field: depth must be at least 1");
    return 2 * depth + 1;
}

template <class T>
std::size_t Model<T>::parameter_count() const {
    std::size_t total = 0;
    for (const Layer<T>& l : layers) {
        total += l.conv.weights.size();
        if (l.conv.bias) total += l.conv.bias->size();
        if (l.bn) total += l.bn->gamma.size() + l.bn->beta.size();
    }
    return total;
}

template <class T>
Model<T> build_network(const NetworkSpec& spec, SeededRng& rng, double bn_gamma) {
    spec.validate();
    if (!(bn_gamma > 0.0) || !std::isfinite(bn_gamma)) {
        throw RangeError("bn_gamma must be positive and finite");
    }
    const auto hidden = std::size_t(spec.hidden_channels);
    const auto image = std::size_t(spec.image_channels);
    Model<T> m;
    m.spec = spec;
    m.layers.reserve(std::size_t(spec.depth));
    for (int i = 0; i < spec.depth; ++i) {
        const bool first = i == 0;
        const bool last = i == spec.depth - 1;
        const std::size_t c_in = first ? image : hidden;
        const std::size_t c_out = last ? image : hidden;
        Layer<T> layer;
        layer.conv.weights = he_init<T>(Shape{c_out, c_in, 3, 3}, rng);
        const bool with_bn = spec.use_bn && !first && !last;
        if (with_bn) {
            layer.bn = BatchNormParams<T>::identity(c_out);
            layer.bn->gamma.assign(c_out, T(bn_gamma));
        } else {
            layer.conv.bias = std::vector<T>(c_out, T(0));
        }
        layer.relu = !last;
        m.layers.push_back(std::move(layer));
    }
    return m;
}

template <class T>
ForwardResult<T> forward(const Model<T>& model, const BasicTensor<T>& y, Mode mode) {
    if (y.shape().c != std::size_t(model.spec.image_channels)) {
        throw ShapeError("input has " + std::to_string(y.shape().c) + " channels, model expects " +
                         std::to_string(model.spec.image_channels));
    }
    ForwardResult<T> r;
    r.updated = model;
    r.tape.revision = model.revision;
    const bool train = mode == Mode::train;
    if (train) r.tape.layers.reserve(model.layers.size());

    BasicTensor<T> x = y;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer<T>& layer = model.layers[i];
        BasicTensor<T> z = conv2d_forward(x, layer.conv);
        LayerTape<T> entry;
        if (train) entry.input = std::move(x);
        if (layer.bn) {
            BnForward<T> bn = batchnorm_forward(z, *layer.bn, mode);
            z = std::move(bn.output);
            if (train) {
                entry.bn = std::move(bn.cache);
                r.updated.layers[i].bn = std::move(bn.params);
            }
        }
        if (layer.relu) {
            ReluForward<T> act = relu_forward(z);
            z = std::move(act.output);
            if (train) entry.relu = std::move(act.mask);
        }
        if (train) r.tape.layers.push_back(std::move(entry));
        x = std::move(z);
    }
    r.out = std::move(x);
    return r;
}

template <class T>
BasicTensor<T> infer(const Model<T>& model, const BasicTensor<T>& y) {
    if (y.shape().c != std::size_t(model.spec.image_channels)) {
        throw ShapeError("input has " + std::to_string(y.shape().c) + " channels, model expects " +
                         std::to_string(model.spec.image_channels));
    }
    BasicTensor<T> x = y;
    for (const Layer<T>& layer : model.layers) {
        x = conv2d_forward(x, layer.conv);
        if (layer.bn) x = batchnorm_forward(x, *layer.bn, Mode::infer).output;
        if (layer.relu) x = relu_forward(x).output;
    }
    return x;
}

template <class T>
BasicTensor<T> denoise(const Model<T>& model, const BasicTensor<T>& y) {
    BasicTensor<T> out = infer(model, y);
    if (!model.spec.use_residual) return out;
    return sub(y, out);
}

template <class T>
Gradients<T> backward(const Model<T>& model, const Tape<T>& tape, const BasicTensor<T>& grad_out) {
    if (tape.revision != model.revision || tape.layers.size() != model.layers.size()) {
        throw UsageError("backward: tape was not recorded by a train-mode forward on this model");
    }
    Gradients<T> grads;
    grads.layers.resize(model.layers.size());
    BasicTensor<T> g = grad_out;
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        const Layer<T>& layer = model.layers[i];
        const LayerTape<T>& entry = tape.layers[i];
        if (layer.relu) {
            if (!entry.relu) throw UsageError("backward: tape lacks a ReLU mask");
            g = relu_backward(*entry.relu, g);
        }
        if (layer.bn) {
            if (!entry.bn) throw UsageError("backward: tape lacks a batchnorm cache");
            BnGrads<T> bg = batchnorm_backward(*entry.bn, g);
            g = std::move(bg.input);
            grads.layers[i].gamma = std::move(bg.gamma);
            grads.layers[i].beta = std::move(bg.beta);
        }
        ConvGrads<T> cg = conv2d_backward(entry.input, layer.conv, g, i > 0);
        grads.layers[i].weights = std::move(cg.weights);
        grads.layers[i].bias = std::move(cg.bias);
        g = std::move(cg.input);
    }
    return grads;
}

namespace {

template <class To, class From>
std::vector<To> cast_vec(const std::vector<From>& v) {
    return std::vector<To>(v.begin(), v.end());
}

}  // namespace

template <class To, class From>
Model<To> model_cast(const Model<From>& model) {
    Model<To> out;
    out.spec = model.spec;
    out.revision = model.revision;
    for (const Layer<From>& l : model.layers) {
        Layer<To> t;
        t.conv.weights = tensor_cast<To>(l.conv.weights);
        if (l.conv.bias) t.conv.bias = cast_vec<To>(*l.conv.bias);
        if (l.bn) {
            BatchNormParams<To> bn;
            bn.gamma = cast_vec<To>(l.bn->gamma);
            bn.beta = cast_vec<To>(l.bn->beta);
            bn.running_mean = cast_vec<To>(l.bn->running_mean);
            bn.running_var = cast_vec<To>(l.bn->running_var);
            bn.eps = To(l.bn->eps);
            bn.momentum = To(l.bn->momentum);
            t.bn = std::move(bn);
        }
        t.relu = l.relu;
        out.layers.push_back(std::move(t));
    }
    return out;
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'N', 'C', 'N'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(std::uint8_t(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void floats(std::span<const float> v) {
        u32(std::uint32_t(v.size()));
        for (float x : v) f32(x);
    }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("model file truncated", pos_);
    }
    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    bool flag() {
        const std::size_t at = pos_;
        const std::uint8_t v = u8();
        if (v > 1) throw FormatError("invalid flag byte " + std::to_string(v), at);
        return v == 1;
    }
    std::vector<float> floats(std::size_t expected, const char* what) {
        const std::size_t at = pos_;
        const std::uint32_t count = u32();
        if (count != expected) {
            throw FormatError(std::string(what) + " count " + std::to_string(count) +
                                  " does not match expected " + std::to_string(expected),
                              at);
        }
        need(std::size_t(count) * 4);
        std::vector<float> v(count);
        for (float& x : v) x = f32();
        return v;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const Model<float>& model) {
    Writer w;
    for (char c : kMagic) w.u8(std::uint8_t(c));
    w.u32(kVersion);
    w.u32(std::uint32_t(model.spec.depth));
    w.u32(std::uint32_t(model.spec.hidden_channels));
    w.u32(std::uint32_t(model.spec.image_channels));
    w.u8(model.spec.use_bn);
    w.u8(model.spec.use_residual);
    w.u8(0);
    w.u8(0);
    for (const Layer<float>& l : model.layers) {
        w.floats(l.conv.weights.data());
        w.u8(l.conv.bias.has_value());
        if (l.conv.bias) w.floats(*l.conv.bias);
        w.u8(l.bn.has_value());
        if (l.bn) {
            w.floats(l.bn->gamma);
            w.floats(l.bn->beta);
            w.floats(l.bn->running_mean);
            w.floats(l.bn->running_var);
            w.f32(l.bn->eps);
            w.f32(l.bn->momentum);
        }
    }
    return std::move(w.bytes);
}

Model<float> decode_model(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    r.need(4);
    for (std::size_t i = 0; i < 4; ++i) {
        if (bytes[i] != std::uint8_t(kMagic[i])) throw FormatError("bad magic, not a DNCN model", i);
    }
    for (int i = 0; i < 4; ++i) r.u8();
    const std::size_t version_at = r.offset();
    if (const std::uint32_t v = r.u32(); v != kVersion) {
        throw FormatError("unsupported model version " + std::to_string(v), version_at);
    }
    Model<float> m;
    const std::size_t spec_at = r.offset();
    const std::uint32_t depth = r.u32();
    const std::uint32_t hidden = r.u32();
    const std::uint32_t image = r.u32();
    if (depth > 10000 || hidden > 100000) throw FormatError("implausible network size", spec_at);
    m.spec.depth = int(depth);
    m.spec.hidden_channels = int(hidden);
    m.spec.image_channels = int(image);
    m.spec.use_bn = r.flag();
    m.spec.use_residual = r.flag();
    r.u8();
    r.u8();
    try {
        m.spec.validate();
    } catch (const SpecError& e) {
        throw FormatError(e.what(), spec_at);
    }

    for (int i = 0; i < m.spec.depth; ++i) {
        const bool first = i == 0;
        const bool last = i == m.spec.depth - 1;
        const std::size_t c_in = first ? image : hidden;
        const std::size_t c_out = last ? image : hidden;
        Layer<float> l;
        Shape ws{c_out, c_in, 3, 3};
        l.conv.weights = Tensor(ws, r.floats(ws.count(), "conv weight"));
        if (r.flag()) l.conv.bias = r.floats(c_out, "bias");
        const std::size_t bn_at = r.offset();
        if (r.flag()) {
            if (first || last) throw FormatError("batchnorm block on an outer layer", bn_at);
            BatchNormParams<float> bn;
            bn.gamma = r.floats(c_out, "gamma");
            bn.beta = r.floats(c_out, "beta");
            bn.running_mean = r.floats(c_out, "running_mean");
            bn.running_var = r.floats(c_out, "running_var");
            bn.eps = r.f32();
            bn.momentum = r.f32();
            l.bn = std::move(bn);
        }
        l.relu = !last;
        m.layers.push_back(std::move(l));
    }
    if (!r.done()) throw FormatError("trailing bytes after last layer", r.offset());
    return m;
}

void save_model(const Model<float>& model, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
}

Model<float> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

#define DNCNN_INSTANTIATE_MODEL(T)                                                       \
    template struct Model<T>;                                                            \
    template Model<T> build_network(const NetworkSpec&, SeededRng&, double);             \
    template ForwardResult<T> forward(const Model<T>&, const BasicTensor<T>&, Mode);     \
    template BasicTensor<T> infer(const Model<T>&, const BasicTensor<T>&);               \
    template BasicTensor<T> denoise(const Model<T>&, const BasicTensor<T>&);             \
    template Gradients<T> backward(const Model<T>&, const Tape<T>&, const BasicTensor<T>&);

DNCNN_INSTANTIATE_MODEL(float)
DNCNN_INSTANTIATE_MODEL(double)

#undef DNCNN_INSTANTIATE_MODEL

template Model<double> model_cast(const Model<float>&);
template Model<float> model_cast(const Model<double>&);

}  // namespace dncnn
