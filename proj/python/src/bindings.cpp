#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "dncnn/config.hpp"
#include "dncnn/degradation.hpp"
#include "dncnn/error.hpp"
#include "dncnn/image.hpp"
#include "dncnn/metrics.hpp"
#include "dncnn/model.hpp"
#include "dncnn/train.hpp"

namespace py = pybind11;
using namespace dncnn;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (h, w) arrays are single-channel images; (c, h, w) keeps channels planar.
Image to_image(const FloatArray& a) {
    Image img;
    if (a.ndim() == 2) {
        img = Image(1, a.shape(0), a.shape(1));
    } else if (a.ndim() == 3) {
        img = Image(a.shape(0), a.shape(1), a.shape(2));
    } else {
        throw ShapeError("expected a (h, w) or (c, h, w) array, got " + std::to_string(a.ndim()) +
                         " dimensions");
    }
    std::memcpy(img.data.data(), a.data(), img.size() * sizeof(float));
    return img;
}

py::array_t<float> to_array(const Image& img, bool squeeze) {
    std::vector<py::ssize_t> shape;
    if (!squeeze || img.c != 1) shape.push_back(py::ssize_t(img.c));
    shape.push_back(py::ssize_t(img.h));
    shape.push_back(py::ssize_t(img.w));
    py::array_t<float> out(shape);
    std::memcpy(out.mutable_data(), img.data.data(), img.size() * sizeof(float));
    return out;
}

class Denoiser {
public:
    explicit Denoiser(Model<float> m) : model_(std::move(m)) {}

    const NetworkSpec& spec() const { return model_.spec; }
    std::size_t parameter_count() const { return model_.parameter_count(); }

    py::array_t<float> denoise(const FloatArray& noisy) const {
        const Image y = to_image(noisy);
        Image x;
        {
            py::gil_scoped_release release;
            x = from_tensor(dncnn::denoise(model_, to_tensor(y)));
        }
        return to_array(x, noisy.ndim() == 2);
    }

    void save(const std::string& path) const { save_model(model_, path); }
    py::bytes to_bytes() const {
        const auto b = encode_model(model_);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
    }

private:
    Model<float> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Residual denoising CNN: models, degradations and metrics";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<SizeError>(m, "SizeError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<SpecError>(m, "SpecError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    py::class_<NetworkSpec>(m, "NetworkSpec")
        .def(py::init([](int depth, int hidden, int channels, bool bn, bool residual) {
                 NetworkSpec s{depth, hidden, channels, bn, residual};
                 s.validate();
                 return s;
             }),
             py::arg("depth") = 17, py::arg("hidden_channels") = 64, py::arg("image_channels") = 1,
             py::arg("use_bn") = true, py::arg("use_residual") = true)
        .def_readonly("depth", &NetworkSpec::depth)
        .def_readonly("hidden_channels", &NetworkSpec::hidden_channels)
        .def_readonly("image_channels", &NetworkSpec::image_channels)
        .def_readonly("use_bn", &NetworkSpec::use_bn)
        .def_readonly("use_residual", &NetworkSpec::use_residual)
        .def(py::self == py::self)
        .def("__repr__", [](const NetworkSpec& s) {
            return "NetworkSpec(depth=" + std::to_string(s.depth) +
                   ", hidden_channels=" + std::to_string(s.hidden_channels) +
                   ", image_channels=" + std::to_string(s.image_channels) +
                   ", use_bn=" + (s.use_bn ? "True" : "False") +
                   ", use_residual=" + (s.use_residual ? "True" : "False") + ")";
        });

    py::class_<Denoiser>(m, "Model")
        .def_property_readonly("spec", &Denoiser::spec)
        .def_property_readonly("parameter_count", &Denoiser::parameter_count)
        .def("denoise", &Denoiser::denoise, py::arg("noisy"),
             "Clean estimate of a (h, w) or (c, h, w) float32 image, unclamped.")
        .def("save", &Denoiser::save, py::arg("path"))
        .def("to_bytes", &Denoiser::to_bytes);

    m.def(
        "build_network",
        [](const NetworkSpec& spec, std::uint64_t seed, double bn_gamma) {
            SeededRng rng(seed);
            return Denoiser(build_network<float>(spec, rng, bn_gamma));
        },
        py::arg("spec"), py::arg("seed") = 0, py::arg("bn_gamma") = 1.0);
    m.def("load_model", [](const std::string& path) { return Denoiser(load_model(path)); },
          py::arg("path"));
    m.def(
        "model_from_bytes",
        [](const py::bytes& b) {
            const std::string s = b;
            return Denoiser(decode_model(std::vector<std::uint8_t>(s.begin(), s.end())));
        },
        py::arg("data"));

    m.def("receptive_field", &receptive_field, py::arg("depth"));
    m.def(
        "lr_at_epoch",
        [](int epoch, int epochs, double lr_start, double lr_end) {
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.lr_start = lr_start;
            cfg.lr_end = lr_end;
            return lr_at_epoch(epoch, cfg);
        },
        py::arg("epoch"), py::arg("epochs"), py::arg("lr_start"), py::arg("lr_end"));

    m.def(
        "psnr", [](const FloatArray& a, const FloatArray& b, double peak) {
            return psnr(to_image(a), to_image(b), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def(
        "ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(to_image(a), to_image(b)); },
        py::arg("a"), py::arg("b"));

    m.def(
        "gaussian_noise",
        [](const FloatArray& x, double sigma, std::uint64_t seed) {
            SeededRng rng(seed);
            return to_array(gaussian_noise(to_image(x), sigma, rng), x.ndim() == 2);
        },
        py::arg("x"), py::arg("sigma"), py::arg("seed") = 0, "sigma on the 0-255 scale");
    m.def(
        "sisr_degrade",
        [](const FloatArray& x, int factor) {
            return to_array(sisr_degrade(to_image(x), factor), x.ndim() == 2);
        },
        py::arg("x"), py::arg("factor"));
    m.def(
        "jpeg_degrade",
        [](const FloatArray& x, int quality) {
            return to_array(jpeg_degrade(to_image(x), quality), x.ndim() == 2);
        },
        py::arg("x"), py::arg("quality"));
    m.def(
        "degrade",
        [](const FloatArray& x, const std::string& token, std::uint64_t seed) {
            SeededRng rng(seed);
            const Degraded d = degrade(to_image(x), parse_spec(token), rng);
            return py::make_tuple(to_array(d.input, x.ndim() == 2), d.label.token());
        },
        py::arg("x"), py::arg("spec"), py::arg("seed") = 0,
        "Applies a degradation token such as 'awgn:25.0' or 'multi:1,1,1'; returns (y, label).");

    m.def(
        "load_image", [](const std::string& path) { return to_array(load_image(path), true); },
        py::arg("path"));
    m.def(
        "save_image",
        [](const FloatArray& x, const std::string& path) { save_image(to_image(x), path); },
        py::arg("x"), py::arg("path"));
}
