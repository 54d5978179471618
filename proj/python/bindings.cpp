#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "asbu/checkpoint.hpp"
#include "asbu/quantize.hpp"
#include "asbu/rf.hpp"
#include "asbu/trainer.hpp"

namespace py = pybind11;
using namespace asbu;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 4) {
        throw ShapeError("expected a rank-4 array (batch, channels, height, width)");
    }
    Shape4 s{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
             static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3))};
    std::vector<double> values(a.data(), a.data() + a.size());
    return Tensor::from_values(s, std::move(values));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    py::array_t<double> out({t.shape.n, t.shape.c, t.shape.h, t.shape.w});
    std::copy(t.v.begin(), t.v.end(), out.mutable_data());
    return out;
}

BinaryMask mask_from_array(const py::array_t<std::uint8_t, py::array::c_style |
                                                               py::array::forcecast>& a) {
    if (a.ndim() != 2) {
        throw ShapeError("expected a rank-2 uint8 mask");
    }
    BinaryMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), 0);
    const std::uint8_t* p = a.data();
    for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = p[i] ? 1 : 0;
    return m;
}

py::array_t<std::uint8_t> array_from_mask(const BinaryMask& m) {
    py::array_t<std::uint8_t> out({m.h, m.w});
    std::copy(m.bits.begin(), m.bits.end(), out.mutable_data());
    return out;
}

IgnoreBandParams band_params(double beta, int min_radius, double threshold) {
    IgnoreBandParams p;
    p.osf_beta = beta;
    p.min_radius = min_radius;
    p.threshold = threshold;
    return p;
}

Tensor image_chw_to_tensor(const py::array_t<double, py::array::c_style |
                                                          py::array::forcecast>& a) {
    if (a.ndim() != 3) {
        throw ShapeError("expected a rank-3 image (channels, height, width)");
    }
    Shape4 s{1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
             static_cast<int>(a.shape(2))};
    std::vector<double> values(a.data(), a.data() + a.size());
    return Tensor::from_values(s, std::move(values));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "ASBU-Net segmentation toolkit: dilated-convolution encoder/decoder, "
              "receptive-field analysis, ignore-band scoring, int8 quantization";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<asbu::IndexError>(m, "TensorIndexError", PyExc_IndexError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ValueError);

    m.def("effective_kernel", &effective_kernel, py::arg("kernel"), py::arg("dilation"),
          "Support of a kernel with taps spaced by the dilation rate");

    m.def(
        "encoder_rf_trace",
        [](const std::string& scaling) {
            NetworkSpec spec = build_default_spec(parse_scaling(scaling));
            RFTrace trace = receptive_field(encoder_rf_layers(spec));
            py::list rows;
            for (const RFRow& r : trace.rows) {
                py::dict d;
                d["name"] = r.name;
                d["eff_kernel"] = r.eff_kernel;
                d["eff_stride"] = r.eff_stride;
                d["rf"] = r.rf;
                rows.append(d);
            }
            return rows;
        },
        py::arg("scaling") = "1/16",
        "Per-layer effective kernel, effective stride and cumulative receptive field of "
        "the default encoder");

    m.def(
        "linearity",
        [](const std::string& scaling) {
            NetworkSpec spec = build_default_spec(parse_scaling(scaling));
            LinearityReport rep = linearity_report(receptive_field(encoder_rf_layers(spec)));
            py::dict d;
            d["stage_increments"] = rep.stage_increments;
            d["max_ratio"] = rep.max_ratio;
            d["near_linear"] = rep.near_linear;
            return d;
        },
        py::arg("scaling") = "1/16");

    m.def(
        "conv2d",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& kernel,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& bias,
           int stride, int dilation, bool same_pad) {
            Tensor xt = tensor_from_array(x);
            ConvParams p;
            p.kernel = tensor_from_array(kernel);
            if (bias.ndim() != 1) throw ShapeError("bias must be rank 1");
            p.bias.assign(bias.data(), bias.data() + bias.size());
            p.stride = stride;
            p.dilation = dilation;
            if (same_pad) p.pad = same_padding(p.kh(), p.kw(), dilation);
            return array_from_tensor(conv2d_forward(xt, p));
        },
        py::arg("x"), py::arg("kernel"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("dilation") = 1, py::arg("same_pad") = true,
        "Dilated cross-correlation over an NCHW array");

    m.def(
        "ignore_band",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& label,
           double beta, int min_radius) {
            return array_from_mask(
                ignore_band(mask_from_array(label), band_params(beta, min_radius, 0.5)));
        },
        py::arg("label"), py::arg("beta") = 0.05, py::arg("min_radius") = 1,
        "Counted-region mask (1 where evaluation counts)");

    m.def(
        "masked_jaccard",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& label,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& pred,
           double beta, int min_radius) {
            return masked_jaccard(mask_from_array(label), mask_from_array(pred),
                                  band_params(beta, min_radius, 0.5));
        },
        py::arg("label"), py::arg("pred"), py::arg("beta") = 0.05, py::arg("min_radius") = 1);

    m.def(
        "score_with_penalty",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& label,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& pred,
           double beta, int min_radius) {
            return score_with_penalty(mask_from_array(label), mask_from_array(pred),
                                      band_params(beta, min_radius, 0.5));
        },
        py::arg("label"), py::arg("pred"), py::arg("beta") = 0.05, py::arg("min_radius") = 1,
        "Ignore-band Jaccard minus 1.0 per misdetected component");

    m.def(
        "generate_dataset",
        [](int n, int image_size, std::uint64_t seed) {
            std::vector<SyntheticSample> data = generate_dataset(n, image_size, seed);
            py::list out;
            for (const SyntheticSample& s : data) {
                py::array_t<double> img({3, s.label.h, s.label.w});
                std::copy(s.image.v.begin(), s.image.v.end(), img.mutable_data());
                out.append(py::make_tuple(img, array_from_mask(s.label)));
            }
            return out;
        },
        py::arg("n"), py::arg("image_size") = 128, py::arg("seed") = 7,
        "List of (image CHW float64 in [0,1], label HW uint8) pairs");

    m.def(
        "build_and_save",
        [](const std::string& path, const std::string& scaling, std::uint64_t seed) {
            NetworkSpec spec = build_default_spec(parse_scaling(scaling));
            Network net = build_network(spec, seed);
            save_checkpoint(net, path);
            return parameter_count(net);
        },
        py::arg("path"), py::arg("scaling") = "1/16", py::arg("seed") = 1,
        "Kaiming-He initialized default network; returns the trainable parameter count");

    m.def(
        "spec_text",
        [](const std::string& scaling) {
            return serialize_spec(build_default_spec(parse_scaling(scaling)));
        },
        py::arg("scaling") = "1/16", "Canonical textual serialization of the default spec");

    m.def(
        "infer",
        [](const std::string& ckpt, const py::array_t<double, py::array::c_style |
                                                                   py::array::forcecast>& image) {
            Tensor x = image_chw_to_tensor(image);
            std::uint32_t version = checkpoint_version(ckpt);
            Tensor mask;
            if (version == kCheckpointVersionInt8) {
                QuantizedModel model = load_quantized_checkpoint(ckpt);
                mask = quantized_forward(model, x);
            } else {
                Network net = load_checkpoint(ckpt);
                mask = network_forward(net, x, false, nullptr);
            }
            py::array_t<double> out({mask.shape.h, mask.shape.w});
            std::copy(mask.v.begin(), mask.v.end(), out.mutable_data());
            return out;
        },
        py::arg("checkpoint"), py::arg("image"),
        "Sigmoid probability mask (HW float64) from a float or int8 checkpoint; the image "
        "is CHW float64 with dims divisible by the network's scaling factor");

    m.def(
        "quantize_checkpoint",
        [](const std::string& ckpt_in, const std::string& ckpt_out, int calib_images,
           int image_size, std::uint64_t calib_seed) {
            Network net = load_checkpoint(ckpt_in);
            std::vector<SyntheticSample> calib =
                generate_dataset(calib_images, image_size, calib_seed);
            std::vector<Tensor> inputs;
            for (const SyntheticSample& s : calib) inputs.push_back(s.image);
            QuantizedModel model = calibrate(net, inputs);
            save_quantized_checkpoint(model, ckpt_out);
        },
        py::arg("ckpt_in"), py::arg("ckpt_out"), py::arg("calib_images") = 16,
        py::arg("image_size") = 128, py::arg("calib_seed") = 11,
        "Post-training int8 quantization with synthetic calibration data");
}
