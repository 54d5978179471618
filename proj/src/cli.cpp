#include "asbu/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "asbu/checkpoint.hpp"
#include "asbu/config.hpp"
#include "asbu/image_io.hpp"
#include "asbu/quantize.hpp"
#include "asbu/rf.hpp"
#include "asbu/trainer.hpp"

namespace fs = std::filesystem;

namespace asbu {

namespace {

struct BuildArgs {
    std::string scaling = "1/16";
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_build(const BuildArgs& a) {
    NetworkSpec spec = build_default_spec(parse_scaling(a.scaling));
    Network net = build_network(spec, a.seed);
    save_checkpoint(net, a.out);
    std::cout << "scaling = " << scaling_str(spec.scaling) << "\n";
    std::cout << "parameters = " << parameter_count(net) << "\n";
    std::cout << "checkpoint = " << a.out << "\n";
    return 0;
}

struct RfArgs {
    std::string scaling = "1/16";
    std::string svg;
};

int cmd_rf_report(const RfArgs& a) {
    NetworkSpec spec = build_default_spec(parse_scaling(a.scaling));
    RFTrace trace = receptive_field(encoder_rf_layers(spec));
    std::cout << format_rf_table(trace);
    LinearityReport rep = linearity_report(trace);
    std::cout << "\nstage increments (grid units):";
    for (double d : rep.stage_increments) std::cout << " " << d;
    std::cout << "\nmax successive-increment ratio = " << rep.max_ratio << "\n";
    std::cout << "near_linear = " << (rep.near_linear ? "yes" : "no") << " (threshold "
              << rep.threshold << ")\n";
    if (!a.svg.empty()) {
        std::ofstream f(a.svg);
        if (!f) throw FormatError("cannot write " + a.svg);
        f << rf_growth_svg(trace);
        std::cout << "svg = " << a.svg << "\n";
    }
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string out;
    std::uint64_t dataset_seed = 7;
    std::string log;
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg;
    std::string scaling = "1/16";
    int image_size = 128;
    int dataset_size = 120;
    std::uint64_t net_seed = 1;
    if (!a.config.empty()) {
        KVConfig kv = KVConfig::parse_file(a.config);
        kv.require_known({"momentum", "lr_init", "lr_step_fraction", "lr_factor", "lr_floor",
                          "l2", "batch_size", "epochs", "pos_weight", "split", "seed",
                          "grad_clip_norm", "augment", "scaling", "image_size", "dataset_size",
                          "net_seed"});
        if (kv.has("momentum")) cfg.momentum = kv.get_double("momentum");
        if (kv.has("lr_init")) cfg.lr_init = kv.get_double("lr_init");
        if (kv.has("lr_step_fraction")) cfg.lr_step_fraction = kv.get_double("lr_step_fraction");
        if (kv.has("lr_factor")) cfg.lr_factor = kv.get_double("lr_factor");
        if (kv.has("lr_floor")) cfg.lr_floor = kv.get_double("lr_floor");
        if (kv.has("l2")) cfg.l2 = kv.get_double("l2");
        if (kv.has("batch_size")) cfg.batch_size = kv.get_int("batch_size");
        if (kv.has("epochs")) cfg.epochs = kv.get_int("epochs");
        if (kv.has("pos_weight")) cfg.pos_weight = kv.get_double("pos_weight");
        if (kv.has("split")) cfg.split = kv.get_double("split");
        if (kv.has("seed")) cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
        if (kv.has("grad_clip_norm")) cfg.grad_clip_norm = kv.get_double("grad_clip_norm");
        if (kv.has("augment")) cfg.augment = kv.get_bool("augment");
        if (kv.has("scaling")) scaling = kv.get("scaling");
        if (kv.has("image_size")) image_size = kv.get_int("image_size");
        if (kv.has("dataset_size")) dataset_size = kv.get_int("dataset_size");
        if (kv.has("net_seed")) net_seed = static_cast<std::uint64_t>(kv.get_int("net_seed"));
    }
    cfg.validate();

    std::cerr << "generating " << dataset_size << " samples at " << image_size << "x"
              << image_size << "\n";
    std::vector<SyntheticSample> data = generate_dataset(dataset_size, image_size, a.dataset_seed);
    auto [train_set, test_set] = split_dataset(data, cfg.split, cfg.seed);

    NetworkSpec spec = build_default_spec(parse_scaling(scaling));
    Network net = build_network(spec, net_seed);

    std::ofstream log;
    std::ostream* log_ptr = nullptr;
    if (!a.log.empty()) {
        log.open(a.log);
        if (!log) throw FormatError("cannot write log: " + a.log);
        log_ptr = &log;
    }
    TrainResult result = train(net, train_set, cfg, log_ptr);
    save_checkpoint(net, a.out);

    EvalReport rep = evaluate_network(net, test_set);
    std::cout << "steps = " << result.history.size() << "\n";
    std::cout << "final_epoch_loss = " << result.epoch_loss.back() << "\n";
    std::cout << "test_mean_score = " << rep.mean_score << "\n";
    std::cout << "checkpoint = " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string labels_dir;
    std::string preds_dir;
    double beta = 0.05;
    int min_radius = 1;
};

std::vector<std::string> png_names(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

int cmd_eval(const EvalArgs& a) {
    std::vector<std::string> label_names = png_names(a.labels_dir);
    std::vector<std::string> pred_names = png_names(a.preds_dir);
    if (label_names != pred_names) {
        std::cerr << "error: mask pairing mismatch between " << a.labels_dir << " and "
                  << a.preds_dir << "\n";
        for (const std::string& n : label_names) {
            if (!std::binary_search(pred_names.begin(), pred_names.end(), n)) {
                std::cerr << "  missing prediction for " << n << "\n";
            }
        }
        for (const std::string& n : pred_names) {
            if (!std::binary_search(label_names.begin(), label_names.end(), n)) {
                std::cerr << "  missing label for " << n << "\n";
            }
        }
        return 1;
    }
    if (label_names.empty()) {
        std::cerr << "error: no .png masks found in " << a.labels_dir << "\n";
        return 1;
    }
    std::vector<BinaryMask> labels, preds;
    for (const std::string& n : label_names) {
        labels.push_back(mask_from_image(read_png((fs::path(a.labels_dir) / n).string())));
        preds.push_back(mask_from_image(read_png((fs::path(a.preds_dir) / n).string())));
    }
    IgnoreBandParams params;
    params.osf_beta = a.beta;
    params.min_radius = a.min_radius;
    EvalReport rep = evaluate_dataset(labels, preds, params, &label_names);

    std::cout << "image                          jaccard   misdet   score\n";
    for (const EvalEntry& e : rep.entries) {
        std::cout << e.name;
        for (std::size_t i = e.name.size(); i < 31; ++i) std::cout << ' ';
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-10.4f%-9d%.4f", e.jaccard, e.misdetections, e.score);
        std::cout << buf << "\n";
    }
    std::cout << "images = " << rep.entries.size() << "\n";
    std::cout << "mean_jaccard = " << rep.mean_jaccard << "\n";
    std::cout << "total_misdetections = " << rep.total_misdetections << "\n";
    std::cout << "mean_score = " << rep.mean_score << "\n";
    return 0;
}

struct QuantizeArgs {
    std::string ckpt;
    std::string out;
    int calib_images = 16;
    std::uint64_t calib_seed = 11;
    int image_size = 128;
};

int cmd_quantize(const QuantizeArgs& a) {
    Network net = load_checkpoint(a.ckpt);
    std::vector<SyntheticSample> calib =
        generate_dataset(a.calib_images, a.image_size, a.calib_seed);
    std::vector<Tensor> inputs;
    inputs.reserve(calib.size());
    for (const SyntheticSample& s : calib) inputs.push_back(s.image);

    QuantizedModel model = calibrate(net, inputs);
    save_quantized_checkpoint(model, a.out);

    double dev = 0.0;
    for (const Tensor& x : inputs) {
        Tensor f = network_forward(net, x, false, nullptr);
        Tensor q = quantized_forward(model, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < f.v.size(); ++i) acc += std::abs(f.v[i] - q.v[i]);
        dev += acc / static_cast<double>(f.v.size());
    }
    dev /= static_cast<double>(inputs.size());

    auto float_size = fs::file_size(a.ckpt);
    auto quant_size = fs::file_size(a.out);
    std::cout << "float_bytes = " << float_size << "\n";
    std::cout << "quant_bytes = " << quant_size << "\n";
    std::cout << "size_ratio = " << static_cast<double>(quant_size) / float_size << "\n";
    std::cout << "mean_abs_sigmoid_deviation = " << dev << "\n";
    std::cout << "checkpoint = " << a.out << "\n";
    return 0;
}

struct InferArgs {
    std::string ckpt;
    std::string image;
    std::string out;
    std::string heatmap;
    double threshold = 0.5;
    bool resize = false;
};

int cmd_infer(const InferArgs& a) {
    std::uint32_t version = checkpoint_version(a.ckpt);
    ImageU8 img = read_png(a.image);
    Tensor x = image_to_tensor(img);

    Network net;
    QuantizedModel qmodel;
    bool quantized = version == kCheckpointVersionInt8;
    if (quantized) {
        qmodel = load_quantized_checkpoint(a.ckpt);
    } else {
        net = load_checkpoint(a.ckpt);
    }
    const NetworkSpec& spec = quantized ? qmodel.net.spec : net.spec;
    const int factor = spec.downsample_factor();

    const int in_h = x.shape.h, in_w = x.shape.w;
    if (in_h % factor != 0 || in_w % factor != 0) {
        if (!a.resize) {
            throw ShapeError("image dims " + std::to_string(in_w) + "x" + std::to_string(in_h) +
                             " not divisible by " + std::to_string(factor) +
                             "; pass --resize to interpolate");
        }
        int rh = std::max(factor, (in_h + factor - 1) / factor * factor);
        int rw = std::max(factor, (in_w + factor - 1) / factor * factor);
        x = bilinear_resize(x, rh, rw);
    }

    Tensor mask = quantized ? quantized_forward(qmodel, x)
                            : network_forward(net, x, false, nullptr);
    if (mask.shape.h != in_h || mask.shape.w != in_w) {
        mask = bilinear_resize(mask, in_h, in_w);
    }

    BinaryMask bin = binarize_mask(mask, 0, a.threshold);
    write_png_gray(a.out, mask_to_gray(bin), in_h, in_w);
    std::cout << "mask = " << a.out << "\n";
    if (!a.heatmap.empty()) {
        write_png_gray(a.heatmap, heatmap_gray(mask), in_h, in_w);
        std::cout << "heatmap = " << a.heatmap << "\n";
    }
    return 0;
}

struct GenDataArgs {
    std::string out;
    int count = 16;
    int size = 128;
    std::uint64_t seed = 7;
};

int cmd_gen_data(const GenDataArgs& a) {
    fs::create_directories(fs::path(a.out) / "images");
    fs::create_directories(fs::path(a.out) / "labels");
    std::vector<SyntheticSample> data = generate_dataset(a.count, a.size, a.seed);
    for (std::size_t i = 0; i < data.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%05zu.png", i);
        ImageU8 img = tensor_to_image(data[i].image);
        write_png_rgb((fs::path(a.out) / "images" / name).string(), img.pixels, img.h, img.w);
        write_png_gray((fs::path(a.out) / "labels" / name).string(),
                       mask_to_gray(data[i].label), data[i].label.h, data[i].label.w);
    }
    std::cout << "samples = " << data.size() << "\n";
    std::cout << "dir = " << a.out << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"ASBU-Net segmentation toolkit"};
    app.require_subcommand(1);

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand("build", "Build a default network and save it");
    build->add_option("--scaling", build_args.scaling, "1/8 or 1/16")
        ->check(CLI::IsMember({"1/8", "1/16"}));
    build->add_option("--seed", build_args.seed, "weight init seed");
    build->add_option("--out", build_args.out, "checkpoint path")->required();

    RfArgs rf_args;
    CLI::App* rf = app.add_subcommand("rf-report", "Receptive-field trace of an encoder");
    rf->add_option("--scaling", rf_args.scaling, "1/8 or 1/16")
        ->check(CLI::IsMember({"1/8", "1/16"}));
    rf->add_option("--svg", rf_args.svg, "write a growth-curve SVG");

    TrainArgs train_args;
    CLI::App* tr = app.add_subcommand("train", "Train on synthetic data");
    tr->add_option("--config", train_args.config, "key = value training config");
    tr->add_option("--out", train_args.out, "output checkpoint")->required();
    tr->add_option("--dataset-seed", train_args.dataset_seed, "synthetic data seed");
    tr->add_option("--log", train_args.log, "per-step CSV log (step,lr,loss)");

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "Score prediction masks against labels");
    ev->add_option("--labels", eval_args.labels_dir, "label mask directory")->required();
    ev->add_option("--preds", eval_args.preds_dir, "prediction mask directory")->required();
    ev->add_option("--beta", eval_args.beta, "object-wise scale coefficient");
    ev->add_option("--min-radius", eval_args.min_radius, "minimum band radius");

    QuantizeArgs quant_args;
    CLI::App* qz = app.add_subcommand("quantize", "Post-training int8 quantization");
    qz->add_option("--ckpt", quant_args.ckpt, "float checkpoint")->required();
    qz->add_option("--out", quant_args.out, "quantized checkpoint")->required();
    qz->add_option("--calib-images", quant_args.calib_images, "calibration sample count");
    qz->add_option("--calib-seed", quant_args.calib_seed, "calibration data seed");
    qz->add_option("--image-size", quant_args.image_size, "calibration image size");

    InferArgs infer_args;
    CLI::App* in = app.add_subcommand("infer", "Segment a PNG image");
    in->add_option("--ckpt", infer_args.ckpt, "checkpoint (float or quantized)")->required();
    in->add_option("--image", infer_args.image, "input PNG")->required();
    in->add_option("--out", infer_args.out, "output binary mask PNG")->required();
    in->add_option("--heatmap", infer_args.heatmap, "optional probability heatmap PNG");
    in->add_option("--threshold", infer_args.threshold, "mask threshold");
    in->add_flag("--resize", infer_args.resize, "interpolate inputs with indivisible dims");

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic dataset to disk");
    gen->add_option("--out", gen_args.out, "output directory")->required();
    gen->add_option("--count", gen_args.count, "sample count");
    gen->add_option("--size", gen_args.size, "image size (multiple of 16)");
    gen->add_option("--seed", gen_args.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (build->parsed()) return cmd_build(build_args);
        if (rf->parsed()) return cmd_rf_report(rf_args);
        if (tr->parsed()) return cmd_train(train_args);
        if (ev->parsed()) return cmd_eval(eval_args);
        if (qz->parsed()) return cmd_quantize(quant_args);
        if (in->parsed()) return cmd_infer(infer_args);
        if (gen->parsed()) return cmd_gen_data(gen_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace asbu
