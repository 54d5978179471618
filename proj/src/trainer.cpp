#include "asbu/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace asbu {

void TrainConfig::validate() const {
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
    if (lr_init <= 0.0) throw ConfigError("train: lr_init must be > 0");
    if (lr_factor <= 0.0 || lr_factor >= 1.0) {
        throw ConfigError("train: lr_factor must be in (0,1)");
    }
    if (lr_step_fraction <= 0.0) throw ConfigError("train: lr_step_fraction must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (pos_weight < 0.0) throw ConfigError("train: pos_weight must be >= 0");
    if (split <= 0.0 || split >= 1.0) throw ConfigError("train: split must be in (0,1)");
    if (l2 < 0.0) throw ConfigError("train: l2 must be >= 0");
}

void momentum_sgd_update(std::span<double> w, std::span<const double> g, std::span<double> v,
                         double lr, double momentum, double l2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum * v[i] - lr * (g[i] + l2 * w[i]);
        w[i] += v[i];
    }
}

std::pair<Tensor, Tensor> make_batch(const std::vector<SyntheticSample>& data,
                                     std::span<const int> indices) {
    if (indices.empty()) throw ShapeError("make_batch: empty index list");
    const Shape4 s = data[static_cast<std::size_t>(indices[0])].image.shape;
    Tensor images(static_cast<int>(indices.size()), s.c, s.h, s.w);
    Tensor labels(static_cast<int>(indices.size()), 1, s.h, s.w);
    for (std::size_t bi = 0; bi < indices.size(); ++bi) {
        const SyntheticSample& sm = data[static_cast<std::size_t>(indices[bi])];
        check_same_shape(sm.image, data[static_cast<std::size_t>(indices[0])].image,
                         "make_batch");
        std::copy(sm.image.v.begin(), sm.image.v.end(),
                  images.v.begin() + static_cast<std::int64_t>(bi) * sm.image.size());
        double* lbl = &labels.v[labels.offset(static_cast<int>(bi), 0, 0, 0)];
        for (std::size_t i = 0; i < sm.label.bits.size(); ++i) {
            lbl[i] = static_cast<double>(sm.label.bits[i]);
        }
    }
    return {std::move(images), std::move(labels)};
}

namespace {

double auto_pos_weight(const Tensor& labels) {
    std::int64_t pos = 0;
    for (double y : labels.v) pos += (y == 1.0);
    std::int64_t neg = static_cast<std::int64_t>(labels.v.size()) - pos;
    double w = pos == 0 ? 20.0 : static_cast<double>(neg) / static_cast<double>(pos);
    return std::clamp(w, 1.0, 20.0);
}

struct Velocities {
    std::map<std::string, std::vector<double>> v;

    std::vector<double>& at(const std::string& name, std::size_t size) {
        auto it = v.find(name);
        if (it == v.end()) {
            it = v.emplace(name, std::vector<double>(size, 0.0)).first;
        }
        return it->second;
    }
};

void clip_gradients(Network& net, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    visit_params(net, [&](const ParamView& p) {
        if (!p.trainable || !p.grad) return;
        for (std::size_t i = 0; i < p.size; ++i) sq += p.grad[i] * p.grad[i];
    });
    double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    double scale = max_norm / norm;
    visit_params(net, [&](const ParamView& p) {
        if (!p.trainable || !p.grad) return;
        for (std::size_t i = 0; i < p.size; ++i) p.grad[i] *= scale;
    });
}

}  // namespace

TrainResult train(Network& net, const std::vector<SyntheticSample>& data,
                  const TrainConfig& cfg, std::ostream* csv_log) {
    cfg.validate();
    if (data.empty()) throw ConfigError("train: empty dataset");

    const int n = static_cast<int>(data.size());
    const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int decay_every =
        std::max(1, static_cast<int>(cfg.lr_step_fraction * steps_per_epoch));

    // One seeded order reused every epoch keeps runs bit-reproducible.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(cfg.seed);
    for (int i = n - 1; i > 0; --i) {
        int j = shuffle_rng.uniform_int(0, i);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    Velocities vel;
    TrainResult result;
    double lr = cfg.lr_init;
    int step = 0;
    if (csv_log) (*csv_log) << "step,lr,loss\n";

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_sum = 0.0;
        for (int s0 = 0; s0 < n; s0 += cfg.batch_size) {
            std::vector<int> idx(order.begin() + s0,
                                 order.begin() + std::min(n, s0 + cfg.batch_size));

            Tensor images, labels;
            if (cfg.augment) {
                std::vector<SyntheticSample> batch;
                batch.reserve(idx.size());
                for (int i : idx) {
                    std::uint64_t s = cfg.seed * 0x9e3779b97f4a7c15ULL +
                                      static_cast<std::uint64_t>(epoch) * 1000003ULL +
                                      static_cast<std::uint64_t>(i);
                    batch.push_back(augment(data[static_cast<std::size_t>(i)], s));
                }
                std::vector<int> all(batch.size());
                std::iota(all.begin(), all.end(), 0);
                std::tie(images, labels) = make_batch(batch, all);
            } else {
                std::tie(images, labels) = make_batch(data, idx);
            }

            NetTrace trace;
            network_forward(net, images, true, &trace);
            double pw = cfg.pos_weight > 0.0 ? cfg.pos_weight : auto_pos_weight(labels);
            double loss = weighted_bce_from_logits(trace.logits, labels, pw);
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                                   " (lr=" + std::to_string(lr) + ")");
            }

            zero_grads(net);
            Tensor grad = weighted_bce_grad_from_logits(trace.logits, labels, pw);
            network_backward(net, trace, grad);
            clip_gradients(net, cfg.grad_clip_norm);

            visit_params(net, [&](const ParamView& p) {
                if (!p.trainable || !p.grad) return;
                momentum_sgd_update({p.value, p.size}, {p.grad, p.size},
                                    vel.at(p.name, p.size), lr, cfg.momentum, cfg.l2);
            });

            result.history.push_back({step, lr, loss});
            if (csv_log) (*csv_log) << step << "," << lr << "," << loss << "\n";
            epoch_sum += loss;
            ++step;
            if (step % decay_every == 0) {
                lr = std::max(cfg.lr_floor, lr * cfg.lr_factor);
            }
        }
        result.epoch_loss.push_back(epoch_sum / steps_per_epoch);
    }
    return result;
}

std::pair<std::vector<SyntheticSample>, std::vector<SyntheticSample>> split_dataset(
    const std::vector<SyntheticSample>& data, double ratio, std::uint64_t seed) {
    if (data.size() < 2) throw ConfigError("split_dataset: need at least 2 samples");
    if (ratio <= 0.0 || ratio >= 1.0) throw ConfigError("split_dataset: ratio must be in (0,1)");
    const int n = static_cast<int>(data.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        int j = rng.uniform_int(0, i);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    int n_train = static_cast<int>(std::lround(ratio * n));
    n_train = std::clamp(n_train, 1, n - 1);
    std::pair<std::vector<SyntheticSample>, std::vector<SyntheticSample>> out;
    for (int i = 0; i < n; ++i) {
        if (i < n_train) {
            out.first.push_back(data[static_cast<std::size_t>(order[i])]);
        } else {
            out.second.push_back(data[static_cast<std::size_t>(order[i])]);
        }
    }
    return out;
}

BinaryMask binarize_mask(const Tensor& mask, int batch_index, double threshold) {
    BinaryMask m(mask.shape.h, mask.shape.w, 0);
    for (int y = 0; y < mask.shape.h; ++y) {
        for (int x = 0; x < mask.shape.w; ++x) {
            m.at(y, x) = mask.e(batch_index, 0, y, x) >= threshold ? 1 : 0;
        }
    }
    return m;
}

EvalReport evaluate_network(Network& net, const std::vector<SyntheticSample>& data,
                            const IgnoreBandParams& params) {
    std::vector<BinaryMask> labels, preds;
    labels.reserve(data.size());
    preds.reserve(data.size());
    for (const SyntheticSample& s : data) {
        Tensor mask = network_forward(net, s.image, false, nullptr);
        preds.push_back(binarize_mask(mask, 0, params.threshold));
        labels.push_back(s.label);
    }
    return evaluate_dataset(labels, preds, params);
}

}  // namespace asbu
