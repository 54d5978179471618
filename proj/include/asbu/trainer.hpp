#pragma once

#include <iosfwd>
#include <span>

#include "asbu/network.hpp"
#include "asbu/synth.hpp"

namespace asbu {

struct TrainConfig {
    double momentum = 0.9;
    double lr_init = 1e-2;
    double lr_step_fraction = 0.3;  // decay interval as a fraction of an epoch
    double lr_factor = 0.1;
    double lr_floor = 1e-6;
    double l2 = 1e-12;
    int batch_size = 8;
    int epochs = 20;
    double pos_weight = 0.0;  // 0 = per-batch background/foreground ratio, clamped [1,20]
    double split = 0.8;       // train fraction of an 80:20 split
    std::uint64_t seed = 1;
    double grad_clip_norm = 10.0;
    bool augment = false;

    void validate() const;
};

/// v <- momentum*v - lr*(g + l2*w); w <- w + v.
void momentum_sgd_update(std::span<double> w, std::span<const double> g, std::span<double> v,
                         double lr, double momentum, double l2);

struct StepRecord {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<StepRecord> history;
    std::vector<double> epoch_loss;  // mean step loss per epoch
};

/// Momentum-SGD training with step learning-rate decay (x lr_factor every
/// floor(lr_step_fraction * steps_per_epoch) steps, floored at lr_floor).
/// Deterministic given (seed, data, config); throws NumericError on NaN loss.
/// When `csv_log` is set, writes "step,lr,loss" lines per step.
TrainResult train(Network& net, const std::vector<SyntheticSample>& data,
                  const TrainConfig& cfg, std::ostream* csv_log = nullptr);

/// Seeded shuffle, then a disjoint exhaustive split with sizes within 1 of
/// the exact ratio (both sides non-empty).
std::pair<std::vector<SyntheticSample>, std::vector<SyntheticSample>> split_dataset(
    const std::vector<SyntheticSample>& data, double ratio, std::uint64_t seed);

/// Stacks samples [begin, end) into (B,3,S,S) images and (B,1,S,S) labels.
std::pair<Tensor, Tensor> make_batch(const std::vector<SyntheticSample>& data,
                                     std::span<const int> indices);

/// Inference + 0.5 binarization + ignore-band scoring over a dataset.
EvalReport evaluate_network(Network& net, const std::vector<SyntheticSample>& data,
                            const IgnoreBandParams& params = {});

BinaryMask binarize_mask(const Tensor& mask, int batch_index, double threshold);

}  // namespace asbu
