#include "asbu/synth.hpp"

#include <algorithm>
#include <cmath>

#include "asbu/nn_ops.hpp"
#include "asbu/rng.hpp"

namespace asbu {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Blob {
    SyntheticSample::BlobMeta meta;
    double wobble_amp = 0.0;  // polygon radial wobble
    int wobble_lobes = 5;
    double wobble_phase = 0.0;
    double color[3];

    // Normalized radial coordinate: <= 1 inside the blob.
    double radial(double px, double py) const {
        double dx = px - meta.cx, dy = py - meta.cy;
        double ca = std::cos(meta.angle), sa = std::sin(meta.angle);
        double u = (ca * dx + sa * dy) / meta.rx;
        double v = (-sa * dx + ca * dy) / meta.ry;
        double d = std::sqrt(u * u + v * v);
        if (meta.kind == 1 && d > 1e-12) {
            double phi = std::atan2(v, u);
            double edge = 1.0 + wobble_amp * std::sin(wobble_lobes * phi + wobble_phase);
            d /= edge;
        }
        return d;
    }

    double coverage(double px, double py) const {
        // Soft edge roughly 1.5 px wide; coverage 0.5 exactly on the contour.
        double delta = 1.5 / std::min(meta.rx, meta.ry);
        double d = radial(px, py);
        return std::clamp(0.5 + (1.0 - d) / (2.0 * delta), 0.0, 1.0);
    }
};

}  // namespace

double SyntheticSample::BlobMeta::linear_size() const { return std::sqrt(rx * ry); }

std::vector<SyntheticSample> generate_dataset(int n, int image_size, std::uint64_t seed,
                                              const DatasetOptions& opts) {
    if (n < 1) throw ConfigError("generate_dataset: need n >= 1");
    if (image_size < 16 || image_size % 16 != 0) {
        throw ConfigError("generate_dataset: image size must be a positive multiple of 16");
    }
    const int S = image_size;
    Rng rng(seed);
    std::vector<SyntheticSample> out;
    out.reserve(static_cast<std::size_t>(n));

    for (int si = 0; si < n; ++si) {
        SyntheticSample sample;
        sample.image = Tensor(1, 3, S, S);
        sample.label = BinaryMask(S, S, 0);

        // Dark, slowly varying background texture.
        double base[3] = {rng.uniform(0.08, 0.30), rng.uniform(0.08, 0.30),
                          rng.uniform(0.12, 0.35)};
        double fx = rng.uniform(1.0, 3.0), fy = rng.uniform(1.0, 3.0);
        double px = rng.uniform(0.0, 2.0 * kPi), py = rng.uniform(0.0, 2.0 * kPi);
        double amp = rng.uniform(0.02, 0.07);

        for (int attempt = 0;; ++attempt) {
            sample.blobs.clear();
            int blobs = rng.uniform_int(1, 4);
            std::vector<Blob> placed;
            for (int bi = 0; bi < blobs; ++bi) {
                Blob b;
                for (int tries = 0; tries < 16; ++tries) {
                    // size mix biased toward large objects so foreground and
                    // background stay roughly balanced across a batch
                    double span = opts.max_radius_frac - opts.min_radius_frac;
                    double frac = rng.bernoulli(0.3)
                                      ? rng.uniform(opts.min_radius_frac,
                                                    opts.min_radius_frac + 0.25 * span)
                                      : rng.uniform(opts.min_radius_frac + 0.4 * span,
                                                    opts.max_radius_frac);
                    b.meta.rx = frac * S;
                    b.meta.ry = b.meta.rx * rng.uniform(0.55, 1.0);
                    if (rng.bernoulli(0.5)) std::swap(b.meta.rx, b.meta.ry);
                    b.meta.cx = rng.uniform(0.12, 0.88) * S;
                    b.meta.cy = rng.uniform(0.12, 0.88) * S;
                    b.meta.angle = rng.uniform(0.0, kPi);
                    b.meta.kind = rng.bernoulli(0.5) ? 1 : 0;
                    if (opts.allow_occlusion) break;
                    bool clash = false;
                    for (const Blob& other : placed) {
                        double dx = other.meta.cx - b.meta.cx, dy = other.meta.cy - b.meta.cy;
                        double lim = std::max(other.meta.rx, other.meta.ry) +
                                     std::max(b.meta.rx, b.meta.ry);
                        if (dx * dx + dy * dy < lim * lim) clash = true;
                    }
                    if (!clash) break;
                }
                if (b.meta.kind == 1) {
                    b.wobble_amp = rng.uniform(0.05, 0.22);
                    b.wobble_lobes = rng.uniform_int(3, 7);
                    b.wobble_phase = rng.uniform(0.0, 2.0 * kPi);
                }
                // Bright, warm blob palette, clearly separated from background.
                b.color[0] = rng.uniform(0.65, 0.95);
                b.color[1] = rng.uniform(0.50, 0.85);
                b.color[2] = rng.uniform(0.15, 0.45);
                placed.push_back(b);
            }

            std::fill(sample.label.bits.begin(), sample.label.bits.end(), 0);
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    double tex = amp * std::sin(2.0 * kPi * fx * x / S + px) *
                                 std::sin(2.0 * kPi * fy * y / S + py);
                    double pix[3] = {base[0] + tex, base[1] + tex, base[2] + tex};
                    for (const Blob& b : placed) {
                        double a = b.coverage(x, y);
                        if (a <= 0.0) continue;
                        for (int c = 0; c < 3; ++c) {
                            pix[c] = (1.0 - a) * pix[c] + a * b.color[c];
                        }
                        if (a >= 0.5) sample.label.at(y, x) = 1;
                    }
                    for (int c = 0; c < 3; ++c) {
                        sample.image.e(0, c, y, x) = std::clamp(pix[c], 0.0, 1.0);
                    }
                }
            }

            double frac = static_cast<double>(sample.label.count()) / (S * S);
            if (frac > 0.0 && frac < opts.max_foreground_frac) {
                sample.blobs.clear();
                for (const Blob& b : placed) sample.blobs.push_back(b.meta);
                break;
            }
            if (attempt > 32) {
                throw NumericError("generate_dataset: could not place blobs within bounds");
            }
        }
        out.push_back(std::move(sample));
    }
    return out;
}

SyntheticSample augment(const SyntheticSample& sample, std::uint64_t seed,
                        const AugmentOptions& opts, AugmentApplied* applied) {
    Rng rng(seed);
    const int S = sample.label.w;
    SyntheticSample out = sample;

    bool flipped = rng.bernoulli(opts.flip_prob);
    if (applied) *applied = AugmentApplied{};
    if (flipped) {
        if (applied) applied->flipped = true;
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    out.image.e(0, c, y, x) = sample.image.e(0, c, y, S - 1 - x);
                }
            }
        }
        for (int y = 0; y < S; ++y) {
            for (int x = 0; x < S; ++x) {
                out.label.at(y, x) = sample.label.at(y, S - 1 - x);
            }
        }
        for (auto& b : out.blobs) {
            b.cx = S - 1 - b.cx;
            b.angle = kPi - b.angle;
        }
    }

    if (opts.crop) {
        double axis_min = std::sqrt(opts.min_crop_area);
        int cw = std::max(1, static_cast<int>(std::lround(rng.uniform(axis_min, 1.0) * S)));
        int ch = std::max(1, static_cast<int>(std::lround(rng.uniform(axis_min, 1.0) * S)));
        int x0 = rng.uniform_int(0, S - cw);
        int y0 = rng.uniform_int(0, S - ch);
        if (applied) {
            applied->crop_x0 = x0;
            applied->crop_y0 = y0;
            applied->crop_w = cw;
            applied->crop_h = ch;
        }

        Tensor crop(1, 3, ch, cw);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < ch; ++y) {
                for (int x = 0; x < cw; ++x) {
                    crop.e(0, c, y, x) = out.image.e(0, c, y0 + y, x0 + x);
                }
            }
        }
        Tensor resized = bilinear_resize(crop, S, S);
        BinaryMask lbl(S, S, 0);
        for (int y = 0; y < S; ++y) {
            int sy = std::min(ch - 1, static_cast<int>((y + 0.5) * ch / S));
            for (int x = 0; x < S; ++x) {
                int sx = std::min(cw - 1, static_cast<int>((x + 0.5) * cw / S));
                lbl.at(y, x) = out.label.at(y0 + sy, x0 + sx);
            }
        }
        out.image = std::move(resized);
        out.label = std::move(lbl);
        for (auto& b : out.blobs) {
            b.cx = (b.cx - x0) * static_cast<double>(S) / cw;
            b.cy = (b.cy - y0) * static_cast<double>(S) / ch;
            b.rx *= static_cast<double>(S) / cw;
            b.ry *= static_cast<double>(S) / ch;
        }
    }

    if (opts.noise && opts.noise_sigma > 0.0) {
        for (double& v : out.image.v) {
            v = std::clamp(v + rng.normal(0.0, opts.noise_sigma), 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace asbu
