#include "asbu/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asbu/parallel.hpp"

namespace asbu {

Padding same_padding(int kh, int kw, int dilation) {
    int total_h = dilation * (kh - 1);
    int total_w = dilation * (kw - 1);
    Padding p;
    p.top = total_h / 2;
    p.bottom = total_h - p.top;
    p.left = total_w / 2;
    p.right = total_w - p.left;
    return p;
}

namespace {

struct ConvDims {
    int oh, ow;
};

ConvDims conv_output_dims(const Tensor& x, const ConvParams& p) {
    if (x.shape.c != p.in_channels()) {
        throw ShapeError("conv2d: input has " + std::to_string(x.shape.c) +
                         " channels, kernel expects " + std::to_string(p.in_channels()));
    }
    if (p.stride < 1 || p.dilation < 1) {
        throw ShapeError("conv2d: stride and dilation must be >= 1");
    }
    if (static_cast<int>(p.bias.size()) != p.out_channels()) {
        throw ShapeError("conv2d: bias length does not match out_channels");
    }
    std::int64_t eh = x.shape.h + p.pad.top + p.pad.bottom -
                      static_cast<std::int64_t>(p.dilation) * (p.kh() - 1) - 1;
    std::int64_t ew = x.shape.w + p.pad.left + p.pad.right -
                      static_cast<std::int64_t>(p.dilation) * (p.kw() - 1) - 1;
    if (eh < 0 || ew < 0) {
        throw ShapeError("conv2d: non-positive output dims for input " + x.shape.str());
    }
    return {static_cast<int>(eh / p.stride) + 1, static_cast<int>(ew / p.stride) + 1};
}

// Output index span [o_begin, o_end) for which o*stride - pad + k*dilation
// lands inside [0, in_dim).
inline void valid_span(int out_dim, int in_dim, int stride, int pad, int tap, int& o_begin,
                       int& o_end) {
    // o*stride >= pad - tap  and  o*stride <= in_dim - 1 + pad - tap
    int lo = pad - tap;
    o_begin = lo <= 0 ? 0 : (lo + stride - 1) / stride;
    int hi = in_dim - 1 + pad - tap;
    o_end = hi < 0 ? 0 : std::min(out_dim, hi / stride + 1);
    if (o_begin > o_end) o_begin = o_end;
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const ConvParams& p) {
    ConvDims d = conv_output_dims(x, p);
    const int N = x.shape.n, IC = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int OC = p.out_channels(), KH = p.kh(), KW = p.kw();
    const int s = p.stride, dil = p.dilation;
    Tensor out(N, OC, d.oh, d.ow);

    parallel_for(static_cast<std::int64_t>(N) * OC, [&](std::int64_t idx) {
        const int b = static_cast<int>(idx / OC);
        const int oc = static_cast<int>(idx % OC);
        double* out_plane = &out.v[static_cast<std::size_t>(out.offset(b, oc, 0, 0))];
        std::fill(out_plane, out_plane + static_cast<std::size_t>(d.oh) * d.ow, p.bias[oc]);
        for (int ic = 0; ic < IC; ++ic) {
            const double* x_plane = &x.v[static_cast<std::size_t>(x.offset(b, ic, 0, 0))];
            for (int ky = 0; ky < KH; ++ky) {
                int oy0, oy1;
                valid_span(d.oh, H, s, p.pad.top, ky * dil, oy0, oy1);
                for (int kx = 0; kx < KW; ++kx) {
                    const double w = p.kernel.e(oc, ic, ky, kx);
                    int ox0, ox1;
                    valid_span(d.ow, W, s, p.pad.left, kx * dil, ox0, ox1);
                    const int xoff = kx * dil - p.pad.left;
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const int iy = oy * s - p.pad.top + ky * dil;
                        const double* xrow = x_plane + static_cast<std::size_t>(iy) * W;
                        double* orow = out_plane + static_cast<std::size_t>(oy) * d.ow;
                        if (s == 1) {
                            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += w * xrow[ox + xoff];
                        } else {
                            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += w * xrow[ox * s + xoff];
                        }
                    }
                }
            }
        }
    });
    return out;
}

ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out) {
    ConvDims d = conv_output_dims(x, p);
    if (grad_out.shape.n != x.shape.n || grad_out.shape.c != p.out_channels() ||
        grad_out.shape.h != d.oh || grad_out.shape.w != d.ow) {
        throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape.str() +
                         " does not match forward output");
    }
    const int N = x.shape.n, IC = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int OC = p.out_channels(), KH = p.kh(), KW = p.kw();
    const int s = p.stride, dil = p.dilation;

    ConvGrads g;
    g.grad_x = Tensor(x.shape);
    g.grad_kernel = Tensor(p.kernel.shape);
    g.grad_bias.assign(static_cast<std::size_t>(OC), 0.0);

    // Bias and kernel gradients, one output channel per task.
    parallel_for(OC, [&](std::int64_t oc_i) {
        const int oc = static_cast<int>(oc_i);
        double bsum = 0.0;
        for (int b = 0; b < N; ++b) {
            const double* go_plane = &grad_out.v[grad_out.offset(b, oc, 0, 0)];
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.oh) * d.ow; ++i) {
                bsum += go_plane[i];
            }
            for (int ic = 0; ic < IC; ++ic) {
                const double* x_plane = &x.v[x.offset(b, ic, 0, 0)];
                for (int ky = 0; ky < KH; ++ky) {
                    int oy0, oy1;
                    valid_span(d.oh, H, s, p.pad.top, ky * dil, oy0, oy1);
                    for (int kx = 0; kx < KW; ++kx) {
                        int ox0, ox1;
                        valid_span(d.ow, W, s, p.pad.left, kx * dil, ox0, ox1);
                        const int xoff = kx * dil - p.pad.left;
                        double acc = 0.0;
                        for (int oy = oy0; oy < oy1; ++oy) {
                            const int iy = oy * s - p.pad.top + ky * dil;
                            const double* xrow = x_plane + static_cast<std::size_t>(iy) * W;
                            const double* gorow = go_plane + static_cast<std::size_t>(oy) * d.ow;
                            if (s == 1) {
                                for (int ox = ox0; ox < ox1; ++ox) acc += gorow[ox] * xrow[ox + xoff];
                            } else {
                                for (int ox = ox0; ox < ox1; ++ox)
                                    acc += gorow[ox] * xrow[ox * s + xoff];
                            }
                        }
                        g.grad_kernel.e(oc, ic, ky, kx) += acc;
                    }
                }
            }
        }
        g.grad_bias[static_cast<std::size_t>(oc)] = bsum;
    });

    // Input gradient, one batch element per task.
    parallel_for(N, [&](std::int64_t b_i) {
        const int b = static_cast<int>(b_i);
        for (int oc = 0; oc < OC; ++oc) {
            const double* go_plane = &grad_out.v[grad_out.offset(b, oc, 0, 0)];
            for (int ic = 0; ic < IC; ++ic) {
                double* gx_plane = &g.grad_x.v[g.grad_x.offset(b, ic, 0, 0)];
                for (int ky = 0; ky < KH; ++ky) {
                    int oy0, oy1;
                    valid_span(d.oh, H, s, p.pad.top, ky * dil, oy0, oy1);
                    for (int kx = 0; kx < KW; ++kx) {
                        const double w = p.kernel.e(oc, ic, ky, kx);
                        int ox0, ox1;
                        valid_span(d.ow, W, s, p.pad.left, kx * dil, ox0, ox1);
                        const int xoff = kx * dil - p.pad.left;
                        for (int oy = oy0; oy < oy1; ++oy) {
                            const int iy = oy * s - p.pad.top + ky * dil;
                            double* gxrow = gx_plane + static_cast<std::size_t>(iy) * W;
                            const double* gorow = go_plane + static_cast<std::size_t>(oy) * d.ow;
                            if (s == 1) {
                                for (int ox = ox0; ox < ox1; ++ox) gxrow[ox + xoff] += w * gorow[ox];
                            } else {
                                for (int ox = ox0; ox < ox1; ++ox)
                                    gxrow[ox * s + xoff] += w * gorow[ox];
                            }
                        }
                    }
                }
            }
        }
    });
    return g;
}

PoolResult maxpool_forward(const Tensor& x, const PoolParams& p) {
    if (p.kernel < 1 || p.stride < 1) {
        throw ShapeError("maxpool: kernel and stride must be >= 1");
    }
    if (p.kernel > x.shape.h || p.kernel > x.shape.w) {
        throw ShapeError("maxpool: window larger than input " + x.shape.str());
    }
    const int N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int OH = (H - p.kernel) / p.stride + 1;
    const int OW = (W - p.kernel) / p.stride + 1;

    PoolResult r;
    r.out = Tensor(N, C, OH, OW);
    r.argmax.assign(static_cast<std::size_t>(r.out.size()), 0);
    std::int64_t oi = 0;
    for (int b = 0; b < N; ++b) {
        for (int c = 0; c < C; ++c) {
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::int64_t best_idx = 0;
                    for (int ky = 0; ky < p.kernel; ++ky) {
                        for (int kx = 0; kx < p.kernel; ++kx) {
                            std::int64_t idx =
                                x.offset(b, c, oy * p.stride + ky, ox * p.stride + kx);
                            double v = x.v[static_cast<std::size_t>(idx)];
                            if (v > best) {  // strict: first occurrence wins ties
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    r.out.v[static_cast<std::size_t>(oi)] = best;
                    r.argmax[static_cast<std::size_t>(oi)] = best_idx;
                }
            }
        }
    }
    return r;
}

Tensor maxpool_backward(const Shape4& in_shape, const std::vector<std::int64_t>& argmax,
                        const Tensor& grad_out) {
    if (static_cast<std::int64_t>(argmax.size()) != grad_out.size()) {
        throw ShapeError("maxpool_backward: argmax/grad_out size mismatch");
    }
    Tensor gx(in_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) {
        gx.v[static_cast<std::size_t>(argmax[i])] += grad_out.v[i];
    }
    return gx;
}

BatchNormState BatchNormState::identity(int channels, double decay) {
    BatchNormState s;
    s.gamma.assign(static_cast<std::size_t>(channels), 1.0);
    s.beta.assign(static_cast<std::size_t>(channels), 0.0);
    s.running_mean.assign(static_cast<std::size_t>(channels), 0.0);
    s.running_var.assign(static_cast<std::size_t>(channels), 1.0);
    s.average_decay = decay;
    return s;
}

Tensor batchnorm_forward(const Tensor& x, BatchNormState& s, bool training,
                         BatchNormCache* cache) {
    const int C = x.shape.c;
    if (s.channels() != C) {
        throw ShapeError("batchnorm: state has " + std::to_string(s.channels()) +
                         " channels, input has " + std::to_string(C));
    }
    const int N = x.shape.n, H = x.shape.h, W = x.shape.w;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t m = static_cast<std::int64_t>(N) * plane;

    std::vector<double> mean(static_cast<std::size_t>(C), 0.0);
    std::vector<double> var(static_cast<std::size_t>(C), 0.0);
    if (training) {
        for (int c = 0; c < C; ++c) {
            double sum = 0.0;
            for (int b = 0; b < N; ++b) {
                const double* p = &x.v[x.offset(b, c, 0, 0)];
                for (std::int64_t i = 0; i < plane; ++i) sum += p[i];
            }
            mean[c] = sum / static_cast<double>(m);
            double sq = 0.0;
            for (int b = 0; b < N; ++b) {
                const double* p = &x.v[x.offset(b, c, 0, 0)];
                for (std::int64_t i = 0; i < plane; ++i) {
                    double dv = p[i] - mean[c];
                    sq += dv * dv;
                }
            }
            var[c] = sq / static_cast<double>(m);
            s.running_mean[c] = s.average_decay * s.running_mean[c] +
                                (1.0 - s.average_decay) * mean[c];
            s.running_var[c] =
                s.average_decay * s.running_var[c] + (1.0 - s.average_decay) * var[c];
        }
    } else {
        mean = s.running_mean;
        var = s.running_var;
    }

    Tensor out(x.shape);
    std::vector<double> inv_std(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + s.epsilon);

    if (cache) {
        cache->x_hat.resize(x.v.size());
        cache->mean = mean;
        cache->inv_std = inv_std;
        cache->per_channel_count = m;
        cache->training = training;
    }
    for (int b = 0; b < N; ++b) {
        for (int c = 0; c < C; ++c) {
            const double* p = &x.v[x.offset(b, c, 0, 0)];
            double* o = &out.v[out.offset(b, c, 0, 0)];
            double* xh = cache ? &cache->x_hat[static_cast<std::size_t>(x.offset(b, c, 0, 0))]
                               : nullptr;
            const double g = s.gamma[c], bt = s.beta[c], is = inv_std[c], mu = mean[c];
            for (std::int64_t i = 0; i < plane; ++i) {
                double h = (p[i] - mu) * is;
                if (xh) xh[i] = h;
                o[i] = g * h + bt;
            }
        }
    }
    return out;
}

BatchNormGrads batchnorm_backward(const BatchNormState& s, const BatchNormCache& cache,
                                  const Tensor& grad_out) {
    const int C = grad_out.shape.c;
    if (s.channels() != C) {
        throw ShapeError("batchnorm_backward: channel mismatch");
    }
    const int N = grad_out.shape.n, H = grad_out.shape.h, W = grad_out.shape.w;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const double m = static_cast<double>(cache.per_channel_count);

    BatchNormGrads g;
    g.grad_x = Tensor(grad_out.shape);
    g.grad_gamma.assign(static_cast<std::size_t>(C), 0.0);
    g.grad_beta.assign(static_cast<std::size_t>(C), 0.0);

    for (int c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int b = 0; b < N; ++b) {
            const double* dy = &grad_out.v[grad_out.offset(b, c, 0, 0)];
            const double* xh = &cache.x_hat[static_cast<std::size_t>(grad_out.offset(b, c, 0, 0))];
            for (std::int64_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xh[i];
            }
        }
        g.grad_gamma[c] = sum_dy_xhat;
        g.grad_beta[c] = sum_dy;
        const double gis = s.gamma[c] * cache.inv_std[c];
        for (int b = 0; b < N; ++b) {
            const double* dy = &grad_out.v[grad_out.offset(b, c, 0, 0)];
            const double* xh = &cache.x_hat[static_cast<std::size_t>(grad_out.offset(b, c, 0, 0))];
            double* dx = &g.grad_x.v[g.grad_x.offset(b, c, 0, 0)];
            if (cache.training) {
                for (std::int64_t i = 0; i < plane; ++i) {
                    dx[i] = gis * (dy[i] - sum_dy / m - xh[i] * sum_dy_xhat / m);
                }
            } else {
                for (std::int64_t i = 0; i < plane; ++i) dx[i] = gis * dy[i];
            }
        }
    }
    return g;
}

namespace {

struct LerpTap {
    int i0, i1;
    double f;  // weight of i1
};

inline LerpTap lerp_tap(int o, int out_dim, int in_dim) {
    double scale = static_cast<double>(in_dim) / out_dim;
    double src = (o + 0.5) * scale - 0.5;
    double fl = std::floor(src);
    LerpTap t;
    t.f = src - fl;
    int i0 = static_cast<int>(fl);
    t.i0 = std::clamp(i0, 0, in_dim - 1);
    t.i1 = std::clamp(i0 + 1, 0, in_dim - 1);
    return t;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw ShapeError("bilinear_resize: output dims must be >= 1");
    }
    const int N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    Tensor out(N, C, out_h, out_w);
    std::vector<LerpTap> ty(static_cast<std::size_t>(out_h)), tx(static_cast<std::size_t>(out_w));
    for (int oy = 0; oy < out_h; ++oy) ty[oy] = lerp_tap(oy, out_h, H);
    for (int ox = 0; ox < out_w; ++ox) tx[ox] = lerp_tap(ox, out_w, W);

    for (int b = 0; b < N; ++b) {
        for (int c = 0; c < C; ++c) {
            const double* p = &x.v[x.offset(b, c, 0, 0)];
            double* o = &out.v[out.offset(b, c, 0, 0)];
            for (int oy = 0; oy < out_h; ++oy) {
                const double* r0 = p + static_cast<std::size_t>(ty[oy].i0) * W;
                const double* r1 = p + static_cast<std::size_t>(ty[oy].i1) * W;
                const double fy = ty[oy].f;
                for (int ox = 0; ox < out_w; ++ox) {
                    const double fx = tx[ox].f;
                    double top = (1.0 - fx) * r0[tx[ox].i0] + fx * r0[tx[ox].i1];
                    double bot = (1.0 - fx) * r1[tx[ox].i0] + fx * r1[tx[ox].i1];
                    o[static_cast<std::size_t>(oy) * out_w + ox] = (1.0 - fy) * top + fy * bot;
                }
            }
        }
    }
    return out;
}

Tensor bilinear_resize_backward(const Shape4& in_shape, const Tensor& grad_out) {
    const int N = in_shape.n, C = in_shape.c, H = in_shape.h, W = in_shape.w;
    const int out_h = grad_out.shape.h, out_w = grad_out.shape.w;
    if (grad_out.shape.n != N || grad_out.shape.c != C) {
        throw ShapeError("bilinear_resize_backward: batch/channel mismatch");
    }
    Tensor gx(in_shape);
    std::vector<LerpTap> ty(static_cast<std::size_t>(out_h)), tx(static_cast<std::size_t>(out_w));
    for (int oy = 0; oy < out_h; ++oy) ty[oy] = lerp_tap(oy, out_h, H);
    for (int ox = 0; ox < out_w; ++ox) tx[ox] = lerp_tap(ox, out_w, W);

    for (int b = 0; b < N; ++b) {
        for (int c = 0; c < C; ++c) {
            double* g = &gx.v[gx.offset(b, c, 0, 0)];
            const double* go = &grad_out.v[grad_out.offset(b, c, 0, 0)];
            for (int oy = 0; oy < out_h; ++oy) {
                const double fy = ty[oy].f;
                for (int ox = 0; ox < out_w; ++ox) {
                    const double fx = tx[ox].f;
                    const double d = go[static_cast<std::size_t>(oy) * out_w + ox];
                    g[static_cast<std::size_t>(ty[oy].i0) * W + tx[ox].i0] +=
                        d * (1.0 - fy) * (1.0 - fx);
                    g[static_cast<std::size_t>(ty[oy].i0) * W + tx[ox].i1] += d * (1.0 - fy) * fx;
                    g[static_cast<std::size_t>(ty[oy].i1) * W + tx[ox].i0] += d * fy * (1.0 - fx);
                    g[static_cast<std::size_t>(ty[oy].i1) * W + tx[ox].i1] += d * fy * fx;
                }
            }
        }
    }
    return gx;
}

Tensor concat_channels(const std::vector<const Tensor*>& xs) {
    if (xs.empty()) {
        throw ShapeError("concat_channels: empty input list");
    }
    const Shape4 first = xs[0]->shape;
    int channels = 0;
    for (const Tensor* t : xs) {
        if (t->shape.n != first.n || t->shape.h != first.h || t->shape.w != first.w) {
            throw ShapeError("concat_channels: spatial/batch mismatch " + t->shape.str() +
                             " vs " + first.str());
        }
        channels += t->shape.c;
    }
    Tensor out(first.n, channels, first.h, first.w);
    const std::int64_t plane = static_cast<std::int64_t>(first.h) * first.w;
    for (int b = 0; b < first.n; ++b) {
        int c_base = 0;
        for (const Tensor* t : xs) {
            for (int c = 0; c < t->shape.c; ++c) {
                const double* src = &t->v[t->offset(b, c, 0, 0)];
                double* dst = &out.v[out.offset(b, c_base + c, 0, 0)];
                std::copy(src, src + plane, dst);
            }
            c_base += t->shape.c;
        }
    }
    return out;
}

std::vector<Tensor> concat_channels_backward(const std::vector<Shape4>& in_shapes,
                                             const Tensor& grad_out) {
    std::vector<Tensor> grads;
    grads.reserve(in_shapes.size());
    int c_base = 0;
    for (const Shape4& s : in_shapes) {
        grads.push_back(slice_channels(grad_out, c_base, c_base + s.c));
        c_base += s.c;
    }
    if (c_base != grad_out.shape.c) {
        throw ShapeError("concat_channels_backward: channel total mismatch");
    }
    return grads;
}

Tensor slice_channels(const Tensor& x, int c_begin, int c_end) {
    if (c_begin < 0 || c_end > x.shape.c || c_begin >= c_end) {
        throw ShapeError("slice_channels: bad range");
    }
    Tensor out(x.shape.n, c_end - c_begin, x.shape.h, x.shape.w);
    const std::int64_t plane = static_cast<std::int64_t>(x.shape.h) * x.shape.w;
    for (int b = 0; b < x.shape.n; ++b) {
        for (int c = c_begin; c < c_end; ++c) {
            const double* src = &x.v[x.offset(b, c, 0, 0)];
            double* dst = &out.v[out.offset(b, c - c_begin, 0, 0)];
            std::copy(src, src + plane, dst);
        }
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.v.size(); ++i) out.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& out, const Tensor& grad_out) {
    check_same_shape(out, grad_out, "relu_backward");
    Tensor gx(out.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        gx.v[i] = out.v[i] > 0.0 ? grad_out.v[i] : 0.0;
    }
    return gx;
}

namespace {

inline double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double softplus(double z) {
    // log(1 + e^z), stable for large |z|
    return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
}

void check_labels(const Tensor& labels) {
    for (double y : labels.v) {
        if (y != 0.0 && y != 1.0) {
            throw NumericError("bce: labels must be exactly 0 or 1");
        }
    }
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.v.size(); ++i) out.v[i] = stable_sigmoid(x.v[i]);
    return out;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
    check_same_shape(y, grad_out, "sigmoid_backward");
    Tensor gx(y.shape);
    for (std::size_t i = 0; i < y.v.size(); ++i) {
        gx.v[i] = grad_out.v[i] * y.v[i] * (1.0 - y.v[i]);
    }
    return gx;
}

double weighted_bce_from_logits(const Tensor& logits, const Tensor& labels, double pos_weight) {
    check_same_shape(logits, labels, "weighted_bce");
    if (pos_weight <= 0.0) {
        throw NumericError("bce: pos_weight must be > 0");
    }
    check_labels(labels);
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        double z = std::clamp(logits.v[i], -kBceLogitClamp, kBceLogitClamp);
        double y = labels.v[i];
        acc += pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
    }
    return acc / static_cast<double>(logits.v.size());
}

Tensor weighted_bce_grad_from_logits(const Tensor& logits, const Tensor& labels,
                                     double pos_weight) {
    check_same_shape(logits, labels, "weighted_bce");
    check_labels(labels);
    Tensor g(logits.shape);
    const double inv_n = 1.0 / static_cast<double>(logits.v.size());
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        double z = logits.v[i];
        if (z < -kBceLogitClamp || z > kBceLogitClamp) {
            g.v[i] = 0.0;  // loss is constant past the clamp
            continue;
        }
        double y = labels.v[i];
        g.v[i] = ((1.0 - y) * stable_sigmoid(z) - pos_weight * y * stable_sigmoid(-z)) * inv_n;
    }
    return g;
}

double weighted_bce(const Tensor& pred, const Tensor& labels, double pos_weight) {
    Tensor logits(pred.shape);
    const double p_min = stable_sigmoid(-kBceLogitClamp);
    const double p_max = stable_sigmoid(kBceLogitClamp);
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        double p = std::clamp(pred.v[i], p_min, p_max);
        logits.v[i] = std::log(p / (1.0 - p));
    }
    return weighted_bce_from_logits(logits, labels, pos_weight);
}

}  // namespace asbu
