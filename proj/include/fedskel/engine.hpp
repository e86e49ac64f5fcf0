#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedskel/model.hpp"
#include "fedskel/tensor.hpp"

namespace fedskel {

// Per-layer channel keep/drop flags. Only prunable layers carry an entry; the
// entry for layer l has one byte per output channel (1 = keep).
struct ChannelMask {
    std::vector<std::vector<std::uint8_t>> channels;

    bool empty() const { return channels.empty(); }
    bool has(std::size_t layer) const {
        return layer < channels.size() && !channels[layer].empty();
    }
    std::size_t kept(std::size_t layer) const;

    static ChannelMask all_true(const Model& model);
};

// Checks that the mask carries an entry of the right length for every prunable
// layer (and nothing else), each with at least one surviving channel.
void validate_mask(const Model& model, const ChannelMask& mask);

// Wall-clock seconds spent in each layer's backward block, for kernel-level
// speedup measurements.
struct BackwardTimings {
    std::vector<double> seconds;

    double total() const {
        double s = 0.0;
        for (double v : seconds) s += v;
        return s;
    }
};

template <typename T = float>
struct ActivationCacheT {
    TensorT<T> batch;                                 // [N,C,H,W]
    std::vector<int> labels;                          // empty when predicting
    std::vector<TensorT<T>> outputs;                  // one per layer
    std::vector<TensorT<T>> conv_cols;                // [K, N*Ho*Wo] for conv layers
    std::vector<std::vector<std::uint32_t>> pool_argmax;  // flat input index per output
    std::size_t batch_n = 0;

    bool valid() const { return batch_n > 0 && !outputs.empty(); }
};

using ActivationCache = ActivationCacheT<float>;

template <typename T = float>
struct ForwardResultT {
    T loss = T(0);
    TensorT<T> probs;  // [N, classes]
};

using ForwardResult = ForwardResultT<float>;

namespace detail {

inline void check_finite_count(std::size_t bad, const std::string& where) {
    if (bad > 0) {
        throw std::runtime_error("non-finite gradient in " + where + " (" +
                                 std::to_string(bad) + " entries)");
    }
}

}  // namespace detail

// Dense forward pass. Every channel participates regardless of any mask; the
// cache keeps per-layer outputs plus the unrolled conv inputs so backward can
// reuse them. Labels may be empty, in which case loss is reported as 0 and
// only probs are meaningful.
template <typename T>
ForwardResultT<T> forward(const Model& model, const ParamSetT<T>& params,
                          const TensorT<T>& batch, const std::vector<int>& labels,
                          ActivationCacheT<T>& cache) {
    if (batch.shape.size() != 4) {
        throw std::invalid_argument("forward expects a [N,C,H,W] batch, got " +
                                    shape_string(batch.shape));
    }
    const std::size_t n = batch.shape[0];
    if (n == 0) throw std::invalid_argument("forward called with empty batch");
    const Shape3 in0 = model.input_shape_of(0);
    if (batch.shape[1] != in0.c || batch.shape[2] != in0.h || batch.shape[3] != in0.w) {
        throw std::invalid_argument("batch shape " + shape_string(batch.shape) +
                                    " does not match model input " + in0.str());
    }
    if (!labels.empty() && labels.size() != n) {
        throw std::invalid_argument("labels size " + std::to_string(labels.size()) +
                                    " does not match batch size " + std::to_string(n));
    }
    if (params.entries.size() != model.layers().size()) {
        throw std::invalid_argument("parameter set does not match model layer count");
    }

    const auto& layers = model.layers();
    cache = ActivationCacheT<T>{};
    cache.batch = batch;
    cache.labels = labels;
    cache.batch_n = n;
    cache.outputs.resize(layers.size());
    cache.conv_cols.resize(layers.size());
    cache.pool_argmax.resize(layers.size());

    ForwardResultT<T> result;
    const TensorT<T>* cur = &cache.batch;

    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& spec = layers[l];
        const Shape3 ishape = model.input_shape_of(l);
        switch (spec.kind) {
            case LayerKind::Conv2D: {
                const ConvGeom g = conv_geometry(ishape.c, ishape.h, ishape.w, spec.kernel,
                                                 spec.kernel, spec.stride, spec.pad);
                const std::size_t hw = g.out_h * g.out_w;
                const std::size_t cols_n = n * hw;
                TensorT<T> cols({g.k, cols_n});
                const std::size_t img = ishape.c * ishape.h * ishape.w;
                for (std::size_t b = 0; b < n; ++b) {
                    im2col_into(cur->ptr() + b * img, g, cols.ptr(), cols_n, b * hw);
                }
                const TensorT<T>& w = params.entries[l].w;  // [F,C,Kh,Kw]
                const std::size_t f = spec.filters;
                TensorT<T> zmat({f, cols_n});
                matmul_ptr(w.ptr(), f, g.k, cols.ptr(), cols_n, zmat.ptr());
                TensorT<T> out({n, f, g.out_h, g.out_w});
                const T* bias = params.entries[l].b.ptr();
                T* op = out.ptr();
                const T* zp = zmat.ptr();
                for (std::size_t b = 0; b < n; ++b) {
                    for (std::size_t fi = 0; fi < f; ++fi) {
                        const T* zrow = zp + fi * cols_n + b * hw;
                        T* orow = op + (b * f + fi) * hw;
                        const T bv = bias[fi];
                        for (std::size_t p = 0; p < hw; ++p) orow[p] = zrow[p] + bv;
                    }
                }
                cache.conv_cols[l] = std::move(cols);
                cache.outputs[l] = std::move(out);
                break;
            }
            case LayerKind::ReLU: {
                TensorT<T> out(cur->shape);
                const T* ip = cur->ptr();
                T* op = out.ptr();
                const std::size_t total = cur->numel();
                for (std::size_t i = 0; i < total; ++i) op[i] = ip[i] > T(0) ? ip[i] : T(0);
                cache.outputs[l] = std::move(out);
                break;
            }
            case LayerKind::MaxPool2D: {
                const std::size_t c = ishape.c, hi = ishape.h, wi = ishape.w;
                const std::size_t pw = spec.pool, ps = spec.pool_stride;
                const std::size_t ho = (hi - pw) / ps + 1, wo = (wi - pw) / ps + 1;
                TensorT<T> out({n, c, ho, wo});
                std::vector<std::uint32_t> argmax(out.numel());
                const T* ip = cur->ptr();
                T* op = out.ptr();
                std::size_t oi = 0;
                for (std::size_t b = 0; b < n; ++b) {
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const T* plane = ip + (b * c + ci) * hi * wi;
                        const std::size_t base = (b * c + ci) * hi * wi;
                        for (std::size_t oy = 0; oy < ho; ++oy) {
                            for (std::size_t ox = 0; ox < wo; ++ox, ++oi) {
                                std::size_t best = (oy * ps) * wi + ox * ps;
                                T mv = plane[best];
                                for (std::size_t ky = 0; ky < pw; ++ky) {
                                    const std::size_t row = (oy * ps + ky) * wi;
                                    for (std::size_t kx = 0; kx < pw; ++kx) {
                                        const std::size_t idx = row + ox * ps + kx;
                                        if (plane[idx] > mv) {
                                            mv = plane[idx];
                                            best = idx;
                                        }
                                    }
                                }
                                op[oi] = mv;
                                argmax[oi] = static_cast<std::uint32_t>(base + best);
                            }
                        }
                    }
                }
                cache.pool_argmax[l] = std::move(argmax);
                cache.outputs[l] = std::move(out);
                break;
            }
            case LayerKind::FullyConnected: {
                const std::size_t in = ishape.numel();
                const std::size_t units = spec.units;
                const TensorT<T>& w = params.entries[l].w;  // [units, in]
                TensorT<T> wt({in, units});
                transpose_ptr(w.ptr(), units, in, wt.ptr());
                TensorT<T> out({n, units});
                matmul_ptr(cur->ptr(), n, in, wt.ptr(), units, out.ptr());
                const T* bias = params.entries[l].b.ptr();
                T* op = out.ptr();
                for (std::size_t b = 0; b < n; ++b) {
                    T* row = op + b * units;
                    for (std::size_t u = 0; u < units; ++u) row[u] += bias[u];
                }
                cache.outputs[l] = std::move(out);
                break;
            }
            case LayerKind::SoftmaxCrossEntropy: {
                const std::size_t classes = ishape.numel();
                TensorT<T> probs({n, classes});
                const T* zp = cur->ptr();
                T* pp = probs.ptr();
                double loss = 0.0;
                for (std::size_t b = 0; b < n; ++b) {
                    const T* z = zp + b * classes;
                    T* p = pp + b * classes;
                    T zmax = z[0];
                    for (std::size_t j = 1; j < classes; ++j)
                        if (z[j] > zmax) zmax = z[j];
                    double denom = 0.0;
                    for (std::size_t j = 0; j < classes; ++j) {
                        const double e = std::exp(double(z[j]) - double(zmax));
                        p[j] = T(e);
                        denom += e;
                    }
                    const T inv = T(1.0 / denom);
                    for (std::size_t j = 0; j < classes; ++j) p[j] *= inv;
                    if (!labels.empty()) {
                        const int y = labels[b];
                        if (y < 0 || std::size_t(y) >= classes) {
                            throw std::invalid_argument(
                                "label " + std::to_string(y) + " out of range for " +
                                std::to_string(classes) + " classes");
                        }
                        loss += std::log(denom) + double(zmax) - double(z[y]);
                    }
                }
                if (!labels.empty()) result.loss = T(loss / double(n));
                result.probs = probs;
                cache.outputs[l] = std::move(probs);
                break;
            }
        }
        cur = &cache.outputs[l];
    }
    return result;
}

// Backward pass with structured channel skipping. For each prunable layer only
// the rows of dZ belonging to kept channels enter the two gradient matmuls;
// dropped channels never touch the kernels, so their weight and bias gradients
// stay exactly zero. The gradient flowing to earlier layers is likewise built
// from kept channels only. dA for the first trainable layer is skipped
// entirely (nothing upstream needs it).
template <typename T>
ParamSetT<T> backward(const Model& model, const ParamSetT<T>& params,
                      const ActivationCacheT<T>& cache, const ChannelMask& mask,
                      BackwardTimings* timings = nullptr) {
    if (!cache.valid() || cache.outputs.size() != model.layers().size()) {
        throw std::runtime_error("backward called without a matching forward pass");
    }
    if (cache.labels.empty()) {
        throw std::runtime_error("backward requires labels in the activation cache");
    }
    validate_mask(model, mask);

    const auto& layers = model.layers();
    const std::size_t n = cache.batch_n;
    const std::size_t first_tr = model.first_trainable();
    ParamSetT<T> grads = zero_params<T>(model);
    if (timings) timings->seconds.assign(layers.size(), 0.0);

    TensorT<T> dcur;  // gradient w.r.t. the output of the layer being visited
    using clock = std::chrono::steady_clock;

    for (std::size_t li = layers.size(); li-- > 0;) {
        if (li < first_tr) break;  // nothing below needs a gradient
        const LayerSpec& spec = layers[li];
        const Shape3 ishape = model.input_shape_of(li);
        const TensorT<T>& input = li == 0 ? cache.batch : cache.outputs[li - 1];
        const auto t0 = clock::now();
        switch (spec.kind) {
            case LayerKind::SoftmaxCrossEntropy: {
                const std::size_t classes = ishape.numel();
                const TensorT<T>& probs = cache.outputs[li];
                dcur = TensorT<T>({n, classes});
                const T* pp = probs.ptr();
                T* dp = dcur.ptr();
                const T scale = T(1) / T(n);
                for (std::size_t b = 0; b < n; ++b) {
                    const T* p = pp + b * classes;
                    T* d = dp + b * classes;
                    for (std::size_t j = 0; j < classes; ++j) d[j] = p[j] * scale;
                    d[cache.labels[b]] -= scale;
                }
                break;
            }
            case LayerKind::ReLU: {
                const T* ip = input.ptr();
                T* dp = dcur.ptr();
                const std::size_t total = dcur.numel();
                for (std::size_t i = 0; i < total; ++i)
                    if (ip[i] <= T(0)) dp[i] = T(0);
                break;
            }
            case LayerKind::MaxPool2D: {
                TensorT<T> din({n, ishape.c, ishape.h, ishape.w});
                const auto& argmax = cache.pool_argmax[li];
                const T* dp = dcur.ptr();
                T* ip = din.ptr();
                for (std::size_t i = 0; i < argmax.size(); ++i) ip[argmax[i]] += dp[i];
                dcur = std::move(din);
                break;
            }
            case LayerKind::FullyConnected: {
                const std::size_t in = ishape.numel();
                const std::size_t units = spec.units;
                const bool pruned = mask.has(li);
                std::vector<std::size_t> keep;
                if (pruned) {
                    keep.reserve(units);
                    for (std::size_t u = 0; u < units; ++u)
                        if (mask.channels[li][u]) keep.push_back(u);
                }
                const std::size_t s = pruned ? keep.size() : units;
                const T* dzp = dcur.ptr();  // [n, units]
                const TensorT<T>& w = params.entries[li].w;

                TensorT<T> dzsel;
                const T* dz = dzp;
                if (pruned && s != units) {
                    dzsel = TensorT<T>({n, s});
                    T* sp = dzsel.ptr();
                    for (std::size_t b = 0; b < n; ++b) {
                        const T* row = dzp + b * units;
                        T* srow = sp + b * s;
                        for (std::size_t i = 0; i < s; ++i) srow[i] = row[keep[i]];
                    }
                    dz = dzsel.ptr();
                }
                const std::size_t cols = (pruned && s != units) ? s : units;

                TensorT<T> dwsel({cols, in});
                matmul_atb_ptr(dz, n, cols, input.ptr(), in, dwsel.ptr());
                T* gw = grads.entries[li].w.ptr();
                T* gb = grads.entries[li].b.ptr();
                const T* dws = dwsel.ptr();
                for (std::size_t i = 0; i < cols; ++i) {
                    const std::size_t u = (pruned && s != units) ? keep[i] : i;
                    const T* src = dws + i * in;
                    T* dst = gw + u * in;
                    for (std::size_t j = 0; j < in; ++j) dst[j] = src[j];
                    T acc = T(0);
                    for (std::size_t b = 0; b < n; ++b) acc += dz[b * cols + i];
                    gb[u] = acc;
                }

                if (li != first_tr) {
                    TensorT<T> wsel;
                    const T* wp = w.ptr();
                    if (pruned && s != units) {
                        wsel = TensorT<T>({s, in});
                        T* dst = wsel.ptr();
                        for (std::size_t i = 0; i < s; ++i) {
                            const T* src = wp + keep[i] * in;
                            for (std::size_t j = 0; j < in; ++j) dst[i * in + j] = src[j];
                        }
                        wp = wsel.ptr();
                    }
                    TensorT<T> din(input.shape);
                    matmul_ptr(dz, n, cols, wp, in, din.ptr());
                    dcur = std::move(din);
                }
                break;
            }
            case LayerKind::Conv2D: {
                const ConvGeom g = conv_geometry(ishape.c, ishape.h, ishape.w, spec.kernel,
                                                 spec.kernel, spec.stride, spec.pad);
                const std::size_t hw = g.out_h * g.out_w;
                const std::size_t cols_n = n * hw;
                const std::size_t f = spec.filters;
                const bool pruned = mask.has(li);
                std::vector<std::size_t> keep;
                if (pruned) {
                    keep.reserve(f);
                    for (std::size_t fi = 0; fi < f; ++fi)
                        if (mask.channels[li][fi]) keep.push_back(fi);
                } else {
                    keep.resize(f);
                    for (std::size_t fi = 0; fi < f; ++fi) keep[fi] = fi;
                }
                const std::size_t s = keep.size();

                // dZ rows for kept filters only, in [S, N*Ho*Wo] layout.
                TensorT<T> dzsel({s, cols_n});
                const T* dp = dcur.ptr();  // [n, f, ho, wo]
                T* zp = dzsel.ptr();
                for (std::size_t i = 0; i < s; ++i) {
                    const std::size_t fi = keep[i];
                    T* dst = zp + i * cols_n;
                    for (std::size_t b = 0; b < n; ++b) {
                        const T* src = dp + (b * f + fi) * hw;
                        T* drow = dst + b * hw;
                        for (std::size_t p = 0; p < hw; ++p) drow[p] = src[p];
                    }
                }

                const TensorT<T>& colsmat = cache.conv_cols[li];
                TensorT<T> colst({cols_n, g.k});
                transpose_ptr(colsmat.ptr(), g.k, cols_n, colst.ptr());
                TensorT<T> dwsel({s, g.k});
                matmul_ptr(zp, s, cols_n, colst.ptr(), g.k, dwsel.ptr());

                T* gw = grads.entries[li].w.ptr();
                T* gb = grads.entries[li].b.ptr();
                const T* dws = dwsel.ptr();
                for (std::size_t i = 0; i < s; ++i) {
                    const std::size_t fi = keep[i];
                    const T* src = dws + i * g.k;
                    T* dst = gw + fi * g.k;
                    for (std::size_t j = 0; j < g.k; ++j) dst[j] = src[j];
                    const T* zrow = zp + i * cols_n;
                    T acc = T(0);
                    for (std::size_t p = 0; p < cols_n; ++p) acc += zrow[p];
                    gb[fi] = acc;
                }

                if (li != first_tr) {
                    const TensorT<T>& w = params.entries[li].w;  // [f, k] flat
                    TensorT<T> wsel;
                    const T* wp = w.ptr();
                    if (s != f) {
                        wsel = TensorT<T>({s, g.k});
                        T* dst = wsel.ptr();
                        for (std::size_t i = 0; i < s; ++i) {
                            const T* src = wp + keep[i] * g.k;
                            for (std::size_t j = 0; j < g.k; ++j) dst[i * g.k + j] = src[j];
                        }
                        wp = wsel.ptr();
                    }
                    TensorT<T> dcols({g.k, cols_n});
                    matmul_atb_ptr(wp, s, g.k, zp, cols_n, dcols.ptr());
                    TensorT<T> din({n, ishape.c, ishape.h, ishape.w});
                    const std::size_t img = ishape.c * ishape.h * ishape.w;
                    for (std::size_t b = 0; b < n; ++b) {
                        col2im_into(dcols.ptr(), g, cols_n, b * hw, din.ptr() + b * img);
                    }
                    dcur = std::move(din);
                }
                break;
            }
        }
        if (timings) {
            timings->seconds[li] =
                std::chrono::duration<double>(clock::now() - t0).count();
        }
    }
    return grads;
}

// In-place SGD update, gated by the mask: for prunable layers only surviving
// channels move; local-scope and non-prunable layers always update in full.
// Non-finite gradients on any applied entry abort the step.
template <typename T>
void sgd_step(const Model& model, ParamSetT<T>& params, const ParamSetT<T>& grads, T lr,
              const ChannelMask& mask) {
    if (!(lr >= T(0))) {
        throw std::invalid_argument("learning rate must be non-negative, got " +
                                    std::to_string(double(lr)));
    }
    validate_mask(model, mask);
    if (params.entries.size() != model.layers().size() ||
        grads.entries.size() != model.layers().size()) {
        throw std::invalid_argument("parameter or gradient set does not match model");
    }
    const auto& layers = model.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!layers[l].trainable()) continue;
        const TensorT<T>& gw = grads.entries[l].w;
        const TensorT<T>& gb = grads.entries[l].b;
        if (gw.shape != params.entries[l].w.shape || gb.shape != params.entries[l].b.shape) {
            throw std::invalid_argument("gradient shape mismatch at " + model.layer_label(l));
        }
        const std::size_t f = model.filter_count(l);
        const std::size_t row = gw.numel() / f;
        std::size_t bad = 0;
        for (std::size_t fi = 0; fi < f; ++fi) {
            if (mask.has(l) && !mask.channels[l][fi]) continue;
            const T* gr = gw.ptr() + fi * row;
            for (std::size_t j = 0; j < row; ++j)
                if (!std::isfinite(double(gr[j]))) ++bad;
            if (!std::isfinite(double(gb.ptr()[fi]))) ++bad;
        }
        detail::check_finite_count(bad, model.layer_label(l));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!layers[l].trainable()) continue;
        TensorT<T>& w = params.entries[l].w;
        TensorT<T>& b = params.entries[l].b;
        const TensorT<T>& gw = grads.entries[l].w;
        const TensorT<T>& gb = grads.entries[l].b;
        const std::size_t f = model.filter_count(l);
        const std::size_t row = w.numel() / f;
        for (std::size_t fi = 0; fi < f; ++fi) {
            if (mask.has(l) && !mask.channels[l][fi]) continue;
            const T* gr = gw.ptr() + fi * row;
            T* wr = w.ptr() + fi * row;
            for (std::size_t j = 0; j < row; ++j) wr[j] -= lr * gr[j];
            b.ptr()[fi] -= lr * gb.ptr()[fi];
        }
    }
}

// Multiply-accumulate count for one sample's backward pass under the given
// mask: the weight-gradient matmul plus (except at the first trainable layer)
// the input-gradient matmul. Pass an all-true mask for the dense baseline.
std::uint64_t count_backprop_flops(const Model& model, const ChannelMask& mask);

// Same count broken down by layer; non-trainable layers report 0.
std::vector<std::uint64_t> count_backprop_flops_by_layer(const Model& model,
                                                         const ChannelMask& mask);

}  // namespace fedskel
