#pragma once

// Dense row-major tensors and the raw kernels (matmul, im2col/col2im) the
// training engine is built on. All kernels are pure functions with a fixed
// reduction order, so identical inputs give bit-identical outputs.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedskel {

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    s += "]";
    return s;
}

template <typename T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;  // flat, row-major

    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> s, T fill = T(0))
        : shape(std::move(s)), data(checked_numel(shape), fill) {}

    static TensorT from(std::vector<std::size_t> s, std::vector<T> values) {
        TensorT t;
        t.shape = std::move(s);
        if (checked_numel(t.shape) != values.size()) {
            throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                        " does not match shape " + shape_string(t.shape));
        }
        t.data = std::move(values);
        return t;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool empty() const { return data.empty(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    T at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    T& at3(std::size_t c, std::size_t h, std::size_t w) {
        return data[(c * shape[1] + h) * shape[2] + w];
    }
    T at3(std::size_t c, std::size_t h, std::size_t w) const {
        return data[(c * shape[1] + h) * shape[2] + w];
    }

    T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    T at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.reserve(data.size());
        for (T v : data) out.data.push_back(static_cast<U>(v));
        return out;
    }

  private:
    static std::size_t checked_numel(const std::vector<std::size_t>& s) {
        if (s.size() > 4) {
            throw std::invalid_argument("tensor rank " + std::to_string(s.size()) +
                                        " exceeds the supported maximum of 4");
        }
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return n;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

namespace detail {
inline void require_rank2(const std::vector<std::size_t>& shape, const char* name) {
    if (shape.size() != 2) {
        throw std::invalid_argument(std::string(name) + " must be rank-2, got " + shape_string(shape));
    }
}
}  // namespace detail

// Accumulates a[m,k] * b[k,n] into c (caller zero-initializes). The reduction
// runs over k in ascending order for every output element, so results do not
// depend on how callers schedule work.
template <typename T>
void matmul_ptr(const T* a, std::size_t m, std::size_t k, const T* b, std::size_t n, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aik = arow[kk];
            const T* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

// Accumulates a^T * b into c with a[r,m], b[r,n]; reduction over r, ascending.
template <typename T>
void matmul_atb_ptr(const T* a, std::size_t r, std::size_t m, const T* b, std::size_t n, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t f = 0; f < r; ++f) {
            const T afi = a[f * m + i];
            const T* brow = b + f * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += afi * brow[j];
        }
    }
}

template <typename T>
void transpose_ptr(const T* a, std::size_t m, std::size_t n, T* out) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    }
}

// c[m,n] = a[m,k] * b[k,n].
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    detail::require_rank2(a.shape, "matmul lhs");
    detail::require_rank2(b.shape, "matmul rhs");
    if (a.shape[1] != b.shape[0]) {
        throw std::invalid_argument("matmul shape mismatch: " + shape_string(a.shape) + " x " +
                                    shape_string(b.shape));
    }
    TensorT<T> c({a.shape[0], b.shape[1]});
    matmul_ptr(a.ptr(), a.shape[0], a.shape[1], b.ptr(), b.shape[1], c.ptr());
    return c;
}

// c[m,n] = a^T * b with a[r,m], b[r,n].
template <typename T>
TensorT<T> matmul_atb(const TensorT<T>& a, const TensorT<T>& b) {
    detail::require_rank2(a.shape, "matmul_atb lhs");
    detail::require_rank2(b.shape, "matmul_atb rhs");
    if (a.shape[0] != b.shape[0]) {
        throw std::invalid_argument("matmul_atb shape mismatch: " + shape_string(a.shape) + " x " +
                                    shape_string(b.shape));
    }
    TensorT<T> c({a.shape[1], b.shape[1]});
    matmul_atb_ptr(a.ptr(), a.shape[0], a.shape[1], b.ptr(), b.shape[1], c.ptr());
    return c;
}

template <typename T>
TensorT<T> transpose(const TensorT<T>& a) {
    detail::require_rank2(a.shape, "transpose input");
    TensorT<T> t({a.shape[1], a.shape[0]});
    transpose_ptr(a.ptr(), a.shape[0], a.shape[1], t.ptr());
    return t;
}

struct ConvGeom {
    std::size_t channels = 0, height = 0, width = 0;
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride = 1, pad = 0;
    std::size_t out_h = 0, out_w = 0;
    std::size_t k = 0;  // patch rows: channels * kernel_h * kernel_w
};

inline ConvGeom conv_geometry(std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
                              std::size_t kw, std::size_t stride, std::size_t pad) {
    if (stride == 0) throw std::invalid_argument("conv stride must be positive");
    if (kh == 0 || kw == 0) throw std::invalid_argument("conv kernel extents must be positive");
    const std::size_t eff_h = h + 2 * pad, eff_w = w + 2 * pad;
    if (eff_h < kh || eff_w < kw || (eff_h - kh) % stride != 0 || (eff_w - kw) % stride != 0) {
        throw std::invalid_argument(
            "conv geometry does not produce integral output extents: input " +
            shape_string({c, h, w}) + ", kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
            ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
    }
    ConvGeom g;
    g.channels = c;
    g.height = h;
    g.width = w;
    g.kernel_h = kh;
    g.kernel_w = kw;
    g.stride = stride;
    g.pad = pad;
    g.out_h = (eff_h - kh) / stride + 1;
    g.out_w = (eff_w - kw) / stride + 1;
    g.k = c * kh * kw;
    return g;
}

// Writes one image's patch matrix into `out`, whose rows are spaced
// `row_stride` apart, starting at column `col_offset`. Out-of-bounds taps are
// zero padding. Row layout: (c, kh, kw) major-to-minor; column j is output
// position j in row-major (oh, ow) order.
template <typename T>
void im2col_into(const T* img, const ConvGeom& g, T* out, std::size_t row_stride,
                 std::size_t col_offset) {
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
            for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t row = (c * g.kernel_h + kh) * g.kernel_w + kw;
                T* dst = out + row * row_stride + col_offset;
                const T* src_chan = img + c * g.height * g.width;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih =
                        static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.pad);
                    T* drow = dst + oh * g.out_w;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
                        for (std::size_t ow = 0; ow < g.out_w; ++ow) drow[ow] = T(0);
                        continue;
                    }
                    const T* srow = src_chan + static_cast<std::size_t>(ih) * g.width;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw =
                            static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.pad);
                        drow[ow] = (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.width))
                                       ? srow[static_cast<std::size_t>(iw)]
                                       : T(0);
                    }
                }
            }
        }
    }
}

// input [C,H,W] -> patch matrix [C*Kh*Kw, Ho*Wo].
template <typename T>
TensorT<T> im2col(const TensorT<T>& input, std::size_t kh, std::size_t kw, std::size_t stride,
                  std::size_t pad) {
    if (input.rank() != 3) {
        throw std::invalid_argument("im2col input must be rank-3 [C,H,W], got " +
                                    shape_string(input.shape));
    }
    const ConvGeom g = conv_geometry(input.shape[0], input.shape[1], input.shape[2], kh, kw, stride, pad);
    TensorT<T> cols({g.channels * kh * kw, g.out_h * g.out_w});
    im2col_into(input.ptr(), g, cols.ptr(), g.out_h * g.out_w, 0);
    return cols;
}

// Adjoint of im2col_into: scatter-adds columns back into the image.
template <typename T>
void col2im_into(const T* cols, const ConvGeom& g, std::size_t row_stride, std::size_t col_offset,
                 T* img) {
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
            for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t row = (c * g.kernel_h + kh) * g.kernel_w + kw;
                const T* src = cols + row * row_stride + col_offset;
                T* dst_chan = img + c * g.height * g.width;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih =
                        static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.pad);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    const T* srow = src + oh * g.out_w;
                    T* drow = dst_chan + static_cast<std::size_t>(ih) * g.width;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw =
                            static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.pad);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.width)) {
                            drow[static_cast<std::size_t>(iw)] += srow[ow];
                        }
                    }
                }
            }
        }
    }
}

// cols [C*Kh*Kw, Ho*Wo] -> image [C,H,W]; overlapping contributions sum.
template <typename T>
TensorT<T> col2im(const TensorT<T>& cols, std::size_t kh, std::size_t kw, std::size_t stride,
                  std::size_t pad, std::size_t c, std::size_t h, std::size_t w) {
    detail::require_rank2(cols.shape, "col2im input");
    const ConvGeom g = conv_geometry(c, h, w, kh, kw, stride, pad);
    if (cols.shape[0] != c * kh * kw || cols.shape[1] != g.out_h * g.out_w) {
        throw std::invalid_argument("col2im geometry mismatch: cols " + shape_string(cols.shape) +
                                    " vs expected " +
                                    shape_string({c * kh * kw, g.out_h * g.out_w}) + " for image " +
                                    shape_string({c, h, w}));
    }
    TensorT<T> img({c, h, w});
    col2im_into(cols.ptr(), g, g.out_h * g.out_w, 0, img.ptr());
    return img;
}

}  // namespace fedskel
