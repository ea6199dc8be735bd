#pragma once

#include <Eigen/Dense>

#include "pyrocast/tensor.hpp"

// Raw numerical kernels shared by the autodiff ops and the fused recurrent
// cells. All loops are deterministic: each output element is owned by exactly
// one writer and accumulation orders are fixed.

namespace pyrocast::kernels {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<EMat<T>>;
template <typename T>
using CMap = Eigen::Map<const EMat<T>>;

// C[M,N] = A[M,K] * B[K,N]  (+= when accumulate)
template <typename T>
void gemm(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
          bool accumulate = false) {
    CMap<T> A(a, m, k);
    CMap<T> B(b, k, n);
    Map<T> C(c, m, n);
    if (accumulate)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
}

// C[M,N] = A^T (A is [K,M]) * B[K,N]
template <typename T>
void gemm_at_b(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
               bool accumulate = false) {
    CMap<T> A(a, k, m);
    CMap<T> B(b, k, n);
    Map<T> C(c, m, n);
    if (accumulate)
        C.noalias() += A.transpose() * B;
    else
        C.noalias() = A.transpose() * B;
}

// C[M,N] = A[M,K] * B^T (B is [N,K])
template <typename T>
void gemm_a_bt(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
               bool accumulate = false) {
    CMap<T> A(a, m, k);
    CMap<T> B(b, n, k);
    Map<T> C(c, m, n);
    if (accumulate)
        C.noalias() += A * B.transpose();
    else
        C.noalias() = A * B.transpose();
}

inline std::int64_t conv_out_size(std::int64_t in, std::int64_t k, std::int64_t pad,
                                  std::int64_t stride) {
    return (in + 2 * pad - k) / stride + 1;
}

// Zero-padded im2col for one sample: src [C,H,W] -> col [C*kh*kw, oh*ow].
template <typename T>
void im2col(const T* src, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t pad, std::int64_t stride, T* col) {
    const std::int64_t oh = conv_out_size(h, kh, pad, stride);
    const std::int64_t ow = conv_out_size(w, kw, pad, stride);
    std::int64_t row = 0;
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* plane = src + ci * h * w;
        for (std::int64_t dy = 0; dy < kh; ++dy) {
            for (std::int64_t dx = 0; dx < kw; ++dx, ++row) {
                T* dst = col + row * oh * ow;
                for (std::int64_t y = 0; y < oh; ++y) {
                    std::int64_t sy = y * stride - pad + dy;
                    if (sy < 0 || sy >= h) {
                        for (std::int64_t x = 0; x < ow; ++x) dst[y * ow + x] = T(0);
                        continue;
                    }
                    for (std::int64_t x = 0; x < ow; ++x) {
                        std::int64_t sx = x * stride - pad + dx;
                        dst[y * ow + x] = (sx >= 0 && sx < w) ? plane[sy * w + sx] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col: col [C*kh*kw, oh*ow] += into dst [C,H,W].
template <typename T>
void col2im_add(const T* col, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh,
                std::int64_t kw, std::int64_t pad, std::int64_t stride, T* dst) {
    const std::int64_t oh = conv_out_size(h, kh, pad, stride);
    const std::int64_t ow = conv_out_size(w, kw, pad, stride);
    std::int64_t row = 0;
    for (std::int64_t ci = 0; ci < c; ++ci) {
        T* plane = dst + ci * h * w;
        for (std::int64_t dy = 0; dy < kh; ++dy) {
            for (std::int64_t dx = 0; dx < kw; ++dx, ++row) {
                const T* src = col + row * oh * ow;
                for (std::int64_t y = 0; y < oh; ++y) {
                    std::int64_t sy = y * stride - pad + dy;
                    if (sy < 0 || sy >= h) continue;
                    for (std::int64_t x = 0; x < ow; ++x) {
                        std::int64_t sx = x * stride - pad + dx;
                        if (sx >= 0 && sx < w) plane[sy * w + sx] += src[y * ow + x];
                    }
                }
            }
        }
    }
}

struct ConvDims {
    std::int64_t n, c_in, h, w, c_out, kh, kw, pad, stride, oh, ow;
};

template <typename T>
ConvDims conv_check(const Tensor<T>& input, const Tensor<T>& kernels, std::int64_t pad,
                    std::int64_t stride) {
    if (stride < 1) throw parameter_error("conv2d stride must be >= 1");
    if (pad < 0) throw parameter_error("conv2d padding must be >= 0");
    bool batched = input.rank() == 4;
    if (!batched && input.rank() != 3)
        throw dimension_error("conv2d input must be [C,H,W] or [N,C,H,W], got " +
                              input.shape_string());
    if (kernels.rank() != 4)
        throw dimension_error("conv2d kernels must be [C_out,C_in,kH,kW], got " +
                              kernels.shape_string());
    ConvDims d;
    d.n = batched ? input.dim(0) : 1;
    d.c_in = input.dim(batched ? 1 : 0);
    d.h = input.dim(batched ? 2 : 1);
    d.w = input.dim(batched ? 3 : 2);
    d.c_out = kernels.dim(0);
    d.kh = kernels.dim(2);
    d.kw = kernels.dim(3);
    d.pad = pad;
    d.stride = stride;
    if (kernels.dim(1) != d.c_in)
        throw dimension_error("conv2d channel mismatch: input has " + std::to_string(d.c_in) +
                              " channels, kernels expect " + std::to_string(kernels.dim(1)));
    if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad)
        throw dimension_error("conv2d kernel larger than padded input");
    d.oh = conv_out_size(d.h, d.kh, pad, stride);
    d.ow = conv_out_size(d.w, d.kw, pad, stride);
    return d;
}

// Forward convolution; scratch col buffer is caller-provided so batch loops can
// reuse it ([C_in*kh*kw, oh*ow] elements).
template <typename T>
void conv2d_forward(const ConvDims& d, const T* input, const T* kernels, const T* bias, T* output,
                    T* col) {
    const std::int64_t in_stride = d.c_in * d.h * d.w;
    const std::int64_t out_stride = d.c_out * d.oh * d.ow;
    const std::int64_t krows = d.c_in * d.kh * d.kw;
    const std::int64_t positions = d.oh * d.ow;
    for (std::int64_t s = 0; s < d.n; ++s) {
        im2col(input + s * in_stride, d.c_in, d.h, d.w, d.kh, d.kw, d.pad, d.stride, col);
        T* out = output + s * out_stride;
        gemm(kernels, col, out, d.c_out, krows, positions);
        if (bias) {
            for (std::int64_t co = 0; co < d.c_out; ++co) {
                T b = bias[co];
                T* plane = out + co * positions;
                for (std::int64_t p = 0; p < positions; ++p) plane[p] += b;
            }
        }
    }
}

// Backward: accumulates into d_input / d_kernels / d_bias (callers zero them).
template <typename T>
void conv2d_backward(const ConvDims& d, const T* input, const T* kernels, const T* d_output,
                     T* d_input, T* d_kernels, T* d_bias, T* col, T* dcol) {
    const std::int64_t in_stride = d.c_in * d.h * d.w;
    const std::int64_t out_stride = d.c_out * d.oh * d.ow;
    const std::int64_t krows = d.c_in * d.kh * d.kw;
    const std::int64_t positions = d.oh * d.ow;
    for (std::int64_t s = 0; s < d.n; ++s) {
        const T* dout = d_output + s * out_stride;
        if (d_input) {
            gemm_at_b(kernels, dout, dcol, krows, d.c_out, positions);
            col2im_add(dcol, d.c_in, d.h, d.w, d.kh, d.kw, d.pad, d.stride,
                       d_input + s * in_stride);
        }
        if (d_kernels) {
            im2col(input + s * in_stride, d.c_in, d.h, d.w, d.kh, d.kw, d.pad, d.stride, col);
            gemm_a_bt(dout, col, d_kernels, d.c_out, positions, krows, true);
        }
        if (d_bias) {
            for (std::int64_t co = 0; co < d.c_out; ++co) {
                T acc = T(0);
                const T* plane = dout + co * positions;
                for (std::int64_t p = 0; p < positions; ++p) acc += plane[p];
                d_bias[co] += acc;
            }
        }
    }
}

// Max pooling over non-overlapping windows; trailing rows/cols that do not fill
// a window are dropped. argmax stores the flat input offset per output cell,
// ties resolved to the first candidate in row-major window order.
template <typename T>
void max_pool2d_forward(const T* input, std::int64_t planes, std::int64_t h, std::int64_t w,
                        std::int64_t window, T* output, std::int64_t* argmax) {
    const std::int64_t oh = h / window, ow = w / window;
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* src = input + pl * h * w;
        T* dst = output + pl * oh * ow;
        std::int64_t* arg = argmax ? argmax + pl * oh * ow : nullptr;
        for (std::int64_t y = 0; y < oh; ++y) {
            for (std::int64_t x = 0; x < ow; ++x) {
                std::int64_t base = (y * window) * w + x * window;
                T best = src[base];
                std::int64_t best_off = base;
                for (std::int64_t dy = 0; dy < window; ++dy)
                    for (std::int64_t dx = 0; dx < window; ++dx) {
                        std::int64_t off = base + dy * w + dx;
                        if (src[off] > best) {
                            best = src[off];
                            best_off = off;
                        }
                    }
                dst[y * ow + x] = best;
                if (arg) arg[y * ow + x] = pl * h * w + best_off;
            }
        }
    }
}

template <typename T>
void max_pool2d_backward(const T* d_output, const std::int64_t* argmax, std::int64_t count,
                         T* d_input) {
    for (std::int64_t i = 0; i < count; ++i) d_input[argmax[i]] += d_output[i];
}

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) {
        T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace pyrocast::kernels
