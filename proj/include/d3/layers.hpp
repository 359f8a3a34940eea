#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <stdexcept>

#include "d3/tensor.hpp"

namespace d3 {

struct ConvSpec {
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 3;
    int stride = 2;
    int pad = 1;

    int out_side(int in_side) const { return (in_side + 2 * pad - kernel) / stride + 1; }
};

// in [H,W,Cin], w [K,K,Cin,Cout], b [Cout] -> out [Ho,Wo,Cout]
template <typename T>
void conv2d_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                    const ConvSpec& cs, Tensor<T>& out) {
    const int hi = in.shape[0], wi = in.shape[1];
    const int ho = cs.out_side(hi), wo = cs.out_side(wi);
    if (!(out.shape.size() == 3 && out.shape[0] == ho && out.shape[1] == wo &&
          out.shape[2] == cs.out_ch))
        out = Tensor<T>({ho, wo, cs.out_ch});
    const int k = cs.kernel;
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
            T* o = &out.at(oy, ox, 0);
            for (int oc = 0; oc < cs.out_ch; ++oc) o[oc] = b.data[oc];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * cs.stride + ky - cs.pad;
                if (iy < 0 || iy >= hi) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * cs.stride + kx - cs.pad;
                    if (ix < 0 || ix >= wi) continue;
                    const T* iv = &in.at(iy, ix, 0);
                    const T* wv = &w.data[((static_cast<std::size_t>(ky) * k + kx) * cs.in_ch) *
                                          cs.out_ch];
                    for (int ic = 0; ic < cs.in_ch; ++ic) {
                        const T x = iv[ic];
                        const T* wr = wv + static_cast<std::size_t>(ic) * cs.out_ch;
                        for (int oc = 0; oc < cs.out_ch; ++oc) o[oc] += x * wr[oc];
                    }
                }
            }
        }
}

// Accumulates nothing: din/dw/db are overwritten.
template <typename T>
void conv2d_backward(const Tensor<T>& in, const Tensor<T>& w, const ConvSpec& cs,
                     const Tensor<T>& dout, std::type_identity_t<Tensor<T>>* din,
                     std::type_identity_t<Tensor<T>>* dw, std::type_identity_t<Tensor<T>>* db) {
    const int hi = in.shape[0], wi = in.shape[1];
    const int ho = dout.shape[0], wo = dout.shape[1];
    const int k = cs.kernel;
    if (din) {
        if (!din->same_shape(in)) *din = Tensor<T>(in.shape);
        din->fill(T(0));
    }
    if (dw) {
        if (!dw->same_shape(w)) *dw = Tensor<T>(w.shape);
        dw->fill(T(0));
    }
    if (db) {
        if (db->size() != static_cast<std::size_t>(cs.out_ch)) *db = Tensor<T>({cs.out_ch});
        db->fill(T(0));
    }
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
            const T* go = &dout.at(oy, ox, 0);
            if (db)
                for (int oc = 0; oc < cs.out_ch; ++oc) db->data[oc] += go[oc];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * cs.stride + ky - cs.pad;
                if (iy < 0 || iy >= hi) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * cs.stride + kx - cs.pad;
                    if (ix < 0 || ix >= wi) continue;
                    const std::size_t wbase =
                        (static_cast<std::size_t>(ky) * k + kx) * cs.in_ch * cs.out_ch;
                    for (int ic = 0; ic < cs.in_ch; ++ic) {
                        const T x = in.at(iy, ix, ic);
                        const std::size_t wrow = wbase + static_cast<std::size_t>(ic) * cs.out_ch;
                        T acc = T(0);
                        for (int oc = 0; oc < cs.out_ch; ++oc) {
                            acc += w.data[wrow + oc] * go[oc];
                            if (dw) dw->data[wrow + oc] += x * go[oc];
                        }
                        if (din) din->at(iy, ix, ic) += acc;
                    }
                }
            }
        }
}

// in [n], w [n,m], b [m] -> out [m]
template <typename T>
void dense_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& out) {
    const int n = in.shape[0], m = b.shape[0];
    if (out.size() != static_cast<std::size_t>(m)) out = Tensor<T>({m});
    for (int j = 0; j < m; ++j) out.data[j] = b.data[j];
    for (int i = 0; i < n; ++i) {
        const T x = in.data[i];
        const T* wr = &w.data[static_cast<std::size_t>(i) * m];
        for (int j = 0; j < m; ++j) out.data[j] += x * wr[j];
    }
}

template <typename T>
void dense_backward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& dout,
                    std::type_identity_t<Tensor<T>>* din, std::type_identity_t<Tensor<T>>* dw,
                    std::type_identity_t<Tensor<T>>* db) {
    const int n = in.shape[0], m = dout.shape[0];
    if (din) {
        if (!din->same_shape(in)) *din = Tensor<T>(in.shape);
        for (int i = 0; i < n; ++i) {
            const T* wr = &w.data[static_cast<std::size_t>(i) * m];
            T acc = T(0);
            for (int j = 0; j < m; ++j) acc += wr[j] * dout.data[j];
            din->data[i] = acc;
        }
    }
    if (dw) {
        if (!dw->same_shape(w)) *dw = Tensor<T>(w.shape);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                dw->data[static_cast<std::size_t>(i) * m + j] = in.data[i] * dout.data[j];
    }
    if (db) {
        *db = dout;
    }
}

template <typename T>
void relu_forward(const Tensor<T>& in, Tensor<T>& out) {
    if (!out.same_shape(in)) out = Tensor<T>(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& in, const Tensor<T>& dout, Tensor<T>& din) {
    if (!din.same_shape(in)) din = Tensor<T>(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i)
        din.data[i] = in.data[i] > T(0) ? dout.data[i] : T(0);
}

// [H,W,C] -> [C], mean over the spatial grid.
template <typename T>
void global_avg_pool_forward(const Tensor<T>& in, Tensor<T>& out) {
    const int h = in.shape[0], w = in.shape[1], c = in.shape[2];
    if (out.size() != static_cast<std::size_t>(c)) out = Tensor<T>({c});
    out.fill(T(0));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int k = 0; k < c; ++k) out.data[k] += in.at(i, j, k);
    const T inv = T(1) / static_cast<T>(h * w);
    for (int k = 0; k < c; ++k) out.data[k] *= inv;
}

template <typename T>
void global_avg_pool_backward(const std::vector<int>& in_shape, const Tensor<T>& dout,
                              Tensor<T>& din) {
    const int h = in_shape[0], w = in_shape[1], c = in_shape[2];
    if (din.shape != in_shape) din = Tensor<T>(in_shape);
    const T inv = T(1) / static_cast<T>(h * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int k = 0; k < c; ++k) din.at(i, j, k) = dout.data[k] * inv;
}

template <typename T>
T sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

template <typename T>
void sigmoid_forward(const Tensor<T>& in, Tensor<T>& out) {
    if (!out.same_shape(in)) out = Tensor<T>(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = sigmoid(in.data[i]);
}

template <typename T>
void sigmoid_backward(const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din) {
    if (!din.same_shape(out)) din = Tensor<T>(out.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        din.data[i] = dout.data[i] * out.data[i] * (T(1) - out.data[i]);
}

// Numerically stable binary cross-entropy on a logit.
template <typename T>
double bce_with_logit(T logit, int label) {
    const double z = static_cast<double>(logit);
    const double y = static_cast<double>(label);
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

// d(bce)/d(logit) = sigmoid(logit) - label
template <typename T>
T bce_with_logit_grad(T logit, int label) {
    return sigmoid(logit) - static_cast<T>(label);
}

}  // namespace d3
