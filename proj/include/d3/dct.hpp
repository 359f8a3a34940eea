#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "d3/tensor.hpp"

namespace d3 {

// Orthonormal DCT-II basis. Row 0 is the constant 1/sqrt(N); T * T^t = I.
template <typename T>
struct DctBasis {
    int n = 0;
    std::vector<T> m;  // n x n, row-major

    static DctBasis make(int n) {
        if (n <= 0) throw std::invalid_argument("dct basis: size must be positive");
        DctBasis b;
        b.n = n;
        b.m.resize(static_cast<std::size_t>(n) * n);
        const double pi = 3.14159265358979323846;
        for (int k = 0; k < n; ++k) {
            double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
            for (int j = 0; j < n; ++j)
                b.m[static_cast<std::size_t>(k) * n + j] =
                    static_cast<T>(scale * std::cos(pi * (2.0 * j + 1.0) * k / (2.0 * n)));
        }
        return b;
    }

    T at(int i, int j) const { return m[static_cast<std::size_t>(i) * n + j]; }
};

namespace detail {

// c = a * b for n x n row-major matrices.
template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int n) {
    for (int i = 0; i < n; ++i) {
        T* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = T(0);
        for (int k = 0; k < n; ++k) {
            const T aik = a[static_cast<std::size_t>(i) * n + k];
            const T* bk = b + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

// c = a * b^t
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int n) {
    for (int i = 0; i < n; ++i) {
        const T* ai = a + static_cast<std::size_t>(i) * n;
        T* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + static_cast<std::size_t>(j) * n;
            T acc = T(0);
            for (int k = 0; k < n; ++k) acc += ai[k] * bj[k];
            ci[j] = acc;
        }
    }
}

// c = a^t * b
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int n) {
    for (int i = 0; i < n; ++i) {
        T* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = T(0);
        for (int k = 0; k < n; ++k) {
            const T aki = a[static_cast<std::size_t>(k) * n + i];
            const T* bk = b + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) ci[j] += aki * bk[j];
        }
    }
}

template <typename T>
void check_dct_shape(const Tensor<T>& img, const DctBasis<T>& basis) {
    if (img.shape.size() != 3)
        throw std::invalid_argument("dct2: expected a [H,W,C] tensor");
    if (img.shape[0] != basis.n || img.shape[1] != basis.n)
        throw std::invalid_argument("dct2: image side does not match basis size");
}

}  // namespace detail

// Per-channel 2-D transform Y = T X T^t on a [H,W,C] tensor with H = W = basis.n.
template <typename T>
void dct2(const Tensor<T>& img, const DctBasis<T>& basis, Tensor<T>& out) {
    detail::check_dct_shape(img, basis);
    const int n = basis.n;
    const int ch = img.shape[2];
    if (!out.same_shape(img)) out = Tensor<T>(img.shape);
    std::vector<T> plane(static_cast<std::size_t>(n) * n), tmp(plane.size()), res(plane.size());
    for (int c = 0; c < ch; ++c) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) plane[static_cast<std::size_t>(i) * n + j] = img.at(i, j, c);
        detail::matmul_nn(basis.m.data(), plane.data(), tmp.data(), n);
        detail::matmul_nt(tmp.data(), basis.m.data(), res.data(), n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out.at(i, j, c) = res[static_cast<std::size_t>(i) * n + j];
    }
}

// Inverse (and adjoint) of dct2: X = T^t Y T.
template <typename T>
void idct2(const Tensor<T>& spec, const DctBasis<T>& basis, Tensor<T>& out) {
    detail::check_dct_shape(spec, basis);
    const int n = basis.n;
    const int ch = spec.shape[2];
    if (!out.same_shape(spec)) out = Tensor<T>(spec.shape);
    std::vector<T> plane(static_cast<std::size_t>(n) * n), tmp(plane.size()), res(plane.size());
    for (int c = 0; c < ch; ++c) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) plane[static_cast<std::size_t>(i) * n + j] = spec.at(i, j, c);
        detail::matmul_tn(basis.m.data(), plane.data(), tmp.data(), n);
        detail::matmul_nn(tmp.data(), basis.m.data(), res.data(), n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out.at(i, j, c) = res[static_cast<std::size_t>(i) * n + j];
    }
}

template <typename T>
Tensor<T> dct2(const Tensor<T>& img, const DctBasis<T>& basis) {
    Tensor<T> out;
    dct2(img, basis, out);
    return out;
}

template <typename T>
Tensor<T> idct2(const Tensor<T>& spec, const DctBasis<T>& basis) {
    Tensor<T> out;
    idct2(spec, basis, out);
    return out;
}

// Max |T T^t - I| entry; used to validate every constructed basis.
template <typename T>
double dct_orthonormality_error(const DctBasis<T>& basis) {
    const int n = basis.n;
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += static_cast<double>(basis.at(i, k)) * static_cast<double>(basis.at(j, k));
            worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
        }
    return worst;
}

}  // namespace d3
