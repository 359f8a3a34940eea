#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace d3 {

// Dense row-major tensor. Images use [H,W,C] layout, matrices [rows,cols].
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), T(0)) {}
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int e : s) {
            if (e <= 0) throw std::invalid_argument("tensor: non-positive extent");
            n *= static_cast<std::size_t>(e);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    T* begin() { return data.data(); }
    T* end() { return data.data() + data.size(); }
    const T* begin() const { return data.data(); }
    const T* end() const { return data.data() + data.size(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    // [H,W,C] accessor
    T& at(int i, int j, int c) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + c];
    }
    const T& at(int i, int j, int c) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + c];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T, typename U>
Tensor<T> cast_tensor(const Tensor<U>& x) {
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = static_cast<T>(x.data[i]);
    return y;
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
    for (T v : x.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename T>
void check_finite(const Tensor<T>& x, const char* what) {
    if (!all_finite(x)) throw std::runtime_error(std::string("non-finite values in ") + what);
}

// Dot product with double accumulation.
template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
    return s;
}

template <typename T>
double norm_l2(const Tensor<T>& a) {
    return std::sqrt(dot(a, a));
}

template <typename T>
double norm_l1(const Tensor<T>& a) {
    double s = 0.0;
    for (T v : a.data) s += std::abs(static_cast<double>(v));
    return s;
}

template <typename T>
double norm_linf(const Tensor<T>& a) {
    double m = 0.0;
    for (T v : a.data) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
}

template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
    return m;
}

}  // namespace d3
