#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "d3/tensor.hpp"

namespace d3 {

// A scalar function together with its analytic gradient, both in double
// precision. Used to validate every backward pass against central
// finite differences.
struct DiffFn {
    std::function<double(const TensorD&)> value;
    std::function<TensorD(const TensorD&)> grad;
};

// Max over coordinates of |analytic - central difference| / (|central difference| + 1e-12).
inline double grad_check(const DiffFn& f, const TensorD& x, double h = 1e-5) {
    TensorD g = f.grad(x);
    if (!g.same_shape(x)) throw std::invalid_argument("grad_check: gradient shape mismatch");
    TensorD xp = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x.data[i];
        xp.data[i] = xi + h;
        const double fp = f.value(xp);
        xp.data[i] = xi - h;
        const double fm = f.value(xp);
        xp.data[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("grad_check: non-finite function value");
        const double fd = (fp - fm) / (2.0 * h);
        const double err = std::abs(g.data[i] - fd) / (std::abs(fd) + 1e-12);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace d3
