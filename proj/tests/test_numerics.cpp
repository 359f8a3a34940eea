#include <doctest.h>

#include <cmath>

#include "d3/dct.hpp"
#include "d3/grad_check.hpp"
#include "d3/layers.hpp"
#include "d3/rng.hpp"
#include "d3/tensor.hpp"
#include "test_util.hpp"

using namespace d3;

TEST_CASE("rng: identical seed and call sequence give identical outputs") {
    Rng a = Rng::from_seed(42);
    Rng b = Rng::from_seed(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng::from_seed(42).next_u64() != Rng::from_seed(43).next_u64());
}

TEST_CASE("rng: streams are independent of parent state") {
    Rng root = Rng::from_seed(7);
    Rng s1 = root.stream("data");
    root.next_u64();
    Rng s2 = root.stream("data");
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(root.stream("data").next_u64() != root.stream("init").next_u64());
}

TEST_CASE("rng: next_below stays in range and shuffle is deterministic") {
    Rng rng = Rng::from_seed(3);
    for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(7) < 7);
    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<int> v2 = v1;
    Rng r1 = Rng::from_seed(9), r2 = Rng::from_seed(9);
    r1.shuffle(v1);
    r2.shuffle(v2);
    CHECK(v1 == v2);
}

TEST_CASE("dct basis: orthonormal with constant first row") {
    for (int n : {4, 8, 16, 32, 64}) {
        auto basis = DctBasis<double>::make(n);
        CHECK(dct_orthonormality_error(basis) < 1e-6);
        for (int j = 0; j < n; ++j)
            CHECK(basis.at(0, j) == doctest::Approx(1.0 / std::sqrt(n)).epsilon(1e-12));
    }
}

TEST_CASE("dct2: constant image concentrates in the DC coefficient") {
    const int n = 8, ch = 3;
    const float c = 0.37f;
    auto basis = DctBasis<float>::make(n);
    TensorF img({n, n, ch});
    img.fill(c);
    TensorF spec = dct2(img, basis);
    for (int k = 0; k < ch; ++k) {
        CHECK(spec.at(0, 0, k) == doctest::Approx(c * n).epsilon(1e-5));
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v)
                if (u || v) CHECK(std::abs(spec.at(u, v, k)) < 1e-4);
    }
}

TEST_CASE("dct2: inverse round trip and energy preservation") {
    Rng rng = Rng::from_seed(5);
    const int n = 16, ch = 3;
    auto basis = DctBasis<float>::make(n);
    TensorF x = test::random_image(n, ch, rng);
    TensorF spec = dct2(x, basis);
    TensorF back = idct2(spec, basis);
    CHECK(max_abs_diff(x, back) < 1e-5);

    const double nx = norm_l2(x), ns = norm_l2(spec);
    CHECK(std::abs(ns - nx) / nx < 1e-4);
}

TEST_CASE("dct2: rejects shape mismatch") {
    auto basis = DctBasis<float>::make(8);
    TensorF img({4, 4, 1});
    CHECK_THROWS_AS(dct2(img, basis), std::invalid_argument);
}

TEST_CASE("grad_check: quadratic has exact gradient") {
    Rng rng = Rng::from_seed(1);
    TensorD x = test::random_tensor({10}, rng);
    DiffFn f{[](const TensorD& v) { return 0.5 * dot(v, v); },
             [](const TensorD& v) { return v; }};
    CHECK(grad_check(f, x) < 1e-7);
}

TEST_CASE("grad_check: bce of sigmoid of linear layer") {
    Rng rng = Rng::from_seed(2);
    const int n = 12;
    TensorD w = test::random_tensor({n}, rng);
    DiffFn f{[&](const TensorD& x) { return bce_with_logit(dot(w, x) + 0.3, 1); },
             [&](const TensorD& x) {
                 TensorD g({n});
                 const double c = bce_with_logit_grad(dot(w, x) + 0.3, 1);
                 for (int i = 0; i < n; ++i) g.data[i] = c * w.data[i];
                 return g;
             }};
    TensorD x = test::random_tensor({n}, rng);
    CHECK(grad_check(f, x, 1e-5) < 1e-5);
}

TEST_CASE("grad_check: rejects non-finite values") {
    DiffFn f{[](const TensorD& v) { return std::log(v.data[0]); },
             [](const TensorD& v) {
                 TensorD g(v.shape);
                 g.data[0] = 1.0 / v.data[0];
                 return g;
             }};
    TensorD x({1});
    x.data[0] = 1e-7;  // x - h goes negative, log becomes NaN
    CHECK_THROWS_AS(grad_check(f, x, 1e-5), std::runtime_error);
}

namespace {

// Scalar probe of a tensor-valued layer: project the output with fixed
// coefficients so grad_check applies.
TensorD projection(const std::vector<int>& shape, std::uint64_t seed) {
    Rng rng = Rng::from_seed(seed);
    TensorD r(shape);
    for (double& v : r.data) v = rng.next_normal();
    return r;
}

}  // namespace

TEST_CASE("layer gradients: convolution") {
    Rng rng = Rng::from_seed(11);
    ConvSpec cs{2, 3, 3, 2, 1};
    TensorD in = test::random_tensor({6, 6, cs.in_ch}, rng);
    TensorD w = test::random_tensor({cs.kernel, cs.kernel, cs.in_ch, cs.out_ch}, rng, 0.5);
    TensorD b = test::random_tensor({cs.out_ch}, rng, 0.1);
    TensorD out;
    conv2d_forward(in, w, b, cs, out);
    const TensorD r = projection(out.shape, 21);

    auto value_at = [&](const TensorD& x, const TensorD& wx) {
        TensorD o;
        conv2d_forward(x, wx, b, cs, o);
        return dot(o, r);
    };
    TensorD dr = r;

    DiffFn f_in{[&](const TensorD& x) { return value_at(x, w); },
                [&](const TensorD& x) {
                    TensorD o, din;
                    conv2d_forward(x, w, b, cs, o);
                    conv2d_backward(x, w, cs, dr, &din, nullptr, nullptr);
                    return din;
                }};
    CHECK(grad_check(f_in, in) < 1e-4);

    DiffFn f_w{[&](const TensorD& wx) { return value_at(in, wx); },
               [&](const TensorD& wx) {
                   TensorD o, dw;
                   conv2d_forward(in, wx, b, cs, o);
                   conv2d_backward(in, wx, cs, dr, nullptr, &dw, nullptr);
                   return dw;
               }};
    CHECK(grad_check(f_w, w) < 1e-4);
}

TEST_CASE("layer gradients: dense, relu, sigmoid, pooling, dct, mask") {
    Rng rng = Rng::from_seed(13);

    SUBCASE("dense") {
        TensorD in = test::random_tensor({6}, rng);
        TensorD w = test::random_tensor({6, 3}, rng);
        TensorD b = test::random_tensor({3}, rng);
        const TensorD r = projection({3}, 31);
        DiffFn f{[&](const TensorD& x) {
                     TensorD o;
                     dense_forward(x, w, b, o);
                     return dot(o, r);
                 },
                 [&](const TensorD& x) {
                     TensorD din;
                     dense_backward(x, w, r, &din, nullptr, nullptr);
                     return din;
                 }};
        CHECK(grad_check(f, in) < 1e-4);
    }

    SUBCASE("relu away from the kink") {
        TensorD in = test::random_tensor({20}, rng);
        for (double& v : in.data)
            if (std::abs(v) < 0.05) v = 0.1;
        const TensorD r = projection(in.shape, 32);
        DiffFn f{[&](const TensorD& x) {
                     TensorD o;
                     relu_forward(x, o);
                     return dot(o, r);
                 },
                 [&](const TensorD& x) {
                     TensorD o(x.shape);
                     relu_backward(x, r, o);
                     return o;
                 }};
        CHECK(grad_check(f, in) < 1e-4);
    }

    SUBCASE("sigmoid") {
        TensorD in = test::random_tensor({10}, rng);
        const TensorD r = projection(in.shape, 33);
        DiffFn f{[&](const TensorD& x) {
                     TensorD o;
                     sigmoid_forward(x, o);
                     return dot(o, r);
                 },
                 [&](const TensorD& x) {
                     TensorD o, din;
                     sigmoid_forward(x, o);
                     sigmoid_backward(o, r, din);
                     return din;
                 }};
        CHECK(grad_check(f, in) < 1e-4);
    }

    SUBCASE("global average pooling") {
        TensorD in = test::random_tensor({4, 4, 3}, rng);
        const TensorD r = projection({3}, 34);
        DiffFn f{[&](const TensorD& x) {
                     TensorD o;
                     global_avg_pool_forward(x, o);
                     return dot(o, r);
                 },
                 [&](const TensorD& x) {
                     TensorD din;
                     global_avg_pool_backward(x.shape, r, din);
                     return din;
                 }};
        CHECK(grad_check(f, in) < 1e-4);
    }

    SUBCASE("dct as a layer") {
        const int n = 8;
        auto basis = DctBasis<double>::make(n);
        TensorD in = test::random_tensor({n, n, 2}, rng);
        const TensorD r = projection(in.shape, 35);
        DiffFn f{[&](const TensorD& x) { return dot(dct2(x, basis), r); },
                 [&](const TensorD&) { return idct2(r, basis); }};
        CHECK(grad_check(f, in) < 1e-4);
    }

    SUBCASE("mask as a layer") {
        const int d = 32;
        PartitionMask mask = random_partition(d, 2, 5);
        TensorD in = test::random_tensor({4, 4, 2}, rng);
        const TensorD r = projection(in.shape, 36);
        DiffFn f{[&](const TensorD& x) { return dot(apply_mask(x, mask, 0), r); },
                 [&](const TensorD&) { return apply_mask(r, mask, 0); }};
        CHECK(grad_check(f, in) < 1e-4);
    }
}
