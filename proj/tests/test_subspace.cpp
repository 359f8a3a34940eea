#include <doctest.h>

#include <cmath>
#include <numeric>

#include "d3/subspace.hpp"
#include "test_util.hpp"

using namespace d3;

namespace {

// Disjoint profile: member j owns every n-th coordinate.
GradientProfile random_profile(int d, int n, Norm norm, double eps, Rng& rng) {
    GradientProfile p;
    p.d = d;
    p.n = n;
    p.eps = eps;
    p.norm = norm;
    p.g.assign(n, std::vector<double>(d, 0.0));
    for (int i = 0; i < d; ++i) p.g[i % n][i] = rng.next_normal() + (rng.next_sign() * 0.5);
    for (int j = 0; j < n; ++j) p.gamma.push_back(rng.next_uniform(0.2, 1.0));
    return p;
}

GradientProfile single_model_profile(double g_norm_sq, double gamma, double eps, int d) {
    GradientProfile p;
    p.d = d;
    p.n = 1;
    p.eps = eps;
    p.norm = Norm::l2;
    p.g.assign(1, std::vector<double>(d, 0.0));
    p.g[0][0] = std::sqrt(g_norm_sq);
    p.gamma = {gamma};
    return p;
}

}  // namespace

TEST_CASE("bound_l2: single model formula") {
    GradientProfile p = single_model_profile(9.0, 1.5, 1.0, 10);
    BoundReport r = bound_l2(p);
    CHECK(r.at_least_one_k == 4);  // floor(9 / 2.25)
    CHECK(r.majority_k_lower == 4);
    CHECK(r.majority_k_upper == 4);
}

TEST_CASE("bound_l2: two equal members shrink the subspace by the member count") {
    const int d = 1000;
    const double G2 = 25.0, gamma = 0.4, eps = 1.0;
    GradientProfile p;
    p.d = d;
    p.n = 2;
    p.eps = eps;
    p.norm = Norm::l2;
    p.g.assign(2, std::vector<double>(d, 0.0));
    p.g[0][0] = std::sqrt(G2);
    p.g[1][1] = std::sqrt(G2);
    p.gamma = {gamma, gamma};
    BoundReport r = bound_l2(p);
    const long long expect = static_cast<long long>(std::floor(eps * eps * G2 / (2 * gamma * gamma)));
    CHECK(r.at_least_one_k == expect);

    GradientProfile single = single_model_profile(G2, gamma, eps, d);
    BoundReport rs = bound_l2(single);
    CHECK(r.at_least_one_k <= rs.at_least_one_k / 2 + 1);
}

TEST_CASE("bound_l2/bound_linf: zero budget kills every rule") {
    Rng rng = Rng::from_seed(5);
    for (int n : {1, 2, 4}) {
        GradientProfile p = random_profile(16, n, Norm::l2, 0.0, rng);
        BoundReport r = bound_l2(p);
        CHECK(r.at_least_one_k == 0);
        CHECK(r.majority_k_lower == 0);
        CHECK(r.majority_k_upper == 0);
        p.norm = Norm::linf;
        BoundReport ri = bound_linf(p);
        CHECK(ri.at_least_one_k == 0);
        CHECK(ri.majority_k_upper == 0);
    }
}

TEST_CASE("bound_linf: single model and min/median arithmetic") {
    GradientProfile p;
    p.d = 64;
    p.n = 1;
    p.eps = 0.5;
    p.norm = Norm::linf;
    p.g.assign(1, std::vector<double>(64, 0.0));
    for (int i = 0; i < 4; ++i) p.g[0][i] = 1.5;  // l1 = 6
    p.gamma = {0.75};
    BoundReport r = bound_linf(p);
    CHECK(r.at_least_one_k ==
          static_cast<long long>(std::floor(0.25 * 36.0 / (0.75 * 0.75))));

    // q = (100, 25, 4) via l1 norms (10, 5, 2), eps = 3, gamma = 1, n = 3
    GradientProfile q;
    q.d = 64;
    q.n = 3;
    q.eps = 3.0;
    q.norm = Norm::linf;
    q.g.assign(3, std::vector<double>(64, 0.0));
    q.g[0][0] = 10.0;
    q.g[1][1] = 5.0;
    q.g[2][2] = 2.0;
    q.gamma = {1.0, 1.0, 1.0};
    BoundReport rq = bound_linf(q);
    CHECK(rq.at_least_one_k == 4);
    CHECK(rq.majority_k_upper == 25);
    CHECK(rq.majority_k_lower == 25);
}

TEST_CASE("bound_linf: equal members make majority equal at-least-one") {
    GradientProfile p;
    p.d = 4096;
    p.n = 4;
    p.eps = 1.0;
    p.norm = Norm::linf;
    p.g.assign(4, std::vector<double>(4096, 0.0));
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 2; ++i) p.g[j][2 * j + i] = 3.0;  // l1 = 6 each
    p.gamma = {0.5, 0.5, 0.5, 0.5};
    BoundReport r = bound_linf(p);
    CHECK(r.at_least_one_k == r.majority_k_upper);
    // n^2 in the denominator: q = eps^2 * 36 / (16 * 0.25) = 9
    CHECK(r.at_least_one_k == 9);
}

TEST_CASE("bounds: validation errors") {
    Rng rng = Rng::from_seed(7);
    GradientProfile p = random_profile(8, 2, Norm::l2, 1.0, rng);
    p.gamma[0] = 0.0;
    CHECK_THROWS_AS(bound_l2(p), std::invalid_argument);

    GradientProfile q = random_profile(8, 2, Norm::l2, 1.0, rng);
    q.g[1] = q.g[0];  // overlapping gradients flagged disjoint
    CHECK_THROWS_AS(bound_l2(q), std::invalid_argument);
}

TEST_CASE("bounds: monotone in eps and gradient norms, antitone in gaps") {
    Rng rng = Rng::from_seed(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(4));
        GradientProfile p = random_profile(24, n, Norm::l2, rng.next_uniform(0.3, 1.5), rng);

        GradientProfile bigger_eps = p;
        bigger_eps.eps *= 1.7;
        CHECK(bound_l2(bigger_eps).at_least_one_k >= bound_l2(p).at_least_one_k);

        GradientProfile bigger_g = p;
        for (double& v : bigger_g.g[0]) v *= 2.0;
        CHECK(bound_l2(bigger_g).at_least_one_k >= bound_l2(p).at_least_one_k);

        GradientProfile bigger_gamma = p;
        bigger_gamma.gamma[0] *= 3.0;
        CHECK(bound_l2(bigger_gamma).at_least_one_k <= bound_l2(p).at_least_one_k);

        p.norm = Norm::linf;
        bigger_eps.norm = bigger_g.norm = bigger_gamma.norm = Norm::linf;
        CHECK(bound_linf(bigger_eps).at_least_one_k >= bound_linf(p).at_least_one_k);
        CHECK(bound_linf(bigger_g).at_least_one_k >= bound_linf(p).at_least_one_k);
        CHECK(bound_linf(bigger_gamma).at_least_one_k <= bound_linf(p).at_least_one_k);
    }
}

TEST_CASE("bounds: member permutation leaves at-least-one unchanged") {
    Rng rng = Rng::from_seed(13);
    GradientProfile p = random_profile(20, 4, Norm::l2, 1.2, rng);
    GradientProfile q = p;
    std::swap(q.g[0], q.g[3]);
    std::swap(q.gamma[0], q.gamma[3]);
    CHECK(bound_l2(p).at_least_one_k == bound_l2(q).at_least_one_k);
    p.norm = q.norm = Norm::linf;
    CHECK(bound_linf(p).at_least_one_k == bound_linf(q).at_least_one_k);
}

TEST_CASE("regular_hadamard: orders 4, 16, 64 are exact; others rejected") {
    for (int order : {4, 16, 64}) {
        HadamardMatrix h = regular_hadamard(order);
        const int root = static_cast<int>(std::lround(std::sqrt(order)));
        for (int i = 0; i < order; ++i) {
            long long row_sum = 0;
            for (int j = 0; j < order; ++j) row_sum += h.at(i, j);
            CHECK(row_sum == root);
            for (int j = 0; j < order; ++j) {
                long long dot_ij = 0;
                for (int k = 0; k < order; ++k)
                    dot_ij += static_cast<long long>(h.at(i, k)) * h.at(j, k);
                CHECK(dot_ij == (i == j ? order : 0));
            }
        }
    }
    CHECK_THROWS_WITH_AS(regular_hadamard(36), doctest::Contains("unsupported order"),
                         std::invalid_argument);
    CHECK_THROWS_AS(regular_hadamard(8), std::invalid_argument);
}

TEST_CASE("gaas_directions: exactly orthogonal with equal sign-aligned mass") {
    Rng rng = Rng::from_seed(17);
    const int d = 64;
    TensorF g({d});
    for (float& v : g.data) v = rng.next_float() - 0.5f;
    for (float& v : g.data)
        if (v == 0.0f) v = 0.1f;
    const double eps = 0.05;
    HadamardMatrix h = regular_hadamard(16);
    auto dirs = gaas_directions(g, eps, h);
    REQUIRE(dirs.size() == 16);

    for (std::size_t i = 0; i < dirs.size(); ++i) {
        CHECK(norm_linf(dirs[i]) == doctest::Approx(eps));
        double aligned = 0.0;
        for (int p = 0; p < d; ++p)
            aligned += (g.data[p] > 0 ? 1.0 : -1.0) * dirs[i].data[p];
        CHECK(aligned == doctest::Approx(eps * d / 4.0).epsilon(1e-6));  // eps*d/sqrt(w)
        for (std::size_t j = i + 1; j < dirs.size(); ++j)
            CHECK(dot(dirs[i], dirs[j]) == 0.0);
    }
}

TEST_CASE("gaas_estimate: closed form on an all-positive linear target") {
    const int side = 8;
    Rng rng = Rng::from_seed(19);
    TensorF w({side, side, 1});
    for (float& v : w.data) v = 0.2f + rng.next_float();
    test::LinearTarget target(w, -20.0f, side, 1);

    auto samples = test::fake_samples(6, side, 1, 23);
    std::vector<Sample> fakes;
    for (auto& s : samples)
        if (target.predicts_fake(s.pixels)) fakes.push_back(s);
    REQUIRE(fakes.size() >= 3);

    const double eps = 0.25;
    const std::vector<int> orders{4, 16};
    DimensionEstimate est = gaas_estimate(target, fakes, eps, orders);

    for (std::size_t idx = 0; idx < fakes.size(); ++idx) {
        TensorF grad;
        target.loss_and_grad(fakes[idx].pixels, 1, &grad);
        int expect = 0;
        for (int order : orders) {
            HadamardMatrix h = regular_hadamard(order);
            int flips = 0;
            for (const TensorF& r : gaas_directions(grad, eps, h)) {
                double z = target.score(fakes[idx].pixels);
                for (std::size_t p = 0; p < r.size(); ++p)
                    z += static_cast<double>(w.data[p]) * r.data[p];
                flips += (z <= 0.0);
            }
            expect = std::max(expect, flips);
        }
        CHECK(est.k_per_input[idx] == expect);
    }
}

TEST_CASE("gaas_estimate: zero budget never flips; misclassified inputs are rejected") {
    const int side = 8;
    TensorF w({side, side, 1});
    w.fill(0.5f);
    test::LinearTarget target(w, -10.0f, side, 1);
    auto samples = test::fake_samples(4, side, 1, 29);
    std::vector<Sample> fakes;
    for (auto& s : samples)
        if (target.predicts_fake(s.pixels)) fakes.push_back(s);
    REQUIRE(!fakes.empty());

    DimensionEstimate est = gaas_estimate(target, fakes, 0.0, {4});
    for (int k : est.k_per_input) CHECK(k == 0);

    Sample real = fakes[0];
    real.pixels.fill(0.0f);  // scores -10: misclassified as real
    CHECK_THROWS_AS(gaas_estimate(target, {real}, 0.1, {4}), std::invalid_argument);
}

TEST_CASE("oracle: matches the closed form for single models") {
    Rng rng = Rng::from_seed(31);
    for (int trial = 0; trial < 25; ++trial) {
        GradientProfile p = random_profile(32, 1, Norm::l2, rng.next_uniform(0.2, 2.0), rng);
        const BoundReport r = bound_l2(p);
        const OracleResult o = oracle_max_orthogonal(p, VotingRule::at_least_one);
        CHECK(o.complete);
        CHECK(o.k_found == r.at_least_one_k);
    }
}

TEST_CASE("oracle: saturated bound returns the full dimension") {
    GradientProfile p = single_model_profile(10000.0, 0.1, 5.0, 16);
    CHECK(bound_l2(p).at_least_one_k == 16);
    CHECK(oracle_max_orthogonal(p, VotingRule::at_least_one).k_found == 16);
}

TEST_CASE("oracle: multi-member at-least-one equality and majority containment") {
    Rng rng = Rng::from_seed(37);
    for (int trial = 0; trial < 15; ++trial) {
        const int n = (trial % 2) ? 2 : 4;
        GradientProfile p = random_profile(28, n, Norm::l2, rng.next_uniform(0.3, 1.2), rng);
        const BoundReport r = bound_l2(p);
        const OracleResult alo = oracle_max_orthogonal(p, VotingRule::at_least_one);
        CHECK(alo.k_found == r.at_least_one_k);
        const OracleResult maj = oracle_max_orthogonal(p, VotingRule::majority);
        CHECK(maj.k_found >= r.majority_k_lower);
        CHECK(maj.k_found <= r.majority_k_upper);
    }
}

TEST_CASE("oracle: linf never exceeds the bound formulas") {
    Rng rng = Rng::from_seed(41);
    for (int trial = 0; trial < 15; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(4));
        GradientProfile p = random_profile(32, n, Norm::linf, rng.next_uniform(0.2, 3.0), rng);
        const BoundReport r = bound_linf(p);
        CHECK(oracle_max_orthogonal(p, VotingRule::at_least_one).k_found <= r.at_least_one_k);
        CHECK(oracle_max_orthogonal(p, VotingRule::majority).k_found <= r.majority_k_upper);
    }
}

TEST_CASE("oracle: rejects oversized problems") {
    Rng rng = Rng::from_seed(43);
    GradientProfile p = random_profile(128, 2, Norm::l2, 1.0, rng);
    CHECK_THROWS_AS(oracle_max_orthogonal(p, VotingRule::at_least_one), std::invalid_argument);
}

TEST_CASE("profile json round trip") {
    Rng rng = Rng::from_seed(47);
    GradientProfile p = random_profile(12, 3, Norm::linf, 0.7, rng);
    GradientProfile q = profile_from_json(profile_to_json(p));
    CHECK(q.d == p.d);
    CHECK(q.n == p.n);
    CHECK(q.eps == p.eps);
    CHECK(q.norm == p.norm);
    CHECK(q.gamma == p.gamma);
    CHECK(q.g == p.g);
}
