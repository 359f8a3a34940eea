#include "d3/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/format.hpp"
#include "d3/parallel.hpp"
#include "d3/rng.hpp"

namespace d3 {

using nlohmann::json;

namespace {

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double vec_norm2(const std::vector<double>& a) { return std::sqrt(vec_dot(a, a)); }

double vec_norm1(const std::vector<double>& a) {
    double s = 0;
    for (double v : a) s += std::abs(v);
    return s;
}

long long clamp_floor(double v, int d) {
    if (!(v > 0)) return 0;
    if (v >= static_cast<double>(d)) return d;
    return static_cast<long long>(std::floor(v));
}

// Subsets of {0..n-1} with exactly m elements.
std::vector<std::vector<int>> subsets_of_size(int n, int m) {
    std::vector<std::vector<int>> out;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != m) continue;
        std::vector<int> s;
        for (int j = 0; j < n; ++j)
            if (mask & (1u << j)) s.push_back(j);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

void GradientProfile::validate() const {
    if (d <= 0 || n < 1) throw std::invalid_argument("profile: d must be positive and n >= 1");
    if (static_cast<int>(g.size()) != n || static_cast<int>(gamma.size()) != n)
        throw std::invalid_argument("profile: need n gradients and n gaps");
    for (const auto& v : g)
        if (static_cast<int>(v.size()) != d)
            throw std::invalid_argument("profile: gradient dimension mismatch");
    for (double gm : gamma)
        if (!(gm > 0)) throw std::invalid_argument("profile: loss gaps must be positive");
    if (eps < 0) throw std::invalid_argument("profile: eps must be >= 0");
    if (disjoint) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double bound = 1e-8 * vec_norm2(g[i]) * vec_norm2(g[j]);
                if (std::abs(vec_dot(g[i], g[j])) > bound)
                    throw std::invalid_argument(
                        "profile: gradients flagged disjoint are not orthogonal");
            }
    }
}

BoundReport bound_l2(const GradientProfile& p) {
    p.validate();
    if (p.norm != Norm::l2) throw std::invalid_argument("bound_l2: profile norm is not l2");
    BoundReport r;
    r.norm = Norm::l2;
    r.d = p.d;
    r.n = p.n;
    r.eps = p.eps;
    r.gamma = p.gamma;
    for (const auto& gv : p.g) r.g_norms.push_back(vec_norm2(gv));

    auto value_for = [&](const std::vector<int>& members) {
        double num = 0.0, gsum = 0.0;
        for (int j : members) {
            num += r.g_norms[j] * r.g_norms[j];
            gsum += p.gamma[j];
        }
        return p.eps * p.eps * num / (gsum * gsum);
    };

    std::vector<int> all(p.n);
    std::iota(all.begin(), all.end(), 0);
    r.at_least_one_k = clamp_floor(value_for(all), p.d);

    if (p.n > 8) throw std::invalid_argument("bound_l2: majority enumeration supports n <= 8");
    const int m = (p.n + 1) / 2;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& k : subsets_of_size(p.n, m)) {
        const double v = value_for(k);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    r.majority_k_lower = clamp_floor(lo, p.d);
    r.majority_k_upper = clamp_floor(hi, p.d);
    return r;
}

BoundReport bound_linf(const GradientProfile& p) {
    p.validate();
    if (p.norm != Norm::linf) throw std::invalid_argument("bound_linf: profile norm is not linf");
    BoundReport r;
    r.norm = Norm::linf;
    r.d = p.d;
    r.n = p.n;
    r.eps = p.eps;
    r.gamma = p.gamma;
    std::vector<double> q(p.n);
    for (int j = 0; j < p.n; ++j) {
        const double l1 = vec_norm1(p.g[j]);
        r.g_norms.push_back(l1);
        q[j] = p.eps * p.eps * l1 * l1 / (static_cast<double>(p.n) * p.n * p.gamma[j] * p.gamma[j]);
    }
    r.at_least_one_k = clamp_floor(*std::min_element(q.begin(), q.end()), p.d);
    // majority: the ceil(n/2)-th largest per-model value (the adversary
    // targets the easiest majority subset)
    std::vector<double> sorted = q;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    const int m = (p.n + 1) / 2;
    const long long k = clamp_floor(sorted[m - 1], p.d);
    r.majority_k_lower = k;
    r.majority_k_upper = k;
    return r;
}

std::string bound_report_json(const BoundReport& r) {
    json j;
    j["norm"] = norm_name(r.norm);
    j["at_least_one_k"] = r.at_least_one_k;
    j["majority_k_lower"] = r.majority_k_lower;
    j["majority_k_upper"] = r.majority_k_upper;
    j["d"] = r.d;
    j["n"] = r.n;
    j["eps"] = r.eps;
    j["gamma"] = r.gamma;
    j["g_norms"] = r.g_norms;
    return j.dump(2) + "\n";
}

HadamardMatrix regular_hadamard(int order) {
    if (order != 4 && order != 16 && order != 64)
        throw std::invalid_argument("regular_hadamard: unsupported order " +
                                    std::to_string(order));
    static const std::int8_t base[16] = {1, 1, 1, -1, 1, 1, -1, 1, 1, -1, 1, 1, -1, 1, 1, 1};
    HadamardMatrix h;
    h.order = 4;
    h.e.assign(base, base + 16);
    while (h.order < order) {
        const int m = h.order;
        HadamardMatrix next;
        next.order = m * 4;
        next.e.resize(static_cast<std::size_t>(next.order) * next.order);
        for (int i = 0; i < next.order; ++i)
            for (int j = 0; j < next.order; ++j)
                next.e[static_cast<std::size_t>(i) * next.order + j] =
                    static_cast<std::int8_t>(base[(i / m) * 4 + (j / m)] *
                                             h.e[static_cast<std::size_t>(i % m) * m + (j % m)]);
        h = std::move(next);
    }
    return h;
}

std::vector<TensorF> gaas_directions(const TensorF& grad, double eps, const HadamardMatrix& h) {
    const int d = static_cast<int>(grad.size());
    const int w = h.order;
    const int block = d / w;
    if (block == 0) throw std::invalid_argument("gaas: dimension smaller than Hadamard order");
    std::vector<TensorF> dirs;
    dirs.reserve(w);
    for (int i = 0; i < w; ++i) {
        TensorF r(grad.shape);
        for (int p = 0; p < block * w; ++p) {
            const float g = grad.data[p];
            const float sign = g > 0 ? 1.0f : (g < 0 ? -1.0f : 0.0f);
            r.data[p] = static_cast<float>(eps) * h.at(i, p / block) * sign;
        }
        // coordinates past block*w stay zero so the directions remain orthogonal
        dirs.push_back(std::move(r));
    }
    return dirs;
}

DimensionEstimate gaas_estimate(const AttackTarget& target, const std::vector<Sample>& inputs,
                                double eps, const std::vector<int>& orders) {
    if (inputs.empty()) throw std::invalid_argument("gaas: empty input set");
    std::vector<HadamardMatrix> mats;
    for (int w : orders) mats.push_back(regular_hadamard(w));

    DimensionEstimate est;
    est.orders = orders;
    est.eps = eps;
    est.k_per_input.assign(inputs.size(), 0);

    const int d = target.image_side() * target.image_side() * target.channels();
    for (const auto& m : mats)
        if (m.order > d) throw std::invalid_argument("gaas: order exceeds input dimension");

    parallel_for(static_cast<std::int64_t>(inputs.size()), [&](std::int64_t idx) {
        const TensorF& x = inputs[idx].pixels;
        if (!target.predicts_fake(x))
            throw std::invalid_argument("gaas: input is misclassified by the target");
        TensorF grad;
        target.loss_and_grad(x, 1, &grad);
        int best = 0;
        for (const auto& m : mats) {
            int flips = 0;
            for (const TensorF& r : gaas_directions(grad, eps, m)) {
                TensorF xp = x;
                axpy(1.0f, r, xp);
                if (!target.predicts_fake(xp)) ++flips;
            }
            best = std::max(best, flips);
        }
        est.k_per_input[idx] = best;
    });
    est.finalize();
    return est;
}

void DimensionEstimate::finalize() {
    if (k_per_input.empty()) return;
    std::vector<int> sorted = k_per_input;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    median_k = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    mean_k = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    max_k = sorted.back();
}

std::vector<std::pair<int, double>> survival_curve(const DimensionEstimate& est) {
    std::vector<std::pair<int, double>> out;
    const double n = static_cast<double>(est.k_per_input.size());
    for (int k = 0; k <= est.max_k; ++k) {
        int count = 0;
        for (int v : est.k_per_input) count += (v >= k);
        out.emplace_back(k, count / n);
    }
    return out;
}

std::string survival_curve_csv(const DimensionEstimate& est, const std::string& label) {
    std::string out = csv_row({"label", "k", "fraction_at_least_k"});
    for (const auto& [k, frac] : survival_curve(est))
        out += csv_row({label, std::to_string(k), fmt_double(frac)});
    return out;
}

namespace {

// --- l2 oracle construction ------------------------------------------------

// Orthonormal basis of an m-dimensional subspace containing the unit vector
// first, completed deterministically from standard basis vectors.
std::vector<std::vector<double>> subspace_basis(const std::vector<double>& unit_first, int m) {
    const int d = static_cast<int>(unit_first.size());
    std::vector<std::vector<double>> basis;
    basis.push_back(unit_first);
    for (int cand = 0; cand < d && static_cast<int>(basis.size()) < m; ++cand) {
        std::vector<double> v(d, 0.0);
        v[cand] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                const double c = vec_dot(v, b);
                for (int i = 0; i < d; ++i) v[i] -= c * b[i];
            }
        const double nv = vec_norm2(v);
        if (nv > 1e-8) {
            for (double& x : v) x /= nv;
            basis.push_back(std::move(v));
        }
    }
    return static_cast<int>(basis.size()) == m ? basis : std::vector<std::vector<double>>{};
}

// k orthogonal directions of norm eps whose projections on ghat are all
// >= a*eps, via a Householder reflection taking e1 to the projection profile.
std::vector<std::vector<double>> construct_directions(const std::vector<double>& ghat, int k,
                                                      double a, double eps) {
    const int d = static_cast<int>(ghat.size());
    if (k < 1 || k > d) return {};
    if (static_cast<double>(k) * a * a > 1.0 + 1e-12) return {};
    const int m = k < d ? k + 1 : d;

    std::vector<double> v(m, 0.0);
    if (k < d) {
        const double c2 = std::max(0.0, 1.0 - k * a * a);
        for (int i = 0; i < k; ++i) v[i] = a;
        v[k] = std::sqrt(c2);
    } else {
        const double u = 1.0 / std::sqrt(static_cast<double>(d));
        if (u + 1e-15 < a) return {};
        for (int i = 0; i < d; ++i) v[i] = u;
    }

    const auto basis = subspace_basis(ghat, m);
    if (basis.empty()) return {};

    // Householder H with He1 = v; columns of H are orthonormal and its first
    // row equals v, so column i has projection v[i] on e1.
    std::vector<double> w(m);
    for (int i = 0; i < m; ++i) w[i] = v[i] - (i == 0 ? 1.0 : 0.0);
    const double ww = vec_dot(w, w);

    std::vector<std::vector<double>> dirs;
    for (int col = 0; col < k; ++col) {
        std::vector<double> h(m, 0.0);
        h[col] = 1.0;
        if (ww > 1e-30) {
            const double c = 2.0 * w[col] / ww;
            for (int i = 0; i < m; ++i) h[i] -= c * w[i];
        }
        std::vector<double> r(d, 0.0);
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < d; ++p) r[p] += h[i] * basis[i][p];
        for (double& x : r) x *= eps;
        dirs.push_back(std::move(r));
    }
    return dirs;
}

bool verify_directions(const std::vector<std::vector<double>>& dirs,
                       const std::vector<double>& gbar, double gamma_bar, double eps) {
    const double tol = 1e-9;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        if (vec_norm2(dirs[i]) > eps * (1.0 + tol)) return false;
        if (vec_dot(dirs[i], gbar) < gamma_bar * (1.0 - tol) - 1e-12) return false;
        for (std::size_t j = i + 1; j < dirs.size(); ++j)
            if (std::abs(vec_dot(dirs[i], dirs[j])) > tol * eps * eps + 1e-12) return false;
    }
    return true;
}

struct SubsetSearch {
    int k_found = 0;
    bool complete = true;
};

SubsetSearch oracle_l2_subset(const GradientProfile& p, const std::vector<int>& members,
                              int budget) {
    const int d = p.d;
    std::vector<double> gbar(d, 0.0);
    double gamma_bar = 0.0;
    for (int j : members) {
        for (int i = 0; i < d; ++i) gbar[i] += p.g[j][i];
        gamma_bar += p.gamma[j];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : gbar) v *= inv;
    gamma_bar *= inv;

    SubsetSearch res;
    const double gnorm = vec_norm2(gbar);
    if (p.eps <= 0 || gnorm == 0) return res;
    std::vector<double> ghat = gbar;
    for (double& v : ghat) v /= gnorm;
    const double a = gamma_bar / (p.eps * gnorm);

    std::vector<std::vector<double>> found;
    for (int k = 1; k <= d; ++k) {
        auto dirs = construct_directions(ghat, k, a, p.eps);
        if (dirs.empty() || !verify_directions(dirs, gbar, gamma_bar, p.eps)) break;
        found = std::move(dirs);
        res.k_found = k;
    }

    // Greedy extension: the most aligned unit vector orthogonal to the found
    // set is the projected mean gradient; if even it fails, no extension exists.
    int attempts = 0;
    while (attempts < budget) {
        std::vector<double> h = gbar;
        for (const auto& r : found) {
            const double rr = vec_dot(r, r);
            if (rr <= 0) continue;
            const double c = vec_dot(h, r) / rr;
            for (int i = 0; i < d; ++i) h[i] -= c * r[i];
        }
        const double hn = vec_norm2(h);
        if (hn < 1e-12 || static_cast<int>(found.size()) >= d) break;
        std::vector<double> cand(d);
        for (int i = 0; i < d; ++i) cand[i] = p.eps * h[i] / hn;
        if (vec_dot(cand, gbar) < gamma_bar * (1.0 - 1e-9)) break;
        found.push_back(std::move(cand));
        res.k_found = static_cast<int>(found.size());
        ++attempts;
    }
    res.complete = attempts < budget;
    return res;
}

SubsetSearch oracle_linf_subset(const GradientProfile& p, const std::vector<int>& members,
                                int need) {
    // Directions from regular-Hadamard profiles against sign of the summed
    // gradient; feasibility follows the permutation-expectation accounting
    // with the full ensemble size in the denominator.
    const int d = p.d;
    std::vector<double> gsum(d, 0.0);
    for (int j = 0; j < p.n; ++j)
        for (int i = 0; i < d; ++i) gsum[i] += p.g[j][i];

    SubsetSearch res;
    if (p.eps <= 0) return res;

    std::vector<double> l1(p.n);
    for (int j = 0; j < p.n; ++j) l1[j] = vec_norm1(p.g[j]);

    for (int w : {1, 4, 16, 64}) {
        if (w > d) break;
        // sign-aligned mass of each direction: eps * floor(d/w) * rowsum
        const int block = d / w;
        int nonzero_per_block_total = 0;
        for (int pcoord = 0; pcoord < block * w; ++pcoord)
            nonzero_per_block_total += (gsum[pcoord] != 0.0);
        const double aligned = p.eps * static_cast<double>(nonzero_per_block_total) /
                               std::sqrt(static_cast<double>(w));
        int satisfied = 0;
        for (int j : members) {
            const double expected = l1[j] * aligned / (static_cast<double>(p.n) * d);
            if (expected >= p.gamma[j]) ++satisfied;
        }
        if (satisfied >= need && w <= d) res.k_found = std::max(res.k_found, std::min(w, d));
    }
    return res;
}

}  // namespace

OracleResult oracle_max_orthogonal(const GradientProfile& p, VotingRule rule, int search_budget) {
    p.validate();
    if (p.d > 64 || p.n > 4)
        throw std::invalid_argument("oracle: supports d <= 64 and n <= 4");

    std::vector<std::vector<int>> targets;
    if (rule == VotingRule::at_least_one) {
        std::vector<int> all(p.n);
        std::iota(all.begin(), all.end(), 0);
        targets.push_back(all);
    } else {
        targets = subsets_of_size(p.n, (p.n + 1) / 2);
    }

    OracleResult out;
    for (const auto& members : targets) {
        SubsetSearch s = p.norm == Norm::l2
                             ? oracle_l2_subset(p, members, search_budget)
                             : oracle_linf_subset(p, members, static_cast<int>(members.size()));
        out.k_found = std::max(out.k_found, s.k_found);
        out.complete = out.complete && s.complete;
    }
    return out;
}

GradientProfile profile_from_members(const std::vector<const Classifier*>& members,
                                     const TensorF& pixels, int label, double eps, Norm norm) {
    GradientProfile p;
    p.n = static_cast<int>(members.size());
    if (p.n == 0) throw std::invalid_argument("profile: no members");
    p.d = members[0]->arch.feature_count();
    p.eps = eps;
    p.norm = norm;
    for (const Classifier* clf : members) {
        TensorF grad;
        const double loss = clf->loss_and_pixel_grad(pixels, label, grad);
        std::vector<double> gd(grad.begin(), grad.end());
        p.g.push_back(std::move(gd));
        p.gamma.push_back(std::max(0.0, std::log(2.0) - loss));
    }
    return p;
}

std::string profile_to_json(const GradientProfile& p) {
    json j;
    j["d"] = p.d;
    j["n"] = p.n;
    j["eps"] = p.eps;
    j["norm"] = norm_name(p.norm);
    j["disjoint"] = p.disjoint;
    j["gamma"] = p.gamma;
    j["g"] = p.g;
    return j.dump() + "\n";
}

GradientProfile profile_from_json(const std::string& text) {
    json j = json::parse(text);
    GradientProfile p;
    p.d = j.at("d").get<int>();
    p.n = j.at("n").get<int>();
    p.eps = j.at("eps").get<double>();
    p.norm = norm_from_name(j.at("norm").get<std::string>());
    p.disjoint = j.at("disjoint").get<bool>();
    p.gamma = j.at("gamma").get<std::vector<double>>();
    p.g = j.at("g").get<std::vector<std::vector<double>>>();
    return p;
}

}  // namespace d3
