#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d3/attacks.hpp"
#include "d3/tensor.hpp"

namespace d3 {

// Inputs to the adversarial-dimension bounds: per-model input gradients
// (pairwise orthogonal for disjoint models), loss gaps, and a budget.
struct GradientProfile {
    int d = 0;
    int n = 0;
    std::vector<std::vector<double>> g;  // n gradients in R^d
    std::vector<double> gamma;           // n positive loss gaps
    double eps = 0.0;
    Norm norm = Norm::l2;
    bool disjoint = true;

    void validate() const;
};

enum class VotingRule { at_least_one, majority };

struct BoundReport {
    Norm norm = Norm::l2;
    // exact for at-least-one (both norms) and for the l_inf majority rule
    long long at_least_one_k = 0;
    long long majority_k_lower = 0;
    long long majority_k_upper = 0;
    // echoed inputs
    int d = 0, n = 0;
    double eps = 0.0;
    std::vector<double> gamma;
    std::vector<double> g_norms;  // l2 norms for l2 bounds, l1 norms for l_inf
};

BoundReport bound_l2(const GradientProfile& p);
BoundReport bound_linf(const GradientProfile& p);

std::string bound_report_json(const BoundReport& r);

// +-1 matrix with orthogonal rows and constant row sum sqrt(order).
// Supported orders: 4, 16, 64 (Kronecker powers of the order-4 seed).
struct HadamardMatrix {
    int order = 0;
    std::vector<std::int8_t> e;  // row-major

    int at(int i, int j) const { return e[static_cast<std::size_t>(i) * order + j]; }
};

HadamardMatrix regular_hadamard(int order);

struct OracleResult {
    int k_found = 0;
    bool complete = true;  // false when the search budget ran out before certifying
};

// Brute-force check of the bound formulas: explicitly constructs orthogonal
// budget-feasible directions satisfying the voting-rule constraints, verifies
// them numerically in double precision, and searches for one more.
OracleResult oracle_max_orthogonal(const GradientProfile& p, VotingRule rule,
                                   int search_budget = 200);

struct DimensionEstimate {
    std::vector<int> k_per_input;  // max over orders of adversarial directions found
    std::vector<int> orders;
    double eps = 0.0;
    double median_k = 0.0;
    double mean_k = 0.0;
    int max_k = 0;

    void finalize();
};

// Orthogonal candidate directions from regular-Hadamard rows times sign(g),
// mapped over equal contiguous coordinate blocks; counts how many flip the
// prediction per input.
DimensionEstimate gaas_estimate(const AttackTarget& target, const std::vector<Sample>& inputs,
                                double eps, const std::vector<int>& orders);

// Exposed for tests: the w orthogonal directions for one gradient.
std::vector<TensorF> gaas_directions(const TensorF& grad, double eps, const HadamardMatrix& h);

// (k, fraction of inputs with k_hat >= k) pairs for plotting.
std::vector<std::pair<int, double>> survival_curve(const DimensionEstimate& est);
std::string survival_curve_csv(const DimensionEstimate& est, const std::string& label);

// Profile of a single input against ensemble members: gradients of each
// member BCE and gaps gamma_j = max(0, ln 2 - loss_j).
GradientProfile profile_from_members(const std::vector<const Classifier*>& members,
                                     const TensorF& pixels, int label, double eps, Norm norm);

std::string profile_to_json(const GradientProfile& p);
GradientProfile profile_from_json(const std::string& text);

}  // namespace d3
