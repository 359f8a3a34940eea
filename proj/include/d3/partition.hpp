#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d3/tensor.hpp"

namespace d3 {

// Assignment of each feature index to exactly one ensemble member, or to
// kDropped when the partitioning ratio leaves features unused.
struct PartitionMask {
    static constexpr std::int32_t kDropped = -1;

    int d = 0;
    int n = 1;
    double ratio = 1.0;  // fraction of features each member keeps
    std::vector<std::int32_t> assignment;
    std::string scheme = "full";
    std::uint64_t seed = 0;

    bool keeps(int feature, int member) const { return assignment[feature] == member; }
    int member_size(int member) const;
    std::vector<int> member_features(int member) const;
    void validate() const;
};

struct SaliencyVector {
    std::vector<double> values;
    int samples_averaged = 0;
    int max_attack_steps = 0;
};

// Everything assigned to member 0.
PartitionMask full_mask(int d);

// Uniformly random disjoint assignment; sizes within +-1 of each other when
// ratio covers the whole space (ratio < 0 means 1/n). With a smaller ratio
// each member keeps floor(ratio*d) features and the rest are dropped.
PartitionMask random_partition(int d, int n, std::uint64_t seed, double ratio = -1.0);

// Features ordered by |s| descending (ties by index) and dealt round-robin;
// with ratio < 1/n each member keeps only its top floor(ratio*d) features.
PartitionMask saliency_partition(const SaliencyVector& s, int n, double ratio,
                                 std::uint64_t seed = 0);

// Zero every feature not assigned to the given member. Linear and
// self-adjoint, so it is its own gradient operator.
template <typename T>
void apply_mask(const Tensor<T>& features, const PartitionMask& mask, int member,
                Tensor<T>& out) {
    if (static_cast<int>(features.size()) != mask.d)
        throw std::invalid_argument("apply_mask: feature count does not match mask");
    if (member < 0 || member >= mask.n)
        throw std::invalid_argument("apply_mask: member index out of range");
    if (!out.same_shape(features)) out = Tensor<T>(features.shape);
    for (std::size_t i = 0; i < features.size(); ++i)
        out.data[i] = mask.assignment[i] == member ? features.data[i] : T(0);
}

template <typename T>
Tensor<T> apply_mask(const Tensor<T>& features, const PartitionMask& mask, int member) {
    Tensor<T> out;
    apply_mask(features, mask, member, out);
    return out;
}

bool masks_disjoint(const PartitionMask& a, int member_a, const PartitionMask& b, int member_b);

std::string mask_to_json(const PartitionMask& mask);
PartitionMask mask_from_json(const std::string& text);
void save_mask(const PartitionMask& mask, const std::string& path);
PartitionMask load_mask(const std::string& path);

}  // namespace d3
