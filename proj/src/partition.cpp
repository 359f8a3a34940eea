#include "d3/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/io.hpp"
#include "d3/rng.hpp"

namespace d3 {

using nlohmann::json;

int PartitionMask::member_size(int member) const {
    int c = 0;
    for (std::int32_t a : assignment) c += (a == member);
    return c;
}

std::vector<int> PartitionMask::member_features(int member) const {
    std::vector<int> out;
    for (int i = 0; i < d; ++i)
        if (assignment[i] == member) out.push_back(i);
    return out;
}

void PartitionMask::validate() const {
    if (d <= 0 || n < 1) throw std::invalid_argument("mask: d must be positive and n >= 1");
    if (static_cast<int>(assignment.size()) != d)
        throw std::invalid_argument("mask: assignment length mismatch");
    for (std::int32_t a : assignment)
        if (a != kDropped && (a < 0 || a >= n))
            throw std::invalid_argument("mask: assignment value out of range");
}

PartitionMask full_mask(int d) {
    PartitionMask m;
    m.d = d;
    m.n = 1;
    m.ratio = 1.0;
    m.assignment.assign(d, 0);
    m.scheme = "full";
    return m;
}

namespace {

// Shared by both schemes: deal ranked features round-robin, then trim each
// member to its keep budget (keeping its highest-ranked features).
PartitionMask assign_by_rank(const std::vector<int>& ranked, int n, double ratio) {
    const int d = static_cast<int>(ranked.size());
    PartitionMask m;
    m.d = d;
    m.n = n;
    m.assignment.assign(d, PartitionMask::kDropped);
    const double full_ratio = 1.0 / n;
    const bool full = ratio >= full_ratio - 1e-12;
    m.ratio = full ? full_ratio : ratio;
    const int keep = full ? d : static_cast<int>(std::floor(ratio * d));
    for (int r = 0; r < d; ++r) {
        const int member = r % n;
        const int position_within_member = r / n;
        if (full || position_within_member < keep) m.assignment[ranked[r]] = member;
    }
    return m;
}

}  // namespace

PartitionMask random_partition(int d, int n, std::uint64_t seed, double ratio) {
    if (n < 1) throw std::invalid_argument("random_partition: n must be >= 1");
    if (d < n) throw std::invalid_argument("random_partition: d must be >= n");
    if (ratio < 0) ratio = 1.0 / n;
    if (ratio <= 0.0 || ratio > 1.0 / n + 1e-12)
        throw std::invalid_argument("random_partition: ratio must be in (0, 1/n]");
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::from_seed(seed).stream("partition");
    rng.shuffle(order);
    PartitionMask m = assign_by_rank(order, n, ratio);
    m.scheme = "random";
    m.seed = seed;
    return m;
}

PartitionMask saliency_partition(const SaliencyVector& s, int n, double ratio,
                                 std::uint64_t seed) {
    const int d = static_cast<int>(s.values.size());
    if (n < 1) throw std::invalid_argument("saliency_partition: n must be >= 1");
    if (d < n) throw std::invalid_argument("saliency_partition: saliency length must be >= n");
    if (ratio <= 0.0 || ratio > 1.0 / n + 1e-12)
        throw std::invalid_argument("saliency_partition: ratio must be in (0, 1/n]");
    for (double v : s.values)
        if (!std::isfinite(v)) throw std::invalid_argument("saliency_partition: non-finite saliency");
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double ma = std::abs(s.values[a]), mb = std::abs(s.values[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    PartitionMask m = assign_by_rank(order, n, ratio);
    m.scheme = "saliency";
    m.seed = seed;
    return m;
}

bool masks_disjoint(const PartitionMask& a, int member_a, const PartitionMask& b, int member_b) {
    if (a.d != b.d) return false;
    for (int i = 0; i < a.d; ++i)
        if (a.assignment[i] == member_a && b.assignment[i] == member_b) return false;
    return true;
}

std::string mask_to_json(const PartitionMask& mask) {
    json j;
    j["d"] = mask.d;
    j["n"] = mask.n;
    j["ratio"] = mask.ratio;
    j["assignment"] = mask.assignment;
    j["scheme"] = mask.scheme;
    j["seed"] = mask.seed;
    return j.dump();
}

PartitionMask mask_from_json(const std::string& text) {
    json j = json::parse(text);
    PartitionMask m;
    m.d = j.at("d").get<int>();
    m.n = j.at("n").get<int>();
    m.ratio = j.at("ratio").get<double>();
    m.assignment = j.at("assignment").get<std::vector<std::int32_t>>();
    m.scheme = j.at("scheme").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.validate();
    return m;
}

void save_mask(const PartitionMask& mask, const std::string& path) {
    write_file(path, mask_to_json(mask) + "\n");
}

PartitionMask load_mask(const std::string& path) { return mask_from_json(read_file(path)); }

}  // namespace d3
