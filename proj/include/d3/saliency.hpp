#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d3/dataset.hpp"
#include "d3/model.hpp"
#include "d3/partition.hpp"

namespace d3 {

struct SaliencyConfig {
    int max_steps = 1000;
    double step = 1.0 / 255.0;  // per-step l_inf move in normalized coefficient units
    std::uint64_t seed = 0;
};

// Per-frequency saliency: run an unbounded l_inf ascent in coefficient space
// on each deepfake until the model flips or the step budget runs out, then
// average gradient-of-logit times perturbation per coordinate.
SaliencyVector compute_saliency(const Classifier& model, const std::vector<Sample>& deepfakes,
                                const SaliencyConfig& cfg = {});

std::string saliency_to_json(const SaliencyVector& s);
SaliencyVector saliency_from_json(const std::string& text);
void save_saliency(const SaliencyVector& s, const std::string& path);
SaliencyVector load_saliency(const std::string& path);

}  // namespace d3
