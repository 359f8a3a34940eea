#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "d3/tensor.hpp"

namespace d3 {

// Synthetic corpus configuration. Real images are inverse transforms of
// 1/(1+u+v)^beta spectra with random signs; fakes additionally receive random
// positive amplitudes on the lattice of frequencies with u % pitch == 0 and
// v % pitch == 0, a stand-in for upsampling fingerprints.
struct GenConfig {
    int image_side = 32;
    int channels = 3;
    int pitch = 4;
    double amp_lo = 0.25;
    double amp_hi = 0.5;
    double beta = 2.0;
    int train_count = 4000;
    int val_count = 1000;
    int test_count = 1000;
    std::uint64_t seed = 0;

    void validate() const;
    int feature_count() const { return image_side * image_side * channels; }
};

struct Sample {
    TensorF pixels;  // [N,N,C] in [0,1]
    int label = 0;   // 0 = real, 1 = deepfake
};

struct Dataset {
    static constexpr std::uint16_t kFormatVersion = 1;

    std::vector<Sample> train, val, test;
    GenConfig config;

    const std::vector<Sample>& split(const std::string& name) const;
};

Dataset generate(const GenConfig& cfg);

// Frequency pairs (u,v) carrying planted artifact energy.
std::vector<std::pair<int, int>> lattice_frequencies(const GenConfig& cfg);

// "D3DS" container: magic, u16 version, u32 header length, JSON header,
// f32 little-endian pixel payload, one label byte per sample, CRC32.
void save(const Dataset& ds, const std::string& path);
Dataset load(const std::string& path);

std::vector<Sample> filter_label(const std::vector<Sample>& samples, int label);
std::vector<Sample> take(const std::vector<Sample>& samples, int count);

}  // namespace d3
