#pragma once

#include <cmath>
#include <vector>

#include "d3/attacks.hpp"
#include "d3/dataset.hpp"
#include "d3/model.hpp"
#include "d3/rng.hpp"

namespace d3::test {

inline ArchConfig tiny_arch(int side = 16, int channels = 2, bool use_dct = true) {
    ArchConfig a;
    a.image_side = side;
    a.channels = channels;
    a.use_dct = use_dct;
    a.conv1_channels = 4;
    a.conv2_channels = 8;
    return a;
}

inline GenConfig tiny_gen(int side = 16, int train = 200, int val = 80, int test = 80,
                          std::uint64_t seed = 11) {
    GenConfig g;
    g.image_side = side;
    g.channels = 2;
    g.pitch = 4;
    g.train_count = train;
    g.val_count = val;
    g.test_count = test;
    g.seed = seed;
    return g;
}

inline TensorF random_image(int side, int channels, Rng& rng) {
    TensorF x({side, side, channels});
    for (float& v : x.data) v = rng.next_float();
    return x;
}

inline TensorD random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    TensorD x(std::move(shape));
    for (double& v : x.data) v = rng.next_normal() * scale;
    return x;
}

// Fixed linear decision surface over pixels: logit = w.x + b. Used for
// closed-form attack and saliency oracles.
class LinearTarget : public AttackTarget {
public:
    LinearTarget(TensorF w, float b, int side, int channels)
        : w_(std::move(w)), b_(b), side_(side), channels_(channels) {}

    int image_side() const override { return side_; }
    int channels() const override { return channels_; }
    std::string name() const override { return "linear"; }

    double logit(const TensorF& x) const {
        double z = b_;
        for (std::size_t i = 0; i < x.size(); ++i)
            z += static_cast<double>(w_.data[i]) * x.data[i];
        return z;
    }

    double loss_and_grad(const TensorF& x, int label, TensorF* grad) const override {
        const double z = logit(x);
        if (grad) {
            if (!grad->same_shape(x)) *grad = TensorF(x.shape);
            const float c = bce_with_logit_grad(static_cast<float>(z), label);
            for (std::size_t i = 0; i < x.size(); ++i) grad->data[i] = c * w_.data[i];
        }
        return bce_with_logit(z, label);
    }

    double score(const TensorF& x) const override { return logit(x); }

private:
    TensorF w_;
    float b_;
    int side_, channels_;
};

// Ignores its input entirely.
class ConstantTarget : public AttackTarget {
public:
    ConstantTarget(double logit, int side, int channels)
        : logit_(logit), side_(side), channels_(channels) {}
    int image_side() const override { return side_; }
    int channels() const override { return channels_; }
    std::string name() const override { return "constant"; }
    double loss_and_grad(const TensorF& x, int label, TensorF* grad) const override {
        if (grad) {
            if (!grad->same_shape(x)) *grad = TensorF(x.shape);
            grad->fill(0.0f);
        }
        return bce_with_logit(logit_, label);
    }
    double score(const TensorF&) const override { return logit_; }

private:
    double logit_;
    int side_, channels_;
};

inline std::vector<Sample> fake_samples(int count, int side, int channels, std::uint64_t seed) {
    Rng rng = Rng::from_seed(seed);
    std::vector<Sample> out(count);
    for (auto& s : out) {
        s.pixels = random_image(side, channels, rng);
        s.label = 1;
    }
    return out;
}

}  // namespace d3::test
