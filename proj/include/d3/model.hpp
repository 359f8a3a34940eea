#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d3/dataset.hpp"
#include "d3/dct.hpp"
#include "d3/layers.hpp"
#include "d3/partition.hpp"
#include "d3/rng.hpp"
#include "d3/tensor.hpp"

namespace d3 {

// Two stride-2 convolutions, global average pooling, and a dense head
// producing one logit. With use_dct the input is transformed per channel,
// scaled by 1/N, and masked before the first convolution; without it the
// mask applies to raw pixels.
struct ArchConfig {
    int image_side = 32;
    int channels = 3;
    bool use_dct = true;
    int conv1_channels = 8;
    int conv2_channels = 16;
    int kernel = 3;
    int stride = 2;
    int pad = 1;

    int feature_count() const { return image_side * image_side * channels; }
    ConvSpec conv1() const { return {channels, conv1_channels, kernel, stride, pad}; }
    ConvSpec conv2() const { return {conv1_channels, conv2_channels, kernel, stride, pad}; }
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 128;
    int max_epochs = 20;
    int patience = 5;
    int pgd_steps = 10;             // 0 = natural training
    double pgd_eps = 2.0 / 255.0;   // pixel-space l_inf budget
    double pgd_step = -1.0;         // < 0 means pgd_eps / 4
    std::uint64_t seed = 0;

    double effective_pgd_step() const { return pgd_step > 0 ? pgd_step : pgd_eps / 4.0; }
};

template <typename T>
struct ClassifierT {
    ArchConfig arch;
    PartitionMask mask;
    int member = 0;
    DctBasis<T> basis;
    // w1 [K,K,C,c1], b1 [c1], w2 [K,K,c1,c2], b2 [c2], wd [c2,1], bd [1]
    std::vector<Tensor<T>> params;
    int epochs_trained = 0;
    double best_val_auc = 0.0;

    static ClassifierT make(const ArchConfig& arch, PartitionMask mask, int member = 0) {
        mask.validate();
        if (mask.d != arch.feature_count())
            throw std::invalid_argument("classifier: mask dimension does not match architecture");
        if (member < 0 || member >= mask.n)
            throw std::invalid_argument("classifier: member index out of range");
        ClassifierT c;
        c.arch = arch;
        c.mask = std::move(mask);
        c.member = member;
        c.basis = DctBasis<T>::make(arch.image_side);
        const int k = arch.kernel;
        c.params = {Tensor<T>({k, k, arch.channels, arch.conv1_channels}),
                    Tensor<T>({arch.conv1_channels}),
                    Tensor<T>({k, k, arch.conv1_channels, arch.conv2_channels}),
                    Tensor<T>({arch.conv2_channels}),
                    Tensor<T>({arch.conv2_channels, 1}),
                    Tensor<T>({1})};
        return c;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.size();
        return n;
    }

    void init_params(Rng rng) {
        auto he = [&](Tensor<T>& w, int fan_in) {
            const double std = std::sqrt(2.0 / fan_in);
            for (auto& v : w.data) v = static_cast<T>(rng.next_normal() * std);
        };
        const int k = arch.kernel;
        he(params[0], k * k * arch.channels);
        params[1].fill(T(0));
        he(params[2], k * k * arch.conv1_channels);
        params[3].fill(T(0));
        he(params[4], arch.conv2_channels);
        params[5].fill(T(0));
    }

    struct Cache {
        Tensor<T> spec, scaled, masked, c1, r1, c2, r2, pooled, logit_t;
        Tensor<T> d_r2, d_c2, d_r1, d_c1, d_masked, d_scaled, d_dense_in;
        Tensor<T> dw_scratch;
    };

    // Masked features the network sees for the given pixels.
    void features(const Tensor<T>& pixels, Cache& c) const {
        if (arch.use_dct) {
            dct2(pixels, basis, c.spec);
            if (!c.scaled.same_shape(c.spec)) c.scaled = Tensor<T>(c.spec.shape);
            const T inv = T(1) / static_cast<T>(arch.image_side);
            for (std::size_t i = 0; i < c.spec.size(); ++i) c.scaled.data[i] = c.spec.data[i] * inv;
            apply_mask(c.scaled, mask, member, c.masked);
        } else {
            apply_mask(pixels, mask, member, c.masked);
        }
    }

    T net_forward(Cache& c) const {
        conv2d_forward(c.masked, params[0], params[1], arch.conv1(), c.c1);
        relu_forward(c.c1, c.r1);
        conv2d_forward(c.r1, params[2], params[3], arch.conv2(), c.c2);
        relu_forward(c.c2, c.r2);
        global_avg_pool_forward(c.r2, c.pooled);
        dense_forward(c.pooled, params[4], params[5], c.logit_t);
        return c.logit_t.data[0];
    }

    T forward(const Tensor<T>& pixels, Cache& c) const {
        if (pixels.shape.size() != 3 || pixels.shape[0] != arch.image_side ||
            pixels.shape[1] != arch.image_side || pixels.shape[2] != arch.channels)
            throw std::invalid_argument("classifier: pixel shape mismatch");
        features(pixels, c);
        return net_forward(c);
    }

    T forward(const Tensor<T>& pixels) const {
        Cache c;
        return forward(pixels, c);
    }

    // Gradients of (dlogit * logit) with respect to parameters and/or the
    // masked-feature input. Callers chain further as needed.
    void net_backward(Cache& c, T dlogit, std::vector<Tensor<T>>* pgrads,
                      Tensor<T>* dmasked) const {
        Tensor<T> dlog({1});
        dlog.data[0] = dlogit;
        Tensor<T>& d_pool = c.d_dense_in;
        dense_backward(c.pooled, params[4], dlog, &d_pool, pgrads ? &(*pgrads)[4] : nullptr,
                       pgrads ? &(*pgrads)[5] : nullptr);
        global_avg_pool_backward(c.c2.shape, d_pool, c.d_r2);
        relu_backward(c.c2, c.d_r2, c.d_c2);
        conv2d_backward(c.r1, params[2], arch.conv2(), c.d_c2, &c.d_r1,
                        pgrads ? &(*pgrads)[2] : nullptr, pgrads ? &(*pgrads)[3] : nullptr);
        relu_backward(c.c1, c.d_r1, c.d_c1);
        conv2d_backward(c.masked, params[0], arch.conv1(), c.d_c1, dmasked ? &c.d_masked : nullptr,
                        pgrads ? &(*pgrads)[0] : nullptr, pgrads ? &(*pgrads)[1] : nullptr);
        if (dmasked) *dmasked = c.d_masked;
    }

    void backward(Cache& c, T dlogit, std::vector<Tensor<T>>* pgrads, Tensor<T>* dpixels) const {
        if (!dpixels) {
            net_backward(c, dlogit, pgrads, nullptr);
            return;
        }
        Tensor<T> dmasked;
        net_backward(c, dlogit, pgrads, &dmasked);
        apply_mask(dmasked, mask, member, c.d_scaled);
        if (arch.use_dct) {
            const T inv = T(1) / static_cast<T>(arch.image_side);
            for (auto& v : c.d_scaled.data) v *= inv;
            idct2(c.d_scaled, basis, *dpixels);
        } else {
            *dpixels = c.d_scaled;
        }
    }

    std::vector<Tensor<T>> zero_param_grads() const {
        std::vector<Tensor<T>> g;
        g.reserve(params.size());
        for (const auto& p : params) g.emplace_back(p.shape);
        return g;
    }

    double loss(const Tensor<T>& pixels, int label) const {
        return bce_with_logit(forward(pixels), label);
    }

    double loss_and_pixel_grad(const Tensor<T>& pixels, int label, Tensor<T>& grad) const {
        Cache c;
        return loss_and_pixel_grad(pixels, label, grad, c);
    }

    double loss_and_pixel_grad(const Tensor<T>& pixels, int label, Tensor<T>& grad,
                               Cache& c) const {
        const T logit = forward(pixels, c);
        backward(c, bce_with_logit_grad(logit, label), nullptr, &grad);
        return bce_with_logit(logit, label);
    }

    // Entry points on normalized frequency coefficients (the network input
    // space before masking); used for spectrum-domain attacks.
    T forward_spectrum(const Tensor<T>& z, Cache& c) const {
        apply_mask(z, mask, member, c.masked);
        return net_forward(c);
    }

    T logit_and_spectrum_grad(const Tensor<T>& z, Tensor<T>& dz, Cache& c) const {
        const T logit = forward_spectrum(z, c);
        Tensor<T> dmasked;
        net_backward(c, T(1), nullptr, &dmasked);
        apply_mask(dmasked, mask, member, dz);
        return logit;
    }

    double loss_and_spectrum_grad(const Tensor<T>& z, int label, Tensor<T>& dz, Cache& c) const {
        const T logit = forward_spectrum(z, c);
        Tensor<T> dmasked;
        net_backward(c, bce_with_logit_grad(logit, label), nullptr, &dmasked);
        apply_mask(dmasked, mask, member, dz);
        return bce_with_logit(logit, label);
    }

    // Normalized spectrum for a pixel image (what forward_spectrum consumes).
    Tensor<T> to_spectrum(const Tensor<T>& pixels) const {
        Tensor<T> spec = dct2(pixels, basis);
        const T inv = T(1) / static_cast<T>(arch.image_side);
        for (auto& v : spec.data) v *= inv;
        return spec;
    }
};

using Classifier = ClassifierT<float>;

ClassifierT<double> to_double(const Classifier& c);

struct TrainHistory {
    std::vector<double> epoch_loss;
    std::vector<double> val_auc;
    int best_epoch = -1;
    double best_val_auc = 0.0;
    int epochs_run = 0;
};

TrainHistory train(Classifier& clf, const Dataset& ds, const TrainConfig& cfg);

// P(score_fake > score_real) + 0.5 P(tie), via midranks.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

std::vector<double> classifier_scores(const Classifier& clf, const std::vector<Sample>& samples);

double classifier_auc(const Classifier& clf, const std::vector<Sample>& samples);

// "D3MD" container: magic, u16 version, u32 header length, JSON header,
// f32 little-endian parameter payload, CRC32.
void save_checkpoint(const Classifier& clf, const TrainConfig& cfg, const std::string& path);
Classifier load_checkpoint(const std::string& path, TrainConfig* cfg_out = nullptr);

}  // namespace d3
