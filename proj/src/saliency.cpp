#include "d3/saliency.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/io.hpp"
#include "d3/parallel.hpp"

namespace d3 {

using nlohmann::json;

SaliencyVector compute_saliency(const Classifier& model, const std::vector<Sample>& deepfakes,
                                const SaliencyConfig& cfg) {
    if (deepfakes.empty()) throw std::invalid_argument("saliency: empty sample set");
    if (model.epochs_trained == 0) throw std::invalid_argument("saliency: model is untrained");
    for (const Sample& s : deepfakes)
        if (s.label != 1) throw std::invalid_argument("saliency: samples must be deepfakes");

    const int d = model.arch.feature_count();
    const std::size_t count = deepfakes.size();
    std::vector<std::vector<double>> contrib(count);

    parallel_for(static_cast<std::int64_t>(count), [&](std::int64_t si) {
        Classifier::Cache cache;
        TensorF z0 = model.to_spectrum(deepfakes[si].pixels);
        TensorF z = z0, grad;
        // unbounded sign ascent on the evasion loss until the prediction flips
        for (int it = 0; it < cfg.max_steps; ++it) {
            if (model.forward_spectrum(z, cache) <= 0.0f) break;
            model.loss_and_spectrum_grad(z, 1, grad, cache);
            const float s = static_cast<float>(cfg.step);
            for (int i = 0; i < d; ++i) {
                const float g = grad.data[i];
                z.data[i] += g > 0 ? s : (g < 0 ? -s : 0.0f);
            }
        }
        TensorF dlogit;
        model.logit_and_spectrum_grad(z, dlogit, cache);
        std::vector<double> c(d);
        for (int i = 0; i < d; ++i)
            c[i] = static_cast<double>(dlogit.data[i]) *
                   (static_cast<double>(z.data[i]) - static_cast<double>(z0.data[i]));
        contrib[si] = std::move(c);
    });

    SaliencyVector out;
    out.values.assign(d, 0.0);
    for (const auto& c : contrib)
        for (int i = 0; i < d; ++i) out.values[i] += c[i];
    const double inv = 1.0 / static_cast<double>(count);
    for (double& v : out.values) v *= inv;
    for (double v : out.values)
        if (!std::isfinite(v)) throw std::runtime_error("saliency: non-finite value");
    out.samples_averaged = static_cast<int>(count);
    out.max_attack_steps = cfg.max_steps;
    return out;
}

std::string saliency_to_json(const SaliencyVector& s) {
    json j;
    j["values"] = s.values;
    j["samples_averaged"] = s.samples_averaged;
    j["max_attack_steps"] = s.max_attack_steps;
    return j.dump();
}

SaliencyVector saliency_from_json(const std::string& text) {
    json j = json::parse(text);
    SaliencyVector s;
    s.values = j.at("values").get<std::vector<double>>();
    s.samples_averaged = j.at("samples_averaged").get<int>();
    s.max_attack_steps = j.at("max_attack_steps").get<int>();
    return s;
}

void save_saliency(const SaliencyVector& s, const std::string& path) {
    write_file(path, saliency_to_json(s) + "\n");
}

SaliencyVector load_saliency(const std::string& path) {
    return saliency_from_json(read_file(path));
}

}  // namespace d3
