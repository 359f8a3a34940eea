#include "d3/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/io.hpp"
#include "d3/parallel.hpp"

namespace d3 {

using nlohmann::json;

std::string voting_name(Voting v) {
    switch (v) {
        case Voting::mean_logit: return "mean_logit";
        case Voting::at_least_one: return "at_least_one";
        case Voting::majority: return "majority";
    }
    return "mean_logit";
}

Voting voting_from_name(const std::string& s) {
    if (s == "mean_logit") return Voting::mean_logit;
    if (s == "at_least_one") return Voting::at_least_one;
    if (s == "majority") return Voting::majority;
    throw std::invalid_argument("unknown voting rule: " + s);
}

bool vote_fake(const std::vector<double>& logits, Voting voting, double threshold) {
    const int n = static_cast<int>(logits.size());
    if (n == 0) throw std::invalid_argument("vote: no logits");
    switch (voting) {
        case Voting::mean_logit: {
            double s = 0;
            for (double v : logits) s += v;
            return s / n > threshold;
        }
        case Voting::at_least_one: {
            for (double v : logits)
                if (v > threshold) return true;
            return false;
        }
        case Voting::majority: {
            int votes = 0;
            for (double v : logits) votes += (v > threshold);
            return votes >= (n + 1) / 2;
        }
    }
    return false;
}

Ensemble::Ensemble(std::vector<Classifier> m, Voting v, double thresh)
    : members(std::move(m)), voting(v), threshold(thresh) {
    if (members.empty()) throw std::invalid_argument("ensemble: needs at least one member");
    for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j)
            if (!masks_disjoint(members[i].mask, members[i].member, members[j].mask,
                                members[j].member))
                throw std::invalid_argument("ensemble: members " + std::to_string(i) + " and " +
                                            std::to_string(j) + " share features");
}

Prediction predict(const Ensemble& ens, const TensorF& pixels) {
    Prediction p;
    p.logits.resize(ens.members.size());
    for (std::size_t i = 0; i < ens.members.size(); ++i)
        p.logits[i] = ens.members[i].forward(pixels);
    p.fake = vote_fake(p.logits, ens.voting, ens.threshold);
    return p;
}

double ensemble_score(const Ensemble& ens, const TensorF& pixels) {
    std::vector<double> logits(ens.members.size());
    for (std::size_t i = 0; i < ens.members.size(); ++i)
        logits[i] = ens.members[i].forward(pixels);
    switch (ens.voting) {
        case Voting::mean_logit: {
            double s = 0;
            for (double v : logits) s += v;
            return s / static_cast<double>(logits.size());
        }
        case Voting::at_least_one:
            return *std::max_element(logits.begin(), logits.end());
        case Voting::majority: {
            const int k = (static_cast<int>(logits.size()) + 1) / 2;
            std::nth_element(logits.begin(), logits.begin() + (k - 1), logits.end(),
                             std::greater<double>());
            return logits[k - 1];
        }
    }
    return 0.0;
}

double ensemble_loss(const Ensemble& ens, const TensorF& pixels, int label) {
    const int n = ens.size();
    std::vector<double> logits(n);
    for (int i = 0; i < n; ++i) logits[i] = ens.members[i].forward(pixels);
    if (ens.voting == Voting::mean_logit) {
        double mean = 0;
        for (double v : logits) mean += v;
        return bce_with_logit(mean / n, label);
    }
    double loss = 0;
    for (double v : logits) loss += bce_with_logit(v, label);
    return loss / n;
}

double ensemble_loss_grad(const Ensemble& ens, const TensorF& pixels, int label, TensorF& grad) {
    const int n = ens.size();
    struct Part {
        float logit = 0;
        TensorF dpix;
        Classifier::Cache cache;
    };
    // Reused per worker thread; the per-sample loops above this call carry
    // the parallelism, so members are evaluated serially here.
    static thread_local std::vector<Part> parts;
    if (static_cast<int>(parts.size()) < n) parts.resize(n);
    for (int i = 0; i < n; ++i) {
        Part& p = parts[i];
        p.logit = ens.members[i].forward(pixels, p.cache);
        ens.members[i].backward(p.cache, 1.0f, nullptr, &p.dpix);
    }
    if (!grad.same_shape(pixels)) grad = TensorF(pixels.shape);
    grad.fill(0.0f);
    double loss = 0.0;
    if (ens.voting == Voting::mean_logit) {
        double mean = 0;
        for (int i = 0; i < n; ++i) mean += parts[i].logit;
        mean /= n;
        loss = bce_with_logit(mean, label);
        const float c = bce_with_logit_grad(static_cast<float>(mean), label) / n;
        for (int i = 0; i < n; ++i) axpy(c, parts[i].dpix, grad);
    } else {
        for (int i = 0; i < n; ++i) {
            loss += bce_with_logit(parts[i].logit, label);
            const float c = bce_with_logit_grad(parts[i].logit, label) / n;
            axpy(c, parts[i].dpix, grad);
        }
        loss /= n;
    }
    if (!all_finite(grad)) throw std::runtime_error("ensemble: non-finite gradient");
    return loss;
}

std::vector<double> ensemble_scores(const Ensemble& ens, const std::vector<Sample>& samples) {
    std::vector<double> out(samples.size());
    parallel_for(static_cast<std::int64_t>(samples.size()),
                 [&](std::int64_t i) { out[i] = ensemble_score(ens, samples[i].pixels); });
    return out;
}

double ensemble_auc(const Ensemble& ens, const std::vector<Sample>& samples) {
    std::vector<int> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
    return auc_roc(ensemble_scores(ens, samples), labels);
}

void save_manifest(const std::vector<std::string>& member_paths, Voting voting, double threshold,
                   const std::string& path) {
    json j;
    j["members"] = member_paths;
    j["voting"] = voting_name(voting);
    j["threshold"] = threshold;
    write_file(path, j.dump() + "\n");
}

Ensemble load_ensemble(const std::string& manifest_path) {
    json j = json::parse(read_file(manifest_path));
    const auto dir = std::filesystem::path(manifest_path).parent_path();
    std::vector<Classifier> members;
    for (const auto& rel : j.at("members").get<std::vector<std::string>>()) {
        std::filesystem::path p(rel);
        if (p.is_relative()) p = dir / p;
        members.push_back(load_checkpoint(p.string()));
    }
    return Ensemble(std::move(members), voting_from_name(j.at("voting").get<std::string>()),
                    j.at("threshold").get<double>());
}

}  // namespace d3
