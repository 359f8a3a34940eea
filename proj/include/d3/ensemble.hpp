#pragma once

#include <string>
#include <vector>

#include "d3/model.hpp"

namespace d3 {

enum class Voting { mean_logit, at_least_one, majority };

std::string voting_name(Voting v);
Voting voting_from_name(const std::string& s);

// Pure voting rule on member logits: deepfake iff the decision statistic
// exceeds the threshold.
bool vote_fake(const std::vector<double>& logits, Voting voting, double threshold);

struct Prediction {
    bool fake = false;
    std::vector<double> logits;
};

// Ordered set of classifiers with pairwise-disjoint masks.
struct Ensemble {
    std::vector<Classifier> members;
    Voting voting = Voting::mean_logit;
    double threshold = 0.0;

    Ensemble() = default;
    Ensemble(std::vector<Classifier> m, Voting v, double thresh = 0.0);

    int size() const { return static_cast<int>(members.size()); }
};

Prediction predict(const Ensemble& ens, const TensorF& pixels);

// Decision statistic matching the voting rule: mean logit, max logit, or the
// ceil(n/2)-th largest logit. "fake" is statistic > threshold.
double ensemble_score(const Ensemble& ens, const TensorF& pixels);

// Surrogate loss for white-box attacks: BCE on the mean logit for mean-logit
// voting, mean of member BCEs otherwise.
double ensemble_loss(const Ensemble& ens, const TensorF& pixels, int label);
double ensemble_loss_grad(const Ensemble& ens, const TensorF& pixels, int label, TensorF& grad);

std::vector<double> ensemble_scores(const Ensemble& ens, const std::vector<Sample>& samples);
double ensemble_auc(const Ensemble& ens, const std::vector<Sample>& samples);

// Manifest: JSON with member checkpoint paths (relative to the manifest),
// voting rule, and threshold.
void save_manifest(const std::vector<std::string>& member_paths, Voting voting, double threshold,
                   const std::string& path);
Ensemble load_ensemble(const std::string& manifest_path);

}  // namespace d3
