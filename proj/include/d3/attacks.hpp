#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "d3/dataset.hpp"
#include "d3/ensemble.hpp"
#include "d3/model.hpp"

namespace d3 {

enum class Norm { l2, linf };
std::string norm_name(Norm n);
Norm norm_from_name(const std::string& s);

enum class AttackKind { pgd, apgd_ce, square, transfer, unbounded_pgd };
std::string attack_name(AttackKind k);
AttackKind attack_from_name(const std::string& s);

struct AttackConfig {
    AttackKind kind = AttackKind::pgd;
    Norm norm = Norm::linf;
    double eps = 4.0 / 255.0;
    int steps = 50;
    double step_size = -1.0;  // < 0 picks the per-attack default rule
    int restarts = 1;
    std::uint64_t seed = 0;
    double apgd_alpha = 0.1;                        // step decay at stalled checkpoints
    AttackKind transfer_inner = AttackKind::apgd_ce;

    void validate() const;
};

// White-box surface every attack drives: a loss with pixel gradients plus a
// decision statistic ("fake" when score > threshold).
class AttackTarget {
public:
    virtual ~AttackTarget() = default;
    virtual int image_side() const = 0;
    virtual int channels() const = 0;
    virtual std::string name() const = 0;
    virtual double loss_and_grad(const TensorF& pixels, int label, TensorF* grad) const = 0;
    virtual double score(const TensorF& pixels) const = 0;
    virtual double threshold() const { return 0.0; }
    bool predicts_fake(const TensorF& pixels) const { return score(pixels) > threshold(); }
};

class ClassifierTarget : public AttackTarget {
public:
    explicit ClassifierTarget(const Classifier& clf, std::string name = "classifier")
        : clf_(clf), name_(std::move(name)) {}
    int image_side() const override { return clf_.arch.image_side; }
    int channels() const override { return clf_.arch.channels; }
    std::string name() const override { return name_; }
    double loss_and_grad(const TensorF& pixels, int label, TensorF* grad) const override;
    double score(const TensorF& pixels) const override { return clf_.forward(pixels); }
    const Classifier& classifier() const { return clf_; }

private:
    const Classifier& clf_;
    std::string name_;
};

class EnsembleTarget : public AttackTarget {
public:
    explicit EnsembleTarget(const Ensemble& ens, std::string name = "ensemble")
        : ens_(ens), name_(std::move(name)) {}
    int image_side() const override { return ens_.members.front().arch.image_side; }
    int channels() const override { return ens_.members.front().arch.channels; }
    std::string name() const override { return name_; }
    double loss_and_grad(const TensorF& pixels, int label, TensorF* grad) const override;
    double score(const TensorF& pixels) const override { return ensemble_score(ens_, pixels); }
    double threshold() const override { return ens_.threshold; }
    const Ensemble& ensemble() const { return ens_; }

private:
    const Ensemble& ens_;
    std::string name_;
};

struct SampleAttackOutcome {
    bool success = false;
    double norm = 0.0;  // of the returned perturbation
    int steps_used = 0;
};

struct AttackResult {
    std::vector<SampleAttackOutcome> per_sample;
    int successes = 0;
    double adversarial_accuracy = 1.0;  // fraction of deepfakes still detected
    double natural_accuracy = 1.0;      // detected before perturbation
    double mean_norm = 0.0;             // over successful samples
    double mean_steps = 0.0;

    void finalize();
};

// All attacks perturb deepfake samples toward the "real" decision, keep
// pixels in [0,1], and respect the norm budget. Deterministic given the seed.
AttackResult pgd_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                        const AttackConfig& cfg, std::vector<TensorF>* adversarial = nullptr);

AttackResult apgd_ce_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                            const AttackConfig& cfg, std::vector<TensorF>* adversarial = nullptr);

AttackResult square_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                           const AttackConfig& cfg, std::vector<TensorF>* adversarial = nullptr);

AttackResult transfer_attack(const AttackTarget& surrogate, const AttackTarget& target,
                             const std::vector<Sample>& samples, const AttackConfig& cfg);

AttackResult run_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                        const AttackConfig& cfg, const AttackTarget* surrogate = nullptr);

// Per-sample random search in the eps ball with the given draw budget;
// used by the gradient-obfuscation checklist.
AttackResult random_noise_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                                 Norm norm, double eps, int draws, std::uint64_t seed);

struct ChecklistOptions {
    Norm norm = Norm::linf;
    double eps = 4.0 / 255.0;
    int iterative_steps = 50;
    int square_steps = 500;
    int unbounded_steps = 2000;
    std::vector<double> eps_grid = {0.0,        1.0 / 255.0, 2.0 / 255.0,
                                    4.0 / 255.0, 8.0 / 255.0, 16.0 / 255.0};
    std::uint64_t seed = 0;
};

struct ChecklistReport {
    bool one_step_not_better = false;     // (a)
    bool blackbox_not_better = false;     // (b)
    bool unbounded_reaches_all = false;   // (c)
    bool random_not_better = false;       // (d)
    bool monotone_in_eps = false;         // (e)
    int one_step_successes = 0, iterative_successes = 0;
    int blackbox_successes = 0, whitebox_successes = 0;
    double unbounded_success_rate = 0.0;
    int random_successes = 0, gradient_successes = 0;
    std::vector<double> grid_success;

    bool all_pass() const {
        return one_step_not_better && blackbox_not_better && unbounded_reaches_all &&
               random_not_better && monotone_in_eps;
    }
};

ChecklistReport obfuscation_checklist(const AttackTarget& target,
                                      const std::vector<Sample>& deepfakes,
                                      const ChecklistOptions& opt);

std::string attack_report_json(const AttackConfig& cfg, const std::string& target_name,
                               const AttackResult& res);
std::string attack_report_csv(const AttackConfig& cfg, const std::string& target_name,
                              const AttackResult& res, const std::string& config_hash);

}  // namespace d3
