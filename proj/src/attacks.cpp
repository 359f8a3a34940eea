#include "d3/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/format.hpp"
#include "d3/parallel.hpp"
#include "d3/rng.hpp"

namespace d3 {

using nlohmann::json;

std::string norm_name(Norm n) { return n == Norm::l2 ? "l2" : "linf"; }

Norm norm_from_name(const std::string& s) {
    if (s == "l2") return Norm::l2;
    if (s == "linf") return Norm::linf;
    throw std::invalid_argument("unknown norm: " + s);
}

std::string attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::pgd: return "pgd";
        case AttackKind::apgd_ce: return "apgd_ce";
        case AttackKind::square: return "square";
        case AttackKind::transfer: return "transfer";
        case AttackKind::unbounded_pgd: return "unbounded_pgd";
    }
    return "pgd";
}

AttackKind attack_from_name(const std::string& s) {
    if (s == "pgd") return AttackKind::pgd;
    if (s == "apgd_ce") return AttackKind::apgd_ce;
    if (s == "square") return AttackKind::square;
    if (s == "transfer") return AttackKind::transfer;
    if (s == "unbounded_pgd") return AttackKind::unbounded_pgd;
    throw std::invalid_argument("unknown attack: " + s);
}

void AttackConfig::validate() const {
    if (eps < 0) throw std::invalid_argument("attack: eps must be >= 0");
    if (steps < 1) throw std::invalid_argument("attack: steps must be >= 1");
    if (restarts < 1) throw std::invalid_argument("attack: restarts must be >= 1");
    if (apgd_alpha <= 0 || apgd_alpha > 1)
        throw std::invalid_argument("attack: alpha must be in (0,1]");
}

double ClassifierTarget::loss_and_grad(const TensorF& pixels, int label, TensorF* grad) const {
    if (!grad) return bce_with_logit(clf_.forward(pixels), label);
    static thread_local Classifier::Cache cache;
    return clf_.loss_and_pixel_grad(pixels, label, *grad, cache);
}

double EnsembleTarget::loss_and_grad(const TensorF& pixels, int label, TensorF* grad) const {
    if (!grad) return ensemble_loss(ens_, pixels, label);
    return ensemble_loss_grad(ens_, pixels, label, *grad);
}

void AttackResult::finalize() {
    successes = 0;
    double norm_sum = 0.0, steps_sum = 0.0;
    for (const auto& s : per_sample) {
        if (s.success) {
            ++successes;
            norm_sum += s.norm;
        }
        steps_sum += s.steps_used;
    }
    const double n = static_cast<double>(per_sample.size());
    adversarial_accuracy = per_sample.empty() ? 1.0 : 1.0 - successes / n;
    mean_norm = successes > 0 ? norm_sum / successes : 0.0;
    mean_steps = per_sample.empty() ? 0.0 : steps_sum / n;
}

namespace {

struct PerSample {
    TensorF adv;
    bool success = false;
    double norm = 0.0;
    int steps_used = 0;
};

void check_samples(const AttackTarget& target, const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::invalid_argument("attack: empty sample set");
    for (const Sample& s : samples) {
        if (s.label != 1)
            throw std::invalid_argument("attack: samples must be labeled deepfake");
        if (s.pixels.shape != std::vector<int>{target.image_side(), target.image_side(),
                                               target.channels()})
            throw std::invalid_argument("attack: sample shape does not match target");
    }
}

double delta_norm(const TensorF& x, const TensorF& x0, Norm norm) {
    double acc = 0.0;
    if (norm == Norm::linf) {
        for (std::size_t i = 0; i < x.size(); ++i)
            acc = std::max(acc, std::abs(static_cast<double>(x.data[i]) - x0.data[i]));
        return acc;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - x0.data[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

// Project x onto the eps ball around x0 intersected with the pixel box.
// Box clamping never grows a coordinate of the perturbation, so both
// constraints hold afterwards.
void project(TensorF& x, const TensorF& x0, Norm norm, double eps, bool bounded) {
    if (bounded && norm == Norm::linf) {
        const float e = static_cast<float>(eps);
        for (std::size_t i = 0; i < x.size(); ++i) {
            float d = std::clamp(x.data[i] - x0.data[i], -e, e);
            x.data[i] = std::clamp(x0.data[i] + d, 0.0f, 1.0f);
        }
        return;
    }
    if (bounded) {
        const double n = delta_norm(x, x0, Norm::l2);
        if (n > eps) {
            const float s = static_cast<float>(eps / n);
            for (std::size_t i = 0; i < x.size(); ++i)
                x.data[i] = x0.data[i] + (x.data[i] - x0.data[i]) * s;
        }
    }
    for (float& v : x.data) v = std::clamp(v, 0.0f, 1.0f);
}

void step_in_direction(TensorF& x, const TensorF& grad, Norm norm, double step) {
    if (norm == Norm::linf) {
        const float s = static_cast<float>(step);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const float g = grad.data[i];
            x.data[i] += g > 0 ? s : (g < 0 ? -s : 0.0f);
        }
        return;
    }
    const double n = norm_l2(grad);
    if (n == 0.0) return;
    const float s = static_cast<float>(step / n);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += s * grad.data[i];
}

TensorF random_point_in_ball(const TensorF& x0, Norm norm, double eps, Rng& rng) {
    TensorF x = x0;
    if (norm == Norm::linf) {
        for (float& v : x.data)
            v += static_cast<float>(rng.next_uniform(-eps, eps));
    } else {
        TensorF dir(x0.shape);
        for (float& v : dir.data) v = static_cast<float>(rng.next_normal());
        const double n = norm_l2(dir);
        const double r = eps * std::pow(rng.next_double(), 1.0 / static_cast<double>(x0.size()));
        if (n > 0) {
            const float s = static_cast<float>(r / n);
            for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += s * dir.data[i];
        }
    }
    project(x, x0, norm, eps, true);
    return x;
}

void check_budget(const TensorF& adv, const TensorF& x0, Norm norm, double eps, bool bounded) {
    for (float v : adv.data)
        if (v < -1e-6f || v > 1.0f + 1e-6f)
            throw std::logic_error("attack: adversarial pixels left the [0,1] box");
    if (bounded && delta_norm(adv, x0, norm) > eps * (1.0 + 1e-5) + 1e-9)
        throw std::logic_error("attack: perturbation exceeds the norm budget");
}

double default_pgd_step(const AttackConfig& cfg) {
    if (cfg.step_size > 0) return cfg.step_size;
    if (cfg.kind == AttackKind::unbounded_pgd) return 1.0 / 255.0;
    return 2.5 * cfg.eps / cfg.steps;
}

PerSample pgd_one(const AttackTarget& target, const TensorF& x0, const AttackConfig& cfg,
                  Rng rng) {
    const bool bounded = cfg.kind != AttackKind::unbounded_pgd;
    const double step = default_pgd_step(cfg);
    PerSample out;
    out.adv = x0;
    if (!target.predicts_fake(x0)) {
        out.success = true;
        return out;
    }
    TensorF grad;
    double best_loss = -std::numeric_limits<double>::infinity();
    TensorF best_x = x0;
    for (int r = 0; r < cfg.restarts; ++r) {
        TensorF x = (r == 0 || !bounded) ? x0 : random_point_in_ball(x0, cfg.norm, cfg.eps, rng);
        for (int it = 1; it <= cfg.steps; ++it) {
            target.loss_and_grad(x, 1, &grad);
            step_in_direction(x, grad, cfg.norm, step);
            project(x, x0, cfg.norm, cfg.eps, bounded);
            if (!target.predicts_fake(x)) {
                out.adv = x;
                out.success = true;
                out.steps_used = it;
                out.norm = delta_norm(x, x0, cfg.norm);
                check_budget(out.adv, x0, cfg.norm, cfg.eps, bounded);
                return out;
            }
        }
        const double loss = target.loss_and_grad(x, 1, nullptr);
        if (loss > best_loss) {
            best_loss = loss;
            best_x = x;
        }
        if (!bounded) break;
    }
    out.adv = best_x;
    out.steps_used = cfg.steps * cfg.restarts;
    out.norm = delta_norm(out.adv, x0, cfg.norm);
    check_budget(out.adv, x0, cfg.norm, cfg.eps, bounded);
    return out;
}

PerSample apgd_one(const AttackTarget& target, const TensorF& x0, const AttackConfig& cfg,
                   Rng rng) {
    (void)rng;
    PerSample out;
    out.adv = x0;
    if (!target.predicts_fake(x0)) {
        out.success = true;
        return out;
    }

    const double init_step = cfg.step_size > 0
                                 ? cfg.step_size
                                 : (cfg.norm == Norm::linf ? 2.0 * cfg.eps : 0.5 * cfg.eps);
    double step = init_step;
    const double momentum = 0.75;

    // Step-decay checkpoints as fractions of the budget.
    static constexpr double kFractions[] = {0.22, 0.44, 0.66, 0.84, 1.0};
    std::vector<int> checkpoints;
    for (double f : kFractions) {
        int c = static_cast<int>(std::ceil(f * cfg.steps));
        if (c >= 1 && (checkpoints.empty() || c > checkpoints.back())) checkpoints.push_back(c);
    }

    TensorF x = x0, x_prev = x0, grad;
    double f_cur = target.loss_and_grad(x, 1, &grad);
    double f_best = f_cur;
    TensorF x_best = x0;
    double f_best_last_ckpt = f_best;
    int improved = 0, last_ckpt = 0;
    std::size_t next_ckpt = 0;

    for (int it = 1; it <= cfg.steps; ++it) {
        TensorF z = x;
        step_in_direction(z, grad, cfg.norm, step);
        project(z, x0, cfg.norm, cfg.eps, true);
        TensorF xn(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i)
            xn.data[i] = x.data[i] + static_cast<float>(momentum) * (z.data[i] - x.data[i]) +
                         static_cast<float>(1.0 - momentum) * (x.data[i] - x_prev.data[i]);
        project(xn, x0, cfg.norm, cfg.eps, true);
        x_prev = x;
        x = xn;
        f_cur = target.loss_and_grad(x, 1, &grad);
        if (f_cur > f_best) {
            f_best = f_cur;
            x_best = x;
            ++improved;
        }
        if (!target.predicts_fake(x)) {
            out.adv = x;
            out.success = true;
            out.steps_used = it;
            out.norm = delta_norm(x, x0, cfg.norm);
            check_budget(out.adv, x0, cfg.norm, cfg.eps, true);
            return out;
        }
        if (next_ckpt < checkpoints.size() && it == checkpoints[next_ckpt]) {
            const int window = it - last_ckpt;
            const bool stalled =
                improved < static_cast<int>(0.75 * window) || f_best <= f_best_last_ckpt;
            if (stalled) {
                step *= cfg.apgd_alpha;
                x = x_best;
                x_prev = x_best;
                target.loss_and_grad(x, 1, &grad);
            }
            improved = 0;
            last_ckpt = it;
            f_best_last_ckpt = f_best;
            ++next_ckpt;
        }
    }
    out.adv = x_best;
    out.steps_used = cfg.steps;
    out.norm = delta_norm(out.adv, x0, cfg.norm);
    check_budget(out.adv, x0, cfg.norm, cfg.eps, true);
    return out;
}

PerSample square_one(const AttackTarget& target, const TensorF& x0, const AttackConfig& cfg,
                     Rng rng) {
    PerSample out;
    out.adv = x0;
    if (!target.predicts_fake(x0)) {
        out.success = true;
        return out;
    }
    const int n = target.image_side();
    const int ch = target.channels();
    const int h0 = std::max(1, static_cast<int>(std::lround(0.3 * n)));

    TensorF x = x0;
    double loss = target.loss_and_grad(x, 1, nullptr);
    for (int it = 1; it <= cfg.steps; ++it) {
        // deterministic geometric shrink from 0.3*n down to 1 over the budget
        const double t = static_cast<double>(it - 1) / std::max(1, cfg.steps - 1);
        const int side =
            std::max(1, static_cast<int>(std::lround(h0 * std::pow(1.0 / h0, t))));
        const int top = static_cast<int>(rng.next_below(n - side + 1));
        const int left = static_cast<int>(rng.next_below(n - side + 1));

        TensorF cand = x;
        if (cfg.norm == Norm::linf) {
            for (int c = 0; c < ch; ++c) {
                const float v = static_cast<float>(rng.next_sign() * cfg.eps);
                for (int i = top; i < top + side; ++i)
                    for (int j = left; j < left + side; ++j)
                        cand.at(i, j, c) = x0.at(i, j, c) + v;
            }
        } else {
            const double patch_mag =
                cfg.eps / std::sqrt(static_cast<double>(side) * side * ch);
            for (int c = 0; c < ch; ++c) {
                const float v = static_cast<float>(rng.next_sign() * patch_mag);
                for (int i = top; i < top + side; ++i)
                    for (int j = left; j < left + side; ++j)
                        cand.at(i, j, c) = x0.at(i, j, c) + v;
            }
        }
        project(cand, x0, cfg.norm, cfg.eps, true);
        const double cand_loss = target.loss_and_grad(cand, 1, nullptr);
        if (cand_loss > loss) {
            x = cand;
            loss = cand_loss;
            if (!target.predicts_fake(x)) {
                out.adv = x;
                out.success = true;
                out.steps_used = it;
                out.norm = delta_norm(x, x0, cfg.norm);
                check_budget(out.adv, x0, cfg.norm, cfg.eps, true);
                return out;
            }
        }
    }
    out.adv = x;
    out.steps_used = cfg.steps;
    out.norm = delta_norm(out.adv, x0, cfg.norm);
    check_budget(out.adv, x0, cfg.norm, cfg.eps, true);
    return out;
}

using PerSampleFn = PerSample (*)(const AttackTarget&, const TensorF&, const AttackConfig&, Rng);

AttackResult drive(const AttackTarget& target, const std::vector<Sample>& samples,
                   const AttackConfig& cfg, PerSampleFn fn, std::vector<TensorF>* adversarial) {
    cfg.validate();
    check_samples(target, samples);
    const Rng root = Rng::from_seed(cfg.seed).stream("attack");
    std::vector<PerSample> results(samples.size());
    parallel_for(static_cast<std::int64_t>(samples.size()), [&](std::int64_t i) {
        results[i] = fn(target, samples[i].pixels, cfg, root.stream(static_cast<std::uint64_t>(i)));
    });
    AttackResult res;
    res.per_sample.resize(samples.size());
    int natural = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        res.per_sample[i] = {results[i].success, results[i].norm, results[i].steps_used};
        natural += (results[i].steps_used > 0 || !results[i].success) ? 1 : 0;
    }
    res.natural_accuracy = samples.empty() ? 1.0 : static_cast<double>(natural) / samples.size();
    if (adversarial) {
        adversarial->clear();
        adversarial->reserve(samples.size());
        for (auto& r : results) adversarial->push_back(std::move(r.adv));
    }
    res.finalize();
    return res;
}

}  // namespace

AttackResult pgd_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                        const AttackConfig& cfg, std::vector<TensorF>* adversarial) {
    return drive(target, samples, cfg, &pgd_one, adversarial);
}

AttackResult apgd_ce_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                            const AttackConfig& cfg, std::vector<TensorF>* adversarial) {
    return drive(target, samples, cfg, &apgd_one, adversarial);
}

AttackResult square_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                           const AttackConfig& cfg, std::vector<TensorF>* adversarial) {
    return drive(target, samples, cfg, &square_one, adversarial);
}

AttackResult transfer_attack(const AttackTarget& surrogate, const AttackTarget& target,
                             const std::vector<Sample>& samples, const AttackConfig& cfg) {
    AttackConfig inner = cfg;
    inner.kind = cfg.transfer_inner;
    std::vector<TensorF> adv;
    AttackResult surrogate_res;
    if (inner.kind == AttackKind::apgd_ce)
        surrogate_res = apgd_ce_attack(surrogate, samples, inner, &adv);
    else if (inner.kind == AttackKind::pgd || inner.kind == AttackKind::unbounded_pgd)
        surrogate_res = pgd_attack(surrogate, samples, inner, &adv);
    else
        throw std::invalid_argument("transfer attack: inner attack must be gradient-based");
    AttackResult res;
    res.per_sample.resize(samples.size());
    int natural = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        natural += target.predicts_fake(samples[i].pixels) ? 1 : 0;
        const bool success = !target.predicts_fake(adv[i]);
        res.per_sample[i] = {success, surrogate_res.per_sample[i].norm,
                             surrogate_res.per_sample[i].steps_used};
    }
    res.natural_accuracy = static_cast<double>(natural) / samples.size();
    res.finalize();
    return res;
}

AttackResult run_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                        const AttackConfig& cfg, const AttackTarget* surrogate) {
    switch (cfg.kind) {
        case AttackKind::pgd:
        case AttackKind::unbounded_pgd: return pgd_attack(target, samples, cfg);
        case AttackKind::apgd_ce: return apgd_ce_attack(target, samples, cfg);
        case AttackKind::square: return square_attack(target, samples, cfg);
        case AttackKind::transfer:
            if (!surrogate) throw std::invalid_argument("transfer attack needs a surrogate");
            return transfer_attack(*surrogate, target, samples, cfg);
    }
    throw std::invalid_argument("unknown attack kind");
}

AttackResult random_noise_attack(const AttackTarget& target, const std::vector<Sample>& samples,
                                 Norm norm, double eps, int draws, std::uint64_t seed) {
    check_samples(target, samples);
    const Rng root = Rng::from_seed(seed).stream("noise");
    std::vector<PerSample> results(samples.size());
    parallel_for(static_cast<std::int64_t>(samples.size()), [&](std::int64_t i) {
        Rng rng = root.stream(static_cast<std::uint64_t>(i));
        const TensorF& x0 = samples[i].pixels;
        PerSample r;
        r.adv = x0;
        if (!target.predicts_fake(x0)) {
            r.success = true;
        } else {
            for (int d = 1; d <= draws; ++d) {
                TensorF x = random_point_in_ball(x0, norm, eps, rng);
                if (!target.predicts_fake(x)) {
                    r.success = true;
                    r.steps_used = d;
                    r.norm = delta_norm(x, x0, norm);
                    r.adv = x;
                    break;
                }
            }
        }
        results[i] = std::move(r);
    });
    AttackResult res;
    res.per_sample.resize(samples.size());
    int natural = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        res.per_sample[i] = {results[i].success, results[i].norm, results[i].steps_used};
        natural += (results[i].steps_used > 0 || !results[i].success) ? 1 : 0;
    }
    res.natural_accuracy = static_cast<double>(natural) / samples.size();
    res.finalize();
    return res;
}

ChecklistReport obfuscation_checklist(const AttackTarget& target,
                                      const std::vector<Sample>& deepfakes,
                                      const ChecklistOptions& opt) {
    ChecklistReport rep;

    AttackConfig one_step;
    one_step.kind = AttackKind::pgd;
    one_step.norm = opt.norm;
    one_step.eps = opt.eps;
    one_step.steps = 1;
    one_step.seed = opt.seed;

    AttackConfig iterative = one_step;
    iterative.steps = opt.iterative_steps;

    const AttackResult res_one = pgd_attack(target, deepfakes, one_step);
    const AttackResult res_iter = pgd_attack(target, deepfakes, iterative);
    rep.one_step_successes = res_one.successes;
    rep.iterative_successes = res_iter.successes;
    rep.one_step_not_better = res_one.successes <= res_iter.successes;

    AttackConfig wb = iterative;
    wb.kind = AttackKind::apgd_ce;
    AttackConfig bb = iterative;
    bb.kind = AttackKind::square;
    bb.steps = opt.square_steps;
    const AttackResult res_wb = apgd_ce_attack(target, deepfakes, wb);
    const AttackResult res_bb = square_attack(target, deepfakes, bb);
    rep.whitebox_successes = res_wb.successes;
    rep.blackbox_successes = res_bb.successes;
    rep.blackbox_not_better = res_bb.successes <= res_wb.successes;

    AttackConfig unbounded;
    unbounded.kind = AttackKind::unbounded_pgd;
    unbounded.norm = Norm::linf;
    unbounded.eps = 0.0;  // ignored: no ball projection
    unbounded.steps = opt.unbounded_steps;
    unbounded.seed = opt.seed;
    const AttackResult res_unb = pgd_attack(target, deepfakes, unbounded);
    rep.unbounded_success_rate =
        static_cast<double>(res_unb.successes) / static_cast<double>(deepfakes.size());
    rep.unbounded_reaches_all = res_unb.successes == static_cast<int>(deepfakes.size());

    const AttackResult res_rand =
        random_noise_attack(target, deepfakes, opt.norm, opt.eps, opt.iterative_steps, opt.seed);
    rep.random_successes = res_rand.successes;
    rep.gradient_successes = res_iter.successes;
    rep.random_not_better = res_rand.successes <= res_iter.successes;

    rep.monotone_in_eps = true;
    int prev = -1;
    for (double eps : opt.eps_grid) {
        AttackConfig g = iterative;
        g.eps = eps;
        const AttackResult res_g = pgd_attack(target, deepfakes, g);
        rep.grid_success.push_back(static_cast<double>(res_g.successes) /
                                   static_cast<double>(deepfakes.size()));
        if (prev >= 0 && res_g.successes < prev) rep.monotone_in_eps = false;
        prev = res_g.successes;
    }
    return rep;
}

std::string attack_report_json(const AttackConfig& cfg, const std::string& target_name,
                               const AttackResult& res) {
    json j;
    j["attack"] = attack_name(cfg.kind);
    j["norm"] = norm_name(cfg.norm);
    j["eps"] = cfg.eps;
    j["steps"] = cfg.steps;
    j["target"] = target_name;
    j["natural_acc"] = res.natural_accuracy;
    j["adv_acc"] = res.adversarial_accuracy;
    j["mean_norm"] = res.mean_norm;
    j["mean_steps"] = res.mean_steps;
    j["seed"] = cfg.seed;
    j["samples"] = res.per_sample.size();
    j["successes"] = res.successes;
    return j.dump(2) + "\n";
}

std::string attack_report_csv(const AttackConfig& cfg, const std::string& target_name,
                              const AttackResult& res, const std::string& config_hash) {
    std::string out = csv_row({"attack", "norm", "eps", "steps", "target", "natural_acc",
                               "adv_acc", "mean_norm", "seed", "config_hash"});
    out += csv_row({attack_name(cfg.kind), norm_name(cfg.norm), fmt_double(cfg.eps),
                    std::to_string(cfg.steps), target_name, fmt_double(res.natural_accuracy),
                    fmt_double(res.adversarial_accuracy), fmt_double(res.mean_norm),
                    std::to_string(cfg.seed), config_hash});
    return out;
}

}  // namespace d3
