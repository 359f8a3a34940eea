// d3: disjoint frequency-ensemble deepfake detection toolkit.
//
// Subcommands cover the full pipeline: synthetic data generation, single and
// ensemble training, saliency extraction, frequency partitioning, attacks,
// adversarial-dimension estimation, bound calculators, redundancy curves, the
// gradient-obfuscation checklist, and robustness report tables.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "d3/attacks.hpp"
#include "d3/dataset.hpp"
#include "d3/ensemble.hpp"
#include "d3/format.hpp"
#include "d3/io.hpp"
#include "d3/model.hpp"
#include "d3/parallel.hpp"
#include "d3/partition.hpp"
#include "d3/report.hpp"
#include "d3/saliency.hpp"
#include "d3/subspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace d3;

namespace {

// Accepts plain decimals and pixel-scale fractions like "8/255".
double parse_scalar(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return std::stod(s);
    return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
}

std::vector<double> parse_scalar_list(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(parse_scalar(s.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

void require_input(const std::string& path, const std::string& what) {
    if (!fs::exists(path))
        throw std::runtime_error(what + " does not exist: " + path);
}

// Keeps the classifier/ensemble alive behind the AttackTarget interface.
struct OwnedTarget {
    std::unique_ptr<Classifier> clf;
    std::unique_ptr<Ensemble> ens;
    std::unique_ptr<AttackTarget> target;
};

OwnedTarget load_target(const std::string& path, const std::string& name) {
    require_input(path, "target");
    OwnedTarget t;
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        t.ens = std::make_unique<Ensemble>(load_ensemble(path));
        t.target = std::make_unique<EnsembleTarget>(*t.ens, name.empty() ? path : name);
    } else {
        t.clf = std::make_unique<Classifier>(load_checkpoint(path));
        t.target = std::make_unique<ClassifierTarget>(*t.clf, name.empty() ? path : name);
    }
    return t;
}

void finish_record(ExperimentRecord& rec, const std::string& command, const json& config,
                   std::uint64_t seed, const std::string& anchor_output) {
    rec.command = command;
    rec.config_json = config.dump();
    rec.config_hash = config_hash_of(rec.config_json);
    rec.seed = seed;
    rec.experiment_id = command + "-" + rec.config_hash;
    rec.finished_at = iso8601_now();
    write_experiment_record(rec, anchor_output + ".run.json");
}

std::vector<Sample> deepfakes_from(const Dataset& ds, const std::string& split, int count) {
    std::vector<Sample> fakes = filter_label(ds.split(split), 1);
    return take(fakes, count);
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::string out;
    GenConfig cfg;
};

int cmd_gen_data(const GenDataArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    a.cfg.validate();
    Dataset ds = generate(a.cfg);
    ensure_parent_dir(a.out);
    save(ds, a.out);
    json config{{"out", a.out},
                {"image_side", a.cfg.image_side},
                {"channels", a.cfg.channels},
                {"pitch", a.cfg.pitch},
                {"amp_lo", a.cfg.amp_lo},
                {"amp_hi", a.cfg.amp_hi},
                {"beta", a.cfg.beta},
                {"train", a.cfg.train_count},
                {"val", a.cfg.val_count},
                {"test", a.cfg.test_count},
                {"seed", a.cfg.seed}};
    rec.outputs = {a.out};
    finish_record(rec, "gen-data", config, a.cfg.seed, a.out);
    std::cout << "wrote " << a.out << " (" << ds.train.size() << "/" << ds.val.size() << "/"
              << ds.test.size() << " samples)\n";
    return 0;
}

struct TrainArgs {
    std::string data, out, mask_path, space = "frequency";
    int member = 0;
    int conv1 = 8, conv2 = 16;
    TrainConfig cfg;
    std::string eps_str = "2/255", step_str = "-1";
};

Classifier train_one(const Dataset& ds, const PartitionMask& mask, int member,
                     const TrainArgs& a) {
    ArchConfig arch;
    arch.image_side = ds.config.image_side;
    arch.channels = ds.config.channels;
    arch.use_dct = a.space == "frequency";
    arch.conv1_channels = a.conv1;
    arch.conv2_channels = a.conv2;
    Classifier clf = Classifier::make(arch, mask, member);
    train(clf, ds, a.cfg);
    return clf;
}

int cmd_train(TrainArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.data, "dataset");
    a.cfg.pgd_eps = parse_scalar(a.eps_str);
    a.cfg.pgd_step = parse_scalar(a.step_str);
    Dataset ds = load(a.data);
    PartitionMask mask =
        a.mask_path.empty() ? full_mask(ds.config.feature_count()) : load_mask(a.mask_path);
    Classifier clf = train_one(ds, mask, a.member, a);
    ensure_parent_dir(a.out);
    save_checkpoint(clf, a.cfg, a.out);
    const double test_auc = classifier_auc(clf, ds.test);
    json config{{"data", a.data},       {"out", a.out},
                {"mask", a.mask_path},  {"member", a.member},
                {"space", a.space},     {"conv1", a.conv1},
                {"conv2", a.conv2},     {"lr", a.cfg.lr},
                {"batch", a.cfg.batch_size}, {"max_epochs", a.cfg.max_epochs},
                {"patience", a.cfg.patience}, {"pgd_steps", a.cfg.pgd_steps},
                {"train_eps", a.cfg.pgd_eps}, {"train_step", a.cfg.pgd_step},
                {"seed", a.cfg.seed}};
    rec.outputs = {a.out};
    finish_record(rec, "train", config, a.cfg.seed, a.out);
    std::cout << "trained " << a.out << ": val_auc=" << fmt_double(clf.best_val_auc)
              << " test_auc=" << fmt_double(test_auc) << " epochs=" << clf.epochs_trained << "\n";
    return 0;
}

struct SaliencyArgs {
    std::string model, data, out;
    int samples = 256;
    SaliencyConfig cfg;
    std::string step_str = "1/255";
    std::uint64_t seed = 0;
};

int cmd_saliency(SaliencyArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.model, "model");
    require_input(a.data, "dataset");
    a.cfg.step = parse_scalar(a.step_str);
    Classifier clf = load_checkpoint(a.model);
    Dataset ds = load(a.data);
    const std::vector<Sample> fakes = deepfakes_from(ds, "val", a.samples);
    SaliencyVector s = compute_saliency(clf, fakes, a.cfg);
    ensure_parent_dir(a.out);
    save_saliency(s, a.out);
    json config{{"model", a.model},       {"data", a.data},
                {"out", a.out},           {"samples", a.samples},
                {"max_steps", a.cfg.max_steps}, {"step", a.cfg.step},
                {"seed", a.seed}};
    rec.outputs = {a.out};
    finish_record(rec, "saliency", config, a.seed, a.out);
    std::cout << "saliency over " << s.samples_averaged << " deepfakes -> " << a.out << "\n";
    return 0;
}

struct PartitionArgs {
    std::string scheme = "random", out, saliency_path, data;
    int n = 4;
    int d = 0;
    double ratio = -1.0;
    std::uint64_t seed = 0;
};

int cmd_partition(PartitionArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    PartitionMask mask;
    if (a.scheme == "random") {
        int d = a.d;
        if (d == 0) {
            require_input(a.data, "dataset");
            d = load(a.data).config.feature_count();
        }
        const double ratio = a.ratio > 0 ? a.ratio : 1.0 / a.n;
        mask = random_partition(d, a.n, a.seed, ratio);
    } else if (a.scheme == "saliency") {
        require_input(a.saliency_path, "saliency file");
        SaliencyVector s = load_saliency(a.saliency_path);
        const double ratio = a.ratio > 0 ? a.ratio : 1.0 / a.n;
        mask = saliency_partition(s, a.n, ratio, a.seed);
    } else {
        throw std::runtime_error("unknown partition scheme: " + a.scheme);
    }
    ensure_parent_dir(a.out);
    save_mask(mask, a.out);
    json config{{"scheme", a.scheme}, {"n", a.n},       {"ratio", mask.ratio},
                {"d", mask.d},        {"seed", a.seed}, {"out", a.out},
                {"saliency", a.saliency_path}};
    rec.outputs = {a.out};
    finish_record(rec, "partition", config, a.seed, a.out);
    std::cout << "wrote " << a.out << " (" << mask.n << " members, ratio "
              << fmt_double(mask.ratio) << ")\n";
    return 0;
}

struct TrainEnsembleArgs {
    TrainArgs train;
    std::string out_dir = ".";
    std::string voting = "mean_logit";
};

int cmd_train_ensemble(TrainEnsembleArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.train.data, "dataset");
    require_input(a.train.mask_path, "mask");
    a.train.cfg.pgd_eps = parse_scalar(a.train.eps_str);
    a.train.cfg.pgd_step = parse_scalar(a.train.step_str);
    Dataset ds = load(a.train.data);
    PartitionMask mask = load_mask(a.train.mask_path);
    fs::create_directories(a.out_dir);

    std::vector<Classifier> members;
    std::vector<std::string> names;
    for (int m = 0; m < mask.n; ++m) {
        TrainArgs per = a.train;
        per.cfg.seed = a.train.cfg.seed + static_cast<std::uint64_t>(m);
        Classifier clf = train_one(ds, mask, m, per);
        const std::string name = "member_" + std::to_string(m) + ".d3md";
        save_checkpoint(clf, per.cfg, (fs::path(a.out_dir) / name).string());
        std::cout << "member " << m << ": val_auc=" << fmt_double(clf.best_val_auc)
                  << " epochs=" << clf.epochs_trained << "\n";
        names.push_back(name);
        members.push_back(std::move(clf));
    }
    const std::string manifest = (fs::path(a.out_dir) / "ensemble.json").string();
    save_manifest(names, voting_from_name(a.voting), 0.0, manifest);

    Ensemble ens(std::move(members), voting_from_name(a.voting));
    const double auc = ensemble_auc(ens, ds.test);
    json config{{"data", a.train.data},   {"mask", a.train.mask_path},
                {"out_dir", a.out_dir},   {"voting", a.voting},
                {"lr", a.train.cfg.lr},   {"batch", a.train.cfg.batch_size},
                {"max_epochs", a.train.cfg.max_epochs}, {"patience", a.train.cfg.patience},
                {"pgd_steps", a.train.cfg.pgd_steps},   {"train_eps", a.train.cfg.pgd_eps},
                {"space", a.train.space}, {"seed", a.train.cfg.seed}};
    rec.outputs = names;
    rec.outputs.push_back(manifest);
    finish_record(rec, "train-ensemble", config, a.train.cfg.seed, manifest);
    std::cout << "ensemble test_auc=" << fmt_double(auc) << " -> " << manifest << "\n";
    return 0;
}

struct AttackArgs {
    std::string target, data, split = "test", out, surrogate;
    AttackConfig cfg;
    std::string kind = "pgd", norm = "linf", eps_str = "4/255", step_str = "-1",
                inner = "apgd_ce";
    int samples = -1;
};

int cmd_attack(AttackArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.data, "dataset");
    a.cfg.kind = attack_from_name(a.kind);
    a.cfg.norm = norm_from_name(a.norm);
    a.cfg.eps = parse_scalar(a.eps_str);
    a.cfg.step_size = parse_scalar(a.step_str);
    a.cfg.transfer_inner = attack_from_name(a.inner);

    OwnedTarget target = load_target(a.target, "");
    OwnedTarget surrogate;
    if (a.cfg.kind == AttackKind::transfer) surrogate = load_target(a.surrogate, "");

    Dataset ds = load(a.data);
    const std::vector<Sample> fakes = deepfakes_from(ds, a.split, a.samples);
    const AttackResult res =
        run_attack(*target.target, fakes, a.cfg, surrogate.target.get());

    ensure_parent_dir(a.out);
    json config{{"target", a.target}, {"data", a.data},     {"split", a.split},
                {"kind", a.kind},     {"norm", a.norm},     {"eps", a.cfg.eps},
                {"steps", a.cfg.steps}, {"step_size", a.cfg.step_size},
                {"alpha", a.cfg.apgd_alpha}, {"samples", static_cast<int>(fakes.size())},
                {"surrogate", a.surrogate}, {"seed", a.cfg.seed}};
    write_file(a.out, attack_report_json(a.cfg, a.target, res));
    const std::string csv_path = a.out + ".csv";
    write_file(csv_path, attack_report_csv(a.cfg, a.target, res, config_hash_of(config.dump())));
    rec.outputs = {a.out, csv_path};
    finish_record(rec, "attack", config, a.cfg.seed, a.out);
    std::cout << attack_name(a.cfg.kind) << " " << norm_name(a.cfg.norm) << " eps "
              << fmt_double(a.cfg.eps) << ": natural_acc=" << fmt_double(res.natural_accuracy)
              << " adv_acc=" << fmt_double(res.adversarial_accuracy) << "\n";
    return 0;
}

struct EvalArgs {
    std::string target, data, split = "test", out;
    std::uint64_t seed = 0;
};

int cmd_eval(EvalArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.data, "dataset");
    OwnedTarget target = load_target(a.target, "");
    Dataset ds = load(a.data);
    const auto& samples = ds.split(a.split);

    std::vector<double> scores(samples.size());
    std::vector<int> labels(samples.size());
    int correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        scores[i] = target.target->score(samples[i].pixels);
        labels[i] = samples[i].label;
        const bool fake = scores[i] > target.target->threshold();
        correct += fake == (labels[i] == 1);
    }
    const double auc = auc_roc(scores, labels);
    const double acc = static_cast<double>(correct) / samples.size();

    json out{{"target", a.target},
             {"split", a.split},
             {"samples", samples.size()},
             {"auc", auc},
             {"accuracy", acc}};
    ensure_parent_dir(a.out);
    write_file(a.out, out.dump(2) + "\n");
    json config{{"target", a.target}, {"data", a.data}, {"split", a.split}, {"seed", a.seed}};
    rec.outputs = {a.out};
    finish_record(rec, "eval", config, a.seed, a.out);
    std::cout << "auc=" << fmt_double(auc) << " accuracy=" << fmt_double(acc) << "\n";
    return 0;
}

struct GaasArgs {
    std::string target, data, split = "test", out, orders_str = "4,16,64";
    std::string eps_str = "8/255";
    int samples = 200;
    std::uint64_t seed = 0;
};

int cmd_gaas(GaasArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.data, "dataset");
    OwnedTarget target = load_target(a.target, "");
    Dataset ds = load(a.data);
    const double eps = parse_scalar(a.eps_str);
    std::vector<int> orders;
    for (double v : parse_scalar_list(a.orders_str)) orders.push_back(static_cast<int>(v));

    std::vector<Sample> fakes;
    for (const Sample& s : filter_label(ds.split(a.split), 1)) {
        if (static_cast<int>(fakes.size()) >= a.samples && a.samples > 0) break;
        if (target.target->predicts_fake(s.pixels)) fakes.push_back(s);
    }
    if (fakes.empty()) throw std::runtime_error("gaas: no correctly classified deepfakes");

    DimensionEstimate est = gaas_estimate(*target.target, fakes, eps, orders);
    json out{{"target", a.target},
             {"eps", eps},
             {"orders", orders},
             {"samples", fakes.size()},
             {"median_k", est.median_k},
             {"mean_k", est.mean_k},
             {"max_k", est.max_k},
             {"k_per_input", est.k_per_input}};
    ensure_parent_dir(a.out);
    write_file(a.out, out.dump(2) + "\n");
    const std::string curve_path = a.out + ".survival.csv";
    write_file(curve_path, survival_curve_csv(est, a.target));
    json config{{"target", a.target}, {"data", a.data},     {"split", a.split},
                {"eps", eps},         {"orders", orders},   {"samples", a.samples},
                {"seed", a.seed}};
    rec.outputs = {a.out, curve_path};
    finish_record(rec, "gaas", config, a.seed, a.out);
    std::cout << "gaas: median_k=" << fmt_double(est.median_k) << " mean_k="
              << fmt_double(est.mean_k) << " over " << fakes.size() << " inputs\n";
    return 0;
}

struct BoundsArgs {
    std::string profile, ensemble, data, split = "test", out, norm = "l2";
    std::string eps_str = "1";
    int samples = 50;
    std::uint64_t seed = 0;
};

int cmd_bounds(BoundsArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    const Norm norm = norm_from_name(a.norm);
    ensure_parent_dir(a.out);
    json config{{"profile", a.profile}, {"ensemble", a.ensemble}, {"data", a.data},
                {"norm", a.norm},       {"eps", a.eps_str},       {"samples", a.samples},
                {"seed", a.seed}};

    if (!a.profile.empty()) {
        require_input(a.profile, "profile");
        GradientProfile p = profile_from_json(read_file(a.profile));
        p.norm = norm;
        const BoundReport r = norm == Norm::l2 ? bound_l2(p) : bound_linf(p);
        write_file(a.out, bound_report_json(r));
        rec.outputs = {a.out};
        finish_record(rec, "bounds", config, a.seed, a.out);
        std::cout << "at_least_one_k=" << r.at_least_one_k << " majority_k=["
                  << r.majority_k_lower << "," << r.majority_k_upper << "]\n";
        return 0;
    }

    require_input(a.ensemble, "ensemble manifest");
    require_input(a.data, "dataset");
    Ensemble ens = load_ensemble(a.ensemble);
    Dataset ds = load(a.data);
    const double eps = parse_scalar(a.eps_str);
    std::vector<const Classifier*> members;
    for (const Classifier& c : ens.members) members.push_back(&c);

    json arr = json::array();
    std::string csv = csv_row({"sample", "at_least_one_k", "majority_k_lower",
                               "majority_k_upper", "seed", "config_hash"});
    const std::string hash = config_hash_of(config.dump());
    int taken = 0;
    for (const Sample& s : filter_label(ds.split(a.split), 1)) {
        if (taken >= a.samples) break;
        GradientProfile p = profile_from_members(members, s.pixels, 1, eps, norm);
        bool usable = true;
        for (double g : p.gamma) usable = usable && g > 0;
        if (!usable) continue;
        const BoundReport r = norm == Norm::l2 ? bound_l2(p) : bound_linf(p);
        arr.push_back(json::parse(bound_report_json(r)));
        csv += csv_row({std::to_string(taken), std::to_string(r.at_least_one_k),
                        std::to_string(r.majority_k_lower), std::to_string(r.majority_k_upper),
                        std::to_string(a.seed), hash});
        ++taken;
    }
    write_file(a.out, arr.dump(2) + "\n");
    write_file(a.out + ".csv", csv);
    rec.outputs = {a.out, a.out + ".csv"};
    finish_record(rec, "bounds", config, a.seed, a.out);
    std::cout << "bounds over " << taken << " samples -> " << a.out << "\n";
    return 0;
}

struct RedundancyArgs {
    std::string data, out_dir = "redundancy", space = "both";
    std::string fractions_str = "1,0.5,0.25,0.125,0.0625,0.03125";
    int max_epochs = 8, batch = 128, patience = 3;
    std::uint64_t seed = 0;
};

int cmd_redundancy(RedundancyArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.data, "dataset");
    Dataset ds = load(a.data);
    const std::vector<double> fractions = parse_scalar_list(a.fractions_str);
    TrainConfig cfg;
    cfg.max_epochs = a.max_epochs;
    cfg.batch_size = a.batch;
    cfg.patience = a.patience;
    cfg.pgd_steps = 0;
    cfg.seed = a.seed;
    ArchConfig arch;

    std::vector<std::pair<FeatureSpace, std::vector<CurvePoint>>> curves;
    for (FeatureSpace space : {FeatureSpace::frequency, FeatureSpace::pixel}) {
        if (a.space != "both" && a.space != space_name(space)) continue;
        curves.emplace_back(space, redundancy_curve(ds, fractions, space, a.seed, cfg, arch));
        for (const CurvePoint& p : curves.back().second)
            std::cout << space_name(space) << " fraction=" << fmt_double(p.fraction)
                      << " auc=" << fmt_double(p.auc) << "\n";
    }

    fs::create_directories(a.out_dir);
    json config{{"data", a.data},     {"out_dir", a.out_dir},   {"space", a.space},
                {"fractions", fractions}, {"max_epochs", a.max_epochs}, {"seed", a.seed}};
    const std::string csv_path = (fs::path(a.out_dir) / "redundancy.csv").string();
    write_file(csv_path, redundancy_csv(curves, a.seed, config_hash_of(config.dump())));

    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
    for (const auto& [space, points] : curves) {
        std::vector<std::pair<double, double>> pts;
        for (const CurvePoint& p : points) pts.emplace_back(p.fraction, p.auc);
        series.emplace_back(space_name(space), pts);
    }
    const std::string svg_path = (fs::path(a.out_dir) / "redundancy.svg").string();
    write_file(svg_path, svg_line_plot("test AUC vs feature fraction", "fraction", "AUC", series,
                                       true));
    rec.outputs = {csv_path, svg_path};
    finish_record(rec, "redundancy", config, a.seed, csv_path);
    return 0;
}

struct ChecklistArgs {
    std::string target, data, split = "test", out;
    std::string eps_str = "4/255", grid_str = "0,1/255,2/255,4/255,8/255,16/255";
    ChecklistOptions opt;
    int samples = 200;
};

int cmd_checklist(ChecklistArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.data, "dataset");
    OwnedTarget target = load_target(a.target, "");
    Dataset ds = load(a.data);
    a.opt.eps = parse_scalar(a.eps_str);
    a.opt.eps_grid = parse_scalar_list(a.grid_str);
    const std::vector<Sample> fakes = deepfakes_from(ds, a.split, a.samples);
    const ChecklistReport rep = obfuscation_checklist(*target.target, fakes, a.opt);

    json out{{"target", a.target},
             {"eps", a.opt.eps},
             {"samples", fakes.size()},
             {"checks",
              {{"one_step_not_better", rep.one_step_not_better},
               {"blackbox_not_better", rep.blackbox_not_better},
               {"unbounded_reaches_all", rep.unbounded_reaches_all},
               {"random_not_better", rep.random_not_better},
               {"monotone_in_eps", rep.monotone_in_eps}}},
             {"all_pass", rep.all_pass()},
             {"detail",
              {{"one_step_successes", rep.one_step_successes},
               {"iterative_successes", rep.iterative_successes},
               {"blackbox_successes", rep.blackbox_successes},
               {"whitebox_successes", rep.whitebox_successes},
               {"unbounded_success_rate", rep.unbounded_success_rate},
               {"random_successes", rep.random_successes},
               {"gradient_successes", rep.gradient_successes},
               {"grid_success", rep.grid_success}}}};
    ensure_parent_dir(a.out);
    write_file(a.out, out.dump(2) + "\n");
    json config{{"target", a.target}, {"data", a.data},       {"split", a.split},
                {"eps", a.opt.eps},   {"samples", a.samples}, {"seed", a.opt.seed},
                {"grid", a.opt.eps_grid}};
    rec.outputs = {a.out};
    finish_record(rec, "checklist", config, a.opt.seed, a.out);
    std::cout << (rep.all_pass() ? "all five checks passed" : "some checks FAILED") << " -> "
              << a.out << "\n";
    return 0;
}

struct ReportArgs {
    std::string data, split = "test", out_dir = "report";
    std::string targets_str, attacks_str = "apgd_ce", norm = "linf";
    std::string grid_str = "1/255,2/255,4/255,8/255,16/255";
    int steps = 50, samples = 200;
    std::uint64_t seed = 0;
};

int cmd_report(ReportArgs& a) {
    ExperimentRecord rec;
    rec.started_at = iso8601_now();
    require_input(a.data, "dataset");
    Dataset ds = load(a.data);
    const std::vector<Sample> fakes = deepfakes_from(ds, a.split, a.samples);

    std::vector<OwnedTarget> owned;
    std::vector<std::pair<std::string, const AttackTarget*>> targets;
    for (const std::string& spec : split_list(a.targets_str)) {
        const auto eq = spec.find('=');
        const std::string name = eq == std::string::npos ? spec : spec.substr(0, eq);
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        owned.push_back(load_target(path, name));
        targets.emplace_back(name, owned.back().target.get());
    }
    if (targets.empty()) throw std::runtime_error("report: no targets given");

    std::vector<AttackConfig> attacks;
    for (const std::string& kind : split_list(a.attacks_str))
        for (double eps : parse_scalar_list(a.grid_str)) {
            AttackConfig cfg;
            cfg.kind = attack_from_name(kind);
            cfg.norm = norm_from_name(a.norm);
            cfg.eps = eps;
            cfg.steps = a.steps;
            cfg.seed = a.seed;
            attacks.push_back(cfg);
        }

    const std::vector<RobustnessRow> rows = robustness_table(targets, attacks, fakes);

    fs::create_directories(a.out_dir);
    json config{{"data", a.data},       {"split", a.split},   {"targets", a.targets_str},
                {"attacks", a.attacks_str}, {"norm", a.norm}, {"grid", a.grid_str},
                {"steps", a.steps},     {"samples", a.samples}, {"seed", a.seed}};
    const std::string csv_path = (fs::path(a.out_dir) / "robustness.csv").string();
    const std::string json_path = (fs::path(a.out_dir) / "robustness.json").string();
    write_file(csv_path, robustness_csv(rows, config_hash_of(config.dump())));
    write_file(json_path, robustness_json(rows));

    // accuracy-vs-eps series per (target, attack)
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
    for (const auto& [name, _] : targets)
        for (const std::string& kind : split_list(a.attacks_str)) {
            std::vector<std::pair<double, double>> pts;
            for (const RobustnessRow& r : rows)
                if (r.target == name && r.attack == kind) pts.emplace_back(r.eps, r.adv_acc);
            series.emplace_back(name + "/" + kind, pts);
        }
    const std::string svg_path = (fs::path(a.out_dir) / "robustness.svg").string();
    write_file(svg_path,
               svg_line_plot("adversarial accuracy vs eps", "eps", "adversarial accuracy",
                             series, false));

    for (const RobustnessRow& r : rows)
        std::cout << r.target << " " << r.attack << " eps=" << fmt_double(r.eps)
                  << " adv_acc=" << fmt_double(r.adv_acc) << "\n";
    rec.outputs = {csv_path, json_path, svg_path};
    finish_record(rec, "report", config, a.seed, csv_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"disjoint frequency-ensemble deepfake detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    int threads_flag = 0;
    app.add_option("--threads", threads_flag, "worker threads (default: D3_THREADS or 1)");

    GenDataArgs gen;
    auto* c_gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    c_gen->add_option("--out", gen.out, "output .d3ds path")->required();
    c_gen->add_option("--image-side", gen.cfg.image_side, "image side length")->capture_default_str();
    c_gen->add_option("--channels", gen.cfg.channels, "channel count")->capture_default_str();
    c_gen->add_option("--pitch", gen.cfg.pitch, "artifact lattice pitch")->capture_default_str();
    c_gen->add_option("--amp-lo", gen.cfg.amp_lo, "artifact amplitude lower bound")->capture_default_str();
    c_gen->add_option("--amp-hi", gen.cfg.amp_hi, "artifact amplitude upper bound")->capture_default_str();
    c_gen->add_option("--beta", gen.cfg.beta, "background spectral exponent")->capture_default_str();
    c_gen->add_option("--train", gen.cfg.train_count, "training samples")->capture_default_str();
    c_gen->add_option("--val", gen.cfg.val_count, "validation samples")->capture_default_str();
    c_gen->add_option("--test", gen.cfg.test_count, "test samples")->capture_default_str();
    c_gen->add_option("--seed", gen.cfg.seed, "generation seed")->capture_default_str();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "train a single classifier");
    c_train->add_option("--data", tr.data, "dataset path")->required();
    c_train->add_option("--out", tr.out, "checkpoint output path")->required();
    c_train->add_option("--mask", tr.mask_path, "partition mask (default: full spectrum)");
    c_train->add_option("--member", tr.member, "mask member index")->capture_default_str();
    c_train->add_option("--space", tr.space, "frequency|pixel")->capture_default_str();
    c_train->add_option("--conv1", tr.conv1, "first conv channels")->capture_default_str();
    c_train->add_option("--conv2", tr.conv2, "second conv channels")->capture_default_str();
    c_train->add_option("--lr", tr.cfg.lr, "Adam learning rate")->capture_default_str();
    c_train->add_option("--batch", tr.cfg.batch_size, "batch size")->capture_default_str();
    c_train->add_option("--max-epochs", tr.cfg.max_epochs, "epoch cap")->capture_default_str();
    c_train->add_option("--patience", tr.cfg.patience, "early-stop patience")->capture_default_str();
    c_train->add_option("--pgd-steps", tr.cfg.pgd_steps, "hardening steps (0 = natural)")->capture_default_str();
    c_train->add_option("--train-eps", tr.eps_str, "hardening budget, e.g. 2/255")->capture_default_str();
    c_train->add_option("--train-step", tr.step_str, "hardening step (-1 = eps/4)")->capture_default_str();
    c_train->add_option("--seed", tr.cfg.seed, "training seed")->capture_default_str();

    SaliencyArgs sal;
    auto* c_sal = app.add_subcommand("saliency", "per-frequency saliency from a trained model");
    c_sal->add_option("--model", sal.model, "reference checkpoint")->required();
    c_sal->add_option("--data", sal.data, "dataset path")->required();
    c_sal->add_option("--out", sal.out, "saliency JSON output")->required();
    c_sal->add_option("--samples", sal.samples, "validation deepfakes to average")->capture_default_str();
    c_sal->add_option("--max-steps", sal.cfg.max_steps, "attack step cap")->capture_default_str();
    c_sal->add_option("--step", sal.step_str, "attack step size")->capture_default_str();
    c_sal->add_option("--seed", sal.seed, "seed (recorded)")->capture_default_str();

    PartitionArgs part;
    auto* c_part = app.add_subcommand("partition", "build a disjoint frequency partition");
    c_part->add_option("--scheme", part.scheme, "random|saliency")->capture_default_str();
    c_part->add_option("--n", part.n, "ensemble size")->capture_default_str();
    c_part->add_option("--ratio", part.ratio, "kept fraction per member (default 1/n)");
    c_part->add_option("--d", part.d, "feature count (random scheme)");
    c_part->add_option("--data", part.data, "dataset to infer feature count");
    c_part->add_option("--saliency", part.saliency_path, "saliency JSON (saliency scheme)");
    c_part->add_option("--out", part.out, "mask JSON output")->required();
    c_part->add_option("--seed", part.seed, "partition seed")->capture_default_str();

    TrainEnsembleArgs te;
    auto* c_te = app.add_subcommand("train-ensemble", "train all members of a partition");
    c_te->add_option("--data", te.train.data, "dataset path")->required();
    c_te->add_option("--mask", te.train.mask_path, "partition mask")->required();
    c_te->add_option("--out-dir", te.out_dir, "output directory")->capture_default_str();
    c_te->add_option("--voting", te.voting, "mean_logit|at_least_one|majority")->capture_default_str();
    c_te->add_option("--space", te.train.space, "frequency|pixel")->capture_default_str();
    c_te->add_option("--conv1", te.train.conv1, "first conv channels")->capture_default_str();
    c_te->add_option("--conv2", te.train.conv2, "second conv channels")->capture_default_str();
    c_te->add_option("--lr", te.train.cfg.lr, "Adam learning rate")->capture_default_str();
    c_te->add_option("--batch", te.train.cfg.batch_size, "batch size")->capture_default_str();
    c_te->add_option("--max-epochs", te.train.cfg.max_epochs, "epoch cap")->capture_default_str();
    c_te->add_option("--patience", te.train.cfg.patience, "early-stop patience")->capture_default_str();
    c_te->add_option("--pgd-steps", te.train.cfg.pgd_steps, "hardening steps")->capture_default_str();
    c_te->add_option("--train-eps", te.train.eps_str, "hardening budget")->capture_default_str();
    c_te->add_option("--train-step", te.train.step_str, "hardening step")->capture_default_str();
    c_te->add_option("--seed", te.train.cfg.seed, "training seed (member m adds m)")->capture_default_str();

    AttackArgs atk;
    auto* c_atk = app.add_subcommand("attack", "run one evasion attack");
    c_atk->add_option("--target", atk.target, "checkpoint or ensemble manifest")->required();
    c_atk->add_option("--data", atk.data, "dataset path")->required();
    c_atk->add_option("--split", atk.split, "train|val|test")->capture_default_str();
    c_atk->add_option("--kind", atk.kind, "pgd|apgd_ce|square|transfer|unbounded_pgd")->capture_default_str();
    c_atk->add_option("--norm", atk.norm, "linf|l2")->capture_default_str();
    c_atk->add_option("--eps", atk.eps_str, "budget, e.g. 8/255 or 0.5")->capture_default_str();
    c_atk->add_option("--steps", atk.cfg.steps, "attack steps / query budget")->capture_default_str();
    c_atk->add_option("--step-size", atk.step_str, "step size (-1 = default rule)")->capture_default_str();
    c_atk->add_option("--restarts", atk.cfg.restarts, "random restarts")->capture_default_str();
    c_atk->add_option("--alpha", atk.cfg.apgd_alpha, "step decay at stalls")->capture_default_str();
    c_atk->add_option("--inner", atk.inner, "transfer inner attack")->capture_default_str();
    c_atk->add_option("--surrogate", atk.surrogate, "surrogate for transfer attacks");
    c_atk->add_option("--samples", atk.samples, "deepfakes to attack (-1 = all)")->capture_default_str();
    c_atk->add_option("--out", atk.out, "report JSON output")->required();
    c_atk->add_option("--seed", atk.cfg.seed, "attack seed")->capture_default_str();

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "natural metrics of a target on a split");
    c_ev->add_option("--target", ev.target, "checkpoint or ensemble manifest")->required();
    c_ev->add_option("--data", ev.data, "dataset path")->required();
    c_ev->add_option("--split", ev.split, "train|val|test")->capture_default_str();
    c_ev->add_option("--out", ev.out, "metrics JSON output")->required();
    c_ev->add_option("--seed", ev.seed, "seed (recorded)")->capture_default_str();

    GaasArgs ga;
    auto* c_ga = app.add_subcommand("gaas", "estimate adversarial-subspace dimension");
    c_ga->add_option("--target", ga.target, "checkpoint or ensemble manifest")->required();
    c_ga->add_option("--data", ga.data, "dataset path")->required();
    c_ga->add_option("--split", ga.split, "train|val|test")->capture_default_str();
    c_ga->add_option("--eps", ga.eps_str, "direction magnitude")->capture_default_str();
    c_ga->add_option("--orders", ga.orders_str, "Hadamard orders")->capture_default_str();
    c_ga->add_option("--samples", ga.samples, "correctly classified inputs to probe")->capture_default_str();
    c_ga->add_option("--out", ga.out, "estimate JSON output")->required();
    c_ga->add_option("--seed", ga.seed, "seed (recorded)")->capture_default_str();

    BoundsArgs bo;
    auto* c_bo = app.add_subcommand("bounds", "adversarial-dimension bound calculators");
    c_bo->add_option("--profile", bo.profile, "gradient profile JSON");
    c_bo->add_option("--ensemble", bo.ensemble, "derive profiles from this manifest");
    c_bo->add_option("--data", bo.data, "dataset for --ensemble profiles");
    c_bo->add_option("--split", bo.split, "split for --ensemble profiles")->capture_default_str();
    c_bo->add_option("--norm", bo.norm, "l2|linf")->capture_default_str();
    c_bo->add_option("--eps", bo.eps_str, "budget for --ensemble profiles")->capture_default_str();
    c_bo->add_option("--samples", bo.samples, "profiles to derive")->capture_default_str();
    c_bo->add_option("--out", bo.out, "bound report output")->required();
    c_bo->add_option("--seed", bo.seed, "seed (recorded)")->capture_default_str();

    RedundancyArgs red;
    auto* c_red = app.add_subcommand("redundancy", "feature-subset AUC curves");
    c_red->add_option("--data", red.data, "dataset path")->required();
    c_red->add_option("--out-dir", red.out_dir, "output directory")->capture_default_str();
    c_red->add_option("--space", red.space, "frequency|pixel|both")->capture_default_str();
    c_red->add_option("--fractions", red.fractions_str, "fraction grid")->capture_default_str();
    c_red->add_option("--max-epochs", red.max_epochs, "epoch cap per model")->capture_default_str();
    c_red->add_option("--batch", red.batch, "batch size")->capture_default_str();
    c_red->add_option("--patience", red.patience, "early-stop patience")->capture_default_str();
    c_red->add_option("--seed", red.seed, "seed")->capture_default_str();

    ChecklistArgs ck;
    auto* c_ck = app.add_subcommand("checklist", "gradient-obfuscation checklist");
    c_ck->add_option("--target", ck.target, "checkpoint or ensemble manifest")->required();
    c_ck->add_option("--data", ck.data, "dataset path")->required();
    c_ck->add_option("--split", ck.split, "train|val|test")->capture_default_str();
    c_ck->add_option("--eps", ck.eps_str, "reference budget")->capture_default_str();
    c_ck->add_option("--steps", ck.opt.iterative_steps, "iterative attack steps")->capture_default_str();
    c_ck->add_option("--square-steps", ck.opt.square_steps, "black-box query budget")->capture_default_str();
    c_ck->add_option("--unbounded-steps", ck.opt.unbounded_steps, "unbounded attack cap")->capture_default_str();
    c_ck->add_option("--eps-grid", ck.grid_str, "monotonicity grid")->capture_default_str();
    c_ck->add_option("--samples", ck.samples, "deepfakes to test")->capture_default_str();
    c_ck->add_option("--out", ck.out, "checklist JSON output")->required();
    c_ck->add_option("--seed", ck.opt.seed, "attack seed")->capture_default_str();

    ReportArgs rep;
    auto* c_rep = app.add_subcommand("report", "robustness table over targets and attacks");
    c_rep->add_option("--data", rep.data, "dataset path")->required();
    c_rep->add_option("--split", rep.split, "train|val|test")->capture_default_str();
    c_rep->add_option("--targets", rep.targets_str, "name=path list")->required();
    c_rep->add_option("--attacks", rep.attacks_str, "attack kinds")->capture_default_str();
    c_rep->add_option("--norm", rep.norm, "linf|l2")->capture_default_str();
    c_rep->add_option("--eps-grid", rep.grid_str, "budget grid")->capture_default_str();
    c_rep->add_option("--steps", rep.steps, "steps per attack")->capture_default_str();
    c_rep->add_option("--samples", rep.samples, "deepfakes per cell")->capture_default_str();
    c_rep->add_option("--out-dir", rep.out_dir, "output directory")->capture_default_str();
    c_rep->add_option("--seed", rep.seed, "attack seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    set_threads(resolve_threads(threads_flag));

    try {
        if (*c_gen) return cmd_gen_data(gen);
        if (*c_train) return cmd_train(tr);
        if (*c_sal) return cmd_saliency(sal);
        if (*c_part) return cmd_partition(part);
        if (*c_te) return cmd_train_ensemble(te);
        if (*c_atk) return cmd_attack(atk);
        if (*c_ev) return cmd_eval(ev);
        if (*c_ga) return cmd_gaas(ga);
        if (*c_bo) return cmd_bounds(bo);
        if (*c_red) return cmd_redundancy(red);
        if (*c_ck) return cmd_checklist(ck);
        if (*c_rep) return cmd_report(rep);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
