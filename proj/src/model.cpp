#include "d3/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/io.hpp"
#include "d3/parallel.hpp"

namespace d3 {

using nlohmann::json;

ClassifierT<double> to_double(const Classifier& c) {
    auto d = ClassifierT<double>::make(c.arch, c.mask, c.member);
    for (std::size_t i = 0; i < c.params.size(); ++i)
        d.params[i] = cast_tensor<double>(c.params[i]);
    d.epochs_trained = c.epochs_trained;
    d.best_val_auc = c.best_val_auc;
    return d;
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores/labels length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: both classes must be present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);  // 1-based
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<double> classifier_scores(const Classifier& clf, const std::vector<Sample>& samples) {
    std::vector<double> out(samples.size());
    parallel_for(static_cast<std::int64_t>(samples.size()), [&](std::int64_t i) {
        out[i] = clf.forward(samples[i].pixels);
    });
    return out;
}

double classifier_auc(const Classifier& clf, const std::vector<Sample>& samples) {
    std::vector<int> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
    return auc_roc(classifier_scores(clf, samples), labels);
}

namespace {

struct Adam {
    double lr, beta1, beta2, eps;
    int t = 0;
    std::vector<TensorF> m, v;

    explicit Adam(const Classifier& clf, const TrainConfig& cfg)
        : lr(cfg.lr), beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.adam_eps) {
        for (const auto& p : clf.params) {
            m.emplace_back(p.shape);
            v.emplace_back(p.shape);
        }
    }

    void step(std::vector<TensorF>& params, const std::vector<TensorF>& grads) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (std::size_t p = 0; p < params.size(); ++p) {
            float* w = params[p].data.data();
            float* mp = m[p].data.data();
            float* vp = v[p].data.data();
            const float* g = grads[p].data.data();
            for (std::size_t i = 0; i < params[p].size(); ++i) {
                mp[i] = static_cast<float>(beta1 * mp[i] + (1.0 - beta1) * g[i]);
                vp[i] = static_cast<float>(beta2 * vp[i] + (1.0 - beta2) * g[i] * g[i]);
                const double mhat = mp[i] / bc1;
                const double vhat = vp[i] / bc2;
                w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

// l_inf PGD from the clean point, used to harden the model during training.
TensorF pgd_linf_for_training(const Classifier& clf, const TensorF& pixels, int label,
                              double eps, double step, int steps, Classifier::Cache& cache) {
    TensorF x = pixels;
    TensorF grad;
    for (int it = 0; it < steps; ++it) {
        clf.loss_and_pixel_grad(x, label, grad, cache);
        for (std::size_t i = 0; i < x.size(); ++i) {
            float v = x.data[i] + static_cast<float>(step) *
                                      (grad.data[i] > 0 ? 1.0f : (grad.data[i] < 0 ? -1.0f : 0.0f));
            const float lo = std::max(0.0f, pixels.data[i] - static_cast<float>(eps));
            const float hi = std::min(1.0f, pixels.data[i] + static_cast<float>(eps));
            x.data[i] = std::min(hi, std::max(lo, v));
        }
    }
    return x;
}

}  // namespace

TrainHistory train(Classifier& clf, const Dataset& ds, const TrainConfig& cfg) {
    if (ds.train.empty() || ds.val.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.lr <= 0) throw std::invalid_argument("train: lr must be positive");
    if (cfg.pgd_steps < 0) throw std::invalid_argument("train: pgd_steps must be >= 0");

    Rng root = Rng::from_seed(cfg.seed);
    clf.init_params(root.stream("init"));
    Adam adam(clf, cfg);
    Rng shuffle_rng = root.stream("shuffle");

    TrainHistory hist;
    std::vector<TensorF> best_params = clf.params;
    double best_auc = -1.0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    std::vector<int> labels_val(ds.val.size());
    for (std::size_t i = 0; i < ds.val.size(); ++i) labels_val[i] = ds.val[i].label;

    std::vector<std::size_t> order(ds.train.size());
    std::iota(order.begin(), order.end(), 0);

    const int batch = std::max(1, cfg.batch_size);
    struct Slot {
        std::vector<TensorF> grads;
        Classifier::Cache cache;
        double loss = 0.0;
    };
    std::vector<Slot> slots(batch);
    for (auto& s : slots) s.grads = clf.zero_param_grads();
    std::vector<TensorF> batch_grads = clf.zero_param_grads();

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const int bsz = static_cast<int>(std::min<std::size_t>(batch, order.size() - start));
            parallel_for(bsz, [&](std::int64_t bi) {
                Slot& slot = slots[bi];
                const Sample& s = ds.train[order[start + bi]];
                TensorF x = s.pixels;
                if (s.label == 1 && cfg.pgd_steps > 0)
                    x = pgd_linf_for_training(clf, s.pixels, s.label, cfg.pgd_eps,
                                              cfg.effective_pgd_step(), cfg.pgd_steps, slot.cache);
                const float logit = clf.forward(x, slot.cache);
                clf.backward(slot.cache, bce_with_logit_grad(logit, s.label), &slot.grads,
                             nullptr);
                slot.loss = bce_with_logit(logit, s.label);
            });
            for (auto& g : batch_grads) g.fill(0.0f);
            double batch_loss = 0.0;
            for (int bi = 0; bi < bsz; ++bi) {
                batch_loss += slots[bi].loss;
                for (std::size_t p = 0; p < batch_grads.size(); ++p)
                    axpy(1.0f, slots[bi].grads[p], batch_grads[p]);
            }
            const float inv = 1.0f / static_cast<float>(bsz);
            for (auto& g : batch_grads)
                for (auto& v : g.data) v *= inv;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch));
            adam.step(clf.params, batch_grads);
            epoch_loss += batch_loss;
            seen += bsz;
        }
        hist.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));

        const std::vector<double> val_scores = classifier_scores(clf, ds.val);
        const double auc = auc_roc(val_scores, labels_val);
        double val_loss = 0.0;
        for (std::size_t i = 0; i < val_scores.size(); ++i)
            val_loss += bce_with_logit(val_scores[i], labels_val[i]);
        val_loss /= static_cast<double>(val_scores.size());
        hist.val_auc.push_back(auc);
        hist.epochs_run = epoch + 1;
        // AUC decides; equal AUC falls back to validation loss so the logits
        // keep calibrating around the decision threshold after ranking saturates
        if (auc > best_auc || (auc == best_auc && val_loss < best_val_loss)) {
            best_auc = auc;
            best_val_loss = val_loss;
            best_epoch = epoch;
            best_params = clf.params;
        } else if (epoch - best_epoch >= cfg.patience) {
            break;
        }
    }

    clf.params = best_params;
    clf.epochs_trained = hist.epochs_run;
    clf.best_val_auc = best_auc;
    hist.best_epoch = best_epoch;
    hist.best_val_auc = best_auc;
    return hist;
}

namespace {

json arch_to_json(const ArchConfig& a) {
    return json{{"image_side", a.image_side},       {"channels", a.channels},
                {"use_dct", a.use_dct},             {"conv1_channels", a.conv1_channels},
                {"conv2_channels", a.conv2_channels}, {"kernel", a.kernel},
                {"stride", a.stride},               {"pad", a.pad}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.image_side = j.at("image_side").get<int>();
    a.channels = j.at("channels").get<int>();
    a.use_dct = j.at("use_dct").get<bool>();
    a.conv1_channels = j.at("conv1_channels").get<int>();
    a.conv2_channels = j.at("conv2_channels").get<int>();
    a.kernel = j.at("kernel").get<int>();
    a.stride = j.at("stride").get<int>();
    a.pad = j.at("pad").get<int>();
    return a;
}

json train_to_json(const TrainConfig& c) {
    return json{{"lr", c.lr},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_eps", c.adam_eps},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"pgd_steps", c.pgd_steps},
                {"pgd_eps", c.pgd_eps},
                {"pgd_step", c.pgd_step},
                {"seed", c.seed}};
}

TrainConfig train_from_json(const json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.pgd_steps = j.at("pgd_steps").get<int>();
    c.pgd_eps = j.at("pgd_eps").get<double>();
    c.pgd_step = j.at("pgd_step").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Classifier& clf, const TrainConfig& cfg, const std::string& path) {
    json h;
    h["arch"] = arch_to_json(clf.arch);
    h["mask"] = json::parse(mask_to_json(clf.mask));
    h["member"] = clf.member;
    h["train"] = train_to_json(cfg);
    h["metrics"] = {{"epochs_trained", clf.epochs_trained}, {"best_val_auc", clf.best_val_auc}};
    h["param_count"] = clf.param_count();
    h["version"] = kCheckpointVersion;

    ByteWriter w;
    w.str("D3MD");
    w.u16(kCheckpointVersion);
    const std::string header = h.dump();
    w.u32(static_cast<std::uint32_t>(header.size()));
    w.str(header);
    ByteWriter payload;
    for (const auto& p : clf.params)
        for (float v : p.data) payload.f32(v);
    w.str(payload.bytes);
    w.u32(crc32(payload.bytes));
    write_file(path, w.bytes);
}

Classifier load_checkpoint(const std::string& path, TrainConfig* cfg_out) {
    const std::string bytes = read_file(path);
    ByteReader r(bytes);
    if (r.str(4) != "D3MD") throw std::runtime_error("bad magic in checkpoint file: " + path);
    if (r.u16() != kCheckpointVersion)
        throw std::runtime_error("version mismatch in checkpoint file: " + path);
    const std::uint32_t hlen = r.u32();
    json h = json::parse(r.str(hlen));

    Classifier clf = Classifier::make(arch_from_json(h.at("arch")),
                                      mask_from_json(h.at("mask").dump()),
                                      h.at("member").get<int>());
    clf.epochs_trained = h.at("metrics").at("epochs_trained").get<int>();
    clf.best_val_auc = h.at("metrics").at("best_val_auc").get<double>();
    if (cfg_out) *cfg_out = train_from_json(h.at("train"));

    const std::size_t count = h.at("param_count").get<std::size_t>();
    if (count != clf.param_count())
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    const std::size_t payload_len = count * 4;
    if (r.remaining() < payload_len + 4) throw std::runtime_error("truncated file: " + path);
    const std::string payload = bytes.substr(r.pos, payload_len);
    ByteReader pr(payload);
    for (auto& p : clf.params)
        for (float& v : p.data) v = pr.f32();
    r.pos += payload_len;
    if (r.u32() != crc32(payload))
        throw std::runtime_error("checksum failure in checkpoint file: " + path);
    return clf;
}

}  // namespace d3
