#include "d3/report.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/format.hpp"
#include "d3/io.hpp"
#include "d3/rng.hpp"

namespace d3 {

using nlohmann::json;

std::string space_name(FeatureSpace s) { return s == FeatureSpace::frequency ? "frequency" : "pixel"; }

FeatureSpace space_from_name(const std::string& s) {
    if (s == "frequency") return FeatureSpace::frequency;
    if (s == "pixel") return FeatureSpace::pixel;
    throw std::invalid_argument("unknown feature space: " + s);
}

std::vector<CurvePoint> redundancy_curve(const Dataset& ds, const std::vector<double>& fractions,
                                         FeatureSpace space, std::uint64_t seed,
                                         const TrainConfig& base, const ArchConfig& arch_base) {
    const int d = ds.config.feature_count();
    std::vector<CurvePoint> out;
    for (double f : fractions) {
        if (f <= 0.0 || f > 1.0)
            throw std::invalid_argument("redundancy: fractions must be in (0,1]");
        if (f * d < 4.0) throw std::invalid_argument("redundancy: fraction keeps fewer than 4 features");
        ArchConfig arch = arch_base;
        arch.image_side = ds.config.image_side;
        arch.channels = ds.config.channels;
        arch.use_dct = space == FeatureSpace::frequency;
        PartitionMask mask = f >= 1.0 ? full_mask(d)
                                      : random_partition(d, 1, seed ^ detail::fnv1a64(space_name(space)),
                                                         f);
        Classifier clf = Classifier::make(arch, mask, 0);
        TrainConfig cfg = base;
        cfg.seed = seed;
        train(clf, ds, cfg);
        out.push_back({f, classifier_auc(clf, ds.test)});
    }
    return out;
}

std::string redundancy_csv(const std::vector<std::pair<FeatureSpace, std::vector<CurvePoint>>>& curves,
                           std::uint64_t seed, const std::string& config_hash) {
    std::string out = csv_row({"space", "fraction", "test_auc", "seed", "config_hash"});
    for (const auto& [space, points] : curves)
        for (const CurvePoint& p : points)
            out += csv_row({space_name(space), fmt_double(p.fraction), fmt_double(p.auc),
                            std::to_string(seed), config_hash});
    return out;
}

SaliencyReport saliency_report(const SaliencyVector& s, int side, int channels, int bins) {
    const int d = static_cast<int>(s.values.size());
    if (d != side * side * channels)
        throw std::invalid_argument("saliency_report: grid shape does not match saliency length");
    SaliencyReport rep;
    rep.side = side;
    rep.channels = channels;

    double max_mag = 0.0;
    for (double v : s.values) max_mag = std::max(max_mag, std::abs(v));
    const double hi = max_mag > 0 ? max_mag : 1.0;
    rep.bin_edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) rep.bin_edges[b] = hi * b / bins;
    rep.bin_counts.assign(bins, 0);
    for (double v : s.values) {
        int b = max_mag > 0 ? static_cast<int>(std::abs(v) / hi * bins) : 0;
        if (b >= bins) b = bins - 1;
        ++rep.bin_counts[b];
    }

    rep.heatmaps.assign(channels, std::vector<double>(static_cast<std::size_t>(side) * side));
    for (int u = 0; u < side; ++u)
        for (int v = 0; v < side; ++v)
            for (int c = 0; c < channels; ++c)
                rep.heatmaps[c][static_cast<std::size_t>(u) * side + v] =
                    std::abs(s.values[(static_cast<std::size_t>(u) * side + v) * channels + c]);
    return rep;
}

std::string saliency_histogram_csv(const SaliencyReport& rep) {
    std::string out = csv_row({"bin_lo", "bin_hi", "count"});
    for (std::size_t b = 0; b + 1 < rep.bin_edges.size(); ++b)
        out += csv_row({fmt_double(rep.bin_edges[b]), fmt_double(rep.bin_edges[b + 1]),
                        std::to_string(rep.bin_counts[b])});
    return out;
}

std::string saliency_heatmap_csv(const SaliencyReport& rep) {
    std::string out = csv_row({"channel", "u", "v", "magnitude"});
    for (int c = 0; c < rep.channels; ++c)
        for (int u = 0; u < rep.side; ++u)
            for (int v = 0; v < rep.side; ++v)
                out += csv_row({std::to_string(c), std::to_string(u), std::to_string(v),
                                fmt_double(rep.heatmaps[c][static_cast<std::size_t>(u) * rep.side + v])});
    return out;
}

std::vector<RobustnessRow> robustness_table(
    const std::vector<std::pair<std::string, const AttackTarget*>>& targets,
    const std::vector<AttackConfig>& attacks, const std::vector<Sample>& deepfakes) {
    std::vector<RobustnessRow> rows;
    for (const auto& [name, target] : targets)
        for (const AttackConfig& cfg : attacks) {
            const AttackResult res = run_attack(*target, deepfakes, cfg);
            rows.push_back({name, attack_name(cfg.kind), cfg.norm, cfg.eps, cfg.steps,
                            res.natural_accuracy, res.adversarial_accuracy, res.mean_norm,
                            cfg.seed});
        }
    return rows;
}

std::string robustness_csv(const std::vector<RobustnessRow>& rows, const std::string& config_hash) {
    std::string out = csv_row({"target", "attack", "norm", "eps", "steps", "natural_acc",
                               "adv_acc", "mean_norm", "seed", "config_hash"});
    for (const RobustnessRow& r : rows)
        out += csv_row({r.target, r.attack, norm_name(r.norm), fmt_double(r.eps),
                        std::to_string(r.steps), fmt_double(r.natural_acc), fmt_double(r.adv_acc),
                        fmt_double(r.mean_norm), std::to_string(r.seed), config_hash});
    return out;
}

std::string robustness_json(const std::vector<RobustnessRow>& rows) {
    json arr = json::array();
    for (const RobustnessRow& r : rows)
        arr.push_back({{"target", r.target},
                       {"attack", r.attack},
                       {"norm", norm_name(r.norm)},
                       {"eps", r.eps},
                       {"steps", r.steps},
                       {"natural_acc", r.natural_acc},
                       {"adv_acc", r.adv_acc},
                       {"mean_norm", r.mean_norm},
                       {"seed", r.seed}});
    return arr.dump(2) + "\n";
}

namespace {

constexpr int kPlotW = 640, kPlotH = 420, kMargin = 56;

double map_x(double x, double lo, double hi) {
    return kMargin + (x - lo) / (hi - lo) * (kPlotW - 2 * kMargin);
}
double map_y(double y, double lo, double hi) {
    return kPlotH - kMargin - (y - lo) / (hi - lo) * (kPlotH - 2 * kMargin);
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& xlabel,
                          const std::string& ylabel,
                          const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                          bool log_x) {
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& [name, pts] : series)
        for (auto [x, y] : pts) {
            const double xv = log_x ? std::log10(std::max(x, 1e-12)) : x;
            xlo = std::min(xlo, xv);
            xhi = std::max(xhi, xv);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
    if (xhi <= xlo) xhi = xlo + 1;
    if (yhi <= ylo) yhi = ylo + 1;
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(kPlotW) + "\" height=\"" + std::to_string(kPlotH) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + std::to_string(kPlotW / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         title + "</text>\n";
    // axes
    s += "<line x1=\"" + fmt_double(kMargin) + "\" y1=\"" + fmt_double(kPlotH - kMargin) +
         "\" x2=\"" + fmt_double(kPlotW - kMargin) + "\" y2=\"" + fmt_double(kPlotH - kMargin) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fmt_double(kMargin) + "\" y1=\"" + fmt_double(kMargin) + "\" x2=\"" +
         fmt_double(kMargin) + "\" y2=\"" + fmt_double(kPlotH - kMargin) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + std::to_string(kPlotW / 2) + "\" y=\"" + std::to_string(kPlotH - 12) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + xlabel + (log_x ? " (log10)" : "") +
         "</text>\n";
    s += "<text x=\"16\" y=\"" + std::to_string(kPlotH / 2) +
         "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " +
         std::to_string(kPlotH / 2) + ")\">" + ylabel + "</text>\n";
    // tick labels at the corners of the data range
    s += "<text x=\"" + fmt_double(kMargin) + "\" y=\"" + std::to_string(kPlotH - kMargin + 16) +
         "\" font-size=\"10\">" + fmt_double(log_x ? std::pow(10, xlo) : xlo) + "</text>\n";
    s += "<text x=\"" + fmt_double(kPlotW - kMargin) + "\" y=\"" +
         std::to_string(kPlotH - kMargin + 16) + "\" text-anchor=\"end\" font-size=\"10\">" +
         fmt_double(log_x ? std::pow(10, xhi) : xhi) + "</text>\n";
    s += "<text x=\"" + std::to_string(kMargin - 4) + "\" y=\"" + fmt_double(map_y(ylo, ylo, yhi)) +
         "\" text-anchor=\"end\" font-size=\"10\">" + fmt_double(ylo) + "</text>\n";
    s += "<text x=\"" + std::to_string(kMargin - 4) + "\" y=\"" + fmt_double(map_y(yhi, ylo, yhi)) +
         "\" text-anchor=\"end\" font-size=\"10\">" + fmt_double(yhi) + "</text>\n";

    int ci = 0;
    for (const auto& [name, pts] : series) {
        const char* color = kSeriesColors[ci % 8];
        std::string poly;
        for (auto [x, y] : pts) {
            const double xv = log_x ? std::log10(std::max(x, 1e-12)) : x;
            poly += fmt_double(map_x(xv, xlo, xhi)) + "," + fmt_double(map_y(y, ylo, yhi)) + " ";
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
             poly + "\"/>\n";
        s += "<text x=\"" + std::to_string(kPlotW - kMargin + 4) + "\" y=\"" +
             std::to_string(kMargin + 14 * ci) + "\" font-size=\"10\" fill=\"" + color + "\">" +
             name + "</text>\n";
        ++ci;
    }
    s += "</svg>\n";
    return s;
}

std::string svg_heatmap(const std::string& title, int rows, int cols,
                        const std::vector<double>& values) {
    if (static_cast<int>(values.size()) != rows * cols)
        throw std::invalid_argument("svg_heatmap: value count does not match grid");
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0) vmax = 1.0;
    const int cell = std::max(2, 512 / std::max(rows, cols));
    const int w = cols * cell, h = rows * cell + 24;
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\">\n";
    s += "<text x=\"4\" y=\"14\" font-size=\"12\">" + title + "</text>\n";
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const double t = values[static_cast<std::size_t>(i) * cols + j] / vmax;
            const int r = static_cast<int>(255 * t);
            const int b = static_cast<int>(255 * (1.0 - t));
            s += "<rect x=\"" + std::to_string(j * cell) + "\" y=\"" +
                 std::to_string(24 + i * cell) + "\" width=\"" + std::to_string(cell) +
                 "\" height=\"" + std::to_string(cell) + "\" fill=\"rgb(" + std::to_string(r) +
                 ",64," + std::to_string(b) + ")\"/>\n";
        }
    s += "</svg>\n";
    return s;
}

std::string config_hash_of(const std::string& canonical_json) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(canonical_json)));
    return buf;
}

std::string iso8601_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_experiment_record(const ExperimentRecord& rec, const std::string& path) {
    json j;
    j["experiment_id"] = rec.experiment_id;
    j["command"] = rec.command;
    j["config"] = json::parse(rec.config_json);
    j["config_hash"] = rec.config_hash;
    j["seed"] = rec.seed;
    j["timestamps"] = {{"started", rec.started_at}, {"finished", rec.finished_at}};
    j["outputs"] = rec.outputs;
    write_file(path, j.dump(2) + "\n");
}

}  // namespace d3
