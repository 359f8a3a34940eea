#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "d3/attacks.hpp"
#include "d3/dataset.hpp"
#include "d3/model.hpp"
#include "d3/partition.hpp"

namespace d3 {

enum class FeatureSpace { frequency, pixel };
std::string space_name(FeatureSpace s);
FeatureSpace space_from_name(const std::string& s);

struct CurvePoint {
    double fraction = 0.0;
    double auc = 0.0;
};

// Train one classifier per fraction on a random fixed feature subset in the
// chosen space and report test AUC.
std::vector<CurvePoint> redundancy_curve(const Dataset& ds, const std::vector<double>& fractions,
                                         FeatureSpace space, std::uint64_t seed,
                                         const TrainConfig& base, const ArchConfig& arch_base);

std::string redundancy_csv(const std::vector<std::pair<FeatureSpace, std::vector<CurvePoint>>>& curves,
                           std::uint64_t seed, const std::string& config_hash);

struct SaliencyReport {
    std::vector<double> bin_edges;
    std::vector<int> bin_counts;
    // per channel, row-major side x side magnitude grids
    std::vector<std::vector<double>> heatmaps;
    int side = 0;
    int channels = 0;
};

SaliencyReport saliency_report(const SaliencyVector& s, int side, int channels, int bins = 32);
std::string saliency_histogram_csv(const SaliencyReport& rep);
std::string saliency_heatmap_csv(const SaliencyReport& rep);

struct RobustnessRow {
    std::string target;
    std::string attack;
    Norm norm = Norm::linf;
    double eps = 0.0;
    int steps = 0;
    double natural_acc = 0.0;
    double adv_acc = 0.0;
    double mean_norm = 0.0;
    std::uint64_t seed = 0;
};

std::vector<RobustnessRow> robustness_table(
    const std::vector<std::pair<std::string, const AttackTarget*>>& targets,
    const std::vector<AttackConfig>& attacks, const std::vector<Sample>& deepfakes);

std::string robustness_csv(const std::vector<RobustnessRow>& rows, const std::string& config_hash);
std::string robustness_json(const std::vector<RobustnessRow>& rows);

// Minimal SVG 1.1 writers; CSV stays the canonical output.
std::string svg_line_plot(const std::string& title, const std::string& xlabel,
                          const std::string& ylabel,
                          const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                          bool log_x = false);
std::string svg_heatmap(const std::string& title, int rows, int cols,
                        const std::vector<double>& values);

// Run envelope written next to every CLI output. Rows in result files carry
// the seed and config hash; wall-clock timestamps live only here.
struct ExperimentRecord {
    std::string experiment_id;
    std::string command;
    std::string config_json;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;
};

std::string config_hash_of(const std::string& canonical_json);
std::string iso8601_now();
void write_experiment_record(const ExperimentRecord& rec, const std::string& path);

}  // namespace d3
