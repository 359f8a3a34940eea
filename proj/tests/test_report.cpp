#include <doctest.h>

#include <numeric>

#include "d3/format.hpp"
#include "d3/report.hpp"
#include "test_util.hpp"

using namespace d3;

TEST_CASE("csv: rfc-4180 escaping") {
    CHECK(csv_row({"a", "b"}) == "a,b\r\n");
    CHECK(csv_row({"a,b"}) == "\"a,b\"\r\n");
    CHECK(csv_row({"say \"hi\""}) == "\"say \"\"hi\"\"\"\r\n");
}

TEST_CASE("saliency_report: zero vector lands in one bin and counts sum to d") {
    const int side = 8, ch = 2;
    SaliencyVector s;
    s.values.assign(side * side * ch, 0.0);
    SaliencyReport rep = saliency_report(s, side, ch, 16);
    CHECK(rep.bin_counts[0] == side * side * ch);
    for (std::size_t b = 1; b < rep.bin_counts.size(); ++b) CHECK(rep.bin_counts[b] == 0);
    for (const auto& hm : rep.heatmaps)
        for (double v : hm) CHECK(v == 0.0);
}

TEST_CASE("saliency_report: bin counts always partition the features") {
    Rng rng = Rng::from_seed(3);
    const int side = 16, ch = 3;
    SaliencyVector s;
    for (int i = 0; i < side * side * ch; ++i) s.values.push_back(rng.next_normal());
    SaliencyReport rep = saliency_report(s, side, ch);
    CHECK(std::accumulate(rep.bin_counts.begin(), rep.bin_counts.end(), 0) == side * side * ch);
    CHECK(rep.heatmaps.size() == static_cast<std::size_t>(ch));

    CHECK_THROWS_AS(saliency_report(s, side, ch + 1), std::invalid_argument);
}

TEST_CASE("saliency_report: heatmap reflects lattice-pitch structure") {
    const int side = 8, ch = 1, pitch = 4;
    SaliencyVector s;
    s.values.assign(side * side, 0.1);
    for (int u = 0; u < side; u += pitch)
        for (int v = 0; v < side; v += pitch) s.values[u * side + v] = 5.0;
    SaliencyReport rep = saliency_report(s, side, ch);
    CHECK(rep.heatmaps[0][0] == doctest::Approx(5.0));
    CHECK(rep.heatmaps[0][4] == doctest::Approx(5.0));
    CHECK(rep.heatmaps[0][1] == doctest::Approx(0.1));
}

TEST_CASE("svg: plots are well-formed and deterministic") {
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series{
        {"a", {{0.1, 0.5}, {0.5, 0.9}, {1.0, 0.99}}},
        {"b", {{0.1, 0.3}, {0.5, 0.6}, {1.0, 0.95}}}};
    const std::string s1 = svg_line_plot("test", "fraction", "auc", series, true);
    const std::string s2 = svg_line_plot("test", "fraction", "auc", series, true);
    CHECK(s1 == s2);
    CHECK(s1.find("<svg") == 0);
    CHECK(s1.find("</svg>") != std::string::npos);
    CHECK(s1.find("polyline") != std::string::npos);

    const std::string hm = svg_heatmap("hm", 4, 4, std::vector<double>(16, 1.0));
    CHECK(hm.find("<svg") == 0);
    CHECK(hm.find("rect") != std::string::npos);
    CHECK_THROWS_AS(svg_heatmap("bad", 4, 4, std::vector<double>(15, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("config hash: stable and sensitive") {
    const std::string h1 = config_hash_of("{\"a\":1}");
    CHECK(h1 == config_hash_of("{\"a\":1}"));
    CHECK(h1 != config_hash_of("{\"a\":2}"));
    CHECK(h1.size() == 16);
}

TEST_CASE("robustness csv: schema-stable header and one row per cell") {
    std::vector<RobustnessRow> rows{{"at1", "pgd", Norm::linf, 0.01, 50, 1.0, 0.5, 0.009, 7}};
    const std::string csv = robustness_csv(rows, "deadbeef00000000");
    CHECK(csv.find("target,attack,norm,eps,steps,natural_acc,adv_acc,mean_norm,seed,config_hash") == 0);
    CHECK(csv.find("at1,pgd,linf,0.01,50,1,0.5,0.009,7,deadbeef00000000") != std::string::npos);
}

TEST_CASE("redundancy_curve: rejects bad fractions") {
    GenConfig gen = test::tiny_gen(8, 16, 8, 8, 3);
    Dataset ds = generate(gen);
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.pgd_steps = 0;
    CHECK_THROWS_AS(
        redundancy_curve(ds, {1.5}, FeatureSpace::frequency, 1, cfg, test::tiny_arch(8, 2)),
        std::invalid_argument);
    CHECK_THROWS_AS(
        redundancy_curve(ds, {0.001}, FeatureSpace::frequency, 1, cfg, test::tiny_arch(8, 2)),
        std::invalid_argument);
}
