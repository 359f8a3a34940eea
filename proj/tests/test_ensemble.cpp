#include <doctest.h>

#include <filesystem>

#include "d3/ensemble.hpp"
#include "test_util.hpp"

using namespace d3;

namespace {

Ensemble make_ensemble(int n, Voting voting, std::uint64_t seed = 3,
                       const ArchConfig& arch = test::tiny_arch()) {
    PartitionMask mask = random_partition(arch.feature_count(), n, seed);
    std::vector<Classifier> members;
    for (int i = 0; i < n; ++i) {
        Classifier c = Classifier::make(arch, mask, i);
        c.init_params(Rng::from_seed(seed + i).stream("init"));
        members.push_back(std::move(c));
    }
    return Ensemble(std::move(members), voting);
}

}  // namespace

TEST_CASE("vote_fake: rule arithmetic on fixed logits") {
    CHECK(vote_fake({3.0, -1.0}, Voting::mean_logit, 0.0));    // mean +1
    CHECK(vote_fake({3.0, -1.0}, Voting::at_least_one, 0.0));
    CHECK(vote_fake({3.0, -1.0}, Voting::majority, 0.0));      // need 1 of 2

    const std::vector<double> logits{-3.0, 1.0, -1.0, -1.0};
    CHECK_FALSE(vote_fake(logits, Voting::mean_logit, 0.0));   // mean -1
    CHECK(vote_fake(logits, Voting::at_least_one, 0.0));
    CHECK_FALSE(vote_fake(logits, Voting::majority, 0.0));     // 1 < 2 votes
}

TEST_CASE("vote_fake: n=1 rules agree, order does not matter") {
    for (double z : {-2.0, 0.5, 3.0}) {
        const bool fake = z > 0.0;
        CHECK(vote_fake({z}, Voting::mean_logit, 0.0) == fake);
        CHECK(vote_fake({z}, Voting::at_least_one, 0.0) == fake);
        CHECK(vote_fake({z}, Voting::majority, 0.0) == fake);
    }
    Rng rng = Rng::from_seed(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits;
        for (int i = 0; i < 5; ++i) logits.push_back(rng.next_normal());
        std::vector<double> shuffled = logits;
        rng.shuffle(shuffled);
        for (Voting v : {Voting::mean_logit, Voting::at_least_one, Voting::majority})
            CHECK(vote_fake(logits, v, 0.0) == vote_fake(shuffled, v, 0.0));
    }
}

TEST_CASE("vote_fake: mean rule is invariant to +c/-c logit shifts") {
    std::vector<double> logits{0.4, -1.2, 0.9};
    for (double c : {0.1, 2.0, -3.5}) {
        std::vector<double> shifted = logits;
        shifted[0] += c;
        shifted[2] -= c;
        CHECK(vote_fake(logits, Voting::mean_logit, 0.0) ==
              vote_fake(shifted, Voting::mean_logit, 0.0));
    }
}

TEST_CASE("ensemble: construction rejects overlapping masks") {
    ArchConfig arch = test::tiny_arch();
    PartitionMask mask = random_partition(arch.feature_count(), 2, 1);
    Classifier a = Classifier::make(arch, mask, 0);
    Classifier b = Classifier::make(arch, mask, 0);  // same member twice
    std::vector<Classifier> members;
    members.push_back(std::move(a));
    members.push_back(std::move(b));
    CHECK_THROWS_AS(Ensemble(std::move(members), Voting::mean_logit), std::invalid_argument);
}

TEST_CASE("ensemble: single member matches the classifier on all rules") {
    ArchConfig arch = test::tiny_arch();
    for (Voting v : {Voting::mean_logit, Voting::at_least_one, Voting::majority}) {
        Ensemble ens = make_ensemble(1, v, 7);
        Rng rng = Rng::from_seed(9);
        TensorF x = test::random_image(arch.image_side, arch.channels, rng);
        Prediction p = predict(ens, x);
        CHECK(p.logits.size() == 1);
        CHECK(p.fake == (ens.members[0].forward(x) > 0.0f));

        TensorF g_e, g_m;
        const double le = ensemble_loss_grad(ens, x, 1, g_e);
        const double lm = ens.members[0].loss_and_pixel_grad(x, 1, g_m);
        CHECK(le == doctest::Approx(lm).epsilon(1e-6));
        CHECK(max_abs_diff(g_e, g_m) < 1e-7);
    }
}

TEST_CASE("ensemble: disjoint gradient decomposes orthogonally (pythagoras)") {
    ArchConfig arch = test::tiny_arch();
    Ensemble ens = make_ensemble(3, Voting::mean_logit, 15);
    Rng rng = Rng::from_seed(20);
    for (int trial = 0; trial < 3; ++trial) {
        TensorF x = test::random_image(arch.image_side, arch.channels, rng);
        TensorF g;
        ensemble_loss_grad(ens, x, 1, g);

        // per-member contributions of the surrogate gradient
        std::vector<double> logits;
        for (const auto& m : ens.members) logits.push_back(m.forward(x));
        double mean = 0;
        for (double z : logits) mean += z;
        mean /= logits.size();
        const float c = bce_with_logit_grad(static_cast<float>(mean), 1) /
                        static_cast<float>(logits.size());
        double sum_sq = 0.0;
        for (const auto& m : ens.members) {
            TensorF gm;
            Classifier::Cache cache;
            m.forward(x, cache);
            m.backward(cache, c, nullptr, &gm);
            sum_sq += dot(gm, gm);
        }
        const double total = dot(g, g);
        CHECK(std::abs(total - sum_sq) / total < 1e-4);
    }
}

TEST_CASE("ensemble: manifest round trip") {
    ArchConfig arch = test::tiny_arch(8, 1);
    PartitionMask mask = random_partition(arch.feature_count(), 2, 2);
    const auto dir = std::filesystem::temp_directory_path();
    std::vector<std::string> names;
    TrainConfig tc;
    for (int i = 0; i < 2; ++i) {
        Classifier c = Classifier::make(arch, mask, i);
        c.init_params(Rng::from_seed(40 + i).stream("init"));
        const std::string name = "member_" + std::to_string(i) + ".d3md";
        save_checkpoint(c, tc, (dir / name).string());
        names.push_back(name);
    }
    const std::string manifest = (dir / "ens.json").string();
    save_manifest(names, Voting::majority, 0.25, manifest);
    Ensemble ens = load_ensemble(manifest);
    CHECK(ens.size() == 2);
    CHECK(ens.voting == Voting::majority);
    CHECK(ens.threshold == doctest::Approx(0.25));
}
