#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "d3/grad_check.hpp"
#include "d3/io.hpp"
#include "d3/model.hpp"
#include "test_util.hpp"

using namespace d3;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Classifier make_random_classifier(const ArchConfig& arch, const PartitionMask& mask, int member,
                                  std::uint64_t seed) {
    Classifier c = Classifier::make(arch, mask, member);
    c.init_params(Rng::from_seed(seed).stream("init"));
    return c;
}

}  // namespace

TEST_CASE("forward: zero parameters leave only the bias") {
    ArchConfig arch = test::tiny_arch();
    Classifier clf = Classifier::make(arch, full_mask(arch.feature_count()));
    clf.params[5].data[0] = 1.25f;
    Rng rng = Rng::from_seed(4);
    for (int i = 0; i < 3; ++i) {
        TensorF x = test::random_image(arch.image_side, arch.channels, rng);
        CHECK(clf.forward(x) == doctest::Approx(1.25).epsilon(1e-6));
    }
}

TEST_CASE("forward: perturbing a frequency outside the mask leaves the logit unchanged") {
    ArchConfig arch = test::tiny_arch();
    const int d = arch.feature_count();
    PartitionMask mask = random_partition(d, 2, 9);
    Classifier clf = make_random_classifier(arch, mask, 0, 1);

    Rng rng = Rng::from_seed(8);
    TensorF x = test::random_image(arch.image_side, arch.channels, rng);
    TensorF z = clf.to_spectrum(x);
    Classifier::Cache cache;
    const float before = clf.forward_spectrum(z, cache);

    int outside = -1;
    for (int i = 0; i < d; ++i)
        if (mask.assignment[i] != 0) {
            outside = i;
            break;
        }
    REQUIRE(outside >= 0);
    z.data[outside] += 10.0f;
    CHECK(clf.forward_spectrum(z, cache) == doctest::Approx(before).epsilon(1e-7));
}

TEST_CASE("forward: disjoint members have orthogonal pixel gradients") {
    ArchConfig arch = test::tiny_arch();
    const int d = arch.feature_count();
    PartitionMask mask = random_partition(d, 2, 10);
    Classifier a = make_random_classifier(arch, mask, 0, 2);
    Classifier b = make_random_classifier(arch, mask, 1, 3);

    Rng rng = Rng::from_seed(12);
    for (int i = 0; i < 5; ++i) {
        TensorF x = test::random_image(arch.image_side, arch.channels, rng);
        TensorF ga, gb;
        a.loss_and_pixel_grad(x, 1, ga);
        b.loss_and_pixel_grad(x, 1, gb);
        const double na = norm_l2(ga), nb = norm_l2(gb);
        REQUIRE(na > 0);
        REQUIRE(nb > 0);
        CHECK(std::abs(dot(ga, gb)) <= 1e-5 * na * nb);
    }
}

TEST_CASE("classifier gradients pass finite-difference checks in double precision") {
    ArchConfig arch = test::tiny_arch(8, 2);
    const int d = arch.feature_count();
    PartitionMask mask = random_partition(d, 2, 4);
    auto clf = ClassifierT<double>::make(arch, mask, 0);
    clf.init_params(Rng::from_seed(6).stream("init"));

    Rng rng = Rng::from_seed(14);
    TensorD x = test::random_tensor({arch.image_side, arch.image_side, arch.channels}, rng, 0.3);
    for (double& v : x.data) v = 0.5 + 0.4 * std::tanh(v);

    SUBCASE("with respect to pixels") {
        DiffFn f{[&](const TensorD& p) { return clf.loss(p, 1); },
                 [&](const TensorD& p) {
                     TensorD g;
                     clf.loss_and_pixel_grad(p, 1, g);
                     return g;
                 }};
        CHECK(grad_check(f, x, 1e-5) < 1e-4);
    }

    SUBCASE("with respect to parameters") {
        const std::size_t total = clf.param_count();
        TensorD theta({static_cast<int>(total)});
        std::size_t off = 0;
        for (const auto& p : clf.params)
            for (double v : p.data) theta.data[off++] = v;

        auto load_theta = [&](const TensorD& t) {
            auto c = clf;
            std::size_t k = 0;
            for (auto& p : c.params)
                for (double& v : p.data) v = t.data[k++];
            return c;
        };
        DiffFn f{[&](const TensorD& t) { return load_theta(t).loss(x, 1); },
                 [&](const TensorD& t) {
                     auto c = load_theta(t);
                     typename ClassifierT<double>::Cache cache;
                     const double logit = c.forward(x, cache);
                     auto grads = c.zero_param_grads();
                     c.backward(cache, bce_with_logit_grad(logit, 1), &grads, nullptr);
                     TensorD g({static_cast<int>(total)});
                     std::size_t k = 0;
                     for (const auto& pg : grads)
                         for (double v : pg.data) g.data[k++] = v;
                     return g;
                 }};
        CHECK(grad_check(f, theta, 1e-5) < 1e-4);
    }
}

TEST_CASE("adam: first step moves by lr-scaled sign for large gradients") {
    ArchConfig arch = test::tiny_arch(8, 1);
    GenConfig gen = test::tiny_gen(8, 8, 8, 8, 2);
    gen.channels = 1;
    Dataset ds = generate(gen);

    Classifier clf = Classifier::make(arch, full_mask(arch.feature_count()));
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.batch_size = 8;
    cfg.pgd_steps = 0;
    cfg.seed = 5;

    Classifier before = clf;
    before.init_params(Rng::from_seed(cfg.seed).stream("init"));

    // one batch = whole train split, so exactly ceil(8/8)=1 Adam step per epoch
    Dataset one = ds;
    one.train.resize(8);
    train(clf, one, cfg);

    // with zero moments the first update is lr * g/(|g| + eps') per coordinate,
    // i.e. at most lr in magnitude and close to lr for non-tiny gradients
    double max_move = 0.0;
    for (std::size_t p = 0; p < clf.params.size(); ++p)
        for (std::size_t i = 0; i < clf.params[p].size(); ++i)
            max_move = std::max(max_move, std::abs(static_cast<double>(clf.params[p].data[i]) -
                                                   before.params[p].data[i]));
    CHECK(max_move <= cfg.lr * 1.001);
    CHECK(max_move >= cfg.lr * 0.5);
}

TEST_CASE("auc: separable, random, and constant scores") {
    CHECK(auc_roc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(auc_roc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == doctest::Approx(0.0));
    CHECK(auc_roc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));

    Rng rng = Rng::from_seed(3);
    std::vector<double> scores(10000);
    std::vector<int> labels(10000);
    for (int i = 0; i < 10000; ++i) {
        scores[i] = rng.next_double();
        labels[i] = static_cast<int>(rng.next_u64() & 1);
    }
    CHECK(auc_roc(scores, labels) == doctest::Approx(0.5).epsilon(0.04));

    CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {1, 1}), std::invalid_argument);
}

TEST_CASE("train: same seed gives identical parameters") {
    GenConfig gen = test::tiny_gen(8, 64, 32, 32, 21);
    gen.channels = 2;
    Dataset ds = generate(gen);
    ArchConfig arch = test::tiny_arch(8, 2);
    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.pgd_steps = 2;
    cfg.pgd_eps = 2.0 / 255.0;
    cfg.batch_size = 32;
    cfg.seed = 77;

    Classifier a = Classifier::make(arch, full_mask(arch.feature_count()));
    Classifier b = Classifier::make(arch, full_mask(arch.feature_count()));
    train(a, ds, cfg);
    train(b, ds, cfg);
    for (std::size_t p = 0; p < a.params.size(); ++p)
        CHECK(a.params[p].data == b.params[p].data);
}

TEST_CASE("train: learns the planted artifact naturally") {
    GenConfig gen = test::tiny_gen(16, 256, 96, 96, 31);
    Dataset ds = generate(gen);
    ArchConfig arch = test::tiny_arch(16, 2);
    TrainConfig cfg;
    cfg.max_epochs = 8;
    cfg.pgd_steps = 0;
    cfg.batch_size = 64;
    cfg.seed = 1;

    Classifier clf = Classifier::make(arch, full_mask(arch.feature_count()));
    TrainHistory hist = train(clf, ds, cfg);
    CHECK(hist.best_val_auc > 0.95);
    CHECK(classifier_auc(clf, ds.test) > 0.9);
}

TEST_CASE("train: no signal means chance-level AUC") {
    GenConfig gen = test::tiny_gen(16, 128, 64, 64, 41);
    gen.amp_lo = gen.amp_hi = 0.0;
    Dataset ds = generate(gen);
    ArchConfig arch = test::tiny_arch(16, 2);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.pgd_steps = 0;
    cfg.batch_size = 64;
    cfg.seed = 2;

    Classifier clf = Classifier::make(arch, full_mask(arch.feature_count()));
    train(clf, ds, cfg);
    const double auc = classifier_auc(clf, ds.test);
    CHECK(auc > 0.35);
    CHECK(auc < 0.65);
}

TEST_CASE("checkpoint: bit-exact round trip and corrupt rejection") {
    ArchConfig arch = test::tiny_arch();
    PartitionMask mask = random_partition(arch.feature_count(), 2, 13, 0.25);
    Classifier clf = make_random_classifier(arch, mask, 1, 19);
    clf.epochs_trained = 4;
    clf.best_val_auc = 0.987;

    TrainConfig cfg;
    cfg.seed = 19;
    const std::string p1 = temp_path("clf_a.d3md"), p2 = temp_path("clf_b.d3md");
    save_checkpoint(clf, cfg, p1);
    save_checkpoint(clf, cfg, p2);
    CHECK(read_file(p1) == read_file(p2));

    TrainConfig cfg_back;
    Classifier back = load_checkpoint(p1, &cfg_back);
    CHECK(back.member == clf.member);
    CHECK(back.mask.assignment == clf.mask.assignment);
    CHECK(back.epochs_trained == 4);
    CHECK(cfg_back.seed == 19);
    for (std::size_t p = 0; p < clf.params.size(); ++p)
        CHECK(back.params[p].data == clf.params[p].data);

    std::string bad = read_file(p1);
    bad[1] = 'x';
    write_file(p2, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(p2), doctest::Contains("bad magic"), std::runtime_error);

    bad = read_file(p1);
    bad[bad.size() - 10] ^= 0x10;
    write_file(p2, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(p2), doctest::Contains("checksum"), std::runtime_error);
}
