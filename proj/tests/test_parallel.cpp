#include <doctest.h>

#include <vector>

#include "d3/attacks.hpp"
#include "d3/dataset.hpp"
#include "d3/model.hpp"
#include "d3/parallel.hpp"
#include "test_util.hpp"

using namespace d3;

namespace {

struct ThreadGuard {
    int saved;
    explicit ThreadGuard(int n) : saved(threads()) { set_threads(n); }
    ~ThreadGuard() { set_threads(saved); }
};

}  // namespace

TEST_CASE("parallel_for: explicit engines agree on a pointwise kernel") {
    const int n = 10000;
    std::vector<double> a(n), b(n);
    parallel_for_serial(n, [&](std::int64_t i) { a[i] = 42.0 * i + 1.0 / (i + 1); });
    parallel_for_omp(n, 4, [&](std::int64_t i) { b[i] = 42.0 * i + 1.0 / (i + 1); });
    CHECK(a == b);
}

TEST_CASE("parallel_for: exceptions propagate out of the parallel region") {
    CHECK_THROWS_AS(parallel_for_omp(100, 2,
                                     [&](std::int64_t i) {
                                         if (i == 57) throw std::runtime_error("boom");
                                     }),
                    std::runtime_error);
}

TEST_CASE("dataset generation is identical under serial and parallel execution") {
    GenConfig cfg = test::tiny_gen(8, 40, 16, 16, 77);
    Dataset serial, parallel;
    {
        ThreadGuard g(1);
        serial = generate(cfg);
    }
    {
        ThreadGuard g(4);
        parallel = generate(cfg);
    }
    REQUIRE(serial.train.size() == parallel.train.size());
    for (std::size_t i = 0; i < serial.train.size(); ++i) {
        CHECK(serial.train[i].label == parallel.train[i].label);
        CHECK(serial.train[i].pixels.data == parallel.train[i].pixels.data);
    }
}

TEST_CASE("training and scoring are identical under serial and parallel execution") {
    GenConfig gen = test::tiny_gen(8, 48, 24, 24, 99);
    Dataset ds = generate(gen);
    ArchConfig arch = test::tiny_arch(8, 2);
    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.pgd_steps = 2;
    cfg.batch_size = 16;
    cfg.seed = 5;

    Classifier serial_clf = Classifier::make(arch, full_mask(arch.feature_count()));
    Classifier parallel_clf = Classifier::make(arch, full_mask(arch.feature_count()));
    {
        ThreadGuard g(1);
        train(serial_clf, ds, cfg);
    }
    {
        ThreadGuard g(4);
        train(parallel_clf, ds, cfg);
    }
    for (std::size_t p = 0; p < serial_clf.params.size(); ++p)
        CHECK(serial_clf.params[p].data == parallel_clf.params[p].data);

    std::vector<double> s1, s2;
    {
        ThreadGuard g(1);
        s1 = classifier_scores(serial_clf, ds.test);
    }
    {
        ThreadGuard g(4);
        s2 = classifier_scores(serial_clf, ds.test);
    }
    CHECK(s1 == s2);
}

TEST_CASE("attacks are identical under serial and parallel execution") {
    Rng rng = Rng::from_seed(3);
    TensorF w({8, 8, 1});
    for (float& v : w.data) v = rng.next_float() - 0.4f;
    test::LinearTarget target(w, 0.3f, 8, 1);
    auto samples = test::fake_samples(20, 8, 1, 5);
    std::vector<Sample> fakes;
    for (auto& s : samples)
        if (target.predicts_fake(s.pixels)) fakes.push_back(s);

    AttackConfig cfg;
    cfg.kind = AttackKind::apgd_ce;
    cfg.eps = 0.05;
    cfg.steps = 25;
    cfg.seed = 9;

    std::vector<TensorF> a_serial, a_parallel;
    {
        ThreadGuard g(1);
        apgd_ce_attack(target, fakes, cfg, &a_serial);
    }
    {
        ThreadGuard g(4);
        apgd_ce_attack(target, fakes, cfg, &a_parallel);
    }
    REQUIRE(a_serial.size() == a_parallel.size());
    for (std::size_t i = 0; i < a_serial.size(); ++i)
        CHECK(a_serial[i].data == a_parallel[i].data);
}

TEST_CASE("thread resolution: flag wins, then environment, then one") {
    CHECK(resolve_threads(3) == 3);
    setenv("D3_THREADS", "2", 1);
    CHECK(resolve_threads(0) == 2);
    unsetenv("D3_THREADS");
    CHECK(resolve_threads(0) == 1);
}
