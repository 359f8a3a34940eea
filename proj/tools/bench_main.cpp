// Benchmark comparing the serial reference path against the OpenMP path for
// the data-parallel kernels: dataset generation, batched DCT, batched
// forward/backward, and a PGD attack loop.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "d3/attacks.hpp"
#include "d3/dataset.hpp"
#include "d3/dct.hpp"
#include "d3/model.hpp"
#include "d3/parallel.hpp"

using namespace d3;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void row(const std::string& name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.1f ms %10.1f ms %8.2fx\n", name.c_str(), serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    const int nthreads = argc > 1 ? std::atoi(argv[1]) : hardware_threads();
    std::printf("threads for parallel runs: %d\n", nthreads);
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    GenConfig gen;
    gen.train_count = 800;
    gen.val_count = 100;
    gen.test_count = 100;
    gen.seed = 1;

    {
        Dataset a, b;
        const double s = time_ms([&] {
            set_threads(1);
            a = generate(gen);
        });
        const double p = time_ms([&] {
            set_threads(nthreads);
            b = generate(gen);
        });
        row("dataset generation (1000)", s, p);
    }

    set_threads(1);
    Dataset ds = generate(gen);
    ArchConfig arch;
    Classifier clf = Classifier::make(arch, full_mask(arch.feature_count()));
    clf.init_params(Rng::from_seed(3).stream("init"));

    {
        const auto basis = DctBasis<float>::make(arch.image_side);
        std::vector<TensorF> specs(ds.train.size());
        auto kernel = [&](std::int64_t i) { dct2(ds.train[i].pixels, basis, specs[i]); };
        const double s = time_ms([&] {
            parallel_for_serial(static_cast<std::int64_t>(ds.train.size()), kernel);
        });
        const double p = time_ms([&] {
            parallel_for_omp(static_cast<std::int64_t>(ds.train.size()), nthreads, kernel);
        });
        row("batched dct2 (800)", s, p);
    }

    {
        std::vector<double> losses(ds.train.size());
        std::vector<TensorF> grads(ds.train.size());
        auto kernel = [&](std::int64_t i) {
            losses[i] =
                clf.loss_and_pixel_grad(ds.train[i].pixels, ds.train[i].label, grads[i]);
        };
        const double s = time_ms([&] {
            parallel_for_serial(static_cast<std::int64_t>(ds.train.size()), kernel);
        });
        const double p = time_ms([&] {
            parallel_for_omp(static_cast<std::int64_t>(ds.train.size()), nthreads, kernel);
        });
        row("forward+backward (800)", s, p);
    }

    {
        ClassifierTarget target(clf, "bench");
        std::vector<Sample> fakes = filter_label(ds.test, 1);
        AttackConfig cfg;
        cfg.kind = AttackKind::pgd;
        cfg.eps = 4.0 / 255.0;
        cfg.steps = 20;
        const double s = time_ms([&] {
            set_threads(1);
            pgd_attack(target, fakes, cfg);
        });
        const double p = time_ms([&] {
            set_threads(nthreads);
            pgd_attack(target, fakes, cfg);
        });
        row("pgd-20 attack (50 fakes)", s, p);
    }

    return 0;
}
