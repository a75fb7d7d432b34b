// Times the OpenMP kernels against their serial reference on the workloads
// that actually parallelize: dense matmul and the per-sample batch loops
// (evaluation, stability report, PGD). Build with OpenMP and set
// SODEF_NUM_THREADS to compare thread counts.

#include <chrono>
#include <cstdio>
#include <functional>

#include "sodef/attacks.hpp"
#include "sodef/data.hpp"
#include "sodef/evaluate.hpp"
#include "sodef/model.hpp"
#include "sodef/parallel.hpp"
#include "sodef/rng.hpp"
#include "sodef/train.hpp"

using namespace sodef;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

Tensor random_matrix(std::size_t n, Rng& rng) {
    Tensor m = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n * n; ++i) m[i] = rng.normal();
    return m;
}

}  // namespace

int main() {
    std::printf("threads: %d\n\n", par::max_threads());
    Rng rng(42);

    for (std::size_t n : {64, 128, 256}) {
        Tensor a = random_matrix(n, rng);
        Tensor b = random_matrix(n, rng);
        char name[64];
        std::snprintf(name, sizeof(name), "matmul %zux%zu", n, n);
        const int reps = n <= 128 ? 20 : 5;
        report(name, time_ms([&] { matmul(a, b, par::Mode::Serial); }, reps),
               time_ms([&] { matmul(a, b, par::Mode::Parallel); }, reps));
    }

    LabeledDataset data = make_blobs(3, 8, 60, 0.5, 7);
    SolverConfig solver;
    solver.kind = SolverKind::Rk38;
    solver.step = 0.05;
    solver.t_end = 5.0;
    SodefModel model = make_model(8, {32}, 8, 3, FieldVariant::Mlp2, HeadKind::Simplex, solver, 7);

    report("evaluate_accuracy 180",
           time_ms([&] { evaluate_accuracy(model, data, par::Mode::Serial); }, 3),
           time_ms([&] { evaluate_accuracy(model, data, par::Mode::Parallel); }, 3));

    report("stability_report 180",
           time_ms([&] { stability_report(model, data, par::Mode::Serial); }, 3),
           time_ms([&] { stability_report(model, data, par::Mode::Parallel); }, 3));

    AttackConfig atk = attack_config_for(data);
    atk.kind = AttackKind::Pgd;
    atk.iters = 5;
    atk.epsilon = 0.2;
    report("pgd(5) batch 180",
           time_ms([&] { adversarial_dataset(model, data, atk, par::Mode::Serial); }, 1),
           time_ms([&] { adversarial_dataset(model, data, atk, par::Mode::Parallel); }, 1));
    return 0;
}
