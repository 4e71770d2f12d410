// Benchmarks the serial reference kernels against the OpenMP variants on
// realistic training-shaped batches (prompts x group-size completions).
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "polyrl/kernels.hpp"
#include "polyrl/policy.hpp"
#include "polyrl/util.hpp"

using namespace polyrl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<kernels::Sequence> make_batch(const ToyTask& task, const PolicyParams& params,
                                          int prompts, int group, std::uint64_t seed) {
    std::vector<kernels::Sequence> seqs;
    util::Rng rng(seed);
    for (int p = 0; p < prompts; ++p) {
        const auto& item =
            task.items()[util::uniform_below(rng, task.items().size())];
        auto completions = sample_k(params, task.vocab(), item.prompt, group,
                                    util::hash_combine(seed, static_cast<std::uint64_t>(p)), 48);
        for (auto& c : completions) seqs.push_back({item.prompt, std::move(c.token_ids)});
    }
    return seqs;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto start = Clock::now();
        fn();
        best = std::min(best, seconds_since(start));
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    const int prompts = argc > 1 ? std::atoi(argv[1]) : 16;
    const int group = argc > 2 ? std::atoi(argv[2]) : 16;
    const int reps = argc > 3 ? std::atoi(argv[3]) : 5;

    ToyTask task;
    PolicyParams params = PolicyParams::init(task.vocab());
    // light random weights so softmaxes are non-degenerate
    util::Rng rng(7);
    for (auto& w : params.weights)
        w = 0.05 * (util::uniform_double(rng) - 0.5);

    const auto seqs = make_batch(task, params, prompts, group, 42);
    std::size_t tokens = 0;
    for (const auto& s : seqs) tokens += s.tokens.size();

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("batch: %zu sequences, %zu tokens\n", seqs.size(), tokens);

    std::vector<double> lp_serial(seqs.size()), lp_par(seqs.size());
    const double t_lp_serial = time_best_of(
        reps, [&] { kernels::serial::batch_logprob(params, seqs, lp_serial); });
    const double t_lp_par =
        time_best_of(reps, [&] { kernels::par::batch_logprob(params, seqs, lp_par); });

    double max_dev = 0.0;
    for (std::size_t j = 0; j < seqs.size(); ++j)
        max_dev = std::max(max_dev, std::abs(lp_serial[j] - lp_par[j]));

    std::printf("batch_logprob   serial %8.3f ms   omp %8.3f ms   speedup %.2fx   max|dev| %.3g\n",
                1e3 * t_lp_serial, 1e3 * t_lp_par, t_lp_serial / t_lp_par, max_dev);

    std::vector<double> coefs(seqs.size(), 1.0 / static_cast<double>(seqs.size()));
    std::vector<double> grad_serial(params.weights.size());
    std::vector<double> grad_par(params.weights.size());
    const double t_g_serial = time_best_of(reps, [&] {
        std::fill(grad_serial.begin(), grad_serial.end(), 0.0);
        kernels::serial::accumulate_grad(params, seqs, coefs, grad_serial);
    });
    const double t_g_par = time_best_of(reps, [&] {
        std::fill(grad_par.begin(), grad_par.end(), 0.0);
        kernels::par::accumulate_grad(params, seqs, coefs, grad_par);
    });

    max_dev = 0.0;
    for (std::size_t i = 0; i < grad_serial.size(); ++i)
        max_dev = std::max(max_dev, std::abs(grad_serial[i] - grad_par[i]));

    std::printf("accumulate_grad serial %8.3f ms   omp %8.3f ms   speedup %.2fx   max|dev| %.3g\n",
                1e3 * t_g_serial, 1e3 * t_g_par, t_g_serial / t_g_par, max_dev);
    return 0;
}
