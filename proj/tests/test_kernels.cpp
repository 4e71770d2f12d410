#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "polyrl/kernels.hpp"
#include "polyrl/policy.hpp"
#include "polyrl/util.hpp"

using namespace polyrl;

namespace {

std::vector<kernels::Sequence> training_shaped_batch(const ToyTask& task,
                                                     const PolicyParams& params,
                                                     int prompts, int group,
                                                     std::uint64_t seed) {
    std::vector<kernels::Sequence> seqs;
    util::Rng rng(seed);
    for (int p = 0; p < prompts; ++p) {
        const auto& item = task.items()[util::uniform_below(rng, task.items().size())];
        for (auto& c : sample_k(params, task.vocab(), item.prompt, group,
                                util::hash_combine(seed, static_cast<std::uint64_t>(p)),
                                48))
            seqs.push_back({item.prompt, std::move(c.token_ids)});
    }
    return seqs;
}

PolicyParams random_params(std::uint64_t seed) {
    PolicyParams p = PolicyParams::init(ToyVocab::standard());
    util::Rng rng(seed);
    for (auto& w : p.weights) w = 0.1 * (util::uniform_double(rng) - 0.5);
    return p;
}

} // namespace

TEST_CASE("parallel batch_logprob is bitwise identical to the serial reference") {
    ToyTask task;
    const PolicyParams params = random_params(3);
    const auto seqs = training_shaped_batch(task, params, 6, 8, 17);

    std::vector<double> serial(seqs.size()), par(seqs.size());
    kernels::serial::batch_logprob(params, seqs, serial);
    kernels::par::batch_logprob(params, seqs, par);
    for (std::size_t j = 0; j < seqs.size(); ++j) CHECK(serial[j] == par[j]);
}

TEST_CASE("parallel accumulate_grad matches the serial reference to 1e-12") {
    ToyTask task;
    const PolicyParams params = random_params(5);
    const auto seqs = training_shaped_batch(task, params, 6, 8, 19);
    std::vector<double> coefs(seqs.size());
    util::Rng rng(7);
    for (auto& c : coefs) c = util::uniform_double(rng) - 0.5;

    std::vector<double> serial(params.weights.size(), 0.0);
    std::vector<double> par(params.weights.size(), 0.0);
    kernels::serial::accumulate_grad(params, seqs, coefs, serial);
    kernels::par::accumulate_grad(params, seqs, coefs, par);

    double largest = 0.0;
    for (std::size_t i = 0; i < serial.size(); ++i) {
        largest = std::max(largest, std::abs(serial[i]));
        CHECK(std::abs(serial[i] - par[i]) <= 1e-12);
    }
    CHECK(largest > 0.0); // the batch actually produced gradient signal
}

TEST_CASE("parallel accumulate_grad is reproducible run to run") {
    ToyTask task;
    const PolicyParams params = random_params(9);
    const auto seqs = training_shaped_batch(task, params, 4, 8, 23);
    const std::vector<double> coefs(seqs.size(), 0.125);

    std::vector<double> a(params.weights.size(), 0.0);
    std::vector<double> b(params.weights.size(), 0.0);
    kernels::par::accumulate_grad(params, seqs, coefs, a);
    kernels::par::accumulate_grad(params, seqs, coefs, b);
    CHECK(a == b);
}

TEST_CASE("accumulate_grad adds into the output buffer") {
    ToyTask task;
    const PolicyParams params = random_params(11);
    const auto seqs = training_shaped_batch(task, params, 2, 4, 29);
    const std::vector<double> coefs(seqs.size(), 1.0);

    std::vector<double> once(params.weights.size(), 0.0);
    kernels::serial::accumulate_grad(params, seqs, coefs, once);
    std::vector<double> twice = once;
    kernels::serial::accumulate_grad(params, seqs, coefs, twice);
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("empty batch is a no-op") {
    const PolicyParams params = random_params(13);
    std::vector<kernels::Sequence> empty;
    std::vector<double> out;
    kernels::par::batch_logprob(params, empty, out);
    std::vector<double> grad(params.weights.size(), 0.0);
    kernels::par::accumulate_grad(params, empty, {}, grad);
    for (double g : grad) CHECK(g == 0.0);
}
