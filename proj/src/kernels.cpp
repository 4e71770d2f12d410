#include "polyrl/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "polyrl/core.hpp"

namespace polyrl::kernels {

namespace {

// Accumulates active feature rows into logits (pre-temperature).
void position_logits(const PolicyParams& params,
                     const std::array<std::uint32_t, kActiveFeatures>& rows,
                     double* logits) {
    const int v_size = params.vocab_size;
    std::fill(logits, logits + v_size, 0.0);
    for (std::uint32_t f : rows) {
        const double* row = params.row(f);
        for (int v = 0; v < v_size; ++v) logits[v] += row[v];
    }
}

// Returns logprob of `target`; fills probs when non-null.
double position_logprob(const PolicyParams& params, double* logits, int target,
                        double* probs) {
    const int v_size = params.vocab_size;
    const double inv_t = 1.0 / params.temperature;
    double max_z = -1e300;
    for (int v = 0; v < v_size; ++v) {
        logits[v] *= inv_t;
        max_z = std::max(max_z, logits[v]);
    }
    double sum = 0.0;
    for (int v = 0; v < v_size; ++v) sum += std::exp(logits[v] - max_z);
    const double log_z = max_z + std::log(sum);
    if (probs) {
        for (int v = 0; v < v_size; ++v) probs[v] = std::exp(logits[v] - log_z);
    }
    return logits[target] - log_z;
}

double sequence_logprob(const PolicyParams& params, const Sequence& seq,
                        std::vector<double>& logits) {
    double total = 0.0;
    int prev = -1; // BOS resolved inside active_features
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
        const int target = seq.tokens[t];
        if (target < 0 || target >= params.vocab_size)
            throw data_error("unknown token id " + std::to_string(target));
        std::array<std::uint32_t, kActiveFeatures> rows;
        active_features(seq.prompt, static_cast<int>(t), prev, params.feature_dim, rows);
        position_logits(params, rows, logits.data());
        total += position_logprob(params, logits.data(), target, nullptr);
        prev = target;
    }
    return total;
}

// grad += coef * d logprob(seq) / d weights
void sequence_grad(const PolicyParams& params, const Sequence& seq, double coef,
                   std::vector<double>& logits, std::vector<double>& probs,
                   double* grad) {
    const int v_size = params.vocab_size;
    const double inv_t = 1.0 / params.temperature;
    int prev = -1;
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
        const int target = seq.tokens[t];
        if (target < 0 || target >= v_size)
            throw data_error("unknown token id " + std::to_string(target));
        std::array<std::uint32_t, kActiveFeatures> rows;
        active_features(seq.prompt, static_cast<int>(t), prev, params.feature_dim, rows);
        position_logits(params, rows, logits.data());
        position_logprob(params, logits.data(), target, probs.data());
        const double scale = coef * inv_t;
        for (std::uint32_t f : rows) {
            double* grow = grad + static_cast<std::size_t>(f) * static_cast<std::size_t>(v_size);
            for (int v = 0; v < v_size; ++v) grow[v] -= scale * probs[v];
            grow[target] += scale;
        }
        prev = target;
    }
}

} // namespace

namespace serial {

void batch_logprob(const PolicyParams& params, std::span<const Sequence> seqs,
                   std::span<double> out) {
    std::vector<double> logits(static_cast<std::size_t>(params.vocab_size));
    for (std::size_t j = 0; j < seqs.size(); ++j)
        out[j] = sequence_logprob(params, seqs[j], logits);
}

void accumulate_grad(const PolicyParams& params, std::span<const Sequence> seqs,
                     std::span<const double> coefs, std::span<double> grad) {
    std::vector<double> logits(static_cast<std::size_t>(params.vocab_size));
    std::vector<double> probs(static_cast<std::size_t>(params.vocab_size));
    for (std::size_t j = 0; j < seqs.size(); ++j)
        sequence_grad(params, seqs[j], coefs[j], logits, probs, grad.data());
}

} // namespace serial

namespace par {

void batch_logprob(const PolicyParams& params, std::span<const Sequence> seqs,
                   std::span<double> out) {
#ifdef _OPENMP
    const auto n = static_cast<std::ptrdiff_t>(seqs.size());
#pragma omp parallel
    {
        std::vector<double> logits(static_cast<std::size_t>(params.vocab_size));
#pragma omp for schedule(static)
        for (std::ptrdiff_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j)] =
                sequence_logprob(params, seqs[static_cast<std::size_t>(j)], logits);
    }
#else
    serial::batch_logprob(params, seqs, out);
#endif
}

void accumulate_grad(const PolicyParams& params, std::span<const Sequence> seqs,
                     std::span<const double> coefs, std::span<double> grad) {
#ifdef _OPENMP
    const int n_threads = std::min<int>(omp_get_max_threads(),
                                        std::max<int>(1, static_cast<int>(seqs.size())));
    const std::size_t n_params = grad.size();
    std::vector<std::vector<double>> partials(
        static_cast<std::size_t>(n_threads),
        std::vector<double>(n_params, 0.0));

#pragma omp parallel num_threads(n_threads)
    {
        std::vector<double> logits(static_cast<std::size_t>(params.vocab_size));
        std::vector<double> probs(static_cast<std::size_t>(params.vocab_size));
        double* local = partials[static_cast<std::size_t>(omp_get_thread_num())].data();
        const auto n = static_cast<std::ptrdiff_t>(seqs.size());
#pragma omp for schedule(static)
        for (std::ptrdiff_t j = 0; j < n; ++j)
            sequence_grad(params, seqs[static_cast<std::size_t>(j)],
                          coefs[static_cast<std::size_t>(j)], logits, probs, local);
    }
    // thread-ordered reduction keeps runs with equal thread counts bitwise equal
    for (const auto& partial : partials)
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += partial[i];
#else
    serial::accumulate_grad(params, seqs, coefs, grad);
#endif
}

} // namespace par

} // namespace polyrl::kernels
