#pragma once

#include <span>
#include <vector>

#include "polyrl/policy.hpp"

namespace polyrl::kernels {

struct Sequence {
    ToyPrompt prompt;
    std::vector<int> tokens;
};

// Serial reference implementations, kept as the oracle for the parallel path.
namespace serial {

void batch_logprob(const PolicyParams& params, std::span<const Sequence> seqs,
                   std::span<double> out);

// grad += sum_j coefs[j] * d logprob(seq_j) / d weights
void accumulate_grad(const PolicyParams& params, std::span<const Sequence> seqs,
                     std::span<const double> coefs, std::span<double> grad);

} // namespace serial

// OpenMP data-parallel implementations. batch_logprob is bitwise identical to
// the serial path (independent per-sequence work); accumulate_grad reduces
// per-thread buffers in thread order, so it matches serial to ~1e-12 and is
// reproducible for a fixed thread count.
namespace par {

void batch_logprob(const PolicyParams& params, std::span<const Sequence> seqs,
                   std::span<double> out);

void accumulate_grad(const PolicyParams& params, std::span<const Sequence> seqs,
                     std::span<const double> coefs, std::span<double> grad);

} // namespace par

// Default dispatch used by training code.
inline void batch_logprob(const PolicyParams& params, std::span<const Sequence> seqs,
                          std::span<double> out) {
    par::batch_logprob(params, seqs, out);
}
inline void accumulate_grad(const PolicyParams& params, std::span<const Sequence> seqs,
                            std::span<const double> coefs, std::span<double> grad) {
    par::accumulate_grad(params, seqs, coefs, grad);
}

} // namespace polyrl::kernels
