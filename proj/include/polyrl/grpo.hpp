#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "polyrl/core.hpp"
#include "polyrl/curriculum.hpp"
#include "polyrl/policy.hpp"
#include "polyrl/reward.hpp"

namespace polyrl {

struct GrpoConfig {
    int group_size = 16;     // G
    double lr = 1e-6;        // paper-parity default; toy profile uses 1e-2
    double warmup_ratio = 0.1;
    double weight_decay = 0.1;
    int batch_prompts = 16;
    int max_steps = 500;
    double clip_eps = 0.2;
    double kl_coeff = 0.04;
    double std_floor = 1e-8;
    int max_prompt_len = 1024;
    int max_completion_len = 1024;
    enum class Optimizer { AdamW, Sgd } optimizer = Optimizer::AdamW;
    int checkpoint_every = 0; // 0 = no intermediate checkpoints
    std::string checkpoint_prefix;

    static GrpoConfig paper_profile();
    static GrpoConfig toy_profile(); // desk-scale lr and sequence caps

    void validate() const;
};

struct GrpoGroup {
    BenchInstance instance;
    ToyPrompt prompt;
    std::vector<Completion> completions; // length G
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::vector<double> old_logprobs;
    std::vector<double> ref_logprobs;
    // component diagnostics (same order as completions)
    std::vector<double> r_acc, r_lang, r_fmt, lc_answer;
};

// A_j = (r_j - mean) / (population std + std_floor); constant groups map to
// zeros. std_floor = 0 gives exact unit-variance normalization.
std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double std_floor = 0.0);

struct GrpoDiagnostics {
    double mean_ratio = 0.0;
    double clip_fraction = 0.0; // fraction with |ratio - 1| > clip_eps
    double mean_kl = 0.0;
};

// Clipped surrogate with a non-negative KL penalty:
//   ratio_j    = exp(new_j - old_j)
//   surr_j     = min(ratio_j * A_j, clip(ratio_j, 1 +- eps) * A_j)
//   kl_j       = exp(ref_j - new_j) - (ref_j - new_j) - 1
//   loss       = -mean(surr) + kl_coeff * mean(kl)
// When dloss_dnew is non-null it receives the per-sample derivative.
double grpo_objective(std::span<const double> new_logprobs,
                      std::span<const double> old_logprobs,
                      std::span<const double> ref_logprobs,
                      std::span<const double> advantages, double clip_eps,
                      double kl_coeff, GrpoDiagnostics* diag = nullptr,
                      std::vector<double>* dloss_dnew = nullptr);

struct TierStepStats {
    double mean_reward = 0.0;
    double lc_answer = 0.0; // answer-only language reward mean
    int count = 0;
};

struct StepRecord {
    int step = 0;
    int phase = 1;
    double loss = 0.0;
    double mean_reward = 0.0;
    double mean_r_acc = 0.0;
    double mean_r_lang = 0.0;
    double mean_r_fmt = 0.0;
    double clip_frac = 0.0;
    double mean_kl = 0.0;
    double lr = 0.0;
    std::map<std::string, TierStepStats> tiers;
};

struct TrainingReport {
    std::vector<StepRecord> records;

    std::string to_ldjson() const;
    std::string digest() const; // sha256 of the serialized report
    void save(const std::string& path) const;
};

struct StepOutcome {
    double loss = 0.0;
    GrpoDiagnostics diag;
    double lr = 0.0;
};

// One optimizer update over all completions in the batch.
StepOutcome grpo_step(PolicyParams& params, const std::vector<GrpoGroup>& groups,
                      const GrpoConfig& config, int step_index, AdamWState& opt);

struct TrainResult {
    PolicyParams params;
    TrainingReport report;
};

// Curriculum-driven GRPO loop: sample prompts per the active phase, sample G
// completions per prompt from the current policy, score, normalize advantages
// per group, update, and advance phases on plateau or budget exhaustion. The
// reference policy resets at each phase start.
TrainResult train(PolicyParams init, const ToyTask& task,
                  const std::map<ResourceTier, std::vector<BenchInstance>>& pools,
                  const CurriculumSchedule& schedule, const RewardConfig& reward_config,
                  const GrpoConfig& config, std::uint64_t seed);

} // namespace polyrl
