#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "polyrl/core.hpp"
#include "polyrl/util.hpp"

namespace polyrl {

// Probability mass per tier, indexed by ResourceTier (High, Medium, Low).
using TierDistribution = std::array<double, 3>;

ResourceTier tier_of(LanguageCode language);

// P_1 = {High: 1}; P_i = alpha * P_{i-1} + (1 - alpha) * {tier_i: 1}.
TierDistribution phase_distribution(int phase_index, double alpha);

struct PlateauDetector {
    int window = 20;         // W, steps per evaluation window
    double min_delta = 0.005; // minimum mean-reward improvement
    int patience = 3;        // P, consecutive flat windows

    void validate() const;
};

// True iff each of the last `patience` window means improves on its
// predecessor by less than min_delta. Histories shorter than W*(P+1) steps
// report false.
bool plateau(const std::vector<double>& reward_history, const PlateauDetector& detector);

struct CurriculumPhase {
    int index = 1; // 1-based; tiers introduced in High, Medium, Low order
    ResourceTier new_tier = ResourceTier::High;
    double alpha = 0.85;
    int step_budget = 0; // forced advance when exhausted
};

struct CurriculumSchedule {
    double alpha = 0.85;
    std::array<int, 3> step_budgets{167, 167, 166};
    PlateauDetector detector;

    std::vector<CurriculumPhase> phases() const;
    void validate() const;

    std::string to_json() const;
    static CurriculumSchedule from_json(std::string_view text);
};

// Single-owner scheduler state for the training loop.
class CurriculumState {
  public:
    explicit CurriculumState(CurriculumSchedule schedule);

    const CurriculumPhase& phase() const { return phases_[phase_idx_]; }
    TierDistribution distribution() const;
    int steps_in_phase() const { return steps_in_phase_; }
    bool phase_started_this_step() const { return steps_in_phase_ == 0; }

    void record_reward(double mean_reward); // one training step elapsed

    bool should_advance() const; // plateau fired or budget exhausted
    bool has_next_phase() const { return phase_idx_ + 1 < phases_.size(); }
    void advance(); // throws past the last phase; resets reward history
    bool complete() const { return complete_; }
    void mark_complete() { complete_ = true; }

    const std::vector<double>& history() const { return history_; }

  private:
    CurriculumSchedule schedule_;
    std::vector<CurriculumPhase> phases_;
    std::size_t phase_idx_ = 0;
    int steps_in_phase_ = 0;
    bool complete_ = false;
    std::vector<double> history_;
};

// Draws per-slot tiers from a phase distribution, then instances from the
// tier pool without replacement per epoch (reshuffled per epoch).
class TierSampler {
  public:
    TierSampler(std::map<ResourceTier, std::vector<BenchInstance>> pools,
                std::uint64_t seed);

    std::vector<BenchInstance> sample_batch(const TierDistribution& dist,
                                            int batch_size);

  private:
    const BenchInstance& draw_from_tier(ResourceTier tier);

    std::map<ResourceTier, std::vector<BenchInstance>> pools_;
    std::map<ResourceTier, std::vector<std::size_t>> order_;
    std::map<ResourceTier, std::size_t> cursor_;
    util::Rng rng_;
};

// One-shot form: deterministic in (pools, seed).
std::vector<BenchInstance>
sample_batch(const CurriculumPhase& phase,
             const std::map<ResourceTier, std::vector<BenchInstance>>& pools,
             int batch_size, std::uint64_t rng_seed);

} // namespace polyrl
