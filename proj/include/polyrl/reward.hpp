#pragma once

#include <optional>
#include <vector>

#include "polyrl/core.hpp"
#include "polyrl/format_parser.hpp"
#include "polyrl/judge.hpp"
#include "polyrl/langid.hpp"

namespace polyrl {

struct RewardWeights {
    double acc = 0.65;
    double lang = 0.30;
    double fmt = 0.05;

    void validate() const; // non-negative, sum to 1 within 1e-12
};

struct RewardBreakdown {
    double r_acc = 0.0;  // [0,1]
    double r_lang = 0.0; // {0,1}
    double r_fmt = 0.0;  // {0,1}
    double total = 0.0;  // exact weighted sum
    RewardWeights weights;
};

// Exact weighted composition; throws on out-of-range components or weights.
RewardBreakdown composite_reward(double r_acc, double r_lang, double r_fmt,
                                 const RewardWeights& weights);

struct RewardConfig {
    RewardWeights weights;
    VerifierBackend backend;                       // accuracy verifier
    LangScope scope = LangScope::FullOutput;       // RL-training default
    ParseOptions parse_options;
    int concurrency = 4;
    const LanguageDetector* detector = nullptr;    // null = bundled default
};

// Composes format, language and accuracy signals for one instance's outputs.
class RewardScorer {
  public:
    explicit RewardScorer(RewardConfig config);

    // Accuracy is judged on the extracted answer when the output is
    // well-formed, on the full text otherwise.
    RewardBreakdown score_output(const BenchInstance& instance,
                                 const std::string& output);

    RewardBreakdown score_completion(const BenchInstance& instance,
                                     const Completion& completion);

    struct GroupResult {
        std::vector<std::optional<RewardBreakdown>> breakdowns; // input order
        std::vector<Judge::BatchError> errors;
    };
    GroupResult score_group(const BenchInstance& instance,
                            const std::vector<Completion>& completions);

    const RewardConfig& config() const { return config_; }
    const LanguageDetector& detector() const { return *detector_; }

  private:
    RewardConfig config_;
    const LanguageDetector* detector_;
    Judge judge_;
};

} // namespace polyrl
