#pragma once

#include <string>

#include "polyrl/curriculum.hpp"
#include "polyrl/evalrep.hpp"
#include "polyrl/grpo.hpp"
#include "polyrl/langid.hpp"
#include "polyrl/pipeline.hpp"
#include "polyrl/policy.hpp"
#include "polyrl/reward.hpp"

namespace polyrl {

// Single configuration record, keys namespaced by module. Defaults equal the
// paper-pinned values; unknown keys are rejected.
struct RunConfig {
    // core
    std::uint64_t seed = 0;

    // format_parser
    ParseOptions parse_options;

    // langid
    double tau = 0.90;
    LangScope train_scope = LangScope::FullOutput;
    LangScope eval_scope = LangScope::AnswerOnly;
    std::string stopword_dir; // empty = bundled fixtures

    // judge
    VerifierBackend backend;
    int concurrency = 4;

    // reward
    RewardWeights weights;

    // curriculum
    CurriculumSchedule schedule;

    // policy
    int feature_dim = 8192;
    double policy_temperature = 1.0;
    SftConfig sft;

    // grpo
    std::string grpo_profile = "toy"; // "toy" or "paper"
    GrpoConfig grpo = GrpoConfig::toy_profile();

    // pipeline
    PipelineEndpoints pipeline;

    // evalrep
    bool lc_remote = false;

    static RunConfig defaults() { return RunConfig{}; }
    static RunConfig load(const std::string& path);          // strict parse
    static RunConfig from_json_text(std::string_view text);  // strict parse

    // Detector honoring tau/stopword_dir (owned singleton per configuration).
    const LanguageDetector& detector() const;

    RewardConfig reward_config(LangScope scope) const;
};

// Scores one reward-service request and returns the reply JSON (serialized).
// Request schema: {"question","gold","output","language","scope"?,"weights"?}.
std::string score_request(const RunConfig& config, std::string_view request_json);

} // namespace polyrl
