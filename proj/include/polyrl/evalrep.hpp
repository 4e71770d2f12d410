#pragma once

#include <map>
#include <string>
#include <vector>

#include "polyrl/core.hpp"
#include "polyrl/format_parser.hpp"
#include "polyrl/judge.hpp"
#include "polyrl/langid.hpp"

namespace polyrl {

struct EvalRecord {
    std::string instance_id;
    LanguageCode language = LanguageCode::French;
    bool la = false; // logical accuracy (binary judge)
    bool lc = false; // language consistency, answer-only scope
    std::string judge_raw;
    double detector_confidence = 0.0;
    std::string note; // "missing" when no output was provided
};

struct EvalConfig {
    VerifierBackend backend;                    // LA judge; ExactMatch runs offline
    ParseOptions parse_options;
    bool lc_remote = false;                     // remote verifier instead of detector
    const LanguageDetector* detector = nullptr; // null = bundled default
};

// Missing outputs score la=false, lc=false with a "missing" note. Malformed
// outputs are judged on the full text for both LA and LC.
std::vector<EvalRecord> evaluate(const std::map<std::string, std::string>& outputs,
                                 const std::vector<BenchInstance>& testset,
                                 const EvalConfig& config);

struct LanguageSummary {
    std::string language;
    int n = 0;
    double la_pct = 0.0;
    double lc_pct = 0.0;
};

struct EvalSummary {
    std::vector<LanguageSummary> rows; // language-name order
    double macro_la = 0.0;             // unweighted mean over languages present
    double macro_lc = 0.0;
};

EvalSummary summarize(const std::vector<EvalRecord>& records);

enum class RenderFormat { Markdown, Csv };

// Deterministic column order (language, LA, LC, N); macro row last.
std::string render(const EvalSummary& summary, RenderFormat format);

} // namespace polyrl
