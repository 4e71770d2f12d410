#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polyrl/core.hpp"
#include "polyrl/judge.hpp"

namespace polyrl {

struct McqEntry {
    LanguageCode language = LanguageCode::French;
    std::string question;
    std::array<std::string, 4> options; // A..D
    char correct = 'A';
};

struct McqItem {
    std::string question_id;
    std::string source_concept;
    std::vector<McqEntry> entries;
};

std::vector<McqItem> mcqs_from_json(std::string_view text); // validates invariants
std::string mcqs_to_json(const std::vector<McqItem>& items);
std::vector<McqItem> load_mcqs(const std::string& path);

enum class ProbeChoice { A, B, C, D, Abstain };
std::string_view probe_choice_name(ProbeChoice choice);

struct ProbeVerdict {
    std::string question_id;
    std::string probe_name;
    LanguageCode language = LanguageCode::French; // probed entry
    ProbeChoice chosen = ProbeChoice::Abstain;
    bool correct = false;
};

// Rendered prompt templates for the remote stages.
std::string render_generation_prompt(const std::vector<std::string>& topics, int n);
std::string render_probe_prompt(const McqEntry& entry);
std::string render_ambiguity_prompt(const McqItem& item);
std::string render_conversion_prompt(const McqEntry& entry);

// Compiled cue-leak patterns from the fixture list (case-folded regexes).
class CueLeakDetector {
  public:
    explicit CueLeakDetector(const std::string& fixture_path = {});
    // Returns the first matching pattern, if any.
    std::optional<std::string> find_leak(std::string_view text) const;

  private:
    struct Pattern;
    std::shared_ptr<const std::vector<Pattern>> patterns_;
};

struct PipelineEndpoints {
    RemoteChatClient::Options generator; // MCQ generation + open-ended conversion
    std::vector<std::pair<std::string, RemoteChatClient::Options>> probes;
    RemoteChatClient::Options ambiguity_judge;
    std::string cache_path;   // shared replay cache (empty = no caching)
    int generation_retries = 2; // re-queries on malformed payloads
};

// Data-curation pipeline: schema-validated MCQ generation, all-probes-correct
// difficulty filtering, ambiguity filtering, open-ended conversion, dedup.
// Every remote call is cached by (protocol, prompt) so runs replay offline.
class Pipeline {
  public:
    explicit Pipeline(PipelineEndpoints endpoints);

    std::vector<McqItem> generate_mcqs(const std::vector<std::string>& topics, int n);

    struct FilterResult {
        std::vector<McqItem> kept;
        std::vector<McqItem> dropped;
        std::vector<ProbeVerdict> verdicts;
    };
    FilterResult difficulty_filter(const std::vector<McqItem>& items);

    struct AmbiguityResult {
        std::vector<McqItem> kept;
        std::vector<McqItem> dropped;
    };
    AmbiguityResult ambiguity_filter(const std::vector<McqItem>& items);

    std::vector<BenchInstance> to_open_ended(const McqItem& item);

    // LDJSON verdict trail {question_id, stage, decision, evidence}.
    const std::vector<std::string>& log_lines() const { return log_; }

  private:
    std::string cached_chat(std::string_view protocol, const RemoteChatClient& client,
                            const std::string& prompt, double temperature,
                            int max_tokens, bool store);
    void log(const std::string& question_id, const std::string& stage,
             const std::string& decision, const std::string& evidence);

    PipelineEndpoints endpoints_;
    std::unique_ptr<RemoteChatClient> generator_;
    std::vector<std::pair<std::string, std::unique_ptr<RemoteChatClient>>> probes_;
    std::unique_ptr<RemoteChatClient> ambiguity_;
    std::shared_ptr<JudgeCache> cache_;
    CueLeakDetector cues_;
    std::vector<std::string> log_;
};

// Removes (language, normalized question) duplicates; first occurrence wins.
std::vector<BenchInstance> dedup(const std::vector<BenchInstance>& instances);

} // namespace polyrl
