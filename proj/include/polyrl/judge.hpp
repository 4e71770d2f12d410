#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polyrl/core.hpp"

namespace polyrl {

enum class BackendKind { ExactMatch, LexicalOverlap, RemoteLLM };

std::string_view backend_name(BackendKind kind);
std::optional<BackendKind> parse_backend(std::string_view name);

struct VerifierBackend {
    BackendKind kind = BackendKind::ExactMatch;
    std::string endpoint;       // RemoteLLM: http://host:port/path
    std::string model_name;     // RemoteLLM
    double temperature = 0.0;   // pinned to 0.0 for RemoteLLM
    int max_output_tokens = 10; // pinned to 10 for RemoteLLM
    int max_retries = 3;
    std::string cache_path;     // optional append-only LDJSON cache
    int backoff_ms = 200;       // base for exponential backoff
    int timeout_s = 30;

    void validate() const; // throws Error(Config)
};

struct JudgeVerdict {
    double score = 0.0; // clamped to [0,1]
    std::string raw_reply;
    BackendKind backend = BackendKind::ExactMatch;
    bool cached = false;
};

// trim + collapse whitespace + case-fold (scripts without case pass through)
std::string normalize_answer(std::string_view text);

// Token-level F1 on normalized text; character bigrams when either side is
// written in Japanese or Thai script (no whitespace word boundaries).
double lexical_overlap_f1(std::string_view gold, std::string_view generated);

// Rendered verbatim prompt templates (also used as cache-key versions).
std::string render_accuracy_prompt(std::string_view question, std::string_view gold,
                                   std::string_view generated);
std::string render_binary_judge_prompt(std::string_view generated, std::string_view gold);
std::string render_language_prompt(std::string_view language, std::string_view generated);

// Generic chat-completion transport with retry/backoff. Shared by the judge
// and the data pipeline so every remote stage is cache-replayable.
class RemoteChatClient {
  public:
    struct Options {
        std::string endpoint; // http://host:port/path
        std::string model;
        int max_retries = 3;
        int backoff_ms = 200;
        int timeout_s = 30;
    };

    explicit RemoteChatClient(Options options);

    // POSTs one user message; retries transport failures with backoff.
    std::string chat(const std::string& prompt, double temperature,
                     int max_tokens) const;

    const Options& options() const { return options_; }

  private:
    std::string chat_once(const std::string& prompt, double temperature,
                          int max_tokens) const;
    Options options_;
};

// Append-only line-delimited JSON verdict cache keyed by content hash.
class JudgeCache {
  public:
    explicit JudgeCache(std::string path); // loads existing entries
    struct Entry {
        double score;
        std::string raw;
    };
    std::optional<Entry> lookup(const std::string& key) const;
    void store(const std::string& key, double score, const std::string& raw);

  private:
    std::string path_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, Entry> entries_;
};

class Judge {
  public:
    explicit Judge(VerifierBackend backend);

    // Continuous [0,1] accuracy verdict (Eq.-1-style verifier).
    JudgeVerdict score_accuracy(const std::string& question, const std::string& gold,
                                const std::string& generated);

    // Binary True/False judge protocol; ExactMatch serves as local fallback.
    bool judge_correct(const std::string& question, const std::string& gold,
                       const std::string& generated);

    // Remote language-consistency verifier; replies 1.0/0.0.
    bool verify_language_remote(LanguageCode language, const std::string& generated);

    struct BatchItem {
        std::string question, gold, generated;
    };
    struct BatchError {
        std::size_t index;
        std::string message;
    };
    struct BatchResult {
        std::vector<std::optional<JudgeVerdict>> verdicts; // input order
        std::vector<BatchError> errors;
    };
    // Order-preserving batch scoring with bounded fanout; identical triples
    // collapse to one remote call; cache consulted before any call.
    BatchResult score_batch(const std::vector<BatchItem>& items, int concurrency_limit);

    const VerifierBackend& backend() const { return backend_; }

  private:
    std::string chat_with_retries(const std::string& prompt);
    JudgeVerdict remote_float_verdict(const std::string& key, const std::string& prompt);

    VerifierBackend backend_;
    std::unique_ptr<RemoteChatClient> client_; // RemoteLLM only
    std::shared_ptr<JudgeCache> cache_;        // null when no cache_path configured
};

} // namespace polyrl
