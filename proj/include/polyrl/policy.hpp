#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "polyrl/core.hpp"

namespace polyrl {

// Desk-scale vocabulary: structural tags and multiword lexemes are atomic
// tokens so the scaffold and the per-language answers are learnable with
// sequences under 64 tokens.
class ToyVocab {
  public:
    static const ToyVocab& standard(); // the fixed 200-token vocabulary

    int size() const { return static_cast<int>(surface_.size()); }
    const std::string& surface(int id) const { return surface_.at(static_cast<std::size_t>(id)); }
    int id_of(const std::string& text) const; // throws Error(Data) if unknown

    int bos() const { return bos_; }
    int eos() const { return eos_; }
    int thinking_open() const { return thinking_open_; }
    int thinking_close() const { return thinking_close_; }
    int answer_open() const { return answer_open_; }
    int answer_close() const { return answer_close_; }

    // Joins surfaces with single spaces; BOS/EOS are silent.
    std::string decode(std::span<const int> tokens) const;

    // Greedy longest-match over whitespace words (lexemes may span words).
    std::vector<int> encode(const std::string& text) const;

    std::string content_hash() const; // sha256 over the surface list

    friend class ToyTask;

  private:
    void add(const std::string& surface);

    std::vector<std::string> surface_;
    std::unordered_map<std::string, int> index_;
    std::size_t max_lexeme_words_ = 1;
    int bos_ = -1, eos_ = -1;
    int thinking_open_ = -1, thinking_close_ = -1;
    int answer_open_ = -1, answer_close_ = -1;
    std::array<int, 4> step_open_{}, step_close_{};
};

struct ToyPrompt {
    LanguageCode language = LanguageCode::French;
    int key = 0; // index into ToyTask::kKeyNames
};

// Hashed-feature log-linear next-token policy. The next-token distribution is
// softmax(sum of active feature rows / temperature).
struct PolicyParams {
    int feature_dim = 8192;
    int vocab_size = 0;
    double temperature = 1.0;
    std::string vocab_hash;
    std::vector<double> weights; // feature_dim x vocab_size, row-major

    static PolicyParams init(const ToyVocab& vocab, int feature_dim = 8192,
                             double temperature = 1.0);

    double* row(std::uint32_t f) { return weights.data() + static_cast<std::size_t>(f) * static_cast<std::size_t>(vocab_size); }
    const double* row(std::uint32_t f) const { return weights.data() + static_cast<std::size_t>(f) * static_cast<std::size_t>(vocab_size); }

    void save(const std::string& path) const;
    // Refuses checkpoints whose vocabulary hash mismatches `vocab`.
    static PolicyParams load(const std::string& path, const ToyVocab& vocab);
};

inline constexpr int kActiveFeatures = 9;
inline constexpr int kMaxPosition = 63;

// Active feature rows for predicting the token at `position` given the
// prompt and previous token (BOS at position 0).
void active_features(const ToyPrompt& prompt, int position, int prev_token,
                     int feature_dim, std::array<std::uint32_t, kActiveFeatures>& out);

struct ToyTaskItem {
    ToyPrompt prompt;
    BenchInstance instance;      // question/gold in the target language
    std::vector<int> gold_tokens; // full structured output ending in EOS
};

// Built-in template bank: 13 languages x 4 question keys with code-switched
// gold reasoning and target-language-only answers.
class ToyTask {
  public:
    static constexpr int kNumKeys = 4;
    static const std::array<std::string_view, kNumKeys> kKeyNames;

    ToyTask();

    const ToyVocab& vocab() const { return *vocab_; }
    const std::vector<ToyTaskItem>& items() const { return items_; }
    const ToyTaskItem& item(LanguageCode language, int key) const;
    const ToyTaskItem* find(const std::string& instance_id) const;

    std::map<ResourceTier, std::vector<BenchInstance>> pools() const;
    std::vector<ToyTaskItem> tier_items(ResourceTier tier) const;

  private:
    const ToyVocab* vocab_;
    std::vector<ToyTaskItem> items_;
    std::map<std::string, std::size_t> by_id_;
};

// Binds a dataset instance to a task prompt: built-in items match by id;
// other instances must name a known key in source_concept and tokenize
// against the vocabulary.
ToyTaskItem toy_item_from_instance(const ToyTask& task, const BenchInstance& instance);

// Exact sequence log-probability in nats (empty sequence scores 0).
double logprob(const PolicyParams& params, const ToyPrompt& prompt,
               std::span<const int> tokens);

// Ancestral sampling at the policy temperature; temperature <= 1e-12 decodes
// greedily. Deterministic in `seed`.
Completion sample_one(const PolicyParams& params, const ToyVocab& vocab,
                      const ToyPrompt& prompt, std::uint64_t seed, int max_len,
                      double temperature);
std::vector<Completion> sample_k(const PolicyParams& params, const ToyVocab& vocab,
                                 const ToyPrompt& prompt, int g, std::uint64_t seed,
                                 int max_len);

// Decoupled-weight-decay adaptive optimizer state (bias-corrected).
struct AdamWState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int t = 0;
    std::vector<double> m, v;

    void step(std::span<double> params, std::span<const double> grad, double lr,
              double weight_decay);
};

// lr_max scaled by linear warmup then cosine decay over total steps.
double cosine_warmup_lr(double lr_max, int step, int total_steps, double warmup_ratio);

struct SftConfig {
    double lr = 0.05;
    int epochs = 3;
    int batch = 0; // 0 = full batch
    enum class Optimizer { AdamW, Sgd } optimizer = Optimizer::AdamW;
    double weight_decay = 0.01;
    double warmup_ratio = 0.1;

    void validate() const;
};

struct SftReport {
    std::vector<double> epoch_nll; // nats/token; index 0 = before training
};

// Maximizes gold-trajectory likelihood; throws Error(Data) on divergence.
PolicyParams sft_fit(PolicyParams params, const std::vector<ToyTaskItem>& instances,
                     const SftConfig& config, SftReport* report = nullptr);

} // namespace polyrl
