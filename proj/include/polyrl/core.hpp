#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polyrl {

// Error taxonomy mapped to CLI exit codes (2 config, 3 data, 4 remote).
enum class ErrorKind { Config, Data, Remote };

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::Data, msg); }
inline Error remote_error(const std::string& msg) { return Error(ErrorKind::Remote, msg); }

// The closed world of 13 target languages.
enum class LanguageCode {
    Amharic,
    Bengali,
    French,
    Hausa,
    Hindi,
    Japanese,
    Korean,
    Spanish,
    Swahili,
    Thai,
    Turkish,
    Vietnamese,
    Yoruba,
};

inline constexpr int kNumLanguages = 13;

inline constexpr std::array<LanguageCode, kNumLanguages> kAllLanguages = {
    LanguageCode::Amharic,   LanguageCode::Bengali, LanguageCode::French,
    LanguageCode::Hausa,     LanguageCode::Hindi,   LanguageCode::Japanese,
    LanguageCode::Korean,    LanguageCode::Spanish, LanguageCode::Swahili,
    LanguageCode::Thai,      LanguageCode::Turkish, LanguageCode::Vietnamese,
    LanguageCode::Yoruba,
};

enum class ScriptClass {
    Ethiopic,
    Bengali,
    Devanagari,
    JapaneseMixed,
    Hangul,
    Thai,
    LatinExtended,
};

std::string_view language_name(LanguageCode lang);
std::optional<LanguageCode> parse_language(std::string_view name); // case-sensitive
ScriptClass script_of(LanguageCode lang);
std::string_view family_of(LanguageCode lang);
std::string_view script_name(ScriptClass sc);

// The unique language writing in a non-Latin script class; nullopt for LatinExtended.
std::optional<LanguageCode> language_of_script(ScriptClass sc);

enum class ResourceTier { High, Medium, Low };

inline constexpr std::array<ResourceTier, 3> kAllTiers = {
    ResourceTier::High, ResourceTier::Medium, ResourceTier::Low};

std::string_view tier_name(ResourceTier tier);
std::optional<ResourceTier> parse_tier(std::string_view name);

struct ReasoningStep {
    std::string text;
    std::optional<LanguageCode> step_language; // absent = not annotated
};

// One open-ended QA item.
struct BenchInstance {
    std::string id;
    LanguageCode language = LanguageCode::French;
    std::string question;
    std::vector<ReasoningStep> reasoning_steps;
    std::string gold_answer;
    std::string source_concept;
};

// One sampled model output, with its log-probability under the sampler.
struct Completion {
    std::string instance_id;
    std::string text;
    double logprob_under_sampler = 0.0; // nats, <= 0
    std::vector<int> token_ids;
};

struct DatasetSplit {
    std::vector<std::string> train_sft;
    std::vector<std::string> train_rft;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
};

// Loads and validates a dataset file (UTF-8 JSON array, exact key set).
// Throws Error(Data) naming the offending field and record index.
std::vector<BenchInstance> load_dataset(const std::string& path);
std::vector<BenchInstance> parse_dataset_json(std::string_view text);

std::string dataset_to_json(const std::vector<BenchInstance>& instances);

// Stratified 80/20 test split then 80/20 RFT split within train, per language,
// round-half-up, deterministic in `seed`. Throws if any language has < 5 items.
DatasetSplit make_splits(const std::vector<BenchInstance>& dataset, std::uint64_t seed);

std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(std::string_view text);

} // namespace polyrl
