#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "polyrl/core.hpp"
#include "polyrl/format_parser.hpp"

namespace polyrl {

enum class LangScope { FullOutput, AnswerOnly };

std::string_view scope_name(LangScope scope);
std::optional<LangScope> parse_scope(std::string_view name);

inline constexpr int kNumScriptClasses = 7;

struct LangDetection {
    std::optional<LanguageCode> language; // absent iff confidence < tau
    double confidence = 0.0;
    // Fraction of letter mass per script class, indexed by ScriptClass.
    // Sums to 1 when the text contains letters; all-zero otherwise.
    std::array<double, kNumScriptClasses> script_histogram{};
    LangScope scope = LangScope::FullOutput;

    double fraction(ScriptClass sc) const {
        return script_histogram[static_cast<std::size_t>(sc)];
    }
};

struct DetectorOptions {
    double tau = 0.90;        // dominant-mass / winning-vote-share threshold
    std::string fixture_dir;  // empty = bundled data/stopwords
};

// Deterministic offline detector for the 13-language closed world.
//
// Stage 1: script histogram over code-point ranges; a non-Latin class holding
// >= tau of letter mass resolves directly to its unique language.
// Stage 2: Latin-script disambiguation by stopword and diacritic-signature
// voting over per-language fixture lists. Only tokens and characters unique
// to one candidate vote; an English function-word list participates as a
// contaminant candidate so code-switched text dilutes the winner's share.
class LanguageDetector {
  public:
    explicit LanguageDetector(DetectorOptions opts = {});

    // Throws Error(Data) on blank text.
    LangDetection detect(std::string_view text) const;

    // 1 iff the scoped text is detected as `target` at confidence >= tau.
    // AnswerOnly with no parsed answer scores 0.
    double language_reward(std::string_view output, const ParsedOutput& parsed,
                           LanguageCode target, LangScope scope) const;

    std::array<double, kNumScriptClasses> script_histogram(std::string_view text) const;

    double tau() const { return opts_.tau; }

  private:
    struct VoteTally;
    VoteTally tally_votes(std::string_view text) const;

    DetectorOptions opts_;
    // token -> bitmask over candidates (7 Latin languages + English)
    std::unordered_map<std::string, unsigned> word_masks_;
    std::unordered_map<char32_t, unsigned> char_masks_;
};

// Shared instance backed by the bundled fixtures.
const LanguageDetector& default_detector();

} // namespace polyrl
