#include "polyrl/langid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>

#include "polyrl/util.hpp"

namespace polyrl {

std::string_view scope_name(LangScope scope) {
    return scope == LangScope::FullOutput ? "FullOutput" : "AnswerOnly";
}

std::optional<LangScope> parse_scope(std::string_view name) {
    if (name == "FullOutput") return LangScope::FullOutput;
    if (name == "AnswerOnly") return LangScope::AnswerOnly;
    return std::nullopt;
}

namespace {

// Voting candidates: the seven LatinExtended languages plus an English
// contaminant slot that can never be returned but dilutes vote shares.
constexpr std::array<LanguageCode, 7> kLatinLangs = {
    LanguageCode::French,  LanguageCode::Hausa,      LanguageCode::Spanish,
    LanguageCode::Swahili, LanguageCode::Turkish,    LanguageCode::Vietnamese,
    LanguageCode::Yoruba,
};
constexpr int kEnglishSlot = 7;
constexpr int kNumCandidates = 8;

const char* candidate_file(int slot) {
    switch (slot) {
        case 0: return "french.txt";
        case 1: return "hausa.txt";
        case 2: return "spanish.txt";
        case 3: return "swahili.txt";
        case 4: return "turkish.txt";
        case 5: return "vietnamese.txt";
        case 6: return "yoruba.txt";
        default: return "english.txt";
    }
}

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

bool is_latin_letter(char32_t c) {
    if (in(c, 'A', 'Z') || in(c, 'a', 'z')) return true;
    if (in(c, 0xC0, 0xFF) && c != 0xD7 && c != 0xF7) return true;
    if (in(c, 0x100, 0x24F)) return true;
    if (in(c, 0x250, 0x2AF)) return true; // hooked letters (Hausa) live here
    if (in(c, 0x300, 0x36F)) return true; // combining marks ride their base
    if (in(c, 0x1E00, 0x1EFF)) return true;
    if (c == 0x2BC) return true; // modifier apostrophe (Hausa)
    return false;
}

enum class CharKind { None, Script, Han };

CharKind classify(char32_t c, ScriptClass& sc) {
    if (is_latin_letter(c)) {
        sc = ScriptClass::LatinExtended;
        return CharKind::Script;
    }
    // Ethiopic: syllables plus supplements, excluding punctuation and numerals.
    if ((in(c, 0x1200, 0x135A) && !in(c, 0x1360, 0x137C)) ||
        in(c, 0x1380, 0x1399) || in(c, 0x2D80, 0x2DDE) || in(c, 0x135D, 0x135F)) {
        sc = ScriptClass::Ethiopic;
        return CharKind::Script;
    }
    if (in(c, 0x980, 0x9FF) && !in(c, 0x9E6, 0x9EF) && !in(c, 0x9F2, 0x9FB)) {
        sc = ScriptClass::Bengali;
        return CharKind::Script;
    }
    if (in(c, 0x900, 0x97F) && !in(c, 0x964, 0x96F)) {
        sc = ScriptClass::Devanagari;
        return CharKind::Script;
    }
    // Kana and Japanese-only marks.
    if (in(c, 0x3041, 0x3096) || in(c, 0x3099, 0x309F) || in(c, 0x30A1, 0x30FA) ||
        in(c, 0x30FC, 0x30FF) || in(c, 0x31F0, 0x31FF) || in(c, 0xFF66, 0xFF9D) ||
        c == 0x3005) {
        sc = ScriptClass::JapaneseMixed;
        return CharKind::Script;
    }
    if (in(c, 0xAC00, 0xD7A3) || in(c, 0x1100, 0x11FF) || in(c, 0x3131, 0x318E)) {
        sc = ScriptClass::Hangul;
        return CharKind::Script;
    }
    if (in(c, 0xE01, 0xE4E) && c != 0xE3F) {
        sc = ScriptClass::Thai;
        return CharKind::Script;
    }
    // Han is shared between Japanese and Korean text in this closed world;
    // resolved by Hangul presence.
    if (in(c, 0x4E00, 0x9FFF) || in(c, 0x3400, 0x4DBF)) return CharKind::Han;
    return CharKind::None;
}

} // namespace

LanguageDetector::LanguageDetector(DetectorOptions opts) : opts_(std::move(opts)) {
    std::string dir =
        opts_.fixture_dir.empty() ? std::string(POLYRL_DATA_DIR "/stopwords")
                                  : opts_.fixture_dir;
    for (int slot = 0; slot < kNumCandidates; ++slot) {
        const std::string path = dir + "/" + candidate_file(slot);
        std::ifstream in(path);
        if (!in)
            throw data_error("cannot open stopword fixture: " + path);
        std::string line;
        while (std::getline(in, line)) {
            const std::string word = util::fold_case(util::trim(line));
            if (word.empty()) continue;
            word_masks_[word] |= 1u << slot;
        }
    }

    auto add_chars = [&](int slot, std::initializer_list<char32_t> cps) {
        for (char32_t c : cps) char_masks_[c] |= 1u << slot;
    };
    // Diacritic signatures. Characters shared between candidate languages are
    // registered for each owner so they cancel out of the unique-vote rule.
    add_chars(0, {U'î', U'ï', U'û', U'ë', U'œ',
                  U'æ', U'ÿ'});                       // î ï û ë œ æ ÿ
    add_chars(0, {U'ç'});                                  // ç (French)
    add_chars(4, {U'ç'});                                  // ç (Turkish)
    add_chars(0, {U'è', U'ê', U'à', U'ù'}); // è ê à ù (French)
    add_chars(5, {U'è', U'ê', U'à', U'ù'}); // (Vietnamese)
    add_chars(6, {U'è', U'à', U'ù'});            // (Yoruba tone marks)
    add_chars(2, {U'ñ', U'¿', U'¡'});            // ñ ¿ ¡
    add_chars(4, {U'ğ', U'ı', U'ş', U'ö', U'ü'}); // ğ ı ş ö ü
    add_chars(5, {U'ă', U'đ', U'ơ', U'ư'}); // ă đ ơ ư
    for (char32_t c = 0x1EA1; c <= 0x1EF9; c += 2) {
        if (c == 0x1EB9 || c == 0x1ECD) continue; // ẹ ọ shared with Yoruba
        add_chars(5, {c});
    }
    add_chars(5, {U'ẹ', U'ọ'});
    add_chars(6, {U'ẹ', U'ọ'});
    add_chars(5, {U'ĩ', U'ũ', U'ã', U'õ', U'ỹ'}); // ĩ ũ ã õ ỹ
    add_chars(6, {U'ṣ', U'̣'}); // ṣ, combining dot below
    add_chars(1, {U'ɓ', U'ɗ', U'ƙ', U'ʼ'}); // ɓ ɗ ƙ ʼ
}

std::array<double, kNumScriptClasses>
LanguageDetector::script_histogram(std::string_view text) const {
    std::array<double, kNumScriptClasses> hist{};
    std::array<std::size_t, kNumScriptClasses> counts{};
    std::size_t han = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t c = util::next_codepoint(text, i);
        ScriptClass sc{};
        switch (classify(c, sc)) {
            case CharKind::Script:
                ++counts[static_cast<std::size_t>(sc)];
                break;
            case CharKind::Han:
                ++han;
                break;
            case CharKind::None:
                break;
        }
    }
    // Han counts toward Hangul only when Hangul is present, else Japanese.
    if (counts[static_cast<std::size_t>(ScriptClass::Hangul)] > 0)
        counts[static_cast<std::size_t>(ScriptClass::Hangul)] += han;
    else
        counts[static_cast<std::size_t>(ScriptClass::JapaneseMixed)] += han;

    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) return hist;
    for (std::size_t k = 0; k < hist.size(); ++k)
        hist[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    return hist;
}

struct LanguageDetector::VoteTally {
    std::array<double, kNumCandidates> votes{};
    double total = 0.0;
};

LanguageDetector::VoteTally LanguageDetector::tally_votes(std::string_view text) const {
    VoteTally tally;
    const std::string folded = util::fold_case(text);

    auto vote = [&](unsigned mask, double weight) {
        if (mask == 0 || (mask & (mask - 1)) != 0) return; // only unique owners vote
        int slot = 0;
        while (!(mask & 1u)) {
            mask >>= 1;
            ++slot;
        }
        tally.votes[static_cast<std::size_t>(slot)] += weight;
        tally.total += weight;
    };

    std::string token;
    std::size_t i = 0;
    auto flush = [&]() {
        if (token.empty()) return;
        auto it = word_masks_.find(token);
        if (it != word_masks_.end()) vote(it->second, 1.0);
        token.clear();
    };
    while (i <= folded.size()) {
        if (i == folded.size()) {
            flush();
            break;
        }
        const char32_t c = util::next_codepoint(folded, i);
        if (is_latin_letter(c)) {
            util::append_utf8(token, c);
            auto ct = char_masks_.find(c);
            if (ct != char_masks_.end()) vote(ct->second, 0.5);
        } else {
            if (auto ct = char_masks_.find(c); ct != char_masks_.end())
                vote(ct->second, 0.5); // ¿ ¡ sit outside tokens
            flush();
        }
    }
    return tally;
}

LangDetection LanguageDetector::detect(std::string_view text) const {
    if (util::is_blank(text)) throw data_error("detect_language: empty text");

    LangDetection det;
    det.script_histogram = script_histogram(text);

    double best_mass = 0.0;
    ScriptClass best_class = ScriptClass::LatinExtended;
    for (int k = 0; k < kNumScriptClasses; ++k) {
        if (det.script_histogram[static_cast<std::size_t>(k)] > best_mass) {
            best_mass = det.script_histogram[static_cast<std::size_t>(k)];
            best_class = static_cast<ScriptClass>(k);
        }
    }

    if (best_class != ScriptClass::LatinExtended && best_mass >= opts_.tau) {
        det.language = language_of_script(best_class);
        det.confidence = best_mass;
        return det;
    }

    const double latin_mass = det.fraction(ScriptClass::LatinExtended);
    if (latin_mass >= opts_.tau) {
        const VoteTally tally = tally_votes(text);
        if (tally.total > 0.0) {
            int best = 0;
            for (int k = 1; k < static_cast<int>(kLatinLangs.size()); ++k)
                if (tally.votes[static_cast<std::size_t>(k)] >
                    tally.votes[static_cast<std::size_t>(best)])
                    best = k;
            const double share =
                tally.votes[static_cast<std::size_t>(best)] / tally.total;
            det.confidence = share;
            if (share >= opts_.tau)
                det.language = kLatinLangs[static_cast<std::size_t>(best)];
        }
        return det;
    }

    det.confidence = best_mass; // no script dominant enough
    return det;
}

namespace {

// Scaffold tags are structural markup, not prose; their ASCII letters must
// not count against non-Latin text when scoring the reward.
std::string strip_scaffold_tags(std::string_view text) {
    static const std::regex tag_re("</?(thinking|answer|step [0-9]+)>");
    return std::regex_replace(std::string(text), tag_re, " ");
}

} // namespace

double LanguageDetector::language_reward(std::string_view output,
                                         const ParsedOutput& parsed,
                                         LanguageCode target,
                                         LangScope scope) const {
    std::string_view scoped = output;
    if (scope == LangScope::AnswerOnly) {
        if (!parsed.answer) return 0.0;
        scoped = *parsed.answer;
    }
    const std::string prose = strip_scaffold_tags(scoped);
    if (util::is_blank(prose)) return 0.0;
    const LangDetection det = detect(prose);
    return det.language == target ? 1.0 : 0.0;
}

const LanguageDetector& default_detector() {
    static const LanguageDetector detector{};
    return detector;
}

} // namespace polyrl
