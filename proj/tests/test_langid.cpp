#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

#include "polyrl/format_parser.hpp"
#include "polyrl/langid.hpp"

using namespace polyrl;
using nlohmann::json;

namespace {

json load_corpus() {
    std::ifstream in(POLYRL_DATA_DIR "/langid_corpus.json");
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return json::parse(ss.str());
}

std::string fig_fixture() {
    std::ifstream in(POLYRL_DATA_DIR "/fixtures/code_switched_french.txt");
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("script-pure detection resolves directly") {
    const auto& det = default_detector();

    const auto ko = det.detect("건강은 소중한 재산입니다");
    CHECK(ko.language == LanguageCode::Korean);
    CHECK(ko.confidence >= 0.99);

    const auto am = det.detect("ጤና ትልቅ ሀብት ነው");
    CHECK(am.language == LanguageCode::Amharic);
    CHECK(am.confidence >= 0.99);

    CHECK(det.detect("ここは静かな病院です").language == LanguageCode::Japanese);
    CHECK(det.detect("สุขภาพดีเป็นลาภอันประเสริฐ").language == LanguageCode::Thai);
    CHECK(det.detect("स्वास्थ्य ही धन है").language == LanguageCode::Hindi);
    CHECK(det.detect("স্বাস্থ্যই সম্পদ").language == LanguageCode::Bengali);
}

TEST_CASE("the pinned French answer sentence detects as French") {
    const auto det =
        default_detector().detect("Le diagnostic le plus probable est la cholécystite aiguë");
    CHECK(det.language == LanguageCode::French);
    CHECK(det.confidence >= 0.90);
}

TEST_CASE("histogram fractions sum to one over letters") {
    const auto hist = default_detector().script_histogram("abc 한국 123 ...");
    double sum = 0.0;
    for (double f : hist) sum += f;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hist[static_cast<int>(ScriptClass::LatinExtended)] ==
          doctest::Approx(3.0 / 5.0));
    CHECK(hist[static_cast<int>(ScriptClass::Hangul)] == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("digits and punctuation are excluded from letter mass") {
    const auto a = default_detector().script_histogram("정상 수치");
    const auto b = default_detector().script_histogram("정상 수치 120/80 (mmHg 제외!!)...");
    // adding digits and punctuation leaves only the mmHg letters as new mass
    CHECK(b[static_cast<int>(ScriptClass::Hangul)] <
          a[static_cast<int>(ScriptClass::Hangul)]);
    CHECK(b[static_cast<int>(ScriptClass::Hangul)] == doctest::Approx(6.0 / 10.0));
}

TEST_CASE("han resolves to Japanese without Hangul and to Korean with it") {
    CHECK(default_detector().detect("肝臓の検査を行います").language ==
          LanguageCode::Japanese);
    // Korean clinical text with Han characters still reads as Korean
    CHECK(default_detector().detect("환자의 肝 수치가 정상입니다").language ==
          LanguageCode::Korean);
}

TEST_CASE("script exclusivity holds for dominant non-Latin text") {
    // Hangul holds >= 90% of the letter mass despite the Latin tail
    const auto det = default_detector().detect(
        "환자는 어제 저녁에 입원했고 오늘 아침부터 상태가 훨씬 좋아지고 있습니다 ok");
    CHECK(det.language == LanguageCode::Korean);

    // below the threshold nothing is claimed
    const auto mixed = default_detector().detect("환자는 입원중입니다 okay then");
    CHECK_FALSE(mixed.language.has_value());
}

TEST_CASE("empty text is an error") {
    CHECK_THROWS_AS(default_detector().detect("   "), Error);
}

TEST_CASE("no-letter text yields absent language") {
    const auto det = default_detector().detect("123 456 ...");
    CHECK_FALSE(det.language.has_value());
    CHECK(det.confidence == 0.0);
}

TEST_CASE("corpus regression: every frozen expectation reproduces") {
    const auto doc = load_corpus();
    const auto& det = default_detector();
    for (const auto& sample : doc["samples"]) {
        const std::string text = sample["text"].get<std::string>();
        const auto d = det.detect(text);
        const json expected = sample["expected"];
        if (expected.is_null()) {
            CHECK_MESSAGE(!d.language.has_value(), "expected no detection: ", text);
        } else {
            REQUIRE_MESSAGE(d.language.has_value(), "expected ",
                            expected.get<std::string>(), ": ", text);
            CHECK_MESSAGE(language_name(*d.language) == expected.get<std::string>(),
                          "wrong language for: ", text);
        }
    }
}

TEST_CASE("corpus accuracy meets the per-class thresholds") {
    const auto doc = load_corpus();
    const auto& det = default_detector();
    std::map<bool, std::pair<int, int>> tally; // latin? -> {hits, total}
    for (const auto& sample : doc["samples"]) {
        if (sample["language"].is_null()) continue;
        const auto label = parse_language(sample["language"].get<std::string>());
        REQUIRE(label.has_value());
        const bool latin = script_of(*label) == ScriptClass::LatinExtended;
        auto& [hits, total] = tally[latin];
        ++total;
        const auto d = det.detect(sample["text"].get<std::string>());
        if (d.language == *label) ++hits;
    }
    const auto& [latin_hits, latin_total] = tally[true];
    const auto& [other_hits, other_total] = tally[false];
    CHECK(latin_total >= 7 * 20);
    CHECK(other_total >= 6 * 20);
    CHECK(static_cast<double>(latin_hits) / latin_total >= 0.95);
    CHECK(static_cast<double>(other_hits) / other_total >= 0.99);
}

TEST_CASE("determinism: identical text gives identical detection") {
    const std::string text = "Le patient va mieux depuis une semaine et demie";
    const auto a = default_detector().detect(text);
    const auto b = default_detector().detect(text);
    CHECK(a.language == b.language);
    CHECK(a.confidence == b.confidence);
    CHECK(a.script_histogram == b.script_histogram);
}

TEST_CASE("code-switched fixture: FullOutput 0, AnswerOnly 1") {
    const std::string output = fig_fixture();
    const auto parsed = parse_output(output);
    REQUIRE(parsed.well_formed);
    const auto& det = default_detector();
    CHECK(det.language_reward(output, parsed, LanguageCode::French,
                              LangScope::FullOutput) == 0.0);
    CHECK(det.language_reward(output, parsed, LanguageCode::French,
                              LangScope::AnswerOnly) == 1.0);
}

TEST_CASE("answer-only scope without an answer scores 0") {
    const std::string output = "<thinking>du texte</thinking> pas de balise";
    const auto parsed = parse_output(output);
    CHECK(default_detector().language_reward(output, parsed, LanguageCode::French,
                                             LangScope::AnswerOnly) == 0.0);
}

TEST_CASE("scaffold tags do not poison the letter mass") {
    const std::string output =
        "<thinking> 환자는 고열과 복통을 보이고 있으며 상태가 나빠지고 있습니다 "
        "</thinking> <answer> 급성 맹장염일 가능성이 높습니다 </answer>";
    const auto parsed = parse_output(output);
    REQUIRE(parsed.well_formed);
    const auto& det = default_detector();
    CHECK(det.language_reward(output, parsed, LanguageCode::Korean,
                              LangScope::FullOutput) == 1.0);
    CHECK(det.language_reward(output, parsed, LanguageCode::Korean,
                              LangScope::AnswerOnly) == 1.0);
    CHECK(det.language_reward(output, parsed, LanguageCode::Japanese,
                              LangScope::AnswerOnly) == 0.0);
}

TEST_CASE("reward is binary and mismatches score 0") {
    const std::string output = "<thinking>ok then</thinking><answer>the flu</answer>";
    const auto parsed = parse_output(output);
    for (auto lang : kAllLanguages) {
        const double r = default_detector().language_reward(
            output, parsed, lang, LangScope::AnswerOnly);
        CHECK((r == 0.0 || r == 1.0));
        CHECK(r == 0.0); // English answer matches none of the 13
    }
}

TEST_CASE("answer-embedded-in-mixed-reasoning property over fixtures") {
    // for every corpus sample, wrapping it as the answer of a mixed-language
    // output keeps AnswerOnly = 1 while FullOutput follows the full-text verdict
    const auto doc = load_corpus();
    const auto& det = default_detector();
    int checked = 0;
    for (const auto& sample : doc["samples"]) {
        if (sample["language"].is_null() || checked >= 26) break;
        const auto label = parse_language(sample["language"].get<std::string>());
        const std::string answer = sample["text"].get<std::string>();
        if (det.detect(answer).language != *label) continue;
        const std::string output =
            "<thinking> the patient case was reviewed with der Arzt and semble "
            "stable overall given the facts </thinking> <answer> " +
            answer + " </answer>";
        const auto parsed = parse_output(output);
        CHECK(det.language_reward(output, parsed, *label, LangScope::AnswerOnly) == 1.0);
        // FullOutput equals the detector's verdict on the tag-free prose
        std::string prose = output;
        for (const char* tag : {"<thinking>", "</thinking>", "<answer>", "</answer>"}) {
            std::size_t at;
            while ((at = prose.find(tag)) != std::string::npos)
                prose.replace(at, std::string(tag).size(), " ");
        }
        const double expect_full = det.detect(prose).language == *label ? 1.0 : 0.0;
        CHECK(det.language_reward(output, parsed, *label, LangScope::FullOutput) ==
              expect_full);
        ++checked;
    }
    CHECK(checked > 0);
}
