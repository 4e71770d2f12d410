#include "polyrl/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "polyrl/util.hpp"

namespace polyrl {

using nlohmann::json;

namespace {

const char* kMcqKeys[] = {"question_id", "source_concept", "mcq_items"};
const char* kEntryKeys[] = {"language_code", "question",  "option_A", "option_B",
                            "option_C",      "option_D",  "correct_answer"};

std::optional<McqEntry> parse_entry(const json& e, std::string* reason) {
    for (const char* k : kEntryKeys) {
        if (!e.contains(k) || !e[k].is_string()) {
            *reason = std::string("missing or non-string field ") + k;
            return std::nullopt;
        }
    }
    McqEntry entry;
    const auto lang = parse_language(e["language_code"].get<std::string>());
    if (!lang) {
        *reason = "unknown language_code \"" + e["language_code"].get<std::string>() + "\"";
        return std::nullopt;
    }
    entry.language = *lang;
    entry.question = e["question"].get<std::string>();
    entry.options[0] = e["option_A"].get<std::string>();
    entry.options[1] = e["option_B"].get<std::string>();
    entry.options[2] = e["option_C"].get<std::string>();
    entry.options[3] = e["option_D"].get<std::string>();
    for (const auto& opt : entry.options) {
        if (util::is_blank(opt)) {
            *reason = "option count"; // fewer than 4 usable options
            return std::nullopt;
        }
    }
    if (util::is_blank(entry.question)) {
        *reason = "blank question";
        return std::nullopt;
    }
    const std::string correct = e["correct_answer"].get<std::string>();
    if (correct.size() != 1 || correct[0] < 'A' || correct[0] > 'D') {
        *reason = "correct_answer must be one of A, B, C, D";
        return std::nullopt;
    }
    entry.correct = correct[0];
    return entry;
}

std::optional<McqItem> parse_item(const json& rec, std::string* reason) {
    if (!rec.is_object()) {
        *reason = "record is not an object";
        return std::nullopt;
    }
    for (const char* k : kMcqKeys) {
        if (!rec.contains(k)) {
            *reason = std::string("missing field ") + k;
            return std::nullopt;
        }
    }
    McqItem item;
    if (!rec["question_id"].is_string() || rec["question_id"].get<std::string>().empty()) {
        *reason = "question_id must be a non-empty string";
        return std::nullopt;
    }
    item.question_id = rec["question_id"].get<std::string>();
    item.source_concept =
        rec["source_concept"].is_string() ? rec["source_concept"].get<std::string>() : "";
    if (!rec["mcq_items"].is_array() || rec["mcq_items"].empty()) {
        *reason = "mcq_items must be a non-empty array";
        return std::nullopt;
    }
    for (const auto& e : rec["mcq_items"]) {
        std::string entry_reason;
        auto entry = parse_entry(e, &entry_reason);
        if (!entry) {
            *reason = entry_reason;
            return std::nullopt;
        }
        item.entries.push_back(std::move(*entry));
    }
    return item;
}

} // namespace

std::vector<McqItem> mcqs_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw data_error(std::string("MCQ payload is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw data_error("MCQ payload root must be a JSON array");
    std::vector<McqItem> out;
    std::size_t index = 0;
    for (const auto& rec : doc) {
        std::string reason;
        auto item = parse_item(rec, &reason);
        if (!item)
            throw data_error("MCQ record " + std::to_string(index) + ": " + reason);
        out.push_back(std::move(*item));
        ++index;
    }
    return out;
}

std::string mcqs_to_json(const std::vector<McqItem>& items) {
    json arr = json::array();
    for (const auto& item : items) {
        json entries = json::array();
        for (const auto& e : item.entries) {
            entries.push_back({{"language_code", std::string(language_name(e.language))},
                               {"question", e.question},
                               {"option_A", e.options[0]},
                               {"option_B", e.options[1]},
                               {"option_C", e.options[2]},
                               {"option_D", e.options[3]},
                               {"correct_answer", std::string(1, e.correct)}});
        }
        arr.push_back({{"question_id", item.question_id},
                       {"source_concept", item.source_concept},
                       {"mcq_items", std::move(entries)}});
    }
    return arr.dump(2);
}

std::vector<McqItem> load_mcqs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open MCQ file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return mcqs_from_json(ss.str());
}

std::string_view probe_choice_name(ProbeChoice choice) {
    switch (choice) {
        case ProbeChoice::A: return "A";
        case ProbeChoice::B: return "B";
        case ProbeChoice::C: return "C";
        case ProbeChoice::D: return "D";
        case ProbeChoice::Abstain: return "Abstain";
    }
    return "";
}

std::string render_generation_prompt(const std::vector<std::string>& topics, int n) {
    std::string p;
    p += "Task: You are an expert medical content generator. Generate " +
         std::to_string(n) +
         " high-quality, medically accurate multiple-choice questions (MCQs) "
         "based strictly on content from MedlinePlus by searching and curating "
         "from the website.\n\n";
    p += "You must independently compose each question in ALL of the following "
         "languages: Amharic, Bengali, French, Hausa, Hindi, Japanese, Korean, "
         "Spanish, Swahili, Thai, Turkish, Vietnamese, Yoruba.\n\n";
    if (!topics.empty()) {
        p += "Focus on the following MedlinePlus topics: ";
        for (std::size_t i = 0; i < topics.size(); ++i) {
            if (i) p += ", ";
            p += topics[i];
        }
        p += ".\n\n";
    }
    p += "Requirements:\n";
    p += "1. Medical Grounding: All information must be sourced from MedlinePlus, "
         "covering symptoms, causes, risk factors, diagnostics, treatments, or "
         "prevention strategies.\n";
    p += "2. Independent Composition: Each language version must be originally "
         "written (not translated) using natural phrasing and medically "
         "appropriate terminology for that language.\n";
    p += "3. Clinical Reasoning Depth: Questions must require genuine clinical "
         "reasoning beyond trivial fact recall. Each question should have exactly "
         "one unambiguous correct answer.\n";
    p += "4. Format: 4-option MCQ (A/B/C/D) with one correct answer.\n\n";
    p += "Output Format: Return valid JSON array:\n";
    p += "[\n  {\"question_id\": \"<id>\", \"source_concept\": \"<MedlinePlus_topic>\",\n"
         "   \"mcq_items\": [{\"language_code\": \"<lang>\", \"question\": \"<text>\",\n"
         "     \"option_A\": \"<text>\", \"option_B\": \"<text>\", \"option_C\": "
         "\"<text>\", \"option_D\": \"<text>\",\n"
         "     \"correct_answer\": \"<A|B|C|D>\"}, ...]}\n]\n\n";
    p += "IMPORTANT: Return ONLY valid JSON without explanations, formatting, or "
         "additional text. Ensure all special characters are properly escaped.";
    return p;
}

std::string render_probe_prompt(const McqEntry& entry) {
    std::string p;
    p += "Answer the following multiple-choice question. Reply with exactly one "
         "letter: A, B, C, or D.\n\n";
    p += "Question: " + entry.question + "\n";
    p += "A) " + entry.options[0] + "\n";
    p += "B) " + entry.options[1] + "\n";
    p += "C) " + entry.options[2] + "\n";
    p += "D) " + entry.options[3] + "\n\nAnswer:";
    return p;
}

std::string render_ambiguity_prompt(const McqItem& item) {
    std::string p;
    p += "You are reviewing a multilingual multiple-choice medical question for "
         "quality control. Below are its language versions with the marked "
         "correct option. Decide whether the question has multiple defensible "
         "correct answers or is inconsistent across language versions. Reply "
         "with exactly one word: AMBIGUOUS or CLEAN.\n";
    for (const auto& e : item.entries) {
        p += "\n[";
        p += language_name(e.language);
        p += "] ";
        p += e.question;
        p += "\nA) " + e.options[0] + "\nB) " + e.options[1] + "\nC) " +
             e.options[2] + "\nD) " + e.options[3];
        p += "\nCorrect: ";
        p += e.correct;
        p += "\n";
    }
    return p;
}

std::string render_conversion_prompt(const McqEntry& entry) {
    const std::string gold = entry.options[static_cast<std::size_t>(entry.correct - 'A')];
    std::string p;
    p += "Convert the following multiple-choice medical question into an "
         "open-ended question. Remove all answer options and any reference to "
         "option letters. Write an explicit step-by-step reasoning chain and a "
         "free-form ground-truth answer, all in ";
    p += language_name(entry.language);
    p += ". Return ONLY valid JSON: {\"question\": \"<text>\", "
         "\"reasoning_steps\": [\"<step>\", ...], \"answer\": \"<text>\"}\n\n";
    p += "Question: " + entry.question + "\n";
    p += "Correct answer: " + gold;
    return p;
}

struct CueLeakDetector::Pattern {
    std::string source;
    std::regex re;
};

CueLeakDetector::CueLeakDetector(const std::string& fixture_path) {
    const std::string path = fixture_path.empty()
                                 ? std::string(POLYRL_DATA_DIR "/cue_patterns.txt")
                                 : fixture_path;
    std::ifstream in(path);
    if (!in) throw data_error("cannot open cue pattern fixture: " + path);
    auto patterns = std::make_shared<std::vector<Pattern>>();
    std::string line;
    while (std::getline(in, line)) {
        const std::string pattern = util::trim(line);
        if (pattern.empty() || pattern[0] == '#') continue;
        patterns->push_back({pattern, std::regex(util::fold_case(pattern))});
    }
    patterns_ = std::move(patterns);
}

std::optional<std::string> CueLeakDetector::find_leak(std::string_view text) const {
    const std::string folded = util::fold_case(text);
    for (const auto& p : *patterns_) {
        if (std::regex_search(folded, p.re)) return p.source;
    }
    return std::nullopt;
}

Pipeline::Pipeline(PipelineEndpoints endpoints)
    : endpoints_(std::move(endpoints)), cues_() {
    generator_ = std::make_unique<RemoteChatClient>(endpoints_.generator);
    for (const auto& [name, opts] : endpoints_.probes)
        probes_.emplace_back(name, std::make_unique<RemoteChatClient>(opts));
    ambiguity_ = std::make_unique<RemoteChatClient>(endpoints_.ambiguity_judge);
    if (!endpoints_.cache_path.empty())
        cache_ = std::make_shared<JudgeCache>(endpoints_.cache_path);
}

std::string Pipeline::cached_chat(std::string_view protocol,
                                  const RemoteChatClient& client,
                                  const std::string& prompt, double temperature,
                                  int max_tokens, bool store) {
    std::string key;
    if (cache_) {
        std::string buf(protocol);
        buf += '\x1f';
        buf += client.options().model;
        buf += '\x1f';
        buf += prompt;
        key = util::sha256_hex(buf);
        if (auto hit = cache_->lookup(key)) return hit->raw;
    }
    const std::string reply = client.chat(prompt, temperature, max_tokens);
    if (cache_ && store) cache_->store(key, 0.0, reply);
    return reply;
}

void Pipeline::log(const std::string& question_id, const std::string& stage,
                   const std::string& decision, const std::string& evidence) {
    json rec = {{"question_id", question_id},
                {"stage", stage},
                {"decision", decision},
                {"evidence", evidence}};
    log_.push_back(rec.dump());
}

namespace {

// Strips a prose preamble/epilogue around the outermost JSON array.
std::optional<std::string> strip_to_json_array(const std::string& payload) {
    const auto begin = payload.find('[');
    const auto end = payload.rfind(']');
    if (begin == std::string::npos || end == std::string::npos || end <= begin)
        return std::nullopt;
    return payload.substr(begin, end - begin + 1);
}

} // namespace

std::vector<McqItem> Pipeline::generate_mcqs(const std::vector<std::string>& topics,
                                             int n) {
    if (n < 1) throw config_error("generate_mcqs: n must be >= 1");
    const std::string prompt = render_generation_prompt(topics, n);

    for (int attempt = 0; attempt <= endpoints_.generation_retries; ++attempt) {
        // temperature 0 with a wide token budget for the structured payload
        std::string payload = cached_chat("mcqgen-v1", *generator_, prompt, 0.0, 4096,
                                          /*store=*/false);
        json doc = json::parse(payload, nullptr, false);
        if (doc.is_discarded()) {
            const auto stripped = strip_to_json_array(payload);
            if (stripped) {
                doc = json::parse(*stripped, nullptr, false);
                if (!doc.is_discarded()) payload = *stripped;
            }
        }
        if (doc.is_discarded() || !doc.is_array()) {
            log("-", "generate", "retry", "malformed payload");
            continue;
        }

        std::vector<McqItem> accepted;
        std::size_t index = 0;
        for (const auto& rec : doc) {
            std::string reason;
            auto item = parse_item(rec, &reason);
            if (item) {
                log(item->question_id, "generate", "accepted", "");
                accepted.push_back(std::move(*item));
            } else {
                log("record-" + std::to_string(index), "generate", "rejected", reason);
            }
            ++index;
        }
        if (!accepted.empty()) {
            if (cache_) {
                std::string buf("mcqgen-v1");
                buf += '\x1f';
                buf += generator_->options().model;
                buf += '\x1f';
                buf += prompt;
                cache_->store(util::sha256_hex(buf), 0.0, payload);
            }
            return accepted;
        }
    }
    throw remote_error("generate_mcqs: no valid records after retries");
}

Pipeline::FilterResult Pipeline::difficulty_filter(const std::vector<McqItem>& items) {
    if (probes_.empty()) throw config_error("difficulty_filter requires >= 1 probe");

    FilterResult result;
    for (const auto& item : items) {
        McqItem kept_item = item;
        kept_item.entries.clear();
        McqItem dropped_item = item;
        dropped_item.entries.clear();

        for (const auto& entry : item.entries) {
            bool all_correct = true;
            for (const auto& [name, client] : probes_) {
                ProbeVerdict verdict;
                verdict.question_id = item.question_id;
                verdict.probe_name = name;
                verdict.language = entry.language;
                try {
                    const std::string reply = cached_chat(
                        "probe-v1:" + name, *client, render_probe_prompt(entry), 0.0,
                        10, /*store=*/true);
                    const std::string t = util::trim(reply);
                    if (!t.empty() && t[0] >= 'A' && t[0] <= 'D' &&
                        (t.size() == 1 || !std::isalnum(static_cast<unsigned char>(t[1])))) {
                        verdict.chosen = static_cast<ProbeChoice>(t[0] - 'A');
                    } else {
                        verdict.chosen = ProbeChoice::Abstain;
                    }
                } catch (const Error& e) {
                    verdict.chosen = ProbeChoice::Abstain; // transport error, logged
                    log(item.question_id, "difficulty", "probe-error",
                        name + ": " + e.what());
                }
                verdict.correct =
                    verdict.chosen != ProbeChoice::Abstain &&
                    static_cast<char>('A' + static_cast<int>(verdict.chosen)) ==
                        entry.correct;
                if (!verdict.correct) all_correct = false;
                log(item.question_id, "difficulty",
                    verdict.correct ? "probe-correct" : "probe-incorrect",
                    name + "/" + std::string(language_name(entry.language)) + " chose " +
                        std::string(probe_choice_name(verdict.chosen)));
                result.verdicts.push_back(verdict);
            }
            // Trivial iff every probe answers correctly in this language.
            if (all_correct) {
                dropped_item.entries.push_back(entry);
                log(item.question_id, "difficulty", "entry-dropped",
                    std::string(language_name(entry.language)) +
                        ": all probes correct");
            } else {
                kept_item.entries.push_back(entry);
            }
        }
        if (!kept_item.entries.empty()) result.kept.push_back(std::move(kept_item));
        if (!dropped_item.entries.empty())
            result.dropped.push_back(std::move(dropped_item));
    }
    return result;
}

Pipeline::AmbiguityResult Pipeline::ambiguity_filter(const std::vector<McqItem>& items) {
    AmbiguityResult result;
    for (const auto& item : items) {
        try {
            const std::string reply =
                cached_chat("ambiguity-v1", *ambiguity_, render_ambiguity_prompt(item),
                            0.0, 10, /*store=*/true);
            const std::string t = util::fold_case(util::trim(reply));
            if (t.rfind("ambiguous", 0) == 0) {
                log(item.question_id, "ambiguity", "dropped", reply);
                result.dropped.push_back(item);
            } else {
                log(item.question_id, "ambiguity", "kept", reply);
                result.kept.push_back(item);
            }
        } catch (const Error& e) {
            // conservative: keep with a warning trail
            log(item.question_id, "ambiguity", "kept-with-warning", e.what());
            result.kept.push_back(item);
        }
    }
    return result;
}

std::vector<BenchInstance> Pipeline::to_open_ended(const McqItem& item) {
    std::vector<BenchInstance> out;
    for (const auto& entry : item.entries) {
        const std::string prompt = render_conversion_prompt(entry);
        bool converted = false;
        for (int attempt = 0; attempt <= endpoints_.generation_retries && !converted;
             ++attempt) {
            const std::string reply =
                cached_chat("convert-v1", *generator_, prompt, 0.0, 2048,
                            /*store=*/false);
            json doc = json::parse(reply, nullptr, false);
            if (doc.is_discarded() || !doc.is_object() || !doc.contains("question") ||
                !doc.contains("reasoning_steps") || !doc.contains("answer")) {
                log(item.question_id, "convert", "retry", "malformed payload");
                continue;
            }
            BenchInstance inst;
            inst.id = item.question_id + "-" +
                      util::fold_case(language_name(entry.language));
            inst.language = entry.language;
            inst.question = doc["question"].is_string()
                                ? doc["question"].get<std::string>()
                                : "";
            inst.gold_answer =
                doc["answer"].is_string() ? doc["answer"].get<std::string>() : "";
            if (doc["reasoning_steps"].is_array()) {
                for (const auto& s : doc["reasoning_steps"]) {
                    if (!s.is_string()) continue;
                    ReasoningStep step;
                    step.text = s.get<std::string>();
                    if (!util::is_blank(step.text)) inst.reasoning_steps.push_back(step);
                }
            }
            inst.source_concept = item.source_concept;

            if (util::is_blank(inst.question) || util::is_blank(inst.gold_answer)) {
                log(item.question_id, "convert", "retry", "blank question or answer");
                continue;
            }
            if (inst.reasoning_steps.empty()) {
                log(item.question_id, "convert", "retry", "empty reasoning chain");
                continue;
            }
            if (auto leak = cues_.find_leak(inst.question + "\n" + inst.gold_answer)) {
                log(item.question_id, "convert", "retry", "cue leak: " + *leak);
                continue;
            }

            if (cache_) {
                std::string buf("convert-v1");
                buf += '\x1f';
                buf += generator_->options().model;
                buf += '\x1f';
                buf += prompt;
                cache_->store(util::sha256_hex(buf), 0.0, reply);
            }
            log(item.question_id, "convert", "converted",
                std::string(language_name(entry.language)));
            out.push_back(std::move(inst));
            converted = true;
        }
        if (!converted)
            throw remote_error("to_open_ended: conversion failed for " +
                               item.question_id + " (" +
                               std::string(language_name(entry.language)) + ")");
    }
    return out;
}

std::vector<BenchInstance> dedup(const std::vector<BenchInstance>& instances) {
    std::vector<BenchInstance> out;
    std::unordered_set<std::string> seen;
    for (const auto& inst : instances) {
        std::string key(language_name(inst.language));
        key += '\x1f';
        key += normalize_answer(inst.question);
        if (seen.insert(util::sha256_hex(key)).second) out.push_back(inst);
    }
    return out;
}

} // namespace polyrl
