#include "polyrl/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "polyrl/util.hpp"

namespace polyrl {

using nlohmann::json;

namespace {

struct LangInfo {
    LanguageCode code;
    std::string_view name;
    ScriptClass script;
    std::string_view family;
};

constexpr std::array<LangInfo, kNumLanguages> kLangTable = {{
    {LanguageCode::Amharic, "Amharic", ScriptClass::Ethiopic, "Afroasiatic"},
    {LanguageCode::Bengali, "Bengali", ScriptClass::Bengali, "Indo-European"},
    {LanguageCode::French, "French", ScriptClass::LatinExtended, "Indo-European"},
    {LanguageCode::Hausa, "Hausa", ScriptClass::LatinExtended, "Afroasiatic"},
    {LanguageCode::Hindi, "Hindi", ScriptClass::Devanagari, "Indo-European"},
    {LanguageCode::Japanese, "Japanese", ScriptClass::JapaneseMixed, "Japonic"},
    {LanguageCode::Korean, "Korean", ScriptClass::Hangul, "Koreanic"},
    {LanguageCode::Spanish, "Spanish", ScriptClass::LatinExtended, "Indo-European"},
    {LanguageCode::Swahili, "Swahili", ScriptClass::LatinExtended, "Niger-Congo"},
    {LanguageCode::Thai, "Thai", ScriptClass::Thai, "Tai-Kadai"},
    {LanguageCode::Turkish, "Turkish", ScriptClass::LatinExtended, "Turkic"},
    {LanguageCode::Vietnamese, "Vietnamese", ScriptClass::LatinExtended, "Austroasiatic"},
    {LanguageCode::Yoruba, "Yoruba", ScriptClass::LatinExtended, "Niger-Congo"},
}};

const LangInfo& info(LanguageCode lang) {
    return kLangTable[static_cast<std::size_t>(lang)];
}

} // namespace

std::string_view language_name(LanguageCode lang) { return info(lang).name; }

std::optional<LanguageCode> parse_language(std::string_view name) {
    for (const auto& li : kLangTable)
        if (li.name == name) return li.code;
    return std::nullopt;
}

ScriptClass script_of(LanguageCode lang) { return info(lang).script; }

std::string_view family_of(LanguageCode lang) { return info(lang).family; }

std::string_view script_name(ScriptClass sc) {
    switch (sc) {
        case ScriptClass::Ethiopic: return "Ethiopic";
        case ScriptClass::Bengali: return "Bengali";
        case ScriptClass::Devanagari: return "Devanagari";
        case ScriptClass::JapaneseMixed: return "JapaneseMixed";
        case ScriptClass::Hangul: return "Hangul";
        case ScriptClass::Thai: return "Thai";
        case ScriptClass::LatinExtended: return "LatinExtended";
    }
    return "";
}

std::optional<LanguageCode> language_of_script(ScriptClass sc) {
    switch (sc) {
        case ScriptClass::Ethiopic: return LanguageCode::Amharic;
        case ScriptClass::Bengali: return LanguageCode::Bengali;
        case ScriptClass::Devanagari: return LanguageCode::Hindi;
        case ScriptClass::JapaneseMixed: return LanguageCode::Japanese;
        case ScriptClass::Hangul: return LanguageCode::Korean;
        case ScriptClass::Thai: return LanguageCode::Thai;
        case ScriptClass::LatinExtended: return std::nullopt;
    }
    return std::nullopt;
}

std::string_view tier_name(ResourceTier tier) {
    switch (tier) {
        case ResourceTier::High: return "High";
        case ResourceTier::Medium: return "Medium";
        case ResourceTier::Low: return "Low";
    }
    return "";
}

std::optional<ResourceTier> parse_tier(std::string_view name) {
    for (auto t : kAllTiers)
        if (tier_name(t) == name) return t;
    return std::nullopt;
}

namespace {

void require_keys(const json& obj, const std::vector<std::string>& keys,
                  const std::string& where) {
    for (const auto& k : keys)
        if (!obj.contains(k))
            throw data_error(where + ": missing key \"" + k + "\"");
    for (const auto& [k, v] : obj.items()) {
        (void)v;
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw data_error(where + ": unknown key \"" + k + "\"");
    }
}

BenchInstance parse_record(const json& rec, std::size_t index) {
    const std::string where = "record " + std::to_string(index);
    if (!rec.is_object()) throw data_error(where + ": not an object");
    require_keys(rec,
                 {"id", "language", "question", "reasoning_steps", "gold_answer",
                  "source_concept"},
                 where);

    BenchInstance inst;
    if (!rec["id"].is_string() || rec["id"].get<std::string>().empty())
        throw data_error(where + ": field \"id\" must be a non-empty string");
    inst.id = rec["id"].get<std::string>();

    if (!rec["language"].is_string())
        throw data_error(where + ": field \"language\" must be a string");
    const auto lang = parse_language(rec["language"].get<std::string>());
    if (!lang)
        throw data_error(where + ": unknown language code \"" +
                         rec["language"].get<std::string>() + "\"");
    inst.language = *lang;

    if (!rec["question"].is_string() ||
        util::is_blank(rec["question"].get<std::string>()))
        throw data_error(where + ": field \"question\" must be non-empty");
    inst.question = rec["question"].get<std::string>();

    if (!rec["gold_answer"].is_string() ||
        util::is_blank(rec["gold_answer"].get<std::string>()))
        throw data_error(where + ": field \"gold_answer\" must be non-empty");
    inst.gold_answer = rec["gold_answer"].get<std::string>();

    if (!rec["source_concept"].is_string())
        throw data_error(where + ": field \"source_concept\" must be a string");
    inst.source_concept = rec["source_concept"].get<std::string>();

    if (!rec["reasoning_steps"].is_array())
        throw data_error(where + ": field \"reasoning_steps\" must be an array");
    std::size_t si = 0;
    for (const auto& step : rec["reasoning_steps"]) {
        const std::string swhere =
            where + ", reasoning_steps[" + std::to_string(si++) + "]";
        if (!step.is_object()) throw data_error(swhere + ": not an object");
        require_keys(step, {"text", "step_language"}, swhere);
        ReasoningStep rs;
        if (!step["text"].is_string() || util::is_blank(step["text"].get<std::string>()))
            throw data_error(swhere + ": field \"text\" must be non-empty");
        rs.text = step["text"].get<std::string>();
        if (step["step_language"].is_null()) {
            rs.step_language = std::nullopt;
        } else if (step["step_language"].is_string()) {
            const auto sl = parse_language(step["step_language"].get<std::string>());
            if (!sl)
                throw data_error(swhere + ": unknown language code \"" +
                                 step["step_language"].get<std::string>() + "\"");
            rs.step_language = sl;
        } else {
            throw data_error(swhere + ": field \"step_language\" must be a string or null");
        }
        inst.reasoning_steps.push_back(std::move(rs));
    }
    return inst;
}

} // namespace

std::vector<BenchInstance> parse_dataset_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw data_error(std::string("dataset is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw data_error("dataset root must be a JSON array");

    std::vector<BenchInstance> out;
    out.reserve(doc.size());
    std::unordered_set<std::string> ids;
    std::size_t index = 0;
    for (const auto& rec : doc) {
        BenchInstance inst = parse_record(rec, index);
        if (!ids.insert(inst.id).second)
            throw data_error("record " + std::to_string(index) + ": duplicate id \"" +
                             inst.id + "\"");
        out.push_back(std::move(inst));
        ++index;
    }
    return out;
}

std::vector<BenchInstance> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open dataset file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset_json(ss.str());
}

std::string dataset_to_json(const std::vector<BenchInstance>& instances) {
    json arr = json::array();
    for (const auto& inst : instances) {
        json steps = json::array();
        for (const auto& s : inst.reasoning_steps) {
            json st;
            st["text"] = s.text;
            st["step_language"] =
                s.step_language ? json(std::string(language_name(*s.step_language)))
                                : json(nullptr);
            steps.push_back(std::move(st));
        }
        json rec;
        rec["id"] = inst.id;
        rec["language"] = std::string(language_name(inst.language));
        rec["question"] = inst.question;
        rec["reasoning_steps"] = std::move(steps);
        rec["gold_answer"] = inst.gold_answer;
        rec["source_concept"] = inst.source_concept;
        arr.push_back(std::move(rec));
    }
    return arr.dump(2);
}

namespace {

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

} // namespace

DatasetSplit make_splits(const std::vector<BenchInstance>& dataset, std::uint64_t seed) {
    if (dataset.empty()) throw data_error("cannot split an empty dataset");

    // Language buckets in first-appearance order of the registry, ids in
    // dataset order, then a seed-derived per-language shuffle.
    std::map<LanguageCode, std::vector<std::string>> buckets;
    for (const auto& inst : dataset) buckets[inst.language].push_back(inst.id);

    for (const auto& [lang, ids] : buckets) {
        if (ids.size() < 5)
            throw data_error("language " + std::string(language_name(lang)) +
                             " has only " + std::to_string(ids.size()) +
                             " instances; at least 5 are required to stratify");
    }

    DatasetSplit split;
    split.seed = seed;
    for (auto& [lang, ids] : buckets) {
        util::Rng rng(util::hash_combine(seed, static_cast<std::uint64_t>(lang) + 1));
        util::shuffle(ids, rng);
        const std::size_t n = ids.size();
        const std::size_t n_test = round_half_up(0.20 * static_cast<double>(n));
        const std::size_t n_rft =
            round_half_up(0.20 * static_cast<double>(n - n_test));
        std::size_t i = 0;
        for (; i < n_test; ++i) split.test.push_back(ids[i]);
        for (; i < n_test + n_rft; ++i) split.train_rft.push_back(ids[i]);
        for (; i < n; ++i) split.train_sft.push_back(ids[i]);
    }
    return split;
}

std::string split_to_json(const DatasetSplit& split) {
    json doc;
    doc["train_sft"] = split.train_sft;
    doc["train_rft"] = split.train_rft;
    doc["test"] = split.test;
    doc["seed"] = split.seed;
    return doc.dump(2);
}

DatasetSplit split_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw data_error(std::string("split file is not valid JSON: ") + e.what());
    }
    DatasetSplit split;
    try {
        split.train_sft = doc.at("train_sft").get<std::vector<std::string>>();
        split.train_rft = doc.at("train_rft").get<std::vector<std::string>>();
        split.test = doc.at("test").get<std::vector<std::string>>();
        split.seed = doc.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw data_error(std::string("malformed split file: ") + e.what());
    }
    return split;
}

} // namespace polyrl
