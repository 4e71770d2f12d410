#include "polyrl/evalrep.hpp"

#include <algorithm>
#include <cstdio>

#include "polyrl/util.hpp"

namespace polyrl {

std::vector<EvalRecord> evaluate(const std::map<std::string, std::string>& outputs,
                                 const std::vector<BenchInstance>& testset,
                                 const EvalConfig& config) {
    const LanguageDetector& detector =
        config.detector ? *config.detector : default_detector();
    Judge judge(config.backend);

    std::vector<EvalRecord> records;
    records.reserve(testset.size());
    for (const auto& inst : testset) {
        EvalRecord rec;
        rec.instance_id = inst.id;
        rec.language = inst.language;

        auto it = outputs.find(inst.id);
        if (it == outputs.end() || util::is_blank(it->second)) {
            rec.note = "missing";
            records.push_back(std::move(rec));
            continue;
        }
        const std::string& output = it->second;
        const ParsedOutput parsed = parse_output(output, config.parse_options);

        const std::string graded =
            parsed.well_formed && parsed.answer ? *parsed.answer : output;
        try {
            rec.la = judge.judge_correct(inst.question, inst.gold_answer, graded);
        } catch (const Error& e) {
            rec.la = false;
            rec.note = std::string("judge error: ") + e.what();
        }

        if (config.lc_remote) {
            try {
                rec.lc = judge.verify_language_remote(inst.language, graded);
            } catch (const Error& e) {
                rec.lc = false;
                if (rec.note.empty()) rec.note = std::string("judge error: ") + e.what();
            }
        } else {
            // answer-only scope; malformed outputs fall back to the full text
            ParsedOutput scoped_parse = parsed;
            if (!parsed.well_formed || !parsed.answer) scoped_parse.answer = output;
            rec.lc = detector.language_reward(output, scoped_parse, inst.language,
                                              LangScope::AnswerOnly) == 1.0;
            if (!util::is_blank(*scoped_parse.answer))
                rec.detector_confidence =
                    detector.detect(*scoped_parse.answer).confidence;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

EvalSummary summarize(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw data_error("summarize: no records");

    struct Tally {
        int n = 0, la = 0, lc = 0;
    };
    std::map<std::string, Tally> by_lang; // language-name order
    for (const auto& rec : records) {
        auto& t = by_lang[std::string(language_name(rec.language))];
        ++t.n;
        if (rec.la) ++t.la;
        if (rec.lc) ++t.lc;
    }

    EvalSummary summary;
    for (const auto& [lang, t] : by_lang) {
        LanguageSummary row;
        row.language = lang;
        row.n = t.n;
        row.la_pct = 100.0 * t.la / t.n;
        row.lc_pct = 100.0 * t.lc / t.n;
        summary.macro_la += row.la_pct;
        summary.macro_lc += row.lc_pct;
        summary.rows.push_back(std::move(row));
    }
    summary.macro_la /= static_cast<double>(summary.rows.size());
    summary.macro_lc /= static_cast<double>(summary.rows.size());
    return summary;
}

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace

std::string render(const EvalSummary& summary, RenderFormat format) {
    std::string out;
    int total_n = 0;
    for (const auto& row : summary.rows) total_n += row.n;

    if (format == RenderFormat::Csv) {
        out += "language,n,la_pct,lc_pct\n";
        for (const auto& row : summary.rows) {
            out += row.language + "," + std::to_string(row.n) + "," +
                   pct(row.la_pct) + "," + pct(row.lc_pct) + "\n";
        }
        out += "Mean," + std::to_string(total_n) + "," + pct(summary.macro_la) + "," +
               pct(summary.macro_lc) + "\n";
        return out;
    }

    out += "| Language | Logic | Lang | N |\n";
    out += "|---|---|---|---|\n";
    for (const auto& row : summary.rows) {
        out += "| " + row.language + " | " + pct(row.la_pct) + " | " +
               pct(row.lc_pct) + " | " + std::to_string(row.n) + " |\n";
    }
    out += "| Mean | " + pct(summary.macro_la) + " | " + pct(summary.macro_lc) +
           " | " + std::to_string(total_n) + " |\n";
    return out;
}

} // namespace polyrl
