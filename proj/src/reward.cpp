#include "polyrl/reward.hpp"

#include <cmath>

#include "polyrl/util.hpp"

namespace polyrl {

void RewardWeights::validate() const {
    if (acc < 0.0 || lang < 0.0 || fmt < 0.0)
        throw config_error("reward weights must be non-negative");
    if (std::fabs(acc + lang + fmt - 1.0) > 1e-12)
        throw config_error("reward weights must sum to 1");
}

RewardBreakdown composite_reward(double r_acc, double r_lang, double r_fmt,
                                 const RewardWeights& weights) {
    weights.validate();
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw data_error(std::string("reward component ") + name +
                             " outside [0,1]");
    };
    check(r_acc, "r_acc");
    check(r_lang, "r_lang");
    check(r_fmt, "r_fmt");

    RewardBreakdown b;
    b.r_acc = r_acc;
    b.r_lang = r_lang;
    b.r_fmt = r_fmt;
    b.weights = weights;
    b.total = weights.acc * r_acc + weights.lang * r_lang + weights.fmt * r_fmt;
    return b;
}

RewardScorer::RewardScorer(RewardConfig config)
    : config_(std::move(config)),
      detector_(config_.detector ? config_.detector : &default_detector()),
      judge_(config_.backend) {
    config_.weights.validate();
}

namespace {

// The accuracy verifier sees the extracted answer when the scaffold parsed,
// the raw output otherwise; format slips are priced by the format channel.
const std::string& accuracy_view(const ParsedOutput& parsed, const std::string& output) {
    if (parsed.well_formed && parsed.answer) return *parsed.answer;
    return output;
}

} // namespace

RewardBreakdown RewardScorer::score_output(const BenchInstance& instance,
                                           const std::string& output) {
    const ParsedOutput parsed = parse_output(output, config_.parse_options);
    const double r_fmt = format_reward(parsed);
    const double r_lang =
        detector_->language_reward(output, parsed, instance.language, config_.scope);

    const std::string& graded = accuracy_view(parsed, output);
    double r_acc = 0.0;
    if (!util::is_blank(graded)) {
        r_acc = judge_.score_accuracy(instance.question, instance.gold_answer, graded)
                    .score;
    }
    return composite_reward(r_acc, r_lang, r_fmt, config_.weights);
}

RewardBreakdown RewardScorer::score_completion(const BenchInstance& instance,
                                               const Completion& completion) {
    return score_output(instance, completion.text);
}

RewardScorer::GroupResult
RewardScorer::score_group(const BenchInstance& instance,
                          const std::vector<Completion>& completions) {
    if (completions.empty())
        throw data_error("score_group: completions must be non-empty");

    GroupResult result;
    result.breakdowns.resize(completions.size());

    // Local format/language stages, then one batched judge pass.
    std::vector<ParsedOutput> parsed(completions.size());
    std::vector<double> r_fmt(completions.size()), r_lang(completions.size());
    std::vector<Judge::BatchItem> items(completions.size());
    std::vector<bool> blank(completions.size(), false);
    for (std::size_t i = 0; i < completions.size(); ++i) {
        parsed[i] = parse_output(completions[i].text, config_.parse_options);
        r_fmt[i] = format_reward(parsed[i]);
        r_lang[i] = detector_->language_reward(completions[i].text, parsed[i],
                                               instance.language, config_.scope);
        const std::string& graded = accuracy_view(parsed[i], completions[i].text);
        blank[i] = util::is_blank(graded);
        items[i] = {instance.question, instance.gold_answer,
                    blank[i] ? std::string("-") : graded};
    }

    const Judge::BatchResult judged = judge_.score_batch(items, config_.concurrency);
    for (std::size_t i = 0; i < completions.size(); ++i) {
        if (!judged.verdicts[i]) continue; // error recorded below
        const double r_acc = blank[i] ? 0.0 : judged.verdicts[i]->score;
        result.breakdowns[i] =
            composite_reward(r_acc, r_lang[i], r_fmt[i], config_.weights);
    }
    result.errors = judged.errors;
    return result;
}

} // namespace polyrl
