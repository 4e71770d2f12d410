#include "polyrl/grpo.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "polyrl/kernels.hpp"
#include "polyrl/util.hpp"

namespace polyrl {

using nlohmann::json;

GrpoConfig GrpoConfig::paper_profile() { return GrpoConfig{}; }

GrpoConfig GrpoConfig::toy_profile() {
    GrpoConfig c;
    c.lr = 1e-2;
    c.max_prompt_len = 64;
    c.max_completion_len = 48;
    return c;
}

void GrpoConfig::validate() const {
    if (group_size < 2)
        throw config_error("group_size must be >= 2 for non-degenerate advantages");
    if (clip_eps <= 0.0 || clip_eps >= 1.0)
        throw config_error("clip_eps must be in (0,1)");
    if (kl_coeff < 0.0) throw config_error("kl_coeff must be >= 0");
    if (std_floor < 0.0) throw config_error("std_floor must be >= 0");
    if (batch_prompts < 1) throw config_error("batch_prompts must be >= 1");
    if (max_steps < 1) throw config_error("max_steps must be >= 1");
    if (max_completion_len < 1) throw config_error("max_completion_len must be >= 1");
    if (lr < 0.0) throw config_error("lr must be >= 0");
}

std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double std_floor) {
    if (rewards.size() < 2)
        throw data_error("compute_advantages needs at least 2 rewards");
    const auto n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n; // population variance
    const double std = std::sqrt(var);

    std::vector<double> adv(rewards.size(), 0.0);
    if (std == 0.0) return adv; // constant group
    for (std::size_t j = 0; j < rewards.size(); ++j)
        adv[j] = (rewards[j] - mean) / (std + std_floor);
    return adv;
}

double grpo_objective(std::span<const double> new_logprobs,
                      std::span<const double> old_logprobs,
                      std::span<const double> ref_logprobs,
                      std::span<const double> advantages, double clip_eps,
                      double kl_coeff, GrpoDiagnostics* diag,
                      std::vector<double>* dloss_dnew) {
    const std::size_t n = new_logprobs.size();
    if (old_logprobs.size() != n || ref_logprobs.size() != n || advantages.size() != n)
        throw data_error("grpo_objective: mismatched lengths");
    if (n == 0) throw data_error("grpo_objective: empty batch");

    if (dloss_dnew) dloss_dnew->assign(n, 0.0);
    double surr_sum = 0.0, kl_sum = 0.0, ratio_sum = 0.0;
    std::size_t clipped = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(new_logprobs[j]) || !std::isfinite(old_logprobs[j]) ||
            !std::isfinite(ref_logprobs[j]) || !std::isfinite(advantages[j]))
            throw data_error("grpo_objective: non-finite input");

        const double ratio = std::exp(new_logprobs[j] - old_logprobs[j]);
        const double clipped_ratio = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
        const double a = advantages[j];
        const double unclipped = ratio * a;
        const double capped = clipped_ratio * a;
        const double surr = std::min(unclipped, capped);

        const double d = ref_logprobs[j] - new_logprobs[j];
        const double kl = std::exp(d) - d - 1.0; // >= 0

        surr_sum += surr;
        kl_sum += kl;
        ratio_sum += ratio;
        if (std::fabs(ratio - 1.0) > clip_eps) ++clipped;

        if (dloss_dnew) {
            const double dsurr = unclipped <= capped ? unclipped : 0.0; // d/dnew of surr
            const double dkl = 1.0 - std::exp(d);
            (*dloss_dnew)[j] = (-dsurr + kl_coeff * dkl) / static_cast<double>(n);
        }
    }

    if (diag) {
        diag->mean_ratio = ratio_sum / static_cast<double>(n);
        diag->clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
        diag->mean_kl = kl_sum / static_cast<double>(n);
    }
    return -surr_sum / static_cast<double>(n) + kl_coeff * kl_sum / static_cast<double>(n);
}

StepOutcome grpo_step(PolicyParams& params, const std::vector<GrpoGroup>& groups,
                      const GrpoConfig& config, int step_index, AdamWState& opt) {
    config.validate();
    if (groups.empty()) throw data_error("grpo_step: empty batch");

    std::vector<kernels::Sequence> seqs;
    std::vector<double> old_lp, ref_lp, adv;
    for (const auto& g : groups) {
        for (std::size_t j = 0; j < g.completions.size(); ++j) {
            seqs.push_back({g.prompt, g.completions[j].token_ids});
            old_lp.push_back(g.old_logprobs[j]);
            ref_lp.push_back(g.ref_logprobs[j]);
            adv.push_back(g.advantages[j]);
        }
    }

    std::vector<double> new_lp(seqs.size());
    kernels::batch_logprob(params, seqs, new_lp);

    StepOutcome outcome;
    std::vector<double> dloss_dnew;
    outcome.loss = grpo_objective(new_lp, old_lp, ref_lp, adv, config.clip_eps,
                                  config.kl_coeff, &outcome.diag, &dloss_dnew);

    std::vector<double> grad(params.weights.size(), 0.0);
    kernels::accumulate_grad(params, seqs, dloss_dnew, grad);
    for (double g : grad)
        if (!std::isfinite(g)) throw data_error("grpo_step: non-finite gradient");

    outcome.lr = cosine_warmup_lr(config.lr, step_index, config.max_steps,
                                  config.warmup_ratio);
    if (config.optimizer == GrpoConfig::Optimizer::AdamW) {
        opt.step(params.weights, grad, outcome.lr, config.weight_decay);
    } else {
        for (std::size_t i = 0; i < grad.size(); ++i)
            params.weights[i] -= outcome.lr * grad[i];
    }
    return outcome;
}

std::string TrainingReport::to_ldjson() const {
    std::string out;
    for (const auto& r : records) {
        json tiers = json::object();
        for (const auto& [tier, stats] : r.tiers)
            tiers[tier] = {{"mean_reward", stats.mean_reward},
                           {"lc_answer", stats.lc_answer},
                           {"n", stats.count}};
        json rec = {{"step", r.step},
                    {"phase", r.phase},
                    {"loss", r.loss},
                    {"mean_reward", r.mean_reward},
                    {"mean_r_acc", r.mean_r_acc},
                    {"mean_r_lang", r.mean_r_lang},
                    {"mean_r_fmt", r.mean_r_fmt},
                    {"clip_frac", r.clip_frac},
                    {"mean_kl", r.mean_kl},
                    {"lr", r.lr},
                    {"tiers", tiers}};
        out += rec.dump();
        out += "\n";
    }
    return out;
}

std::string TrainingReport::digest() const { return util::sha256_hex(to_ldjson()); }

void TrainingReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write training report: " + path);
    out << to_ldjson();
}

TrainResult train(PolicyParams init, const ToyTask& task,
                  const std::map<ResourceTier, std::vector<BenchInstance>>& pools,
                  const CurriculumSchedule& schedule, const RewardConfig& reward_config,
                  const GrpoConfig& config, std::uint64_t seed) {
    config.validate();
    schedule.validate();
    if (init.vocab_hash != task.vocab().content_hash())
        throw data_error("policy checkpoint does not match the task vocabulary");

    PolicyParams params = std::move(init);
    PolicyParams ref = params; // phase-entry anchor
    CurriculumState cur((CurriculumSchedule(schedule)));
    TierSampler sampler(pools, util::hash_combine(seed, 0x5a6d704c65725341ULL));
    RewardScorer scorer(reward_config);
    AdamWState opt;
    const ToyVocab& vocab = task.vocab();

    TrainResult result;
    for (int step = 0; step < config.max_steps && !cur.complete(); ++step) {
        const auto batch = sampler.sample_batch(cur.distribution(), config.batch_prompts);

        std::vector<GrpoGroup> groups;
        groups.reserve(batch.size());
        for (std::size_t p = 0; p < batch.size(); ++p) {
            const ToyTaskItem* item = task.find(batch[p].id);
            if (!item)
                throw data_error("instance " + batch[p].id + " is not a task prompt");

            GrpoGroup group;
            group.instance = batch[p];
            group.prompt = item->prompt;
            const std::uint64_t group_seed = util::hash_combine(
                util::hash_combine(seed, static_cast<std::uint64_t>(step) + 1),
                static_cast<std::uint64_t>(p) + 1);
            group.completions = sample_k(params, vocab, group.prompt,
                                         config.group_size, group_seed,
                                         config.max_completion_len);

            for (const auto& c : group.completions)
                group.old_logprobs.push_back(c.logprob_under_sampler);

            std::vector<kernels::Sequence> seqs;
            for (const auto& c : group.completions)
                seqs.push_back({group.prompt, c.token_ids});
            group.ref_logprobs.resize(seqs.size());
            kernels::batch_logprob(ref, seqs, group.ref_logprobs);

            auto scored = scorer.score_group(group.instance, group.completions);
            if (!scored.errors.empty())
                throw remote_error("judge failure during training: " +
                                   scored.errors.front().message);
            for (std::size_t j = 0; j < group.completions.size(); ++j) {
                const RewardBreakdown& b = *scored.breakdowns[j];
                group.rewards.push_back(b.total);
                group.r_acc.push_back(b.r_acc);
                group.r_lang.push_back(b.r_lang);
                group.r_fmt.push_back(b.r_fmt);
                const ParsedOutput parsed =
                    parse_output(group.completions[j].text,
                                 reward_config.parse_options);
                group.lc_answer.push_back(scorer.detector().language_reward(
                    group.completions[j].text, parsed, group.instance.language,
                    LangScope::AnswerOnly));
            }
            group.advantages = compute_advantages(group.rewards, config.std_floor);
            groups.push_back(std::move(group));
        }

        const StepOutcome outcome = grpo_step(params, groups, config, step, opt);

        StepRecord rec;
        rec.step = step;
        rec.phase = cur.phase().index;
        rec.loss = outcome.loss;
        rec.clip_frac = outcome.diag.clip_fraction;
        rec.mean_kl = outcome.diag.mean_kl;
        rec.lr = outcome.lr;
        std::size_t total = 0;
        for (const auto& g : groups) {
            const auto tier = tier_of(g.instance.language);
            auto& stats = rec.tiers[std::string(tier_name(tier))];
            for (std::size_t j = 0; j < g.completions.size(); ++j) {
                rec.mean_reward += g.rewards[j];
                rec.mean_r_acc += g.r_acc[j];
                rec.mean_r_lang += g.r_lang[j];
                rec.mean_r_fmt += g.r_fmt[j];
                stats.mean_reward += g.rewards[j];
                stats.lc_answer += g.lc_answer[j];
                ++stats.count;
                ++total;
            }
        }
        rec.mean_reward /= static_cast<double>(total);
        rec.mean_r_acc /= static_cast<double>(total);
        rec.mean_r_lang /= static_cast<double>(total);
        rec.mean_r_fmt /= static_cast<double>(total);
        for (auto& [tier, stats] : rec.tiers) {
            stats.mean_reward /= stats.count;
            stats.lc_answer /= stats.count;
        }
        result.report.records.push_back(std::move(rec));

        cur.record_reward(result.report.records.back().mean_reward);
        if (cur.should_advance()) {
            if (cur.has_next_phase()) {
                cur.advance();
                ref = params; // re-anchor KL at the new phase's entry policy
            } else {
                cur.mark_complete();
            }
        }

        if (config.checkpoint_every > 0 && !config.checkpoint_prefix.empty() &&
            (step + 1) % config.checkpoint_every == 0) {
            params.save(config.checkpoint_prefix + "-step" + std::to_string(step + 1) +
                        ".ckpt");
        }
    }

    result.params = std::move(params);
    return result;
}

} // namespace polyrl
