#include "polyrl/config.hpp"

#include <json.hpp>

#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "polyrl/util.hpp"

namespace polyrl {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& where) {
    for (const auto& [k, v] : obj.items()) {
        (void)v;
        bool known = false;
        for (const char* key : keys)
            if (k == key) known = true;
        if (!known)
            throw config_error("unknown configuration key \"" + where + "." + k + "\"");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error("bad value for \"" + std::string(key) + "\": " + e.what());
    }
}

RemoteChatClient::Options endpoint_options(const json& obj, const std::string& where) {
    reject_unknown(obj, {"endpoint", "model", "max_retries", "backoff_ms", "timeout_s"},
                   where);
    RemoteChatClient::Options opts;
    read(obj, "endpoint", opts.endpoint);
    read(obj, "model", opts.model);
    read(obj, "max_retries", opts.max_retries);
    read(obj, "backoff_ms", opts.backoff_ms);
    read(obj, "timeout_s", opts.timeout_s);
    return opts;
}

} // namespace

RunConfig RunConfig::from_json_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("configuration is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw config_error("configuration root must be an object");
    reject_unknown(doc,
                   {"core", "format_parser", "langid", "judge", "reward", "curriculum",
                    "policy", "grpo", "pipeline", "evalrep"},
                   "");

    RunConfig c;
    if (doc.contains("core")) {
        const auto& o = doc["core"];
        reject_unknown(o, {"seed"}, "core");
        read(o, "seed", c.seed);
    }
    if (doc.contains("format_parser")) {
        const auto& o = doc["format_parser"];
        reject_unknown(o, {"strict_order"}, "format_parser");
        read(o, "strict_order", c.parse_options.strict_order);
    }
    if (doc.contains("langid")) {
        const auto& o = doc["langid"];
        reject_unknown(o, {"tau", "train_scope", "eval_scope", "stopword_dir"}, "langid");
        read(o, "tau", c.tau);
        if (c.tau <= 0.5 || c.tau > 1.0)
            throw config_error("langid.tau must be in (0.5, 1]");
        std::string scope;
        read(o, "train_scope", scope);
        if (!scope.empty()) {
            auto s = parse_scope(scope);
            if (!s) throw config_error("unknown langid.train_scope \"" + scope + "\"");
            c.train_scope = *s;
        }
        scope.clear();
        read(o, "eval_scope", scope);
        if (!scope.empty()) {
            auto s = parse_scope(scope);
            if (!s) throw config_error("unknown langid.eval_scope \"" + scope + "\"");
            c.eval_scope = *s;
        }
        read(o, "stopword_dir", c.stopword_dir);
    }
    if (doc.contains("judge")) {
        const auto& o = doc["judge"];
        reject_unknown(o,
                       {"backend", "endpoint", "model_name", "temperature",
                        "max_output_tokens", "max_retries", "cache_path", "backoff_ms",
                        "timeout_s", "concurrency"},
                       "judge");
        std::string kind;
        read(o, "backend", kind);
        if (!kind.empty()) {
            auto b = parse_backend(kind);
            if (!b) throw config_error("unknown judge.backend \"" + kind + "\"");
            c.backend.kind = *b;
        }
        read(o, "endpoint", c.backend.endpoint);
        read(o, "model_name", c.backend.model_name);
        read(o, "temperature", c.backend.temperature);
        read(o, "max_output_tokens", c.backend.max_output_tokens);
        read(o, "max_retries", c.backend.max_retries);
        read(o, "cache_path", c.backend.cache_path);
        read(o, "backoff_ms", c.backend.backoff_ms);
        read(o, "timeout_s", c.backend.timeout_s);
        read(o, "concurrency", c.concurrency);
        if (c.concurrency < 1) throw config_error("judge.concurrency must be >= 1");
        c.backend.validate();
    }
    if (doc.contains("reward")) {
        const auto& o = doc["reward"];
        reject_unknown(o, {"weights"}, "reward");
        if (o.contains("weights")) {
            const auto& w = o["weights"];
            reject_unknown(w, {"acc", "lang", "fmt"}, "reward.weights");
            read(w, "acc", c.weights.acc);
            read(w, "lang", c.weights.lang);
            read(w, "fmt", c.weights.fmt);
            c.weights.validate();
        }
    }
    if (doc.contains("curriculum")) {
        const auto& o = doc["curriculum"];
        reject_unknown(o, {"alpha", "step_budgets", "window", "min_delta", "patience"},
                       "curriculum");
        read(o, "alpha", c.schedule.alpha);
        if (o.contains("step_budgets")) {
            const auto budgets = o.at("step_budgets").get<std::vector<int>>();
            if (budgets.size() != 3)
                throw config_error("curriculum.step_budgets must list 3 phases");
            std::copy(budgets.begin(), budgets.end(), c.schedule.step_budgets.begin());
        }
        read(o, "window", c.schedule.detector.window);
        read(o, "min_delta", c.schedule.detector.min_delta);
        read(o, "patience", c.schedule.detector.patience);
        c.schedule.validate();
    }
    if (doc.contains("policy")) {
        const auto& o = doc["policy"];
        reject_unknown(o,
                       {"feature_dim", "temperature", "sft_lr", "sft_epochs",
                        "sft_batch", "sft_optimizer", "sft_weight_decay",
                        "sft_warmup_ratio"},
                       "policy");
        read(o, "feature_dim", c.feature_dim);
        read(o, "temperature", c.policy_temperature);
        read(o, "sft_lr", c.sft.lr);
        read(o, "sft_epochs", c.sft.epochs);
        read(o, "sft_batch", c.sft.batch);
        read(o, "sft_weight_decay", c.sft.weight_decay);
        read(o, "sft_warmup_ratio", c.sft.warmup_ratio);
        std::string opt;
        read(o, "sft_optimizer", opt);
        if (!opt.empty()) {
            if (opt == "adamw")
                c.sft.optimizer = SftConfig::Optimizer::AdamW;
            else if (opt == "sgd")
                c.sft.optimizer = SftConfig::Optimizer::Sgd;
            else
                throw config_error("unknown policy.sft_optimizer \"" + opt + "\"");
        }
        c.sft.validate();
    }
    if (doc.contains("grpo")) {
        const auto& o = doc["grpo"];
        reject_unknown(o,
                       {"profile", "group_size", "lr", "warmup_ratio", "weight_decay",
                        "batch_prompts", "max_steps", "clip_eps", "kl_coeff",
                        "std_floor", "max_prompt_len", "max_completion_len",
                        "optimizer", "checkpoint_every", "checkpoint_prefix"},
                       "grpo");
        read(o, "profile", c.grpo_profile);
        if (c.grpo_profile == "toy")
            c.grpo = GrpoConfig::toy_profile();
        else if (c.grpo_profile == "paper")
            c.grpo = GrpoConfig::paper_profile();
        else
            throw config_error("unknown grpo.profile \"" + c.grpo_profile + "\"");
        read(o, "group_size", c.grpo.group_size);
        read(o, "lr", c.grpo.lr);
        read(o, "warmup_ratio", c.grpo.warmup_ratio);
        read(o, "weight_decay", c.grpo.weight_decay);
        read(o, "batch_prompts", c.grpo.batch_prompts);
        read(o, "max_steps", c.grpo.max_steps);
        read(o, "clip_eps", c.grpo.clip_eps);
        read(o, "kl_coeff", c.grpo.kl_coeff);
        read(o, "std_floor", c.grpo.std_floor);
        read(o, "max_prompt_len", c.grpo.max_prompt_len);
        read(o, "max_completion_len", c.grpo.max_completion_len);
        read(o, "checkpoint_every", c.grpo.checkpoint_every);
        read(o, "checkpoint_prefix", c.grpo.checkpoint_prefix);
        std::string opt;
        read(o, "optimizer", opt);
        if (!opt.empty()) {
            if (opt == "adamw")
                c.grpo.optimizer = GrpoConfig::Optimizer::AdamW;
            else if (opt == "sgd")
                c.grpo.optimizer = GrpoConfig::Optimizer::Sgd;
            else
                throw config_error("unknown grpo.optimizer \"" + opt + "\"");
        }
        c.grpo.validate();
    }
    if (doc.contains("pipeline")) {
        const auto& o = doc["pipeline"];
        reject_unknown(o,
                       {"generator", "probes", "ambiguity_judge", "cache_path",
                        "generation_retries"},
                       "pipeline");
        if (o.contains("generator"))
            c.pipeline.generator = endpoint_options(o["generator"], "pipeline.generator");
        if (o.contains("ambiguity_judge"))
            c.pipeline.ambiguity_judge =
                endpoint_options(o["ambiguity_judge"], "pipeline.ambiguity_judge");
        if (o.contains("probes")) {
            if (!o["probes"].is_object())
                throw config_error("pipeline.probes must map names to endpoints");
            for (const auto& [name, spec] : o["probes"].items())
                c.pipeline.probes.emplace_back(
                    name, endpoint_options(spec, "pipeline.probes." + name));
        }
        read(o, "cache_path", c.pipeline.cache_path);
        read(o, "generation_retries", c.pipeline.generation_retries);
    }
    if (doc.contains("evalrep")) {
        const auto& o = doc["evalrep"];
        reject_unknown(o, {"lc_remote"}, "evalrep");
        read(o, "lc_remote", c.lc_remote);
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open configuration file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

const LanguageDetector& RunConfig::detector() const {
    if (tau == 0.90 && stopword_dir.empty()) return default_detector();
    // one detector per (tau, dir) configuration, kept for the process lifetime
    static std::mutex mu;
    static std::unordered_map<std::string, std::unique_ptr<LanguageDetector>> cache;
    std::lock_guard lock(mu);
    const std::string key = std::to_string(tau) + "|" + stopword_dir;
    auto it = cache.find(key);
    if (it == cache.end()) {
        DetectorOptions opts;
        opts.tau = tau;
        opts.fixture_dir = stopword_dir;
        it = cache.emplace(key, std::make_unique<LanguageDetector>(opts)).first;
    }
    return *it->second;
}

RewardConfig RunConfig::reward_config(LangScope scope) const {
    RewardConfig rc;
    rc.weights = weights;
    rc.backend = backend;
    rc.scope = scope;
    rc.parse_options = parse_options;
    rc.concurrency = concurrency;
    rc.detector = &detector();
    return rc;
}

std::string score_request(const RunConfig& config, std::string_view request_json) {
    json req;
    try {
        req = json::parse(request_json);
    } catch (const json::exception& e) {
        throw data_error(std::string("request is not valid JSON: ") + e.what());
    }
    if (!req.is_object()) throw data_error("request must be a JSON object");
    for (const auto& [k, v] : req.items()) {
        (void)v;
        static const std::array<std::string, 8> known = {
            "id", "question", "gold", "gold_answer", "output",
            "language", "scope", "weights"};
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw data_error("unknown request key \"" + k + "\"");
    }

    auto need_string = [&](const char* key) {
        if (!req.contains(key) || !req[key].is_string())
            throw data_error(std::string("request field \"") + key +
                             "\" must be a string");
        return req[key].get<std::string>();
    };

    BenchInstance inst;
    inst.id = req.contains("id") && req["id"].is_string() ? req["id"].get<std::string>()
                                                          : "request";
    inst.question = need_string("question");
    inst.gold_answer = req.contains("gold") ? need_string("gold")
                                            : need_string("gold_answer");
    const auto lang = parse_language(need_string("language"));
    if (!lang) throw data_error("unknown request language");
    inst.language = *lang;
    const std::string output = need_string("output");

    LangScope scope = config.train_scope;
    if (req.contains("scope")) {
        auto s = parse_scope(need_string("scope"));
        if (!s) throw data_error("unknown request scope");
        scope = *s;
    }
    RewardConfig rc = config.reward_config(scope);
    if (req.contains("weights")) {
        const auto& w = req["weights"];
        if (!w.is_object()) throw data_error("request weights must be an object");
        RewardWeights weights;
        weights.acc = w.value("acc", weights.acc);
        weights.lang = w.value("lang", weights.lang);
        weights.fmt = w.value("fmt", weights.fmt);
        weights.validate();
        rc.weights = weights;
    }

    RewardScorer scorer(rc);
    const RewardBreakdown b = scorer.score_output(inst, output);
    const ParsedOutput parsed = parse_output(output, rc.parse_options);

    json reply;
    if (req.contains("id")) reply["id"] = inst.id;
    reply["r_acc"] = b.r_acc;
    reply["r_lang"] = b.r_lang;
    reply["r_fmt"] = b.r_fmt;
    reply["total"] = b.total;
    reply["well_formed"] = parsed.well_formed;
    reply["thinking_count"] = parsed.thinking_count;
    reply["answer_count"] = parsed.answer_count;
    reply["steps"] = parsed.steps.size();
    reply["scope"] = std::string(scope_name(scope));
    return reply.dump();
}

} // namespace polyrl
