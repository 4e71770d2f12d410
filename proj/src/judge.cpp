#include "polyrl/judge.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <regex>
#include <thread>

#include "polyrl/util.hpp"

namespace polyrl {

using nlohmann::json;

std::string_view backend_name(BackendKind kind) {
    switch (kind) {
        case BackendKind::ExactMatch: return "ExactMatch";
        case BackendKind::LexicalOverlap: return "LexicalOverlap";
        case BackendKind::RemoteLLM: return "RemoteLLM";
    }
    return "";
}

std::optional<BackendKind> parse_backend(std::string_view name) {
    if (name == "ExactMatch") return BackendKind::ExactMatch;
    if (name == "LexicalOverlap") return BackendKind::LexicalOverlap;
    if (name == "RemoteLLM") return BackendKind::RemoteLLM;
    return std::nullopt;
}

void VerifierBackend::validate() const {
    if (kind == BackendKind::RemoteLLM) {
        if (endpoint.empty() || model_name.empty())
            throw config_error("RemoteLLM backend requires endpoint and model_name");
        if (temperature != 0.0)
            throw config_error("RemoteLLM temperature is pinned to 0.0");
        if (max_output_tokens != 10)
            throw config_error("RemoteLLM max_output_tokens is pinned to 10");
    }
    if (max_retries < 0) throw config_error("max_retries must be >= 0");
}

std::string normalize_answer(std::string_view text) {
    return util::fold_case(util::collapse_whitespace(text));
}

namespace {

bool uses_unsegmented_script(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t c = util::next_codepoint(text, i);
        if ((c >= 0x3041 && c <= 0x30FF) || (c >= 0x4E00 && c <= 0x9FFF) ||
            (c >= 0x0E01 && c <= 0x0E5B))
            return true;
    }
    return false;
}

std::vector<std::string> overlap_units(std::string_view normalized, bool bigrams) {
    if (!bigrams) return util::split_ws(normalized);
    std::vector<char32_t> cps;
    std::size_t i = 0;
    while (i < normalized.size()) {
        const char32_t c = util::next_codepoint(normalized, i);
        if (c != ' ') cps.push_back(c);
    }
    std::vector<std::string> units;
    for (std::size_t k = 0; k + 1 < cps.size(); ++k) {
        std::string u;
        util::append_utf8(u, cps[k]);
        util::append_utf8(u, cps[k + 1]);
        units.push_back(std::move(u));
    }
    if (units.empty() && !cps.empty()) {
        std::string u;
        util::append_utf8(u, cps[0]);
        units.push_back(std::move(u));
    }
    return units;
}

} // namespace

double lexical_overlap_f1(std::string_view gold, std::string_view generated) {
    const std::string ng = normalize_answer(gold);
    const std::string ny = normalize_answer(generated);
    const bool bigrams = uses_unsegmented_script(ng) || uses_unsegmented_script(ny);
    const auto gu = overlap_units(ng, bigrams);
    const auto yu = overlap_units(ny, bigrams);
    if (gu.empty() || yu.empty()) return 0.0;

    std::unordered_map<std::string, int> counts;
    for (const auto& t : gu) ++counts[t];
    int common = 0;
    for (const auto& t : yu) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(yu.size());
    const double recall = static_cast<double>(common) / static_cast<double>(gu.size());
    const double f1 = 2.0 * precision * recall / (precision + recall);
    return std::clamp(f1, 0.0, 1.0);
}

std::string render_accuracy_prompt(std::string_view question, std::string_view gold,
                                   std::string_view generated) {
    std::string p;
    p += "You are an expert multilingual medical evaluator. Score the generated "
         "response for correctness and medical validity on a continuous scale "
         "from 0.0 to 1.0. Give 1.0 if the reasoning is clinically sound and "
         "semantically correct, even if phrased differently from the reference. "
         "Focus on factual and clinical accuracy rather than wording.\n\n";
    p += "Question: ";
    p += question;
    p += "\n\nGround truth answer: ";
    p += gold;
    p += "\n\nGenerated response: ";
    p += generated;
    p += "\n\nOutput only a float between 0.0 and 1.0.";
    return p;
}

std::string render_binary_judge_prompt(std::string_view generated, std::string_view gold) {
    std::string p;
    p += "<Model Response>\n";
    p += generated;
    p += "\n</Model Response>\n\n<Reference Answer>\n";
    p += gold;
    p += "\n</Reference Answer>\n\n";
    p += "You are given a model-generated response and a reference answer. "
         "Determine whether the model response is correct with respect to the "
         "reference. Output \"True\" if the response is correct and \"False\" "
         "otherwise.";
    return p;
}

std::string render_language_prompt(std::string_view language, std::string_view generated) {
    std::string p;
    p += "You are an expert multilingual medical evaluator. Determine whether "
         "the model response is written entirely in the same language as the "
         "question.\n\n";
    p += "Question language: ";
    p += language;
    p += "\n\nGenerated response: ";
    p += generated;
    p += "\n\nOutput 1.0 if the language matches exactly; otherwise output 0.0.";
    return p;
}

// --- cache ---

JudgeCache::JudgeCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return; // created on first store
    std::string line;
    while (std::getline(in, line)) {
        if (util::is_blank(line)) continue;
        try {
            json rec = json::parse(line);
            entries_[rec.at("key").get<std::string>()] = {
                rec.at("score").get<double>(), rec.at("raw").get<std::string>()};
        } catch (const json::exception& e) {
            throw data_error("corrupt cache line in " + path_ + ": " + e.what());
        }
    }
}

std::optional<JudgeCache::Entry> JudgeCache::lookup(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void JudgeCache::store(const std::string& key, double score, const std::string& raw) {
    std::lock_guard lock(mu_);
    if (entries_.count(key)) return;
    entries_[key] = {score, raw};
    std::ofstream out(path_, std::ios::app);
    json rec;
    rec["key"] = key;
    rec["score"] = score;
    rec["raw"] = raw;
    rec["ts"] = util::iso8601_now();
    out << rec.dump() << "\n";
}

// --- judge ---

namespace {

// Cache keys bind the prompt protocol version plus all rendered inputs.
std::string cache_key(std::string_view protocol, std::string_view model,
                      std::initializer_list<std::string_view> parts) {
    std::string buf(protocol);
    buf += '\x1f';
    buf += model;
    for (auto p : parts) {
        buf += '\x1f';
        buf += p;
    }
    return util::sha256_hex(buf);
}

std::optional<double> parse_first_line_float(const std::string& reply) {
    const std::string first = reply.substr(0, reply.find('\n'));
    static const std::regex float_re(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
    std::smatch m;
    if (!std::regex_search(first, m, float_re)) return std::nullopt;
    return std::stod(m.str(0));
}

struct ParsedEndpoint {
    std::string base; // scheme://host:port
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw config_error("endpoint must include a scheme: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

} // namespace

RemoteChatClient::RemoteChatClient(Options options) : options_(std::move(options)) {
    if (options_.endpoint.empty() || options_.model.empty())
        throw config_error("remote client requires endpoint and model");
    parse_endpoint(options_.endpoint); // validate eagerly
}

std::string RemoteChatClient::chat_once(const std::string& prompt, double temperature,
                                        int max_tokens) const {
    const ParsedEndpoint ep = parse_endpoint(options_.endpoint);
    httplib::Client client(ep.base);
    client.set_connection_timeout(options_.timeout_s, 0);
    client.set_read_timeout(options_.timeout_s, 0);

    json body;
    body["model"] = options_.model;
    body["temperature"] = temperature;
    body["max_tokens"] = max_tokens;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});

    auto res = client.Post(ep.path, body.dump(), "application/json");
    if (!res)
        throw remote_error("transport failure contacting " + options_.endpoint);
    if (res->status != 200)
        throw remote_error("endpoint returned status " + std::to_string(res->status));

    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::exception&) {
        throw remote_error("endpoint reply is not JSON");
    }
    if (reply.contains("choices") && reply["choices"].is_array() &&
        !reply["choices"].empty()) {
        const auto& msg = reply["choices"][0];
        if (msg.contains("message") && msg["message"].contains("content") &&
            msg["message"]["content"].is_string())
            return msg["message"]["content"].get<std::string>();
    }
    if (reply.contains("content") && reply["content"].is_string())
        return reply["content"].get<std::string>();
    throw remote_error("endpoint reply lacks a message content string");
}

std::string RemoteChatClient::chat(const std::string& prompt, double temperature,
                                   int max_tokens) const {
    int attempt = 0;
    for (;;) {
        try {
            return chat_once(prompt, temperature, max_tokens);
        } catch (const Error&) {
            if (attempt >= options_.max_retries) throw;
            const int jitter =
                static_cast<int>(util::mix64(static_cast<std::uint64_t>(attempt) ^
                                             std::hash<std::string>{}(prompt)) %
                                 50);
            std::this_thread::sleep_for(std::chrono::milliseconds(
                options_.backoff_ms * (1 << attempt) + jitter));
            ++attempt;
        }
    }
}

Judge::Judge(VerifierBackend backend) : backend_(std::move(backend)) {
    backend_.validate();
    if (backend_.kind == BackendKind::RemoteLLM) {
        RemoteChatClient::Options opts;
        opts.endpoint = backend_.endpoint;
        opts.model = backend_.model_name;
        opts.max_retries = backend_.max_retries;
        opts.backoff_ms = backend_.backoff_ms;
        opts.timeout_s = backend_.timeout_s;
        client_ = std::make_unique<RemoteChatClient>(std::move(opts));
    }
    if (!backend_.cache_path.empty())
        cache_ = std::make_shared<JudgeCache>(backend_.cache_path);
}

std::string Judge::chat_with_retries(const std::string& prompt) {
    return client_->chat(prompt, backend_.temperature, backend_.max_output_tokens);
}

JudgeVerdict Judge::remote_float_verdict(const std::string& key,
                                         const std::string& prompt) {
    if (cache_) {
        if (auto hit = cache_->lookup(key)) {
            return {hit->score, hit->raw, backend_.kind, true};
        }
    }
    int attempt = 0;
    for (;;) {
        const std::string reply = chat_with_retries(prompt);
        const auto parsed = parse_first_line_float(reply);
        if (parsed) {
            double score = *parsed;
            if (score < 0.0 || score > 1.0) {
                std::cerr << "[judge] warning: reply score " << score
                          << " outside [0,1]; clamped\n";
                score = std::clamp(score, 0.0, 1.0);
            }
            if (cache_) cache_->store(key, score, reply);
            return {score, reply, backend_.kind, false};
        }
        if (attempt >= backend_.max_retries)
            throw remote_error("unparseable verifier reply: \"" + reply + "\"");
        ++attempt;
    }
}

JudgeVerdict Judge::score_accuracy(const std::string& question, const std::string& gold,
                                   const std::string& generated) {
    if (util::is_blank(question) || util::is_blank(gold) || util::is_blank(generated))
        throw data_error("score_accuracy: question, gold and generated must be non-empty");

    switch (backend_.kind) {
        case BackendKind::ExactMatch: {
            const double s =
                normalize_answer(generated) == normalize_answer(gold) ? 1.0 : 0.0;
            return {s, "", BackendKind::ExactMatch, false};
        }
        case BackendKind::LexicalOverlap: {
            return {lexical_overlap_f1(gold, generated), "",
                    BackendKind::LexicalOverlap, false};
        }
        case BackendKind::RemoteLLM: {
            const std::string key = cache_key("accuracy-v1", backend_.model_name,
                                              {question, gold, generated});
            return remote_float_verdict(
                key, render_accuracy_prompt(question, gold, generated));
        }
    }
    throw config_error("unknown backend kind");
}

bool Judge::judge_correct(const std::string& question, const std::string& gold,
                          const std::string& generated) {
    (void)question; // the binary protocol passes only response and reference
    if (backend_.kind == BackendKind::ExactMatch)
        return normalize_answer(generated) == normalize_answer(gold);
    if (backend_.kind != BackendKind::RemoteLLM)
        throw config_error("judge_correct requires the RemoteLLM or ExactMatch backend");

    const std::string key =
        cache_key("binary-judge-v1", backend_.model_name, {gold, generated});
    if (cache_) {
        if (auto hit = cache_->lookup(key)) return hit->score >= 0.5;
    }
    const std::string prompt = render_binary_judge_prompt(generated, gold);
    int attempt = 0;
    for (;;) {
        const std::string reply = chat_with_retries(prompt);
        std::string t = util::fold_case(util::trim(reply));
        if (!t.empty() && t.back() == '.') t.pop_back();
        if (t == "true" || t == "false") {
            const bool verdict = t == "true";
            if (cache_) cache_->store(key, verdict ? 1.0 : 0.0, reply);
            return verdict;
        }
        if (attempt >= backend_.max_retries)
            throw remote_error("binary judge reply is neither True nor False: \"" +
                               reply + "\"");
        ++attempt;
    }
}

bool Judge::verify_language_remote(LanguageCode language, const std::string& generated) {
    if (backend_.kind != BackendKind::RemoteLLM)
        throw config_error("verify_language_remote requires the RemoteLLM backend");
    const std::string lang(language_name(language));
    const std::string key =
        cache_key("language-v1", backend_.model_name, {lang, generated});
    const JudgeVerdict v =
        remote_float_verdict(key, render_language_prompt(lang, generated));
    return v.score >= 0.5;
}

Judge::BatchResult Judge::score_batch(const std::vector<BatchItem>& items,
                                      int concurrency_limit) {
    if (concurrency_limit < 1)
        throw config_error("concurrency_limit must be >= 1");

    BatchResult result;
    result.verdicts.resize(items.size());

    if (backend_.kind != BackendKind::RemoteLLM) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            try {
                result.verdicts[i] =
                    score_accuracy(items[i].question, items[i].gold, items[i].generated);
            } catch (const Error& e) {
                result.errors.push_back({i, e.what()});
            }
        }
        return result;
    }

    // Identical triples collapse onto one unique key; one call per key.
    std::vector<std::string> keys(items.size());
    std::unordered_map<std::string, std::vector<std::size_t>> by_key;
    for (std::size_t i = 0; i < items.size(); ++i) {
        keys[i] = cache_key("accuracy-v1", backend_.model_name,
                            {items[i].question, items[i].gold, items[i].generated});
        by_key[keys[i]].push_back(i);
    }

    std::vector<std::pair<std::string, std::size_t>> unique; // key, representative
    for (const auto& [key, idxs] : by_key) unique.emplace_back(key, idxs.front());
    std::sort(unique.begin(), unique.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });

    struct Slot {
        std::optional<JudgeVerdict> verdict;
        std::string error;
    };
    std::vector<Slot> slots(unique.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t u = next.fetch_add(1);
            if (u >= unique.size()) return;
            const auto& [key, rep] = unique[u];
            try {
                slots[u].verdict = remote_float_verdict(
                    key, render_accuracy_prompt(items[rep].question, items[rep].gold,
                                                items[rep].generated));
            } catch (const Error& e) {
                slots[u].error = e.what();
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(concurrency_limit), unique.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::unordered_map<std::string, std::size_t> slot_of;
    for (std::size_t u = 0; u < unique.size(); ++u) slot_of[unique[u].first] = u;
    std::unordered_map<std::string, bool> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Slot& slot = slots[slot_of[keys[i]]];
        if (slot.verdict) {
            JudgeVerdict v = *slot.verdict;
            // duplicates within the batch are cache-equivalent hits
            if (seen.count(keys[i])) v.cached = true;
            seen[keys[i]] = true;
            result.verdicts[i] = v;
        } else {
            result.errors.push_back({i, slot.error});
        }
    }
    return result;
}

} // namespace polyrl
