#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "polyrl/format_parser.hpp"
#include "polyrl/judge.hpp"
#include "polyrl/kernels.hpp"
#include "polyrl/langid.hpp"
#include "polyrl/policy.hpp"
#include "polyrl/util.hpp"

using namespace polyrl;

namespace {

PolicyParams random_params(std::uint64_t seed, double scale = 0.1) {
    PolicyParams p = PolicyParams::init(ToyVocab::standard());
    util::Rng rng(seed);
    for (auto& w : p.weights) w = scale * (util::uniform_double(rng) - 0.5);
    return p;
}

} // namespace

TEST_CASE("the vocabulary holds exactly 200 dense tokens") {
    const ToyVocab& v = ToyVocab::standard();
    CHECK(v.size() == 200);
    for (int id = 0; id < v.size(); ++id)
        CHECK(v.id_of(v.surface(id)) == id);
    CHECK(v.surface(v.thinking_open()) == "<thinking>");
    CHECK(v.surface(v.answer_close()) == "</answer>");
    CHECK_THROWS_AS(v.id_of("no-such-token"), Error);
}

TEST_CASE("decode joins surfaces and silences bos/eos") {
    const ToyVocab& v = ToyVocab::standard();
    const std::vector<int> ids = {v.bos(), v.thinking_open(), v.id_of("the"),
                                  v.thinking_close(), v.eos()};
    CHECK(v.decode(ids) == "<thinking> the </thinking>");
}

TEST_CASE("encode matches multiword lexemes greedily") {
    const ToyVocab& v = ToyVocab::standard();
    const std::string text = "<thinking> the patient </thinking> <answer> "
                             "une grippe saisonnière est probable </answer>";
    const auto ids = v.encode(text);
    REQUIRE(ids.size() == 7); // "the" and "patient" are separate tokens
    CHECK(ids[0] == v.thinking_open());
    CHECK(v.surface(ids[5]) == "une grippe saisonnière est probable");
    CHECK_THROWS_AS(v.encode("completely unknownwordhere"), Error);
}

TEST_CASE("task covers 13 languages x 4 keys with well-formed gold outputs") {
    ToyTask task;
    CHECK(task.items().size() == 52);
    for (const auto& item : task.items()) {
        const std::string text = task.vocab().decode(item.gold_tokens);
        const auto parsed = parse_output(text);
        CHECK_MESSAGE(parsed.well_formed, "gold not well-formed: ", text);
        REQUIRE(parsed.answer.has_value());
        CHECK(normalize_answer(*parsed.answer) ==
              normalize_answer(item.instance.gold_answer));
        CHECK_FALSE(item.instance.question.empty());
        CHECK(item.instance.reasoning_steps.size() == 2);
    }
}

TEST_CASE("every gold answer detects as its target language") {
    ToyTask task;
    const auto& det = default_detector();
    for (const auto& item : task.items()) {
        const auto d = det.detect(item.instance.gold_answer);
        REQUIRE_MESSAGE(d.language.has_value(),
                        "undetected: ", item.instance.gold_answer);
        CHECK_MESSAGE(*d.language == item.instance.language,
                      "wrong language for: ", item.instance.gold_answer);
    }
}

TEST_CASE("gold answers earn the AnswerOnly language reward end to end") {
    ToyTask task;
    const auto& det = default_detector();
    for (const auto& item : task.items()) {
        const std::string text = task.vocab().decode(item.gold_tokens);
        const auto parsed = parse_output(text);
        CHECK(det.language_reward(text, parsed, item.instance.language,
                                  LangScope::AnswerOnly) == 1.0);
    }
}

TEST_CASE("task pools split by tier") {
    ToyTask task;
    const auto pools = task.pools();
    CHECK(pools.at(ResourceTier::High).size() == 16);
    CHECK(pools.at(ResourceTier::Medium).size() == 16);
    CHECK(pools.at(ResourceTier::Low).size() == 20);
}

TEST_CASE("uniform zero-weight policy gives log(1/200) per token") {
    const ToyVocab& v = ToyVocab::standard();
    PolicyParams p = PolicyParams::init(v);
    const ToyPrompt prompt{LanguageCode::French, 0};

    const std::vector<int> one = {v.thinking_open()};
    CHECK(logprob(p, prompt, one) ==
          doctest::Approx(std::log(1.0 / 200.0)).epsilon(1e-12));

    CHECK(logprob(p, prompt, std::vector<int>{}) == 0.0);
}

TEST_CASE("sequence logprob is additive over conditional terms") {
    const ToyVocab& v = ToyVocab::standard();
    PolicyParams p = random_params(5);
    const ToyPrompt prompt{LanguageCode::Korean, 2};
    const std::vector<int> seq = {v.thinking_open(), v.id_of("the"), v.eos()};

    const double whole = logprob(p, prompt, seq);
    // conditional terms evaluated as prefix differences
    double sum = 0.0;
    double prev_lp = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
        const std::vector<int> prefix(seq.begin(),
                                      seq.begin() + static_cast<std::ptrdiff_t>(t) + 1);
        const double lp = logprob(p, prompt, prefix);
        sum += lp - prev_lp;
        prev_lp = lp;
    }
    CHECK(whole == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("unknown token ids are rejected") {
    PolicyParams p = PolicyParams::init(ToyVocab::standard());
    const ToyPrompt prompt{LanguageCode::French, 0};
    CHECK_THROWS_AS(logprob(p, prompt, std::vector<int>{999}), Error);
    CHECK_THROWS_AS(logprob(p, prompt, std::vector<int>{-7}), Error);
}

TEST_CASE("next-token distribution normalizes for random params") {
    PolicyParams p = random_params(11, 0.5);
    const ToyPrompt prompt{LanguageCode::Thai, 1};
    // sum over the whole vocabulary of exp(logprob of that single token)
    double sum = 0.0;
    for (int tok = 0; tok < p.vocab_size; ++tok)
        sum += std::exp(logprob(p, prompt, std::vector<int>{tok}));
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gradient matches central finite differences") {
    PolicyParams p = random_params(17, 0.3);
    ToyTask task;
    const auto& item = task.item(LanguageCode::Spanish, 1);
    std::vector<kernels::Sequence> seqs{{item.prompt, item.gold_tokens}};
    const std::vector<double> coefs{1.0};

    std::vector<double> grad(p.weights.size(), 0.0);
    kernels::serial::accumulate_grad(p, seqs, coefs, grad);

    util::Rng rng(23);
    const double h = 1e-5;
    int checked = 0;
    double worst = 0.0;
    while (checked < 120) {
        const std::size_t i = util::uniform_below(rng, p.weights.size());
        std::vector<double> lp(1);
        p.weights[i] += h;
        kernels::serial::batch_logprob(p, seqs, lp);
        const double up = lp[0];
        p.weights[i] -= 2 * h;
        kernels::serial::batch_logprob(p, seqs, lp);
        const double down = lp[0];
        p.weights[i] += h;
        const double fd = (up - down) / (2 * h);
        if (std::abs(fd) < 1e-12 && std::abs(grad[i]) < 1e-12) continue;
        const double rel =
            std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-8});
        worst = std::max(worst, rel);
        ++checked;
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("sampling is deterministic and respects the seed") {
    PolicyParams p = random_params(29);
    const ToyVocab& v = ToyVocab::standard();
    const ToyPrompt prompt{LanguageCode::Hausa, 3};

    const auto a = sample_k(p, v, prompt, 16, 99, 48);
    const auto b = sample_k(p, v, prompt, 16, 99, 48);
    REQUIRE(a.size() == 16);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].token_ids == b[i].token_ids);
        CHECK(a[i].logprob_under_sampler == b[i].logprob_under_sampler);
        CHECK(a[i].logprob_under_sampler <= 0.0);
        CHECK(std::isfinite(a[i].logprob_under_sampler));
    }
    const auto c = sample_k(p, v, prompt, 16, 100, 48);
    bool any_different = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].token_ids != c[i].token_ids) any_different = true;
    CHECK(any_different);
}

TEST_CASE("sampler logprob matches the policy logprob of the sampled tokens") {
    PolicyParams p = random_params(31);
    const ToyVocab& v = ToyVocab::standard();
    const ToyPrompt prompt{LanguageCode::Bengali, 0};
    for (const auto& c : sample_k(p, v, prompt, 8, 5, 48)) {
        CHECK(c.logprob_under_sampler ==
              doctest::Approx(logprob(p, prompt, c.token_ids)).epsilon(1e-9));
    }
}

TEST_CASE("temperature zero decodes greedily and identically") {
    PolicyParams p = random_params(37);
    const ToyVocab& v = ToyVocab::standard();
    const ToyPrompt prompt{LanguageCode::French, 0};
    const auto a = sample_one(p, v, prompt, 1, 48, 0.0);
    const auto b = sample_one(p, v, prompt, 2, 48, 0.0);
    CHECK(a.token_ids == b.token_ids); // seed-independent at T=0
}

TEST_CASE("truncation respects max_len") {
    PolicyParams p = PolicyParams::init(ToyVocab::standard());
    const auto c = sample_one(p, ToyVocab::standard(), {LanguageCode::Thai, 0}, 3, 7,
                              1.0);
    CHECK(c.token_ids.size() <= 7);
}

TEST_CASE("cosine warmup schedule shape") {
    CHECK(cosine_warmup_lr(1.0, 0, 100, 0.1) == doctest::Approx(0.1));
    CHECK(cosine_warmup_lr(1.0, 9, 100, 0.1) == doctest::Approx(1.0));
    CHECK(cosine_warmup_lr(1.0, 10, 100, 0.1) == doctest::Approx(1.0));
    CHECK(cosine_warmup_lr(1.0, 55, 100, 0.1) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(cosine_warmup_lr(1.0, 100, 100, 0.1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sft memorizes a single instance") {
    ToyTask task;
    const auto& item = task.item(LanguageCode::French, 0);
    PolicyParams p = PolicyParams::init(task.vocab());
    SftConfig config;
    config.epochs = 60;
    config.lr = 0.08;
    config.weight_decay = 0.0;
    SftReport report;
    p = sft_fit(p, {item}, config, &report);
    CHECK(report.epoch_nll.back() < 0.01); // nats per token
}

TEST_CASE("zero learning rate leaves parameters and NLL unchanged") {
    ToyTask task;
    PolicyParams p = random_params(41);
    const auto before = p.weights;
    SftConfig config;
    config.lr = 0.0;
    config.epochs = 2;
    config.optimizer = SftConfig::Optimizer::Sgd;
    SftReport report;
    p = sft_fit(p, {task.item(LanguageCode::Korean, 1)}, config, &report);
    CHECK(p.weights == before);
    CHECK(report.epoch_nll.front() == doctest::Approx(report.epoch_nll.back()));
}

TEST_CASE("full-batch gradient descent never increases NLL") {
    ToyTask task;
    std::vector<ToyTaskItem> items = task.tier_items(ResourceTier::High);
    PolicyParams p = PolicyParams::init(task.vocab());
    SftConfig config;
    config.optimizer = SftConfig::Optimizer::Sgd;
    config.lr = 0.5; // small relative to the per-token curvature
    config.epochs = 25;
    SftReport report;
    p = sft_fit(p, items, config, &report);
    for (std::size_t e = 1; e < report.epoch_nll.size(); ++e)
        CHECK(report.epoch_nll[e] <= report.epoch_nll[e - 1] + 1e-8);
}

TEST_CASE("sft then greedy decode earns the format reward") {
    ToyTask task;
    const auto items = task.tier_items(ResourceTier::High);
    PolicyParams p = PolicyParams::init(task.vocab());
    SftConfig config;
    config.epochs = 20;
    config.lr = 0.05;
    p = sft_fit(p, items, config);
    int formatted = 0;
    for (const auto& item : items) {
        const auto c = sample_one(p, task.vocab(), item.prompt, 0, 48, 0.0);
        if (parse_output(c.text).well_formed) ++formatted;
    }
    CHECK(formatted == static_cast<int>(items.size()));
}

TEST_CASE("checkpoint round trip and vocab-hash guard") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "polyrl_test_ckpt.bin").string();
    PolicyParams p = random_params(43);
    p.save(path);
    const PolicyParams q = PolicyParams::load(path, ToyVocab::standard());
    CHECK(q.weights == p.weights);
    CHECK(q.feature_dim == p.feature_dim);
    CHECK(q.temperature == p.temperature);

    PolicyParams corrupted = p;
    corrupted.vocab_hash = "deadbeef";
    corrupted.save(path);
    CHECK_THROWS_WITH_AS(PolicyParams::load(path, ToyVocab::standard()),
                         doctest::Contains("hash mismatch"), Error);
    std::remove(path.c_str());
}

TEST_CASE("dataset instances bind to task prompts") {
    ToyTask task;
    // built-in id resolves directly
    const auto builtin = toy_item_from_instance(task, task.items()[7].instance);
    CHECK(builtin.gold_tokens == task.items()[7].gold_tokens);

    // foreign instance tokenizes via the vocabulary
    BenchInstance inst;
    inst.id = "custom-1";
    inst.language = LanguageCode::French;
    inst.question = "q";
    inst.gold_answer = "une grippe saisonnière est probable";
    inst.source_concept = "fever";
    ReasoningStep step;
    step.text = "the patient shows les symptômes du patient";
    inst.reasoning_steps = {step};
    const auto item = toy_item_from_instance(task, inst);
    CHECK(item.prompt.key == 0);
    CHECK(item.gold_tokens.back() == task.vocab().eos());
    const auto parsed = parse_output(task.vocab().decode(item.gold_tokens));
    CHECK(parsed.well_formed);

    inst.source_concept = "unknown-key";
    CHECK_THROWS_AS(toy_item_from_instance(task, inst), Error);
}
