#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "polyrl/config.hpp"
#include "polyrl/core.hpp"
#include "polyrl/policy.hpp"

using namespace polyrl;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

RunResult run_cli(const std::string& args, const std::string& stdin_file = "") {
    std::string cmd = std::string(POLYRL_CLI_PATH) + " " + args;
    if (!stdin_file.empty()) cmd += " < " + stdin_file;
    cmd += " 2>&1";
    std::array<char, 4096> buf{};
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe)) result.output += buf.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() : path(std::filesystem::temp_directory_path() / "polyrl_cli_test") {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const std::string p = (path / name).string();
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p;
    }
    std::string slot(const std::string& name) const { return (path / name).string(); }
};

std::string fig_fixture_line() {
    std::ifstream in(POLYRL_DATA_DIR "/fixtures/code_switched_french.txt");
    REQUIRE(in);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    json req = {{"id", "fig"},
                {"question", "Quel est le diagnostic le plus probable ?"},
                {"gold", "Le diagnostic le plus probable est la cholécystite aiguë"},
                {"output", text},
                {"language", "French"},
                {"scope", "AnswerOnly"}};
    return req.dump();
}

} // namespace

TEST_CASE("score_request: in-process contract") {
    const RunConfig config = RunConfig::defaults();

    const std::string reply = score_request(config, fig_fixture_line());
    const json r = json::parse(reply);
    CHECK(r["r_acc"] == 1.0);
    CHECK(r["r_lang"] == 1.0);
    CHECK(r["r_fmt"] == 1.0);
    CHECK(r["total"] == doctest::Approx(1.0));
    CHECK(r["well_formed"] == true);
    CHECK(r["scope"] == "AnswerOnly");

    CHECK_THROWS_WITH_AS(score_request(config, R"({"bogus": 1})"),
                         doctest::Contains("unknown request key"), Error);
    CHECK_THROWS_AS(score_request(config, "not json"), Error);
}

TEST_CASE("score_request honors per-request weights") {
    const RunConfig config = RunConfig::defaults();
    json req = {{"question", "q"},
                {"gold", "x"},
                {"output", "<thinking>eh bien voyons</thinking><answer>y</answer>"},
                {"language", "French"},
                {"scope", "AnswerOnly"},
                {"weights", {{"acc", 0.0}, {"lang", 0.0}, {"fmt", 1.0}}}};
    const json r = json::parse(score_request(config, req.dump()));
    CHECK(r["total"] == 1.0); // format-only weighting

    req["weights"] = {{"acc", 0.5}, {"lang", 0.2}, {"fmt", 0.2}};
    CHECK_THROWS_AS(score_request(config, req.dump()), Error); // sums to 0.9
}

TEST_CASE("run config: defaults are paper-pinned and unknown keys rejected") {
    const RunConfig c = RunConfig::defaults();
    CHECK(c.weights.acc == 0.65);
    CHECK(c.weights.lang == 0.30);
    CHECK(c.weights.fmt == 0.05);
    CHECK(c.tau == 0.90);
    CHECK(c.schedule.alpha == 0.85);
    CHECK(c.schedule.detector.window == 20);
    CHECK(c.grpo.group_size == 16);
    CHECK(c.grpo.max_steps == 500);
    CHECK(c.sft.epochs == 3);
    CHECK(c.train_scope == LangScope::FullOutput);
    CHECK(c.eval_scope == LangScope::AnswerOnly);

    CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"grpo": {"nonsense": 1}})"),
                         doctest::Contains("unknown configuration key"), Error);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"typo_section": {}})"), Error);
    CHECK_THROWS_AS(
        RunConfig::from_json_text(R"({"reward": {"weights": {"acc": 0.9}}})"), Error);

    const RunConfig o = RunConfig::from_json_text(
        R"({"grpo": {"profile": "paper"}, "langid": {"tau": 0.8}})");
    CHECK(o.grpo.lr == doctest::Approx(1e-6));
    CHECK(o.tau == 0.8);
}

TEST_CASE("cli: reward score emits one breakdown per line") {
    TempDir dir;
    const std::string in = dir.file("requests.ldjson", fig_fixture_line() + "\n");
    const auto result = run_cli("reward score --in " + in);
    CHECK(result.exit_code == 0);
    const json r = json::parse(result.output.substr(0, result.output.find('\n')));
    CHECK(r["total"] == doctest::Approx(1.0));
    CHECK(r["id"] == "fig");
}

TEST_CASE("cli: pipeline split writes the stratified split file") {
    TempDir dir;
    ToyTask task;
    std::vector<BenchInstance> dataset;
    for (const auto& item : task.items()) {
        // 5 copies per language-key so every language clears the minimum
        for (int i = 0; i < 5; ++i) {
            BenchInstance inst = item.instance;
            inst.id += "-" + std::to_string(i);
            dataset.push_back(inst);
        }
    }
    const std::string in = dir.file("dataset.json", dataset_to_json(dataset));
    const std::string out = dir.slot("splits.json");
    const auto result = run_cli("pipeline split --in " + in + " --out " + out +
                                " --seed 3");
    CHECK(result.exit_code == 0);

    std::ifstream split_in(out);
    REQUIRE(split_in);
    std::string text((std::istreambuf_iterator<char>(split_in)),
                     std::istreambuf_iterator<char>());
    const auto split = split_from_json(text);
    CHECK(split.test.size() == 13 * 4); // 20 per language via round(0.2*20)=4
    CHECK(split.seed == 3);
}

TEST_CASE("cli: eval renders a csv summary") {
    TempDir dir;
    ToyTask task;
    std::vector<BenchInstance> testset;
    json outputs = json::object();
    for (int k = 0; k < ToyTask::kNumKeys; ++k) {
        const auto& item = task.item(LanguageCode::French, k);
        testset.push_back(item.instance);
        outputs[item.instance.id] =
            k == 0 ? "<thinking> bon </thinking> <answer> " +
                         item.instance.gold_answer + " </answer>"
                   : "wrong";
    }
    const std::string testset_path = dir.file("testset.json", dataset_to_json(testset));
    const std::string outputs_path = dir.file("outputs.json", outputs.dump());
    const auto result = run_cli("eval --outputs " + outputs_path + " --testset " +
                                testset_path + " --format csv");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("language,n,la_pct,lc_pct") != std::string::npos);
    CHECK(result.output.find("French,4,25.00,25.00") != std::string::npos);
}

TEST_CASE("cli: serve answers one json line per request over stdio") {
    TempDir dir;
    const std::string in = dir.file("reqs.ldjson", fig_fixture_line() + "\n" +
                                                       R"({"broken": true})" + "\n");
    const auto result = run_cli("serve --stdio", in);
    CHECK(result.exit_code == 0);
    // first line: a full breakdown; second line: an error envelope
    const auto eol = result.output.find('\n');
    const json first = json::parse(result.output.substr(0, eol));
    CHECK(first.contains("r_acc"));
    CHECK(first.contains("r_lang"));
    CHECK(first.contains("r_fmt"));
    CHECK(first.contains("total"));
    const json second = json::parse(result.output.substr(eol + 1));
    CHECK(second.contains("error"));
}

TEST_CASE("cli: exit codes follow the error taxonomy") {
    TempDir dir;
    // unknown flag -> config error (2)
    CHECK(run_cli("reward score --in x --definitely-not-a-flag").exit_code == 2);
    // missing file -> data error (3)
    CHECK(run_cli("reward score --in /nonexistent/file.ldjson").exit_code == 3);
    // invalid config file -> config error (2)
    const std::string bad = dir.file("bad.json", R"({"weird": 1})");
    CHECK(run_cli("--config " + bad + " reward score --in x").exit_code == 2);
    // malformed dataset -> data error (3)
    const std::string broken = dir.file("broken.json", "[{\"id\": \"x\"}]");
    const auto result = run_cli("pipeline split --in " + broken + " --out " +
                                dir.slot("s.json"));
    CHECK(result.exit_code == 3);
    CHECK(result.output.find("\"error\"") != std::string::npos);
}

TEST_CASE("cli: train sft on the toy high tier writes a loadable checkpoint") {
    TempDir dir;
    const std::string config = dir.file(
        "cfg.json", R"({"policy": {"sft_epochs": 2, "sft_lr": 0.05}})");
    const std::string ckpt = dir.slot("sft.ckpt");
    const std::string report = dir.slot("sft_report.json");
    const auto result = run_cli("--config " + config + " train sft --tier High --out " +
                                ckpt + " --report " + report);
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("sft nll/token:") != std::string::npos);

    const PolicyParams p = PolicyParams::load(ckpt, ToyVocab::standard());
    CHECK(p.vocab_size == 200);

    std::ifstream rep(report);
    REQUIRE(rep);
    const json r = json::parse(rep);
    REQUIRE(r["epoch_nll"].size() == 3); // initial + 2 epochs
    CHECK(r["epoch_nll"][2] < r["epoch_nll"][0]);
}
