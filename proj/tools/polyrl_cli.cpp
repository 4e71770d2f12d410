// Command-line surface: data pipeline stages, reward scoring, toy-policy
// training, evaluation reporting, and the reward-scoring service.
#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "polyrl/config.hpp"
#include "polyrl/core.hpp"
#include "polyrl/evalrep.hpp"
#include "polyrl/grpo.hpp"
#include "polyrl/pipeline.hpp"
#include "polyrl/policy.hpp"

using nlohmann::json;
using namespace polyrl;

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Remote: return 4;
    }
    return 1;
}

const char* kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Data: return "data";
        case ErrorKind::Remote: return "remote";
    }
    return "internal";
}

void emit_error(ErrorKind kind, const std::string& message) {
    json err = {{"error", {{"kind", kind_name(kind)}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << content;
}

std::vector<ToyTaskItem> sft_instances(const ToyTask& task, const std::string& dataset,
                                       const std::vector<std::string>& tiers) {
    std::vector<ToyTaskItem> items;
    if (dataset == "toy") {
        for (const auto& item : task.items()) items.push_back(item);
    } else {
        for (const auto& inst : load_dataset(dataset))
            items.push_back(toy_item_from_instance(task, inst));
    }
    if (tiers.empty()) return items;

    std::vector<ToyTaskItem> filtered;
    for (const auto& item : items) {
        const auto tier = tier_of(item.instance.language);
        for (const auto& name : tiers) {
            auto t = parse_tier(name);
            if (!t) throw config_error("unknown tier \"" + name + "\"");
            if (tier == *t) {
                filtered.push_back(item);
                break;
            }
        }
    }
    if (filtered.empty()) throw data_error("tier filter matched no instances");
    return filtered;
}

void run_serve_stdio(const RunConfig& config) {
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        try {
            std::cout << score_request(config, line) << "\n" << std::flush;
        } catch (const Error& e) {
            json err = {{"error", {{"kind", kind_name(e.kind())}, {"message", e.what()}}}};
            std::cout << err.dump() << "\n" << std::flush;
        }
    }
}

void run_serve_http(const RunConfig& config, int port) {
    httplib::Server server;
    server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        try {
            res.set_content(score_request(config, req.body), "application/json");
        } catch (const Error& e) {
            json err = {{"error", {{"kind", kind_name(e.kind())}, {"message", e.what()}}}};
            res.status = 400;
            res.set_content(err.dump(), "application/json");
        }
    });
    server.Post("/", [&](const httplib::Request& req, httplib::Response& res) {
        try {
            res.set_content(score_request(config, req.body), "application/json");
        } catch (const Error& e) {
            json err = {{"error", {{"kind", kind_name(e.kind())}, {"message", e.what()}}}};
            res.status = 400;
            res.set_content(err.dump(), "application/json");
        }
    });
    std::cerr << "serving on port " << port << "\n";
    if (!server.listen("0.0.0.0", port))
        throw config_error("cannot bind port " + std::to_string(port));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multilingual verifiable-reward curriculum trainer"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "configuration file (JSON)");

    // pipeline
    auto* pipeline_cmd = app.add_subcommand("pipeline", "data curation stages");
    pipeline_cmd->require_subcommand(1);

    std::vector<std::string> gen_topics;
    int gen_n = 1;
    std::string gen_out;
    auto* gen = pipeline_cmd->add_subcommand("generate", "generate MCQs");
    gen->add_option("--topic", gen_topics, "topic focus (repeatable)");
    gen->add_option("--n", gen_n, "questions to request")->required();
    gen->add_option("--out", gen_out, "output MCQ JSON")->required();

    std::string filter_in, filter_kept, filter_dropped, filter_verdicts;
    auto* filter = pipeline_cmd->add_subcommand("filter", "difficulty + ambiguity filters");
    filter->add_option("--in", filter_in)->required();
    filter->add_option("--kept", filter_kept)->required();
    filter->add_option("--dropped", filter_dropped);
    filter->add_option("--verdicts", filter_verdicts, "LDJSON decision trail");

    std::string convert_in, convert_out, convert_log;
    auto* convert = pipeline_cmd->add_subcommand("convert", "MCQs to open-ended instances");
    convert->add_option("--in", convert_in)->required();
    convert->add_option("--out", convert_out)->required();
    convert->add_option("--verdicts", convert_log, "LDJSON decision trail");

    std::string split_in, split_out;
    std::uint64_t split_seed = 0;
    bool split_seed_set = false;
    auto* split = pipeline_cmd->add_subcommand("split", "stratified dataset splits");
    split->add_option("--in", split_in)->required();
    split->add_option("--out", split_out)->required();
    split->add_option("--seed", split_seed)->each([&](const std::string&) {
        split_seed_set = true;
    });

    // reward score
    auto* reward_cmd = app.add_subcommand("reward", "reward scoring");
    reward_cmd->require_subcommand(1);
    std::string score_in, score_out;
    auto* score = reward_cmd->add_subcommand("score", "score LDJSON requests");
    score->add_option("--in", score_in, "line-delimited JSON requests")->required();
    score->add_option("--out", score_out, "output file (default stdout)");

    // train
    auto* train_cmd = app.add_subcommand("train", "toy-policy training");
    train_cmd->require_subcommand(1);

    std::string sft_dataset = "toy", sft_out, sft_report_path, sft_init;
    std::vector<std::string> sft_tiers;
    auto* sft = train_cmd->add_subcommand("sft", "cold-start supervised fit");
    sft->add_option("--dataset", sft_dataset, "'toy' or a dataset JSON file");
    sft->add_option("--tier", sft_tiers, "restrict to tiers (repeatable)");
    sft->add_option("--init", sft_init, "initial checkpoint");
    sft->add_option("--out", sft_out, "checkpoint path")->required();
    sft->add_option("--report", sft_report_path, "JSON report path");

    std::string grpo_init, grpo_out, grpo_report_path, grpo_profile;
    std::uint64_t grpo_seed = 0;
    auto* grpo = train_cmd->add_subcommand("grpo", "curriculum GRPO");
    grpo->add_option("--profile", grpo_profile, "toy|paper (overrides config)");
    grpo->add_option("--seed", grpo_seed, "run seed (overrides config)");
    grpo->add_option("--init", grpo_init, "initial checkpoint (default: fresh SFT)");
    grpo->add_option("--out", grpo_out, "final checkpoint path")->required();
    grpo->add_option("--report", grpo_report_path, "training report (LDJSON)");

    // eval
    std::string eval_outputs, eval_testset, eval_format = "markdown", eval_records;
    auto* eval_cmd = app.add_subcommand("eval", "LA/LC evaluation report");
    eval_cmd->add_option("--outputs", eval_outputs, "JSON object id -> output text")
        ->required();
    eval_cmd->add_option("--testset", eval_testset, "dataset JSON")->required();
    eval_cmd->add_option("--format", eval_format, "markdown|csv");
    eval_cmd->add_option("--records", eval_records, "per-record LDJSON output");

    // serve
    int serve_port = 0;
    bool serve_stdio = false;
    auto* serve = app.add_subcommand("serve", "reward-scoring service");
    serve->add_option("--port", serve_port, "HTTP port");
    serve->add_flag("--stdio", serve_stdio, "line-delimited JSON over stdio");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        emit_error(ErrorKind::Config, e.what());
        return 2;
    }

    try {
        RunConfig config =
            config_path.empty() ? RunConfig::defaults() : RunConfig::load(config_path);

        if (gen->parsed()) {
            Pipeline pipeline(config.pipeline);
            const auto items = pipeline.generate_mcqs(gen_topics, gen_n);
            spill(gen_out, mcqs_to_json(items));
            std::cout << "generated " << items.size() << " items\n";
        } else if (filter->parsed()) {
            Pipeline pipeline(config.pipeline);
            const auto items = load_mcqs(filter_in);
            auto difficulty = pipeline.difficulty_filter(items);
            auto ambiguity = pipeline.ambiguity_filter(difficulty.kept);
            spill(filter_kept, mcqs_to_json(ambiguity.kept));
            if (!filter_dropped.empty()) {
                auto dropped = difficulty.dropped;
                dropped.insert(dropped.end(), ambiguity.dropped.begin(),
                               ambiguity.dropped.end());
                spill(filter_dropped, mcqs_to_json(dropped));
            }
            if (!filter_verdicts.empty()) {
                std::string lines;
                for (const auto& l : pipeline.log_lines()) lines += l + "\n";
                spill(filter_verdicts, lines);
            }
            std::cout << "kept " << ambiguity.kept.size() << " of " << items.size()
                      << " items\n";
        } else if (convert->parsed()) {
            Pipeline pipeline(config.pipeline);
            std::vector<BenchInstance> instances;
            for (const auto& item : load_mcqs(convert_in)) {
                auto converted = pipeline.to_open_ended(item);
                instances.insert(instances.end(), converted.begin(), converted.end());
            }
            instances = dedup(instances);
            spill(convert_out, dataset_to_json(instances));
            if (!convert_log.empty()) {
                std::string lines;
                for (const auto& l : pipeline.log_lines()) lines += l + "\n";
                spill(convert_log, lines);
            }
            std::cout << "converted " << instances.size() << " instances\n";
        } else if (split->parsed()) {
            const auto dataset = load_dataset(split_in);
            const auto result =
                make_splits(dataset, split_seed_set ? split_seed : config.seed);
            spill(split_out, split_to_json(result));
            std::cout << "split " << dataset.size() << " instances: test "
                      << result.test.size() << ", rft " << result.train_rft.size()
                      << ", sft " << result.train_sft.size() << "\n";
        } else if (score->parsed()) {
            std::ifstream in(score_in);
            if (!in) throw data_error("cannot open file: " + score_in);
            std::ostringstream replies;
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                try {
                    replies << score_request(config, line) << "\n";
                } catch (const Error& e) {
                    throw Error(e.kind(), "line " + std::to_string(line_no) + ": " +
                                              e.what());
                }
            }
            if (score_out.empty())
                std::cout << replies.str();
            else
                spill(score_out, replies.str());
        } else if (sft->parsed()) {
            ToyTask task;
            PolicyParams params =
                sft_init.empty()
                    ? PolicyParams::init(task.vocab(), config.feature_dim,
                                         config.policy_temperature)
                    : PolicyParams::load(sft_init, task.vocab());
            SftReport report;
            params = sft_fit(params, sft_instances(task, sft_dataset, sft_tiers),
                             config.sft, &report);
            params.save(sft_out);
            if (!sft_report_path.empty()) {
                json rep = {{"epoch_nll", report.epoch_nll}};
                spill(sft_report_path, rep.dump(2) + "\n");
            }
            std::cout << "sft nll/token:";
            for (double nll : report.epoch_nll) std::cout << " " << nll;
            std::cout << "\n";
        } else if (grpo->parsed()) {
            ToyTask task;
            if (!grpo_profile.empty()) {
                if (grpo_profile == "toy")
                    config.grpo = GrpoConfig::toy_profile();
                else if (grpo_profile == "paper")
                    config.grpo = GrpoConfig::paper_profile();
                else
                    throw config_error("unknown profile \"" + grpo_profile + "\"");
            }
            const std::uint64_t seed =
                grpo->count("--seed") > 0 ? grpo_seed : config.seed;

            PolicyParams init =
                grpo_init.empty()
                    ? sft_fit(PolicyParams::init(task.vocab(), config.feature_dim,
                                                 config.policy_temperature),
                              sft_instances(task, "toy", {"High"}), config.sft)
                    : PolicyParams::load(grpo_init, task.vocab());

            auto result = train(std::move(init), task, task.pools(), config.schedule,
                                config.reward_config(config.train_scope), config.grpo,
                                seed);
            result.params.save(grpo_out);
            if (!grpo_report_path.empty()) result.report.save(grpo_report_path);
            std::cout << "steps: " << result.report.records.size()
                      << ", report digest: " << result.report.digest() << "\n";
        } else if (eval_cmd->parsed()) {
            json outputs_doc = json::parse(slurp(eval_outputs), nullptr, false);
            if (outputs_doc.is_discarded() || !outputs_doc.is_object())
                throw data_error("outputs file must be a JSON object of id -> text");
            std::map<std::string, std::string> outputs;
            for (const auto& [id, text] : outputs_doc.items()) {
                if (!text.is_string())
                    throw data_error("output for \"" + id + "\" must be a string");
                outputs[id] = text.get<std::string>();
            }
            const auto testset = load_dataset(eval_testset);

            EvalConfig ec;
            ec.backend = config.backend;
            ec.parse_options = config.parse_options;
            ec.lc_remote = config.lc_remote;
            ec.detector = &config.detector();
            const auto records = evaluate(outputs, testset, ec);
            if (!eval_records.empty()) {
                std::string lines;
                for (const auto& r : records) {
                    json rec = {{"instance_id", r.instance_id},
                                {"language", std::string(language_name(r.language))},
                                {"la", r.la},
                                {"lc", r.lc},
                                {"detector_confidence", r.detector_confidence},
                                {"note", r.note}};
                    lines += rec.dump() + "\n";
                }
                spill(eval_records, lines);
            }
            const auto summary = summarize(records);
            if (eval_format == "csv")
                std::cout << render(summary, RenderFormat::Csv);
            else if (eval_format == "markdown")
                std::cout << render(summary, RenderFormat::Markdown);
            else
                throw config_error("unknown eval format \"" + eval_format + "\"");
        } else if (serve->parsed()) {
            if (serve_stdio || serve_port == 0)
                run_serve_stdio(config);
            else
                run_serve_http(config, serve_port);
        }
    } catch (const Error& e) {
        emit_error(e.kind(), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        emit_error(ErrorKind::Data, e.what());
        return 1;
    }
    return 0;
}
