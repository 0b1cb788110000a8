#include "mirror/cli.hpp"

#include "mirror/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>

namespace fs = std::filesystem;

namespace mirror {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    std::string suite;
    std::string task;
    std::string trace;
    std::string script;
    std::string prompts;
    std::string backend = "scripted";
    std::string record;
    std::string trace_out;
    std::string report_dir = "report";
    int repeats = 1;
    int jobs = 1;
    std::optional<int> max_rounds;
    std::optional<int> theta_p;
    std::optional<int> theta_t;
    std::optional<int> theta_a;
};

// defaults < --config file < flags
RunConfig resolve_config(const Options& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) {
        try {
            cfg = config_from_json(read_json_file(o.config_path));
        } catch (const SchemaError& e) {
            std::string msg = "invalid config " + o.config_path + ":";
            for (const auto& p : e.problems()) msg += "\n  " + p;
            throw UsageError(msg);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
    if (o.max_rounds) cfg.max_rounds = *o.max_rounds;
    if (o.theta_p) cfg.thresholds.theta_p = *o.theta_p;
    if (o.theta_t) cfg.thresholds.theta_t = *o.theta_t;
    if (o.theta_a) cfg.thresholds.theta_a = *o.theta_a;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

PromptKit load_prompts(const Options& o) {
    return PromptKit::load(o.prompts.empty() ? default_prompts_dir() : o.prompts);
}

SuiteTask load_task_dir(const Options& o) {
    if (o.task.empty()) throw UsageError("--task is required");
    try {
        SuiteTask t = load_suite_task(o.task);
        if (!o.script.empty()) t.script = ScriptedBackend::steps_from_json(read_json_file(o.script));
        return t;
    } catch (const SchemaError& e) {
        std::string msg = "invalid task " + o.task + ":";
        for (const auto& p : e.problems()) msg += "\n  " + p;
        throw UsageError(msg);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

void print_run(const RunResult& r, std::ostream& out) {
    out << "task: " << r.task_id << "\n"
        << "status: " << to_string(r.status) << "\n"
        << "rounds: " << r.rounds_used << "\n"
        << "tokens: " << r.tokens.total() << " (prompt " << r.tokens.prompt_total << ", completion "
        << r.tokens.completion_total << ", calls " << r.tokens.call_count << ")\n";
    if (r.final_answer) {
        out << "answer (round " << r.final_answer_round << ", score " << r.final_answer->reflection.score()
            << "): " << r.final_answer->text << "\n";
    }
    if (!r.error.empty()) out << "error: " << r.error << "\n";
}

std::unique_ptr<ChatBackend> make_base_backend(const Options& o, const SuiteTask& task) {
    if (o.backend == "http") return std::make_unique<HttpBackend>(HttpBackend::options_from_env());
    if (!task.script) throw UsageError("task " + task.task.id + " has no script.json; pass --script or --backend http");
    return std::make_unique<ScriptedBackend>(*task.script);
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(o);
    const SuiteTask task = load_task_dir(o);
    const PromptKit prompts = load_prompts(o);
    auto base = make_base_backend(o, task);
    std::unique_ptr<ChatBackend> recorder;
    if (!o.record.empty()) recorder = std::make_unique<RecordingBackend>(*base, o.record);
    ChatBackend& backend = recorder ? *recorder : *base;

    RunResult r = run_task(task.task, cfg, backend, task.registry, prompts);
    if (!o.trace_out.empty()) write_text_file(o.trace_out, r.trace.to_jsonl());
    print_run(r, out);
    if (r.status == RunStatus::Aborted) {
        err << r.error << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.suite.empty()) throw UsageError("--suite is required");
    if (o.repeats < 1) throw UsageError("--repeats must be >= 1");
    if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
    EvalOptions eo;
    eo.config = resolve_config(o);
    eo.repeats = o.repeats;
    eo.jobs = o.jobs;
    eo.trace_dir = o.trace_out;

    std::vector<SuiteTask> tasks;
    try {
        tasks = load_suite(o.suite);
    } catch (const SchemaError& e) {
        std::string msg = "invalid suite " + o.suite + ":";
        for (const auto& p : e.problems()) msg += "\n  " + p;
        throw UsageError(msg);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const PromptKit prompts = load_prompts(o);

    std::shared_ptr<HttpBackend> live;
    if (o.backend == "http") live = std::make_shared<HttpBackend>(HttpBackend::options_from_env());
    if (!o.record.empty()) fs::create_directories(o.record);
    const std::string record_dir = o.record;

    // Each run owns its backend; recording wraps it so the file lives as long as the run.
    struct Owned : ChatBackend {
        std::unique_ptr<ChatBackend> inner;
        std::unique_ptr<ChatBackend> outer;
        ChatResponse do_complete(const ChatRequest& r) override { return outer->complete(r); }
    };
    eo.backend_factory = [live, record_dir](const SuiteTask& t, int repeat) -> std::unique_ptr<ChatBackend> {
        auto owned = std::make_unique<Owned>();
        if (live) {
            owned->inner = std::make_unique<ForwardingBackend>(*live);
        } else {
            owned->inner = scripted_backend_for(t, repeat);
        }
        if (!record_dir.empty()) {
            owned->outer = std::make_unique<RecordingBackend>(
                *owned->inner, record_dir + "/" + t.task.id + ".r" + std::to_string(repeat) + ".backend.jsonl");
        } else {
            owned->outer = std::make_unique<ForwardingBackend>(*owned->inner);
        }
        return owned;
    };

    SuiteResult r = evaluate(tasks, prompts, eo);
    write_report(r, o.report_dir);
    out << render_table(r);
    out << "report written to " << o.report_dir << "\n";
    if (r.aborted > 0) {
        for (const auto& run : r.runs) {
            if (run.status == RunStatus::Aborted) err << run.task_id << " r" << run.repeat << ": " << run.error << "\n";
        }
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.trace.empty()) throw UsageError("--trace is required");
    const RunConfig cfg = resolve_config(o);
    const SuiteTask task = load_task_dir(o);
    const PromptKit prompts = load_prompts(o);
    std::unique_ptr<ReplayBackend> replay;
    try {
        replay = std::make_unique<ReplayBackend>(o.trace);
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kExitFailure;
    }

    RunResult r = run_task(task.task, cfg, *replay, task.registry, prompts);
    if (!o.trace_out.empty()) write_text_file(o.trace_out, r.trace.to_jsonl());
    print_run(r, out);
    if (r.status == RunStatus::Aborted) {
        err << r.error << "\n";
        return kExitFailure;
    }
    if (replay->cursor() != replay->size()) {
        err << "replay finished with " << (replay->size() - replay->cursor()) << " recorded calls unused\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.suite.empty() == o.task.empty()) throw UsageError("validate needs exactly one of --suite or --task");
    std::vector<std::string> problems;
    std::size_t count = 0;
    try {
        if (!o.suite.empty()) {
            count = load_suite(o.suite).size();
        } else {
            load_suite_task(o.task);
            count = 1;
        }
    } catch (const SchemaError& e) {
        problems = e.problems();
    } catch (const Error& e) {
        problems.push_back(e.what());
    }
    if (!o.config_path.empty()) resolve_config(o);
    try {
        const PromptKit prompts = load_prompts(o);
        for (auto& p : prompts.verify_manifest(prompts.directory() + "/MANIFEST.sha256")) problems.push_back(p);
    } catch (const Error& e) {
        problems.push_back(e.what());
    }
    if (!problems.empty()) {
        for (const auto& p : problems) err << p << "\n";
        return kExitFailure;
    }
    out << "ok: " << count << (count == 1 ? " task" : " tasks") << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-agent reflection workflow runner"};
    app.name("mirror");
    app.require_subcommand(1);
    Options o;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "RunConfig JSON file")->check(CLI::ExistingFile);
        sub->add_option("--max-rounds", o.max_rounds, "maximum rounds");
        sub->add_option("--theta-p", o.theta_p, "planner threshold");
        sub->add_option("--theta-t", o.theta_t, "tool threshold");
        sub->add_option("--theta-a", o.theta_a, "answer threshold");
        sub->add_option("--prompts", o.prompts, "prompt template directory");
    };

    auto* run = app.add_subcommand("run", "run one task");
    add_config(run);
    run->add_option("--task", o.task, "task directory")->required();
    run->add_option("--script", o.script, "backend script overriding <task>/script.json");
    run->add_option("--backend", o.backend, "backend")->check(CLI::IsMember({"scripted", "http"}));
    run->add_option("--record", o.record, "write backend calls to this JSONL file");
    run->add_option("--trace-out", o.trace_out, "write the event trace to this JSONL file");

    auto* eval = app.add_subcommand("eval", "evaluate a suite");
    add_config(eval);
    eval->add_option("--suite", o.suite, "suite directory")->required();
    eval->add_option("--repeats", o.repeats, "runs per task")->check(CLI::PositiveNumber);
    eval->add_option("--jobs", o.jobs, "concurrent runs")->check(CLI::PositiveNumber);
    eval->add_option("--backend", o.backend, "backend")->check(CLI::IsMember({"scripted", "http"}));
    eval->add_option("--record", o.record, "directory for per-run backend recordings");
    eval->add_option("--trace-out", o.trace_out, "directory for per-run event traces");
    eval->add_option("--report-dir", o.report_dir, "report output directory");

    auto* replay = app.add_subcommand("replay", "re-drive a task from a recorded backend trace");
    add_config(replay);
    replay->add_option("--trace", o.trace, "recorded backend trace")->required();
    replay->add_option("--task", o.task, "task directory")->required();
    replay->add_option("--trace-out", o.trace_out, "write the event trace to this JSONL file");

    auto* validate = app.add_subcommand("validate", "check a task or suite");
    validate->add_option("--suite", o.suite, "suite directory");
    validate->add_option("--task", o.task, "task directory");
    validate->add_option("--config", o.config_path, "RunConfig JSON file")->check(CLI::ExistingFile);
    validate->add_option("--prompts", o.prompts, "prompt template directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(o, out, err);
        if (eval->parsed()) return cmd_eval(o, out, err);
        if (replay->parsed()) return cmd_replay(o, out, err);
        return cmd_validate(o, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace mirror
