#pragma once

#include "mirror/harness.hpp"

#include <httplib.h>

#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace mirror::test {

std::string source_dir();
std::string fixture_path(const std::string& rel);
const PromptKit& prompts();

// Scratch directory under the build tree, emptied on creation.
std::string scratch_dir(const std::string& name);

// Reply texts in the formats the agents expect.
std::string plan_text(const std::vector<std::pair<std::string, std::string>>& nodes, double score,
                      const std::string& evaluation = "decomposition covers the task");
std::string tool_text(const std::string& function, const Json& parameters, double score,
                      const std::string& evaluation = "parameters match the subtask");
std::string answer_text(const std::string& answer, double score,
                        const std::string& evaluation = "answer integrates the trajectory");

ScriptStep step(std::string text, std::int64_t prompt_tokens = 100, std::int64_t completion_tokens = 20,
                std::string hint = {});

// Which agent sent the request, by system prompt.
AgentRole role_of(const ChatRequest& request);

// Number of memory entries rendered into an agent prompt.
int memory_entries_in(const std::string& user_prompt);

// floor then clamp to [1,10], computed independently of IntraReflection.
int expected_score(double raw);

// A task with `tool_count` single-parameter tools t0..tN. Each tool returns
// Ok for {"q":"good"} and SimulatedFailure otherwise; tools listed in
// `flaky` also fail their first call whatever the parameters.
struct Fixture {
    TaskSpec task;
    ToolRegistry registry;
};
Fixture make_fixture(const std::string& id, int tool_count, const std::vector<int>& flaky = {});

struct FixtureJson {
    Json task;
    Json sandbox;
};
FixtureJson fixture_json(const std::string& id, int tool_count, const std::vector<int>& flaky = {});

// Writes <suite_dir>/<id>/{task,sandbox,script}.json for a make_fixture task.
std::string write_suite_task(const std::string& suite_dir, const std::string& id, int tool_count,
                             const std::vector<ScriptStep>& steps);

struct ScenarioKnobs {
    double p_malformed = 0.04;      // reply with prose and no JSON
    double p_schema_error = 0.03;   // JSON missing intra_reflection
    double p_fractional = 0.1;      // score like 8.6
    double p_out_of_range = 0.03;   // score 0 or 11..12
    double p_good_params = 0.7;
    double p_missing_param = 0.1;
    double p_divergent = 0.08;
    double p_empty_plan = 0.03;
    int max_nodes = 4;
};

// Reactive backend: decides each reply from the agent role and the request,
// drawing from a seeded generator. Identical seeds and request sequences give
// identical replies. Records every reply with the score it declared.
class ScenarioBackend : public ChatBackend {
public:
    struct Served {
        AgentRole role;
        ChatRequest request;
        ChatResponse response;
        std::optional<int> score;  // expected parsed score, unset if unusable
        bool parsable = false;
    };

    ScenarioBackend(const Fixture& fixture, const RunConfig& config, std::uint64_t seed, ScenarioKnobs knobs = {});

    const std::vector<Served>& served() const noexcept { return served_; }
    std::vector<ScriptStep> as_script() const;

    // Counts of declared scores per agent name, the oracle for histograms.
    std::map<std::string, std::array<std::int64_t, 10>> declared_histogram() const;

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    double draw_score(int threshold);
    bool chance(double p);

    const Fixture& fixture_;
    RunConfig config_;
    ScenarioKnobs knobs_;
    std::mt19937_64 rng_;
    std::vector<Served> served_;
};

// Random but reproducible RunConfig with thresholds in [5,10].
RunConfig random_config(std::uint64_t seed);

// In-process OpenAI-compatible endpoint on 127.0.0.1.
class ChatStubServer {
public:
    using Responder = std::function<ChatResponse(const ChatRequest&)>;

    explicit ChatStubServer(Responder responder);
    ~ChatStubServer();

    // Statuses returned before the responder is consulted, one per request.
    void fail_next(std::vector<int> statuses);

    std::string base_url() const;
    int hits() const noexcept { return hits_.load(); }

private:
    Responder responder_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    std::mutex mutex_;
    std::vector<int> pending_failures_;
};

}  // namespace mirror::test
