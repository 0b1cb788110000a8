#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace fs = std::filesystem;

namespace mirror::test {

std::string source_dir() { return MIRROR_SOURCE_DIR; }

std::string fixture_path(const std::string& rel) { return source_dir() + "/tests/fixtures/" + rel; }

const PromptKit& prompts() {
    static const PromptKit kit = PromptKit::load(source_dir() + "/prompts");
    return kit;
}

std::string scratch_dir(const std::string& name) {
    const fs::path dir = fs::path(MIRROR_BINARY_DIR) / "scratch" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

namespace {

Json reflection(double score, const std::string& evaluation) {
    Json r;
    r["evaluation"] = evaluation;
    if (score == std::floor(score)) {
        r["score"] = static_cast<int>(score);
    } else {
        r["score"] = score;
    }
    return r;
}

}  // namespace

std::string plan_text(const std::vector<std::pair<std::string, std::string>>& nodes, double score,
                      const std::string& evaluation) {
    Json j;
    j["nodes"] = Json::array();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        j["nodes"].push_back(Json{{"id", "node" + std::to_string(i + 1)},
                                  {"status", 0},
                                  {"subtask", nodes[i].first},
                                  {"function", nodes[i].second}});
    }
    j["intra_reflection"] = reflection(score, evaluation);
    return j.dump(2);
}

std::string tool_text(const std::string& function, const Json& parameters, double score,
                      const std::string& evaluation) {
    Json j;
    j["function"] = function;
    j["parameters"] = parameters;
    j["intra_reflection"] = reflection(score, evaluation);
    return j.dump(2);
}

std::string answer_text(const std::string& answer, double score, const std::string& evaluation) {
    Json j;
    j["answer"] = answer;
    j["intra_reflection"] = reflection(score, evaluation);
    return j.dump(2);
}

ScriptStep step(std::string text, std::int64_t prompt_tokens, std::int64_t completion_tokens, std::string hint) {
    return ScriptStep{std::move(hint), ChatResponse{std::move(text), prompt_tokens, completion_tokens}};
}

AgentRole role_of(const ChatRequest& request) {
    static const std::string planner = prompts().get(PromptKind::PlannerSystem).render({});
    static const std::string tool = prompts().get(PromptKind::ToolSystem).render({});
    static const std::string answer = prompts().get(PromptKind::AnswerSystem).render({});
    if (request.system == planner) return AgentRole::Planner;
    if (request.system == tool) return AgentRole::Tool;
    if (request.system == answer) return AgentRole::Answer;
    throw std::logic_error("request from an unknown agent");
}

int memory_entries_in(const std::string& user_prompt) {
    static const std::string marker = "**Memory:**\n";
    int n = 0;
    for (auto pos = user_prompt.find(marker); pos != std::string::npos; pos = user_prompt.find(marker, pos + 1)) ++n;
    return n;
}

int expected_score(double raw) {
    const double f = std::floor(raw);
    if (f < 1.0) return 1;
    if (f > 10.0) return 10;
    return static_cast<int>(f);
}

FixtureJson fixture_json(const std::string& id, int tool_count, const std::vector<int>& flaky) {
    Json tools = Json::array();
    Json sandbox_tools = Json::array();
    for (int i = 0; i < tool_count; ++i) {
        const std::string name = "t" + std::to_string(i);
        Json spec{{"name", name},
                  {"description", "Simulated tool " + name},
                  {"parameters", Json::array({Json{{"name", "q"},
                                                   {"kind", "string"},
                                                   {"required", true},
                                                   {"description", "query"}}})}};
        tools.push_back(spec);
        Json rules = Json::array();
        if (std::find(flaky.begin(), flaky.end(), i) != flaky.end()) {
            rules.push_back(Json{{"when", Json{{"call_index", 1}}},
                                 {"result", Json{{"status", "SimulatedFailure"}, {"payload", "temporarily unavailable"}}}});
        }
        rules.push_back(Json{{"when", Json{{"params", Json{{"q", "good"}}}}},
                             {"result", Json{{"status", "Ok"}, {"payload", name + " result"}}}});
        sandbox_tools.push_back(Json{{"spec", spec},
                                     {"rules", rules},
                                     {"default", Json{{"status", "SimulatedFailure"}, {"payload", "no match for query"}}}});
    }
    Json task{{"id", id},
              {"description", "Synthetic task " + id + " using " + std::to_string(tool_count) + " tools."},
              {"tools", tools},
              {"success_check", Json{{"kind", "AllNodesSucceeded"}, {"payload", Json::array()}}}};
    return FixtureJson{task, Json{{"tools", sandbox_tools}}};
}

Fixture make_fixture(const std::string& id, int tool_count, const std::vector<int>& flaky) {
    const auto j = fixture_json(id, tool_count, flaky);
    return Fixture{task_from_json(j.task), ToolRegistry::from_json(j.sandbox)};
}

std::string write_suite_task(const std::string& suite_dir, const std::string& id, int tool_count,
                             const std::vector<ScriptStep>& steps) {
    const std::string dir = suite_dir + "/" + id;
    std::filesystem::create_directories(dir);
    const auto j = fixture_json(id, tool_count);
    write_text_file(dir + "/task.json", j.task.dump(2));
    write_text_file(dir + "/sandbox.json", j.sandbox.dump(2));
    Json script = Json::array();
    for (const auto& s : steps) {
        script.push_back(Json{{"hint", s.hint},
                              {"text", s.response.text},
                              {"prompt_tokens", s.response.prompt_tokens},
                              {"completion_tokens", s.response.completion_tokens}});
    }
    write_text_file(dir + "/script.json", Json{{"steps", script}}.dump(2));
    return dir;
}

RunConfig random_config(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<int> theta(5, 10);
    std::uniform_int_distribution<int> small(1, 4);
    RunConfig c;
    c.thresholds = Thresholds{theta(rng), theta(rng), theta(rng)};
    c.max_rounds = small(rng) + 1;
    c.revision_cap = small(rng);
    c.subtask_retry_cap = small(rng);
    c.parse_retry_cap = small(rng) + 1;
    return c;
}

// ---------------------------------------------------------------------------

ScenarioBackend::ScenarioBackend(const Fixture& fixture, const RunConfig& config, std::uint64_t seed,
                                 ScenarioKnobs knobs)
    : fixture_(fixture), config_(config), knobs_(knobs), rng_(seed) {}

bool ScenarioBackend::chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

double ScenarioBackend::draw_score(int threshold) {
    std::uniform_int_distribution<int> any(1, 10);
    int s;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    if (u < 0.45) {
        s = std::clamp(threshold + std::uniform_int_distribution<int>(-1, 1)(rng_), 1, 10);
    } else if (u < 0.8) {
        s = std::uniform_int_distribution<int>(threshold, 10)(rng_);
    } else {
        s = any(rng_);
    }
    if (chance(knobs_.p_out_of_range)) return chance(0.5) ? 0.0 : 11.0 + std::uniform_int_distribution<int>(0, 1)(rng_);
    if (chance(knobs_.p_fractional)) return s + 0.25 * std::uniform_int_distribution<int>(1, 3)(rng_);
    return s;
}

ChatResponse ScenarioBackend::do_complete(const ChatRequest& request) {
    const AgentRole role = role_of(request);
    Served rec{role, request, {}, std::nullopt, false};
    const auto& tools = fixture_.task.tools;
    auto pick_tool = [&] {
        return tools[std::uniform_int_distribution<std::size_t>(0, tools.size() - 1)(rng_)].name;
    };

    std::string text;
    double score = 0;
    if (chance(knobs_.p_malformed)) {
        text = "I think the best approach is to look at the functions first.";
    } else {
        const bool schema_error = chance(knobs_.p_schema_error);
        switch (role) {
            case AgentRole::Planner: {
                score = draw_score(config_.thresholds.theta_p);
                std::vector<std::pair<std::string, std::string>> nodes;
                const int n = chance(knobs_.p_empty_plan)
                                  ? 0
                                  : std::uniform_int_distribution<int>(1, knobs_.max_nodes)(rng_);
                for (int i = 0; i < n; ++i) nodes.emplace_back("subtask " + std::to_string(i + 1), pick_tool());
                text = plan_text(nodes, score);
                break;
            }
            case AgentRole::Tool: {
                score = draw_score(config_.thresholds.theta_t);
                static const std::string marker = "Assigned function: ";
                const auto at = request.user.find(marker) + marker.size();
                std::string fn = request.user.substr(at, request.user.find('\n', at) - at);
                if (chance(knobs_.p_divergent)) fn = pick_tool();
                Json params = Json::object();
                if (!chance(knobs_.p_missing_param)) params["q"] = chance(knobs_.p_good_params) ? "good" : "bad";
                text = tool_text(fn, params, score);
                break;
            }
            case AgentRole::Answer:
                score = draw_score(config_.thresholds.theta_a);
                text = answer_text("synthetic answer", score);
                break;
        }
        if (schema_error) {
            Json j = Json::parse(text);
            j.erase("intra_reflection");
            text = j.dump();
        } else {
            rec.parsable = true;
            rec.score = expected_score(score);
        }
    }
    rec.response = ChatResponse{text, static_cast<std::int64_t>(request.system.size() + request.user.size()) / 4,
                                static_cast<std::int64_t>(text.size()) / 4};
    served_.push_back(rec);
    return rec.response;
}

std::vector<ScriptStep> ScenarioBackend::as_script() const {
    std::vector<ScriptStep> steps;
    for (const auto& s : served_) steps.push_back(ScriptStep{std::string(to_string(s.role)), s.response});
    return steps;
}

std::map<std::string, std::array<std::int64_t, 10>> ScenarioBackend::declared_histogram() const {
    std::map<std::string, std::array<std::int64_t, 10>> h{{"planner", {}}, {"tool", {}}, {"answer", {}}};
    for (const auto& s : served_) {
        if (s.score) h[std::string(to_string(s.role))][*s.score - 1] += 1;
    }
    return h;
}

// ---------------------------------------------------------------------------

ChatStubServer::ChatStubServer(Responder responder) : responder_(std::move(responder)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
        hits_.fetch_add(1);
        {
            std::lock_guard lock(mutex_);
            if (!pending_failures_.empty()) {
                res.status = pending_failures_.front();
                pending_failures_.erase(pending_failures_.begin());
                res.set_content(R"({"error":{"message":"stub failure"}})", "application/json");
                return;
            }
        }
        const Json body = Json::parse(req.body);
        ChatRequest request;
        request.model = body.at("model").get<std::string>();
        request.temperature = body.at("temperature").get<double>();
        for (const auto& m : body.at("messages")) {
            if (m.at("role") == "system") request.system = m.at("content").get<std::string>();
            if (m.at("role") == "user") request.user = m.at("content").get<std::string>();
        }
        const ChatResponse out = responder_(request);
        Json reply{{"id", "stub"},
                   {"object", "chat.completion"},
                   {"choices", Json::array({Json{{"index", 0},
                                                 {"message", Json{{"role", "assistant"}, {"content", out.text}}},
                                                 {"finish_reason", "stop"}}})},
                   {"usage", Json{{"prompt_tokens", out.prompt_tokens},
                                  {"completion_tokens", out.completion_tokens},
                                  {"total_tokens", out.prompt_tokens + out.completion_tokens}}}};
        res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
}

ChatStubServer::~ChatStubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
}

void ChatStubServer::fail_next(std::vector<int> statuses) {
    std::lock_guard lock(mutex_);
    pending_failures_ = std::move(statuses);
}

std::string ChatStubServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

}  // namespace mirror::test
