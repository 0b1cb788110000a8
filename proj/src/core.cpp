#include "mirror/core.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mirror {

std::string_view to_string(ParamKind kind) {
    switch (kind) {
        case ParamKind::String: return "string";
        case ParamKind::Number: return "number";
        case ParamKind::Boolean: return "boolean";
        case ParamKind::Enum: return "enum";
    }
    return "string";
}

std::optional<ParamKind> param_kind_from_string(std::string_view name) {
    if (name == "string") return ParamKind::String;
    if (name == "number") return ParamKind::Number;
    if (name == "boolean") return ParamKind::Boolean;
    if (name == "enum") return ParamKind::Enum;
    return std::nullopt;
}

std::string_view to_string(PredicateKind kind) {
    switch (kind) {
        case PredicateKind::ExpectedCalls: return "ExpectedCalls";
        case PredicateKind::AnswerContains: return "AnswerContains";
        case PredicateKind::AllNodesSucceeded: return "AllNodesSucceeded";
    }
    return "AllNodesSucceeded";
}

std::optional<PredicateKind> predicate_kind_from_string(std::string_view name) {
    if (name == "ExpectedCalls") return PredicateKind::ExpectedCalls;
    if (name == "AnswerContains") return PredicateKind::AnswerContains;
    if (name == "AllNodesSucceeded") return PredicateKind::AllNodesSucceeded;
    return std::nullopt;
}

std::string_view to_string(NodeStatus status) {
    switch (status) {
        case NodeStatus::Pending: return "Pending";
        case NodeStatus::Succeeded: return "Succeeded";
        case NodeStatus::Failed: return "Failed";
    }
    return "Pending";
}

std::string_view to_string(ExecStatus status) {
    switch (status) {
        case ExecStatus::Ok: return "Ok";
        case ExecStatus::ToolNotFound: return "ToolNotFound";
        case ExecStatus::InvalidParameters: return "InvalidParameters";
        case ExecStatus::SimulatedFailure: return "SimulatedFailure";
    }
    return "Ok";
}

std::optional<ExecStatus> exec_status_from_string(std::string_view name) {
    if (name == "Ok") return ExecStatus::Ok;
    if (name == "ToolNotFound") return ExecStatus::ToolNotFound;
    if (name == "InvalidParameters") return ExecStatus::InvalidParameters;
    if (name == "SimulatedFailure") return ExecStatus::SimulatedFailure;
    return std::nullopt;
}

const ParamSpec* ToolSpec::find_param(std::string_view param) const {
    for (const auto& p : parameters) {
        if (p.name == param) return &p;
    }
    return nullptr;
}

const ToolSpec* TaskSpec::find_tool(std::string_view name) const {
    for (const auto& t : tools) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

ValidationReport validate_task(const TaskSpec& task) {
    ValidationReport report;
    auto& v = report.violations;
    if (task.id.empty()) v.push_back("id is empty");
    if (task.description.empty()) v.push_back("description is empty");
    if (task.tools.empty()) v.push_back("tools is empty");

    std::set<std::string> tool_names;
    for (std::size_t i = 0; i < task.tools.size(); ++i) {
        const auto& tool = task.tools[i];
        const std::string where = "tools[" + std::to_string(i) + "]";
        if (tool.name.empty()) {
            v.push_back(where + ".name is empty");
        } else if (!tool_names.insert(tool.name).second) {
            v.push_back("duplicate tool name \"" + tool.name + "\"");
        }
        std::set<std::string> param_names;
        for (std::size_t k = 0; k < tool.parameters.size(); ++k) {
            const auto& p = tool.parameters[k];
            const std::string pwhere = where + ".parameters[" + std::to_string(k) + "]";
            if (p.name.empty()) {
                v.push_back(pwhere + ".name is empty");
            } else if (!param_names.insert(p.name).second) {
                v.push_back(where + " has duplicate parameter \"" + p.name + "\"");
            }
            if (p.kind == ParamKind::Enum && p.allowed.empty()) {
                v.push_back(pwhere + " is an enum without allowed values");
            }
        }
    }

    const auto& check = task.success_check;
    switch (check.kind) {
        case PredicateKind::ExpectedCalls:
            if (check.expected_calls.empty()) {
                v.push_back("success_check ExpectedCalls has an empty payload");
            }
            for (const auto& call : check.expected_calls) {
                if (!task.find_tool(call.function)) {
                    v.push_back("success_check expects unknown function \"" + call.function + "\"");
                }
                if (!call.parameters.is_object()) {
                    v.push_back("success_check parameters for \"" + call.function +
                                "\" is not an object");
                }
            }
            break;
        case PredicateKind::AnswerContains:
            if (check.required_substrings.empty()) {
                v.push_back("success_check AnswerContains has an empty payload");
            }
            break;
        case PredicateKind::AllNodesSucceeded:
            if (!check.expected_calls.empty() || !check.required_substrings.empty()) {
                v.push_back("success_check AllNodesSucceeded carries a payload");
            }
            break;
    }
    return report;
}

ValidationReport validate_suite(const std::vector<TaskSpec>& tasks) {
    ValidationReport report;
    std::set<std::string> ids;
    for (const auto& task : tasks) {
        for (auto& violation : validate_task(task).violations) {
            report.violations.push_back(task.id + ": " + violation);
        }
        if (!task.id.empty() && !ids.insert(task.id).second) {
            report.violations.push_back("duplicate task id \"" + task.id + "\"");
        }
    }
    return report;
}

IntraReflection::IntraReflection(std::string evaluation, int score, bool clamped)
    : evaluation_(std::move(evaluation)), score_(score), clamped_(clamped) {
    if (score_ < kMinScore || score_ > kMaxScore) {
        throw Error(ErrorCode::InvalidArgument,
                    "intra-reflection score " + std::to_string(score_) + " outside [1,10]");
    }
    if (evaluation_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "intra-reflection evaluation is empty");
    }
}

IntraReflection IntraReflection::from_model_score(std::string evaluation, double raw_score) {
    if (!std::isfinite(raw_score)) {
        throw Error(ErrorCode::InvalidArgument, "intra-reflection score is not finite");
    }
    const double floored = std::floor(raw_score);
    int score = 0;
    bool clamped = false;
    if (floored < kMinScore) {
        score = kMinScore;
        clamped = true;
    } else if (floored > kMaxScore) {
        score = kMaxScore;
        clamped = true;
    } else {
        score = static_cast<int>(floored);
    }
    return IntraReflection(std::move(evaluation), score, clamped);
}

PlanNode node_transition(const PlanNode& node, NodeStatus to) {
    if (node.status != NodeStatus::Pending || to == NodeStatus::Pending) {
        throw Error(ErrorCode::IllegalTransition,
                    "IllegalTransition: node " + node.id + " " + std::string(to_string(node.status)) +
                        " -> " + std::string(to_string(to)));
    }
    PlanNode next = node;
    next.status = to;
    return next;
}

void RunConfig::validate() const {
    auto in_range = [](int v) { return v >= kMinScore && v <= kMaxScore; };
    if (!in_range(thresholds.theta_p)) throw Error(ErrorCode::InvalidArgument, "theta_p outside [1,10]");
    if (!in_range(thresholds.theta_t)) throw Error(ErrorCode::InvalidArgument, "theta_t outside [1,10]");
    if (!in_range(thresholds.theta_a)) throw Error(ErrorCode::InvalidArgument, "theta_a outside [1,10]");
    if (max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "max_rounds must be >= 1");
    if (revision_cap < 1) throw Error(ErrorCode::InvalidArgument, "revision_cap must be >= 1");
    if (subtask_retry_cap < 1) throw Error(ErrorCode::InvalidArgument, "subtask_retry_cap must be >= 1");
    if (parse_retry_cap < 1) throw Error(ErrorCode::InvalidArgument, "parse_retry_cap must be >= 1");
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const ParamSpec& p) {
    Json j;
    j["name"] = p.name;
    j["kind"] = to_string(p.kind);
    j["required"] = p.required;
    j["description"] = p.description;
    if (p.kind == ParamKind::Enum) j["enum"] = p.allowed;
    return j;
}

Json to_json(const ToolSpec& t) {
    Json j;
    j["name"] = t.name;
    j["description"] = t.description;
    j["parameters"] = Json::array();
    for (const auto& p : t.parameters) j["parameters"].push_back(to_json(p));
    return j;
}

Json to_json(const SuccessPredicate& s) {
    Json j;
    j["kind"] = to_string(s.kind);
    Json payload = Json::array();
    switch (s.kind) {
        case PredicateKind::ExpectedCalls:
            for (const auto& c : s.expected_calls) {
                payload.push_back(Json{{"function", c.function}, {"parameters", c.parameters}});
            }
            break;
        case PredicateKind::AnswerContains:
            for (const auto& sub : s.required_substrings) payload.push_back(sub);
            break;
        case PredicateKind::AllNodesSucceeded:
            break;
    }
    j["payload"] = std::move(payload);
    return j;
}

Json to_json(const TaskSpec& t) {
    Json j;
    j["id"] = t.id;
    j["description"] = t.description;
    j["tools"] = Json::array();
    for (const auto& tool : t.tools) j["tools"].push_back(to_json(tool));
    j["success_check"] = to_json(t.success_check);
    return j;
}

Json to_json(const RunConfig& c) {
    Json j;
    j["theta_p"] = c.thresholds.theta_p;
    j["theta_t"] = c.thresholds.theta_t;
    j["theta_a"] = c.thresholds.theta_a;
    j["max_rounds"] = c.max_rounds;
    j["revision_cap"] = c.revision_cap;
    j["subtask_retry_cap"] = c.subtask_retry_cap;
    j["parse_retry_cap"] = c.parse_retry_cap;
    j["model"] = c.model;
    j["temperature"] = c.temperature;
    return j;
}

namespace {

class FieldReader {
public:
    explicit FieldReader(std::vector<std::string>& problems) : problems_(problems) {}

    const Json* field(const Json& obj, const std::string& path, const char* key) {
        if (!obj.is_object()) {
            problems_.push_back(path + " is not an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            problems_.push_back(path + "." + key + " is missing");
            return nullptr;
        }
        return &*it;
    }

    std::string string(const Json& obj, const std::string& path, const char* key) {
        const Json* v = field(obj, path, key);
        if (!v) return {};
        if (!v->is_string()) {
            problems_.push_back(path + "." + key + " is not a string");
            return {};
        }
        return v->get<std::string>();
    }

    void problem(std::string p) { problems_.push_back(std::move(p)); }

private:
    std::vector<std::string>& problems_;
};

ParamSpec param_from_json(const Json& j, const std::string& path, FieldReader& r) {
    ParamSpec p;
    p.name = r.string(j, path, "name");
    const std::string kind = r.string(j, path, "kind");
    if (auto k = param_kind_from_string(kind)) {
        p.kind = *k;
    } else if (!kind.empty()) {
        r.problem(path + ".kind \"" + kind + "\" is not one of string|number|boolean|enum");
    }
    if (const Json* req = r.field(j, path, "required")) {
        if (req->is_boolean()) {
            p.required = req->get<bool>();
        } else {
            r.problem(path + ".required is not a boolean");
        }
    }
    if (j.is_object() && j.contains("description")) {
        if (j["description"].is_string()) {
            p.description = j["description"].get<std::string>();
        } else {
            r.problem(path + ".description is not a string");
        }
    }
    if (j.is_object() && j.contains("enum")) {
        const Json& values = j["enum"];
        if (!values.is_array()) {
            r.problem(path + ".enum is not an array");
        } else {
            for (const auto& v : values) {
                if (v.is_string()) {
                    p.allowed.push_back(v.get<std::string>());
                } else {
                    r.problem(path + ".enum contains a non-string value");
                }
            }
        }
    }
    return p;
}

ToolSpec tool_from_json(const Json& j, const std::string& path, FieldReader& r) {
    ToolSpec t;
    t.name = r.string(j, path, "name");
    t.description = r.string(j, path, "description");
    if (const Json* params = r.field(j, path, "parameters")) {
        if (!params->is_array()) {
            r.problem(path + ".parameters is not an array");
        } else {
            for (std::size_t i = 0; i < params->size(); ++i) {
                t.parameters.push_back(
                    param_from_json((*params)[i], path + ".parameters[" + std::to_string(i) + "]", r));
            }
        }
    }
    return t;
}

}  // namespace

ToolSpec tool_spec_from_json(const Json& j, const std::string& path) {
    std::vector<std::string> problems;
    FieldReader r(problems);
    ToolSpec t = tool_from_json(j, path, r);
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return t;
}

TaskSpec task_from_json(const Json& j) {
    std::vector<std::string> problems;
    FieldReader r(problems);
    TaskSpec task;
    task.id = r.string(j, "task", "id");
    task.description = r.string(j, "task", "description");
    if (const Json* tools = r.field(j, "task", "tools")) {
        if (!tools->is_array()) {
            r.problem("task.tools is not an array");
        } else {
            for (std::size_t i = 0; i < tools->size(); ++i) {
                task.tools.push_back(tool_from_json((*tools)[i], "task.tools[" + std::to_string(i) + "]", r));
            }
        }
    }
    if (const Json* check = r.field(j, "task", "success_check")) {
        const std::string kind = r.string(*check, "task.success_check", "kind");
        auto pk = predicate_kind_from_string(kind);
        if (!pk && !kind.empty()) {
            r.problem("task.success_check.kind \"" + kind + "\" is unknown");
        }
        const Json* payload = r.field(*check, "task.success_check", "payload");
        if (pk) {
            task.success_check.kind = *pk;
            if (payload && !payload->is_array()) {
                r.problem("task.success_check.payload is not an array");
            } else if (payload) {
                for (std::size_t i = 0; i < payload->size(); ++i) {
                    const Json& item = (*payload)[i];
                    const std::string where = "task.success_check.payload[" + std::to_string(i) + "]";
                    if (*pk == PredicateKind::ExpectedCalls) {
                        ExpectedCall call;
                        call.function = r.string(item, where, "function");
                        if (item.is_object() && item.contains("parameters")) {
                            call.parameters = item["parameters"];
                        }
                        task.success_check.expected_calls.push_back(std::move(call));
                    } else if (*pk == PredicateKind::AnswerContains) {
                        if (item.is_string()) {
                            task.success_check.required_substrings.push_back(item.get<std::string>());
                        } else {
                            r.problem(where + " is not a string");
                        }
                    } else {
                        r.problem(where + " is not allowed for AllNodesSucceeded");
                    }
                }
            }
        }
    }
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return task;
}

RunConfig config_from_json(const Json& j, RunConfig base) {
    if (!j.is_object()) throw SchemaError({"config is not an object"});
    std::vector<std::string> problems;
    auto read_int = [&](const char* key, int& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer()) {
            problems.push_back(std::string("config.") + key + " is not an integer");
            return;
        }
        out = j[key].get<int>();
    };
    read_int("theta_p", base.thresholds.theta_p);
    read_int("theta_t", base.thresholds.theta_t);
    read_int("theta_a", base.thresholds.theta_a);
    read_int("max_rounds", base.max_rounds);
    read_int("revision_cap", base.revision_cap);
    read_int("subtask_retry_cap", base.subtask_retry_cap);
    read_int("parse_retry_cap", base.parse_retry_cap);
    if (j.contains("model")) {
        if (j["model"].is_string()) {
            base.model = j["model"].get<std::string>();
        } else {
            problems.push_back("config.model is not a string");
        }
    }
    if (j.contains("temperature")) {
        if (j["temperature"].is_number()) {
            base.temperature = j["temperature"].get<double>();
        } else {
            problems.push_back("config.temperature is not a number");
        }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        static const std::set<std::string> known = {
            "theta_p", "theta_t", "theta_a", "max_rounds", "revision_cap",
            "subtask_retry_cap", "parse_retry_cap", "model", "temperature"};
        if (!known.count(it.key())) problems.push_back("config." + it.key() + " is not a known field");
    }
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return base;
}

std::string serialize_task(const TaskSpec& task) {
    return to_json(task).dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Json read_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw MalformedJson(e.byte, path + ": " + e.what());
    }
}

TaskSpec load_task_file(const std::string& path) {
    return task_from_json(read_json_file(path));
}

}  // namespace mirror
