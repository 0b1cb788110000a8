#include "mirror/sandbox.hpp"

#include <algorithm>
#include <set>

namespace mirror {

bool ParamMatcher::matches(const Json* value) const {
    switch (op) {
        case Op::Present: return (value != nullptr) == operand.get<bool>();
        case Op::Equals: return value && *value == operand;
        case Op::Contains:
            return value && value->is_string() &&
                   value->get<std::string>().find(operand.get<std::string>()) != std::string::npos;
        case Op::OneOf:
            return value && std::find(operand.begin(), operand.end(), *value) != operand.end();
    }
    return false;
}

bool CallIndexMatcher::matches(int call_index) const {
    switch (op) {
        case Op::Exactly: return call_index == n;
        case Op::AtMost: return call_index <= n;
        case Op::AtLeast: return call_index >= n;
    }
    return false;
}

ToolRegistry::ToolRegistry(std::vector<SandboxTool> tools) : tools_(std::move(tools)) {
    std::set<std::string> names;
    for (const auto& t : tools_) {
        if (!names.insert(t.spec.name).second) {
            throw SchemaError({"duplicate sandbox tool \"" + t.spec.name + "\""});
        }
    }
}

namespace {

std::optional<ExecutionResult> result_from_json(const Json& j, const std::string& path,
                                                std::vector<std::string>& problems) {
    if (!j.is_object()) {
        problems.push_back(path + " is not an object");
        return std::nullopt;
    }
    ExecutionResult r;
    if (!j.contains("status") || !j["status"].is_string()) {
        problems.push_back(path + ".status is missing or not a string");
        return std::nullopt;
    }
    auto status = exec_status_from_string(j["status"].get<std::string>());
    if (!status) {
        problems.push_back(path + ".status \"" + j["status"].get<std::string>() + "\" is unknown");
        return std::nullopt;
    }
    r.status = *status;
    if (j.contains("payload")) {
        if (!j["payload"].is_string()) {
            problems.push_back(path + ".payload is not a string");
            return std::nullopt;
        }
        r.payload = j["payload"].get<std::string>();
    }
    if (r.status == ExecStatus::Ok && r.payload.empty()) {
        problems.push_back(path + ".payload must be non-empty for status Ok");
        return std::nullopt;
    }
    return r;
}

std::optional<ParamMatcher> matcher_from_json(const Json& j, const std::string& path,
                                              std::vector<std::string>& problems) {
    ParamMatcher m;
    if (!j.is_object()) {
        m.op = ParamMatcher::Op::Equals;
        m.operand = j;
        return m;
    }
    if (j.size() != 1) {
        problems.push_back(path + " must have exactly one of equals|contains|present|one_of");
        return std::nullopt;
    }
    const std::string key = j.begin().key();
    const Json& value = j.begin().value();
    if (key == "equals") {
        m.op = ParamMatcher::Op::Equals;
    } else if (key == "contains" && value.is_string()) {
        m.op = ParamMatcher::Op::Contains;
    } else if (key == "present" && value.is_boolean()) {
        m.op = ParamMatcher::Op::Present;
    } else if (key == "one_of" && value.is_array()) {
        m.op = ParamMatcher::Op::OneOf;
    } else {
        problems.push_back(path + ": bad matcher \"" + key + "\"");
        return std::nullopt;
    }
    m.operand = value;
    return m;
}

std::optional<CallIndexMatcher> call_index_from_json(const Json& j, const std::string& path,
                                                     std::vector<std::string>& problems) {
    CallIndexMatcher m;
    const Json* n = &j;
    if (j.is_object() && j.size() == 1 && j.contains("at_most")) {
        m.op = CallIndexMatcher::Op::AtMost;
        n = &j["at_most"];
    } else if (j.is_object() && j.size() == 1 && j.contains("at_least")) {
        m.op = CallIndexMatcher::Op::AtLeast;
        n = &j["at_least"];
    }
    if (!n->is_number_integer() || n->get<int>() < 1) {
        problems.push_back(path + " must be a positive integer, {\"at_most\": n} or {\"at_least\": n}");
        return std::nullopt;
    }
    m.n = n->get<int>();
    return m;
}

}  // namespace

ToolRegistry ToolRegistry::from_json(const Json& j) {
    if (!j.is_object() || !j.contains("tools") || !j["tools"].is_array()) {
        throw SchemaError({"suite.tools is missing or not an array"});
    }
    std::vector<std::string> problems;
    std::vector<SandboxTool> tools;
    const Json& arr = j["tools"];
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "suite.tools[" + std::to_string(i) + "]";
        const Json& t = arr[i];
        if (!t.is_object() || !t.contains("spec")) {
            problems.push_back(path + ".spec is missing");
            continue;
        }
        SandboxTool tool;
        try {
            tool.spec = tool_spec_from_json(t["spec"], path + ".spec");
        } catch (const SchemaError& e) {
            problems.insert(problems.end(), e.problems().begin(), e.problems().end());
            continue;
        }
        if (t.contains("rules")) {
            if (!t["rules"].is_array()) {
                problems.push_back(path + ".rules is not an array");
            } else {
                const Json& rules = t["rules"];
                for (std::size_t r = 0; r < rules.size(); ++r) {
                    const std::string rpath = path + ".rules[" + std::to_string(r) + "]";
                    const Json& rule_json = rules[r];
                    BehaviorRule rule;
                    bool ok = true;
                    if (!rule_json.is_object() || !rule_json.contains("result")) {
                        problems.push_back(rpath + ".result is missing");
                        continue;
                    }
                    if (rule_json.contains("when")) {
                        const Json& when = rule_json["when"];
                        if (!when.is_object()) {
                            problems.push_back(rpath + ".when is not an object");
                            ok = false;
                        } else {
                            for (const auto& [key, value] : when.items()) {
                                if (key == "params") {
                                    if (!value.is_object()) {
                                        problems.push_back(rpath + ".when.params is not an object");
                                        ok = false;
                                        continue;
                                    }
                                    for (const auto& [pname, pmatch] : value.items()) {
                                        const std::string ppath = rpath + ".when.params." + pname;
                                        if (!tool.spec.find_param(pname)) {
                                            problems.push_back(ppath + " references undeclared parameter \"" +
                                                               pname + "\"");
                                            ok = false;
                                            continue;
                                        }
                                        if (auto m = matcher_from_json(pmatch, ppath, problems)) {
                                            rule.params.emplace(pname, std::move(*m));
                                        } else {
                                            ok = false;
                                        }
                                    }
                                } else if (key == "call_index") {
                                    rule.call_index = call_index_from_json(value, rpath + ".when.call_index", problems);
                                    if (!rule.call_index) ok = false;
                                } else {
                                    problems.push_back(rpath + ".when." + key + " is not a known condition");
                                    ok = false;
                                }
                            }
                        }
                    }
                    auto result = result_from_json(rule_json["result"], rpath + ".result", problems);
                    if (!result) ok = false;
                    if (ok) {
                        rule.result = std::move(*result);
                        tool.rules.push_back(std::move(rule));
                    }
                }
            }
        }
        if (!t.contains("default")) {
            problems.push_back(path + ".default is missing");
            continue;
        }
        auto fallback = result_from_json(t["default"], path + ".default", problems);
        if (!fallback) continue;
        tool.fallback = std::move(*fallback);
        tools.push_back(std::move(tool));
    }
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return ToolRegistry(std::move(tools));
}

ToolRegistry ToolRegistry::load(const std::string& path) { return from_json(read_json_file(path)); }

const SandboxTool* ToolRegistry::find(std::string_view name) const {
    for (const auto& t : tools_) {
        if (t.spec.name == name) return &t;
    }
    return nullptr;
}

std::vector<ToolSpec> ToolRegistry::specs() const {
    std::vector<ToolSpec> out;
    out.reserve(tools_.size());
    for (const auto& t : tools_) out.push_back(t.spec);
    return out;
}

std::vector<std::string> check_parameters(const ToolSpec& spec, const Json& parameters) {
    std::vector<std::string> problems;
    if (!parameters.is_object()) {
        problems.push_back("parameters must be an object");
        return problems;
    }
    for (const auto& p : spec.parameters) {
        auto it = parameters.find(p.name);
        if (it == parameters.end()) {
            if (p.required) problems.push_back("missing required parameter \"" + p.name + "\"");
            continue;
        }
        const Json& v = *it;
        switch (p.kind) {
            case ParamKind::String:
                if (!v.is_string()) problems.push_back("parameter \"" + p.name + "\" must be a string");
                break;
            case ParamKind::Number:
                if (!v.is_number()) problems.push_back("parameter \"" + p.name + "\" must be a number");
                break;
            case ParamKind::Boolean:
                if (!v.is_boolean()) problems.push_back("parameter \"" + p.name + "\" must be a boolean");
                break;
            case ParamKind::Enum: {
                const bool allowed = v.is_string() && std::find(p.allowed.begin(), p.allowed.end(),
                                                                v.get<std::string>()) != p.allowed.end();
                if (!allowed) {
                    std::string list;
                    for (const auto& a : p.allowed) list += (list.empty() ? "" : ", ") + a;
                    problems.push_back("parameter \"" + p.name + "\" must be one of [" + list + "]");
                }
                break;
            }
        }
    }
    for (const auto& [key, value] : parameters.items()) {
        if (!spec.find_param(key)) problems.push_back("unknown parameter \"" + key + "\"");
    }
    return problems;
}

ExecutionResult SandboxSession::execute(const ToolCall& call) {
    const SandboxTool* tool = registry_->find(call.function);
    if (!tool) return {ExecStatus::ToolNotFound, "unknown tool \"" + call.function + "\""};

    const auto problems = check_parameters(tool->spec, call.parameters);
    if (!problems.empty()) {
        std::string msg;
        for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
        return {ExecStatus::InvalidParameters, msg};
    }

    const int call_index = ++counters_[call.function];
    for (const auto& rule : tool->rules) {
        if (rule.call_index && !rule.call_index->matches(call_index)) continue;
        const bool params_match = std::all_of(rule.params.begin(), rule.params.end(), [&](const auto& kv) {
            auto it = call.parameters.find(kv.first);
            return kv.second.matches(it == call.parameters.end() ? nullptr : &*it);
        });
        if (params_match) return rule.result;
    }
    return tool->fallback;
}

int SandboxSession::calls_made(const std::string& tool) const {
    auto it = counters_.find(tool);
    return it == counters_.end() ? 0 : it->second;
}

}  // namespace mirror
