#include "mirror/prompt.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <optional>
#include <set>
#include <sstream>

#ifndef MIRROR_PROMPTS_DIR
#define MIRROR_PROMPTS_DIR "prompts"
#endif

namespace mirror {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::InvalidArgument, "sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string_view to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::PlannerSystem: return "PlannerSystem";
        case PromptKind::PlannerUser: return "PlannerUser";
        case PromptKind::ToolSystem: return "ToolSystem";
        case PromptKind::ToolUser: return "ToolUser";
        case PromptKind::AnswerSystem: return "AnswerSystem";
        case PromptKind::AnswerUser: return "AnswerUser";
        case PromptKind::LTMEntry: return "LTMEntry";
        case PromptKind::STMEntry: return "STMEntry";
    }
    return "PlannerSystem";
}

std::string prompt_file_name(PromptKind kind) {
    return std::string(to_string(kind)) + ".txt";
}

std::string default_prompts_dir() { return MIRROR_PROMPTS_DIR; }

namespace {

bool is_slot_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_slot_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// Length of a slot name starting at pos, or 0.
std::size_t slot_name_length(std::string_view s, std::size_t pos) {
    if (pos >= s.size() || !is_slot_start(s[pos])) return 0;
    std::size_t end = pos + 1;
    while (end < s.size() && is_slot_char(s[end])) ++end;
    return end - pos;
}

}  // namespace

PromptTemplate::PromptTemplate(PromptKind kind, std::string body) : kind_(kind), body_(std::move(body)) {
    const std::string_view s = body_;
    std::string literal;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '{') {
            // {{name}}
            if (i + 1 < s.size() && s[i + 1] == '{') {
                const std::size_t n = slot_name_length(s, i + 2);
                if (n > 0 && s.substr(i + 2 + n, 2) == "}}") {
                    segments_.push_back({false, std::move(literal)});
                    literal.clear();
                    std::string name(s.substr(i + 2, n));
                    segments_.push_back({true, name});
                    placeholders_.push_back(std::move(name));
                    i += n + 4;
                    continue;
                }
            }
            // {name}
            const std::size_t n = slot_name_length(s, i + 1);
            if (n > 0 && i + 1 + n < s.size() && s[i + 1 + n] == '}') {
                segments_.push_back({false, std::move(literal)});
                literal.clear();
                std::string name(s.substr(i + 1, n));
                segments_.push_back({true, name});
                placeholders_.push_back(std::move(name));
                i += n + 2;
                continue;
            }
        }
        literal.push_back(s[i]);
        ++i;
    }
    segments_.push_back({false, std::move(literal)});
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& slots) const {
    for (const auto& name : placeholders_) {
        if (!slots.count(name)) throw MissingSlot(name);
    }
    std::string out;
    out.reserve(body_.size());
    for (const auto& seg : segments_) {
        out += seg.is_slot ? slots.at(seg.text) : seg.text;
    }
    return out;
}

PromptKit PromptKit::load(const std::string& dir) {
    PromptKit kit;
    kit.dir_ = dir;
    for (PromptKind kind : kAllPromptKinds) {
        kit.templates_.emplace_back(kind, read_text_file(dir + "/" + prompt_file_name(kind)));
    }
    return kit;
}

const PromptTemplate& PromptKit::get(PromptKind kind) const {
    return templates_.at(static_cast<std::size_t>(kind));
}

std::vector<std::string> PromptKit::verify_manifest(const std::string& manifest_path) const {
    std::map<std::string, std::string> expected;
    std::istringstream in(read_text_file(manifest_path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string hash, file;
        fields >> hash >> file;
        if (!file.empty() && file.front() == '*') file.erase(0, 1);
        expected[file] = hash;
    }
    std::vector<std::string> problems;
    for (const auto& t : templates_) {
        const std::string file = prompt_file_name(t.kind());
        auto it = expected.find(file);
        if (it == expected.end()) {
            problems.push_back(file + ": no manifest entry");
            continue;
        }
        const std::string actual = sha256_hex(t.body());
        if (actual != it->second) {
            problems.push_back(file + ": sha256 " + actual + " != manifest " + it->second);
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------

Json extract_json(std::string_view raw) {
    std::size_t pos = raw.find('{');
    if (pos == std::string_view::npos) {
        throw Error(ErrorCode::NoJsonFound, "NoJsonFound: no '{' in model output");
    }
    std::optional<MalformedJson> first_error;
    while (pos != std::string_view::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t end = std::string_view::npos;
        for (std::size_t i = pos; i < raw.size(); ++i) {
            const char c = raw[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    end = i + 1;
                    break;
                }
            }
        }
        if (end == std::string_view::npos) {
            if (!first_error) first_error.emplace(raw.size(), "unbalanced braces starting at byte " + std::to_string(pos));
            pos = raw.find('{', pos + 1);
            continue;
        }
        const std::string_view candidate = raw.substr(pos, end - pos);
        try {
            return Json::parse(candidate);
        } catch (const Json::parse_error& e) {
            if (!first_error) {
                const std::size_t local = e.byte > 0 ? e.byte - 1 : 0;
                first_error.emplace(pos + local, e.what());
            }
        }
        pos = raw.find('{', end);
    }
    throw *first_error;
}

std::string_view to_string(OutputKind kind) {
    switch (kind) {
        case OutputKind::PlannerOut: return "PlannerOut";
        case OutputKind::ToolOut: return "ToolOut";
        case OutputKind::AnswerOut: return "AnswerOut";
    }
    return "PlannerOut";
}

namespace {

bool names_tool(const std::vector<ToolSpec>& tools, const std::string& name) {
    for (const auto& t : tools) {
        if (t.name == name) return true;
    }
    return false;
}

const Json* require(const Json& obj, const char* key, const std::string& path, std::vector<std::string>& problems) {
    if (!obj.is_object()) {
        problems.push_back(path + " is not an object");
        return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        problems.push_back((path.empty() ? std::string() : path + ".") + key + " is missing");
        return nullptr;
    }
    return &*it;
}

std::string require_string(const Json& obj, const char* key, const std::string& path,
                           std::vector<std::string>& problems, bool non_empty = true) {
    const Json* v = require(obj, key, path, problems);
    const std::string where = (path.empty() ? std::string() : path + ".") + key;
    if (!v) return {};
    if (!v->is_string()) {
        problems.push_back(where + " is not a string");
        return {};
    }
    std::string s = v->get<std::string>();
    if (non_empty && s.empty()) problems.push_back(where + " is empty");
    return s;
}

std::optional<IntraReflection> read_reflection(const Json& root, std::vector<std::string>& problems) {
    const Json* r = require(root, "intra_reflection", "", problems);
    if (!r) return std::nullopt;
    if (!r->is_object()) {
        problems.push_back("intra_reflection is not an object");
        return std::nullopt;
    }
    const std::size_t before = problems.size();
    std::string evaluation = require_string(*r, "evaluation", "intra_reflection", problems);
    double score = 0;
    if (const Json* s = require(*r, "score", "intra_reflection", problems)) {
        if (s->is_number()) {
            score = s->get<double>();
        } else {
            problems.push_back("intra_reflection.score is not a number");
        }
    }
    if (problems.size() != before) return std::nullopt;
    return IntraReflection::from_model_score(std::move(evaluation), score);
}

}  // namespace

Plan validate_plan(const Json& value, const std::vector<ToolSpec>* tools) {
    std::vector<std::string> problems;
    std::vector<PlanNode> nodes;
    if (!value.is_object()) throw SchemaError({"output is not a JSON object"});
    if (const Json* arr = require(value, "nodes", "", problems)) {
        if (!arr->is_array()) {
            problems.push_back("nodes is not an array");
        } else {
            std::set<std::string> ids;
            for (std::size_t i = 0; i < arr->size(); ++i) {
                const Json& n = (*arr)[i];
                const std::string path = "nodes[" + std::to_string(i) + "]";
                PlanNode node;
                node.id = require_string(n, "id", path, problems);
                if (const Json* st = require(n, "status", path, problems)) {
                    if (!st->is_number_integer() || st->get<long long>() != 0) {
                        problems.push_back(path + ".status must be 0 (Pending)");
                    }
                }
                node.subtask = require_string(n, "subtask", path, problems);
                node.function = require_string(n, "function", path, problems);
                if (!node.id.empty() && !ids.insert(node.id).second) {
                    problems.push_back(path + ".id \"" + node.id + "\" is duplicated");
                }
                if (tools && !node.function.empty() && !names_tool(*tools, node.function)) {
                    problems.push_back(path + ".function \"" + node.function + "\" is not an available function");
                }
                nodes.push_back(std::move(node));
            }
        }
    }
    auto reflection = read_reflection(value, problems);
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return Plan{std::move(nodes), std::move(*reflection)};
}

ToolCall validate_tool_call(const Json& value, const std::vector<ToolSpec>* tools) {
    std::vector<std::string> problems;
    if (!value.is_object()) throw SchemaError({"output is not a JSON object"});
    std::string function = require_string(value, "function", "", problems);
    Json params = Json::object();
    if (const Json* p = require(value, "parameters", "", problems)) {
        if (p->is_object()) {
            params = *p;
        } else {
            problems.push_back("parameters is not an object");
        }
    }
    if (tools && !function.empty() && !names_tool(*tools, function)) {
        problems.push_back("function \"" + function + "\" is not an available function");
    }
    auto reflection = read_reflection(value, problems);
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return ToolCall{std::move(function), std::move(params), std::move(*reflection)};
}

FinalAnswer validate_answer(const Json& value) {
    std::vector<std::string> problems;
    if (!value.is_object()) throw SchemaError({"output is not a JSON object"});
    std::string answer = require_string(value, "answer", "", problems);
    auto reflection = read_reflection(value, problems);
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return FinalAnswer{std::move(answer), std::move(*reflection)};
}

AgentOutput validate_output(const Json& value, OutputKind kind, const std::vector<ToolSpec>* tools) {
    switch (kind) {
        case OutputKind::PlannerOut: return validate_plan(value, tools);
        case OutputKind::ToolOut: return validate_tool_call(value, tools);
        case OutputKind::AnswerOut: return validate_answer(value);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown output kind");
}

}  // namespace mirror
