#include "mirror/trace.hpp"

#include "mirror/prompt.hpp"

#include <sstream>

namespace mirror {

namespace {
constexpr std::pair<EventKind, std::string_view> kEventNames[] = {
    {EventKind::RoundStart, "round_start"}, {EventKind::AgentCall, "agent_call"},
    {EventKind::AgentOutput, "agent_output"}, {EventKind::Execute, "execute"},
    {EventKind::StmRecord, "stm_record"},   {EventKind::StmReset, "stm_reset"},
    {EventKind::LtmAppend, "ltm_append"},   {EventKind::LtmReset, "ltm_reset"},
    {EventKind::RoundEnd, "round_end"},     {EventKind::RunEnd, "run_end"},
};
}  // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kEventNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kEventNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

Json to_json(const TraceEvent& e) {
    Json j;
    j["seq"] = e.seq;
    j["task_id"] = e.task_id;
    j["round"] = e.round;
    j["event"] = to_string(e.kind);
    for (const auto& [key, value] : e.data.items()) j[key] = value;
    return j;
}

TraceEvent trace_event_from_json(const Json& j) {
    TraceEvent e;
    try {
        e.seq = j.at("seq").get<std::int64_t>();
        e.task_id = j.at("task_id").get<std::string>();
        e.round = j.at("round").get<int>();
        const auto name = j.at("event").get<std::string>();
        auto kind = event_kind_from_string(name);
        if (!kind) throw SchemaError({"unknown event kind \"" + name + "\""});
        e.kind = *kind;
    } catch (const Json::exception& ex) {
        throw SchemaError({std::string("trace event: ") + ex.what()});
    }
    for (const auto& [key, value] : j.items()) {
        if (key != "seq" && key != "task_id" && key != "round" && key != "event") e.data[key] = value;
    }
    return e;
}

const TraceEvent& EventTrace::emit(EventKind kind, int round, Json data) {
    TraceEvent e;
    e.seq = static_cast<std::int64_t>(events_.size()) + 1;
    e.task_id = task_id_;
    e.round = round;
    e.kind = kind;
    e.data = std::move(data);
    events_.push_back(std::move(e));
    return events_.back();
}

std::vector<const TraceEvent*> EventTrace::of_kind(EventKind kind) const {
    std::vector<const TraceEvent*> out;
    for (const auto& e : events_) {
        if (e.kind == kind) out.push_back(&e);
    }
    return out;
}

std::string EventTrace::to_jsonl() const {
    std::string out;
    for (const auto& e : events_) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

std::string EventTrace::digest() const { return sha256_hex(to_jsonl()); }

EventTrace EventTrace::from_jsonl(std::string_view text) {
    EventTrace trace;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& ex) {
            throw MalformedJson(ex.byte, ex.what());
        }
        TraceEvent e = trace_event_from_json(j);
        if (trace.task_id_.empty()) trace.task_id_ = e.task_id;
        trace.events_.push_back(std::move(e));
    }
    return trace;
}

}  // namespace mirror
