#pragma once

#include "mirror/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mirror {

enum class EventKind {
    RoundStart,
    AgentCall,
    AgentOutput,
    Execute,
    StmRecord,
    StmReset,
    LtmAppend,
    LtmReset,
    RoundEnd,
    RunEnd,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct TraceEvent {
    std::int64_t seq = 0;
    std::string task_id;
    int round = 0;
    EventKind kind = EventKind::RoundStart;
    Json data = Json::object();  // kind-specific fields
};

// {"seq","task_id","round","event", ...data}
Json to_json(const TraceEvent& e);
TraceEvent trace_event_from_json(const Json& j);

// Ordered event log of one run. Sequence numbers start at 1 and have no gaps.
class EventTrace {
public:
    explicit EventTrace(std::string task_id = {}) : task_id_(std::move(task_id)) {}

    const TraceEvent& emit(EventKind kind, int round, Json data = Json::object());

    const std::vector<TraceEvent>& events() const noexcept { return events_; }
    const std::string& task_id() const noexcept { return task_id_; }

    std::vector<const TraceEvent*> of_kind(EventKind kind) const;

    std::string to_jsonl() const;
    std::string digest() const;

    static EventTrace from_jsonl(std::string_view text);

private:
    std::string task_id_;
    std::vector<TraceEvent> events_;
};

}  // namespace mirror
