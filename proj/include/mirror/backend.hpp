#pragma once

#include "mirror/core.hpp"

#include <chrono>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace mirror {

struct ChatRequest {
    std::string system;
    std::string user;
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
};

// Canonical serialization used for record/replay comparison.
Json to_json(const ChatRequest& r);
std::string canonical_request(const ChatRequest& r);

struct ChatResponse {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    bool operator==(const ChatResponse&) const = default;
};

Json to_json(const ChatResponse& r);
ChatResponse chat_response_from_json(const Json& j);

struct TokenTotals {
    std::int64_t prompt_total = 0;
    std::int64_t completion_total = 0;
    std::int64_t call_count = 0;

    std::int64_t total() const noexcept { return prompt_total + completion_total; }
    TokenTotals& operator+=(const TokenTotals& o) {
        prompt_total += o.prompt_total;
        completion_total += o.completion_total;
        call_count += o.call_count;
        return *this;
    }
    bool operator==(const TokenTotals&) const = default;
};

// Chat-completion interface. complete() validates the request, delegates to
// the implementation and updates the token counters under one lock, so a
// snapshot from token_totals() never sees half a call.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    ChatResponse complete(const ChatRequest& request);
    TokenTotals token_totals() const;
    void reset_totals();

protected:
    virtual ChatResponse do_complete(const ChatRequest& request) = 0;

private:
    mutable std::mutex totals_mutex_;
    TokenTotals totals_;
};

// ---------------------------------------------------------------------------

struct ScriptStep {
    std::string hint;  // label only; steps are consumed by order
    ChatResponse response;
};

// Serves pre-authored responses in order. Single consumer.
//
// Script file: {"steps":[{"hint": "...", "text": "...", "prompt_tokens": n,
// "completion_tokens": m}]}. A step may give "json" (any value, serialized
// compactly) instead of "text".
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptStep> steps) : steps_(std::move(steps)) {}

    static ScriptedBackend from_json(const Json& j);
    static ScriptedBackend load(const std::string& path);
    static std::vector<ScriptStep> steps_from_json(const Json& j);

    std::size_t cursor() const noexcept { return cursor_; }
    std::size_t remaining() const noexcept { return steps_.size() - cursor_; }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    std::vector<ScriptStep> steps_;
    std::size_t cursor_ = 0;
};

// OpenAI-compatible POST {base_url}/chat/completions. Connection failures,
// HTTP 429 and 5xx are retried with capped exponential backoff; once
// max_attempts are spent a TransportError is thrown. Other non-2xx statuses
// throw ApiError immediately. Safe for concurrent use.
class HttpBackend : public ChatBackend {
public:
    struct Options {
        std::string base_url;
        std::string api_key;
        int max_attempts = 3;
        std::chrono::milliseconds initial_backoff{250};
        std::chrono::milliseconds max_backoff{4000};
        std::chrono::seconds timeout{120};
    };

    explicit HttpBackend(Options options);

    // Reads MIRROR_API_BASE and MIRROR_API_KEY. Throws InvalidArgument if
    // MIRROR_API_BASE is unset.
    static Options options_from_env();

    const Options& options() const noexcept { return options_; }

    // Request body as sent on the wire.
    static Json wire_body(const ChatRequest& request);

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    Options options_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

// Forwards to another backend and keeps its own token totals, so runs that
// share one live backend can still be accounted separately.
class ForwardingBackend : public ChatBackend {
public:
    explicit ForwardingBackend(ChatBackend& inner) : inner_(inner) {}

protected:
    ChatResponse do_complete(const ChatRequest& request) override;
    ChatBackend& inner_;
};

// Appends one {"request", "response"} JSON line per call to a trace file.
// The file is truncated at construction.
class RecordingBackend : public ForwardingBackend {
public:
    RecordingBackend(ChatBackend& inner, const std::string& path);

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    std::mutex file_mutex_;
    std::ofstream out_;
};

struct TraceEntry {
    ChatRequest request;
    ChatResponse response;
};

std::vector<TraceEntry> load_backend_trace(const std::string& path);

// Serves a recorded trace without any network access. The trace is loaded
// and validated at construction; each request must equal the recorded one
// byte-for-byte or ReplayMismatch is thrown.
class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(const std::string& path);
    explicit ReplayBackend(std::vector<TraceEntry> entries) : entries_(std::move(entries)) {}

    std::size_t cursor() const noexcept { return cursor_; }
    std::size_t size() const noexcept { return entries_.size(); }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    std::vector<TraceEntry> entries_;
    std::size_t cursor_ = 0;
};

}  // namespace mirror
