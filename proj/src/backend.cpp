#include "mirror/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace mirror {

Json to_json(const ChatRequest& r) {
    Json j;
    j["system"] = r.system;
    j["user"] = r.user;
    j["model"] = r.model;
    j["temperature"] = r.temperature;
    return j;
}

std::string canonical_request(const ChatRequest& r) { return to_json(r).dump(); }

Json to_json(const ChatResponse& r) {
    Json j;
    j["text"] = r.text;
    j["prompt_tokens"] = r.prompt_tokens;
    j["completion_tokens"] = r.completion_tokens;
    return j;
}

ChatResponse chat_response_from_json(const Json& j) {
    std::vector<std::string> problems;
    ChatResponse r;
    if (!j.is_object()) throw SchemaError({"response is not an object"});
    if (j.contains("text") && j["text"].is_string()) {
        r.text = j["text"].get<std::string>();
    } else {
        problems.push_back("response.text is missing or not a string");
    }
    auto read_count = [&](const char* key, std::int64_t& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 0) {
            problems.push_back(std::string("response.") + key + " is not a non-negative integer");
            return;
        }
        out = j[key].get<std::int64_t>();
    };
    read_count("prompt_tokens", r.prompt_tokens);
    read_count("completion_tokens", r.completion_tokens);
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return r;
}

ChatResponse ChatBackend::complete(const ChatRequest& request) {
    if (request.system.empty() || request.user.empty()) {
        throw Error(ErrorCode::InvalidArgument, "chat request needs non-empty system and user prompts");
    }
    ChatResponse response = do_complete(request);
    std::lock_guard lock(totals_mutex_);
    totals_.prompt_total += response.prompt_tokens;
    totals_.completion_total += response.completion_tokens;
    totals_.call_count += 1;
    return response;
}

TokenTotals ChatBackend::token_totals() const {
    std::lock_guard lock(totals_mutex_);
    return totals_;
}

void ChatBackend::reset_totals() {
    std::lock_guard lock(totals_mutex_);
    totals_ = {};
}

// ---------------------------------------------------------------------------

std::vector<ScriptStep> ScriptedBackend::steps_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("steps") || !j["steps"].is_array()) {
        throw SchemaError({"script.steps is missing or not an array"});
    }
    std::vector<ScriptStep> steps;
    std::vector<std::string> problems;
    const Json& arr = j["steps"];
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const Json& s = arr[i];
        const std::string where = "script.steps[" + std::to_string(i) + "]";
        if (!s.is_object()) {
            problems.push_back(where + " is not an object");
            continue;
        }
        ScriptStep step;
        if (s.contains("hint") && s["hint"].is_string()) step.hint = s["hint"].get<std::string>();
        Json response = Json::object();
        if (s.contains("json")) {
            response["text"] = s["json"].dump();
        } else if (s.contains("text")) {
            response["text"] = s["text"];
        }
        for (const char* key : {"prompt_tokens", "completion_tokens"}) {
            if (s.contains(key)) response[key] = s[key];
        }
        try {
            step.response = chat_response_from_json(response);
        } catch (const SchemaError& e) {
            for (const auto& p : e.problems()) problems.push_back(where + ": " + p);
            continue;
        }
        steps.push_back(std::move(step));
    }
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return steps;
}

ScriptedBackend ScriptedBackend::from_json(const Json& j) { return ScriptedBackend(steps_from_json(j)); }

ScriptedBackend ScriptedBackend::load(const std::string& path) { return from_json(read_json_file(path)); }

ChatResponse ScriptedBackend::do_complete(const ChatRequest&) {
    if (cursor_ >= steps_.size()) {
        throw Error(ErrorCode::ScriptExhausted,
                    "ScriptExhausted: call " + std::to_string(cursor_ + 1) + " but the script has " +
                        std::to_string(steps_.size()) + " steps");
    }
    return steps_[cursor_++].response;
}

// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(Options options) : options_(std::move(options)) {
    const std::string& url = options_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "base url \"" + url + "\" has no scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    if (options_.max_attempts < 1) options_.max_attempts = 1;
}

HttpBackend::Options HttpBackend::options_from_env() {
    Options o;
    const char* base = std::getenv("MIRROR_API_BASE");
    if (!base || !*base) throw Error(ErrorCode::InvalidArgument, "MIRROR_API_BASE is not set");
    o.base_url = base;
    if (const char* key = std::getenv("MIRROR_API_KEY")) o.api_key = key;
    return o;
}

Json HttpBackend::wire_body(const ChatRequest& request) {
    Json body;
    body["model"] = request.model;
    body["messages"] = Json::array({
        Json{{"role", "system"}, {"content", request.system}},
        Json{{"role", "user"}, {"content", request.user}},
    });
    body["temperature"] = request.temperature;
    return body;
}

ChatResponse HttpBackend::do_complete(const ChatRequest& request) {
    const std::string body = wire_body(request).dump();
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    std::string last_failure;
    auto backoff = options_.initial_backoff;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        client.set_write_timeout(options_.timeout);
        auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");

        bool retryable = false;
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            retryable = true;
        } else if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            retryable = true;
        } else if (res->status < 200 || res->status >= 300) {
            throw ApiError(res->status, res->body);
        } else {
            Json j;
            try {
                j = Json::parse(res->body);
            } catch (const Json::parse_error& e) {
                throw Error(ErrorCode::ApiError, std::string("ApiError: response body is not JSON: ") + e.what());
            }
            ChatResponse out;
            try {
                const Json& content = j.at("choices").at(0).at("message").at("content");
                out.text = content.is_string() ? content.get<std::string>() : content.dump();
                const Json& usage = j.at("usage");
                out.prompt_tokens = usage.at("prompt_tokens").get<std::int64_t>();
                out.completion_tokens = usage.at("completion_tokens").get<std::int64_t>();
            } catch (const Json::exception& e) {
                throw Error(ErrorCode::ApiError, std::string("ApiError: unexpected response shape: ") + e.what());
            }
            return out;
        }

        if (retryable && attempt < options_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff = std::min(backoff * 2, options_.max_backoff);
        }
    }
    throw Error(ErrorCode::TransportError, "TransportError after " + std::to_string(options_.max_attempts) +
                                               " attempts: " + last_failure);
}

// ---------------------------------------------------------------------------

ChatResponse ForwardingBackend::do_complete(const ChatRequest& request) { return inner_.complete(request); }

RecordingBackend::RecordingBackend(ChatBackend& inner, const std::string& path)
    : ForwardingBackend(inner), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot open trace file " + path);
}

ChatResponse RecordingBackend::do_complete(const ChatRequest& request) {
    ChatResponse response = ForwardingBackend::do_complete(request);
    Json line;
    line["request"] = to_json(request);
    line["response"] = to_json(response);
    std::lock_guard lock(file_mutex_);
    out_ << line.dump() << '\n';
    out_.flush();
    return response;
}

std::vector<TraceEntry> load_backend_trace(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::vector<TraceEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw MalformedJson(e.byte, where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("request") || !j.contains("response")) {
            throw SchemaError({where + ": expected {request, response}"});
        }
        const Json& rq = j["request"];
        TraceEntry entry;
        try {
            entry.request.system = rq.at("system").get<std::string>();
            entry.request.user = rq.at("user").get<std::string>();
            entry.request.model = rq.at("model").get<std::string>();
            entry.request.temperature = rq.at("temperature").get<double>();
        } catch (const Json::exception& e) {
            throw SchemaError({where + ": request: " + e.what()});
        }
        entry.response = chat_response_from_json(j["response"]);
        entries.push_back(std::move(entry));
    }
    return entries;
}

ReplayBackend::ReplayBackend(const std::string& path) : entries_(load_backend_trace(path)) {}

ChatResponse ReplayBackend::do_complete(const ChatRequest& request) {
    if (cursor_ >= entries_.size()) {
        throw Error(ErrorCode::ScriptExhausted,
                    "replay trace exhausted after " + std::to_string(entries_.size()) + " calls");
    }
    const std::string expected = canonical_request(entries_[cursor_].request);
    const std::string actual = canonical_request(request);
    if (expected != actual) {
        const auto [e, a] = std::mismatch(expected.begin(), expected.end(), actual.begin(), actual.end());
        throw ReplayMismatch(cursor_ + 1, static_cast<std::size_t>(e - expected.begin()));
    }
    return entries_[cursor_++].response;
}

}  // namespace mirror
