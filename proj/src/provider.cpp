#include "metatune/provider.hpp"

#include <chrono>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "metatune/digest.hpp"
#include "metatune/errors.hpp"

namespace metatune {

using nlohmann::json;

// ============================================================================
// Enum plumbing
// ============================================================================

std::string to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw ValidationError("unknown chat role: " + s);
}

std::string to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::openai_compatible: return "openai-compatible";
        case BackendKind::gemini: return "gemini";
        case BackendKind::scripted: return "scripted";
    }
    return "scripted";
}

BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "openai-compatible") return BackendKind::openai_compatible;
    if (s == "gemini") return BackendKind::gemini;
    if (s == "scripted") return BackendKind::scripted;
    throw ValidationError("unknown backend kind: " + s);
}

void validate_provider_config(const ProviderConfig& config) {
    if (config.temperature < 0) throw ValidationError("temperature must be >= 0");
    if (config.max_output_tokens <= 0) throw ValidationError("max_output_tokens must be > 0");
    if (config.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
    if (config.backend == BackendKind::scripted) {
        if (config.script_path.empty()) {
            throw ValidationError("scripted backend requires script_path");
        }
        if (!config.endpoint.empty() || !config.credential_ref.empty()) {
            throw ValidationError("scripted backend takes a script path, not endpoint/credential");
        }
    } else {
        if (config.endpoint.empty()) throw ValidationError("live backend requires endpoint");
        if (config.model_name.empty()) throw ValidationError("live backend requires model_name");
    }
}

// ============================================================================
// Request identity
// ============================================================================

std::string canonical_request_json(const ProviderConfig& config,
                                   const std::vector<ChatMessage>& messages) {
    json j;
    j["backend"] = to_string(config.backend);
    j["max_output_tokens"] = config.max_output_tokens;
    json msgs = json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"content", m.content}, {"role", to_string(m.role)}});
    }
    j["messages"] = msgs;
    j["model_name"] = config.model_name;
    j["temperature"] = config.temperature;
    return j.dump();
}

std::string request_digest(const ProviderConfig& config, const std::vector<ChatMessage>& messages) {
    return sha256_hex(canonical_request_json(config, messages));
}

// ============================================================================
// Scripted transport
// ============================================================================

ScriptedTransport::ScriptedTransport(std::unordered_map<std::string, TransportReply> entries)
    : entries_(std::move(entries)) {}

std::unique_ptr<ScriptedTransport> ScriptedTransport::from_archive(const std::filesystem::path& path) {
    return std::make_unique<ScriptedTransport>(load_transcript(path));
}

TransportReply ScriptedTransport::send(const ProviderConfig& config,
                                       const std::vector<ChatMessage>& messages) {
    const std::string digest = request_digest(config, messages);
    auto it = entries_.find(digest);
    if (it == entries_.end()) {
        throw ScriptedMissError("no scripted completion for request digest " + digest +
                                " (model=" + config.model_name +
                                "); the replay archive does not cover this request");
    }
    return it->second;
}

std::unordered_map<std::string, TransportReply> load_transcript(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open transcript archive: " + path.string());

    std::unordered_map<std::string, TransportReply> entries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": malformed transcript entry: " + e.what());
        }
        if (!j.contains("digest")) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": transcript entry missing digest");
        }
        TransportReply reply;
        if (j.contains("response")) {
            const auto& r = j.at("response");
            reply.content = r.value("content", "");
            reply.finish_reason = r.value("finish_reason", "stop");
            if (r.contains("usage")) {
                reply.usage.prompt_tokens = r["usage"].value("prompt_tokens", 0L);
                reply.usage.completion_tokens = r["usage"].value("completion_tokens", 0L);
            }
        } else if (j.contains("content")) {
            reply.content = j.at("content").get<std::string>();
        } else {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": transcript entry has neither response nor content");
        }
        entries.emplace(j.at("digest").get<std::string>(), std::move(reply));
    }
    return entries;
}

// ============================================================================
// Live HTTP transports
// ============================================================================

namespace {

// Splits "https://host[:port]/base/path" into origin and path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("endpoint must include a scheme: " + endpoint);
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string base_path = endpoint.substr(path_start);
    while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();
    return {endpoint.substr(0, path_start), base_path};
}

std::string fetch_credential(const ProviderConfig& config) {
    if (config.credential_ref.empty()) return "";
    const char* value = std::getenv(config.credential_ref.c_str());
    if (value == nullptr || *value == '\0') {
        throw AuthError("credential environment variable '" + config.credential_ref +
                        "' is not set");
    }
    return value;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::string body_snippet(const std::string& body) {
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

class HttpTransport : public Transport {
public:
    TransportReply send(const ProviderConfig& config,
                        const std::vector<ChatMessage>& messages) override {
        auto [origin, base_path] = split_endpoint(config.endpoint);
        const std::string key = fetch_credential(config);
        const std::string payload = build_body(config, messages);
        const std::string path = request_path(config, base_path);

        std::mt19937_64 jitter(std::random_device{}());
        std::string last_error;
        for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
            if (attempt > 1) {
                long window = std::min<long>(config.retry_cap_ms,
                                             static_cast<long>(config.retry_base_ms)
                                                 << (attempt - 2));
                std::uniform_int_distribution<long> dist(0, std::max<long>(window, 0));
                std::this_thread::sleep_for(std::chrono::milliseconds(dist(jitter)));
            }

            httplib::Client client(origin);
            client.set_connection_timeout(config.timeout_sec, 0);
            client.set_read_timeout(config.timeout_sec, 0);
            client.set_write_timeout(config.timeout_sec, 0);

            auto res = client.Post(path, build_headers(config, key), payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 200) {
                TransportReply reply = parse_reply(res->body);
                reply.attempt_count = attempt;
                return reply;
            }
            if (res->status == 401 || res->status == 403) {
                throw AuthError("authentication failed (HTTP " + std::to_string(res->status) +
                                "): " + body_snippet(res->body));
            }
            if (retryable_status(res->status)) {
                last_error = "HTTP " + std::to_string(res->status) + ": " + body_snippet(res->body);
                continue;
            }
            throw ProviderError("request rejected (HTTP " + std::to_string(res->status) +
                                "): " + body_snippet(res->body));
        }
        throw ProviderError("request failed after " + std::to_string(config.max_attempts) +
                            " attempts; last error: " + last_error);
    }

protected:
    virtual std::string request_path(const ProviderConfig& config,
                                     const std::string& base_path) const = 0;
    virtual httplib::Headers build_headers(const ProviderConfig& config,
                                           const std::string& key) const = 0;
    virtual std::string build_body(const ProviderConfig& config,
                                   const std::vector<ChatMessage>& messages) const = 0;
    virtual TransportReply parse_reply(const std::string& body) const = 0;
};

class OpenAiTransport : public HttpTransport {
protected:
    std::string request_path(const ProviderConfig&, const std::string& base_path) const override {
        return base_path.empty() ? "/v1/chat/completions" : base_path + "/chat/completions";
    }

    httplib::Headers build_headers(const ProviderConfig&, const std::string& key) const override {
        httplib::Headers h;
        if (!key.empty()) h.emplace("Authorization", "Bearer " + key);
        return h;
    }

    std::string build_body(const ProviderConfig& config,
                           const std::vector<ChatMessage>& messages) const override {
        json body;
        body["model"] = config.model_name;
        json msgs = json::array();
        for (const auto& m : messages) {
            msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        }
        body["messages"] = msgs;
        body["temperature"] = config.temperature;
        body["max_tokens"] = config.max_output_tokens;
        return body.dump();
    }

    TransportReply parse_reply(const std::string& body) const override {
        TransportReply reply;
        try {
            json j = json::parse(body);
            const auto& choice = j.at("choices").at(0);
            reply.content = choice.at("message").at("content").get<std::string>();
            reply.finish_reason = choice.value("finish_reason", "stop");
            if (j.contains("usage")) {
                reply.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
                reply.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
            }
        } catch (const json::exception& e) {
            throw ProviderError(std::string("unparseable completion response: ") + e.what() +
                                "; body: " + body_snippet(body));
        }
        return reply;
    }
};

class GeminiTransport : public HttpTransport {
protected:
    std::string request_path(const ProviderConfig& config,
                             const std::string& base_path) const override {
        std::string prefix = base_path.empty() ? "/v1beta" : base_path;
        return prefix + "/models/" + config.model_name + ":generateContent";
    }

    httplib::Headers build_headers(const ProviderConfig&, const std::string& key) const override {
        httplib::Headers h;
        if (!key.empty()) h.emplace("x-goog-api-key", key);
        return h;
    }

    std::string build_body(const ProviderConfig& config,
                           const std::vector<ChatMessage>& messages) const override {
        json body;
        json contents = json::array();
        for (const auto& m : messages) {
            if (m.role == Role::system) {
                body["system_instruction"] = {{"parts", json::array({{{"text", m.content}}})}};
                continue;
            }
            contents.push_back(
                {{"role", m.role == Role::assistant ? "model" : "user"},
                 {"parts", json::array({{{"text", m.content}}})}});
        }
        body["contents"] = contents;
        body["generationConfig"] = {{"temperature", config.temperature},
                                    {"maxOutputTokens", config.max_output_tokens}};
        return body.dump();
    }

    TransportReply parse_reply(const std::string& body) const override {
        TransportReply reply;
        try {
            json j = json::parse(body);
            const auto& candidate = j.at("candidates").at(0);
            std::string text;
            for (const auto& part : candidate.at("content").at("parts")) {
                if (part.contains("text")) text += part["text"].get<std::string>();
            }
            reply.content = std::move(text);
            reply.finish_reason = candidate.value("finishReason", "STOP");
            if (j.contains("usageMetadata")) {
                reply.usage.prompt_tokens = j["usageMetadata"].value("promptTokenCount", 0L);
                reply.usage.completion_tokens = j["usageMetadata"].value("candidatesTokenCount", 0L);
            }
        } catch (const json::exception& e) {
            throw ProviderError(std::string("unparseable completion response: ") + e.what() +
                                "; body: " + body_snippet(body));
        }
        return reply;
    }
};

}  // namespace

std::unique_ptr<Transport> make_transport(const ProviderConfig& config) {
    switch (config.backend) {
        case BackendKind::openai_compatible: return std::make_unique<OpenAiTransport>();
        case BackendKind::gemini: return std::make_unique<GeminiTransport>();
        case BackendKind::scripted: return ScriptedTransport::from_archive(config.script_path);
    }
    throw ValidationError("unknown backend kind");
}

// ============================================================================
// ResponseCache
// ============================================================================

namespace {

json completion_to_json(const Completion& c) {
    json r;
    r["content"] = c.content;
    r["finish_reason"] = c.finish_reason;
    r["usage"] = {{"completion_tokens", c.usage.completion_tokens},
                  {"prompt_tokens", c.usage.prompt_tokens}};
    return r;
}

}  // namespace

ResponseCache::ResponseCache(const std::filesystem::path& persist_path)
    : persist_path_(persist_path) {
    if (std::filesystem::exists(persist_path)) {
        for (auto& [digest, reply] : load_transcript(persist_path)) {
            Completion c;
            c.content = reply.content;
            c.finish_reason = reply.finish_reason;
            c.usage = reply.usage;
            c.request_digest = digest;
            entries_.emplace(digest, std::move(c));
        }
    } else if (persist_path.has_parent_path()) {
        std::filesystem::create_directories(persist_path.parent_path());
    }
}

std::optional<Completion> ResponseCache::get(const std::string& digest) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const std::string& digest, const Completion& completion) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = entries_.emplace(digest, completion);
    if (!inserted || !persist_path_) return;
    std::ofstream out(*persist_path_, std::ios::app);
    json entry;
    entry["digest"] = digest;
    entry["response"] = completion_to_json(completion);
    out << entry.dump() << "\n";
}

size_t ResponseCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

// ============================================================================
// TranscriptRecorder
// ============================================================================

TranscriptRecorder::TranscriptRecorder(const std::filesystem::path& path, ClockFn clock)
    : path_(path), clock_(std::move(clock)) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw ValidationError("cannot open transcript for writing: " + path.string());
}

void TranscriptRecorder::append(const std::string& digest, const std::string& request_json,
                                const Completion& completion, int attempt_count) {
    std::lock_guard<std::mutex> lock(mutex_);
    json entry;
    entry["attempt_count"] = attempt_count;
    entry["digest"] = digest;
    entry["request"] = json::parse(request_json);
    entry["response"] = completion_to_json(completion);
    entry["timestamp"] = clock_();
    out_ << entry.dump() << "\n";
    out_.flush();
    ++entries_;
}

size_t TranscriptRecorder::entry_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_;
}

// ============================================================================
// Provider
// ============================================================================

Provider::Provider(ProviderConfig config, std::unique_ptr<Transport> transport,
                   std::shared_ptr<ResponseCache> cache,
                   std::shared_ptr<TranscriptRecorder> transcript)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      transcript_(std::move(transcript)) {}

size_t Provider::live_calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return live_calls_;
}

Completion Provider::complete(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw ValidationError("messages must be non-empty");
    for (size_t i = 0; i < messages.size(); ++i) {
        if (messages[i].role == Role::system && i != 0) {
            throw ValidationError("system message allowed only at position 0");
        }
        if (messages[i].content.empty() && messages[i].role != Role::assistant) {
            throw ValidationError("empty content allowed only for assistant placeholders");
        }
    }

    const std::string digest = request_digest(config_, messages);
    const std::string request_json = canonical_request_json(config_, messages);

    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
        if (cache_) {
            if (auto hit = cache_->get(digest)) {
                lock.unlock();
                hit->cached = true;
                hit->request_digest = digest;
                if (transcript_) transcript_->append(digest, request_json, *hit, 0);
                return *hit;
            }
        }
        if (inflight_.find(digest) == inflight_.end()) {
            inflight_.insert(digest);
            ++live_calls_;
            break;
        }
        // Another thread is fetching this digest; wait and re-check the cache.
        inflight_cv_.wait(lock);
    }
    lock.unlock();

    TransportReply reply;
    try {
        reply = transport_->send(config_, messages);
    } catch (...) {
        lock.lock();
        inflight_.erase(digest);
        inflight_cv_.notify_all();
        throw;
    }

    Completion completion;
    completion.content = std::move(reply.content);
    completion.finish_reason = std::move(reply.finish_reason);
    completion.usage = reply.usage;
    completion.cached = false;
    completion.request_digest = digest;

    if (cache_) cache_->put(digest, completion);
    lock.lock();
    inflight_.erase(digest);
    inflight_cv_.notify_all();
    lock.unlock();

    if (transcript_) transcript_->append(digest, request_json, completion, reply.attempt_count);
    return completion;
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& config,
                                        std::shared_ptr<ResponseCache> cache,
                                        std::shared_ptr<TranscriptRecorder> transcript,
                                        const std::optional<std::filesystem::path>& replay_archive) {
    std::unique_ptr<Transport> transport;
    if (replay_archive) {
        transport = ScriptedTransport::from_archive(*replay_archive);
    } else {
        validate_provider_config(config);
        transport = make_transport(config);
    }
    return std::make_shared<Provider>(config, std::move(transport), std::move(cache),
                                      std::move(transcript));
}

}  // namespace metatune
