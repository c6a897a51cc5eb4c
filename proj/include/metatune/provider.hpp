#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "metatune/clock.hpp"

namespace metatune {

// ============================================================================
// Messages and configuration
// ============================================================================

enum class Role { system, user, assistant };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

inline ChatMessage system_message(std::string content) { return {Role::system, std::move(content)}; }
inline ChatMessage user_message(std::string content) { return {Role::user, std::move(content)}; }
inline ChatMessage assistant_message(std::string content) { return {Role::assistant, std::move(content)}; }

enum class BackendKind { openai_compatible, gemini, scripted };

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

struct ProviderConfig {
    BackendKind backend = BackendKind::scripted;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 2048;

    // Live backends.
    std::string endpoint;        // base URL, e.g. https://api.openai.com
    std::string credential_ref;  // name of the environment variable holding the key

    // Scripted backend.
    std::string script_path;

    // Retry policy: total attempts, exponential backoff with full jitter.
    int max_attempts = 5;
    int retry_base_ms = 500;
    int retry_cap_ms = 8000;
    int timeout_sec = 120;
};

// Throws ValidationError if the config is internally inconsistent.
void validate_provider_config(const ProviderConfig& config);

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct Completion {
    std::string content;
    std::string finish_reason;
    Usage usage;
    bool cached = false;
    std::string request_digest;
};

// Identity of one request: backend tag, model, sampling knobs, and the exact
// message sequence. Endpoint and credentials are deliberately excluded so a
// recorded run replays no matter where it was pointed.
std::string request_digest(const ProviderConfig& config, const std::vector<ChatMessage>& messages);

// The canonical JSON the digest is computed over (also stored in transcripts).
std::string canonical_request_json(const ProviderConfig& config,
                                   const std::vector<ChatMessage>& messages);

// ============================================================================
// Transports
// ============================================================================

struct TransportReply {
    std::string content;
    std::string finish_reason = "stop";
    Usage usage;
    int attempt_count = 1;
};

// One way of actually answering a chat request. Implementations must be safe
// to call from multiple threads.
class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportReply send(const ProviderConfig& config,
                                const std::vector<ChatMessage>& messages) = 0;
};

// Replays archived completions by request digest; a miss is a hard error.
class ScriptedTransport : public Transport {
public:
    explicit ScriptedTransport(std::unordered_map<std::string, TransportReply> entries);
    static std::unique_ptr<ScriptedTransport> from_archive(const std::filesystem::path& path);

    TransportReply send(const ProviderConfig& config,
                        const std::vector<ChatMessage>& messages) override;

    size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, TransportReply> entries_;
};

// Builds the live (or scripted, per config.backend) transport for a config.
std::unique_ptr<Transport> make_transport(const ProviderConfig& config);

// Digest -> reply map parsed from a transcript or script archive. Accepts both
// full transcript entries and bare {digest, content} records.
std::unordered_map<std::string, TransportReply> load_transcript(const std::filesystem::path& path);

// ============================================================================
// Cache and transcript
// ============================================================================

// Completion cache keyed by request digest, optionally persisted as
// newline-delimited JSON so later sweeps reuse earlier calls.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(const std::filesystem::path& persist_path);

    std::optional<Completion> get(const std::string& digest);
    void put(const std::string& digest, const Completion& completion);
    size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Completion> entries_;
    std::optional<std::filesystem::path> persist_path_;
};

// Append-only log of every complete() call: digest, full request, response,
// timestamp, attempt count. A recorded transcript doubles as a replay archive.
class TranscriptRecorder {
public:
    TranscriptRecorder(const std::filesystem::path& path, ClockFn clock);

    void append(const std::string& digest, const std::string& request_json,
                const Completion& completion, int attempt_count);
    size_t entry_count() const;
    const std::filesystem::path& path() const { return path_; }

private:
    mutable std::mutex mutex_;
    std::filesystem::path path_;
    std::ofstream out_;
    ClockFn clock_;
    size_t entries_ = 0;
};

// ============================================================================
// Provider
// ============================================================================

// Uniform chat-completion surface: cache in front, transport behind, every
// call appended to the transcript. At most one live call is made per digest,
// even under concurrent use.
class Provider {
public:
    Provider(ProviderConfig config, std::unique_ptr<Transport> transport,
             std::shared_ptr<ResponseCache> cache = nullptr,
             std::shared_ptr<TranscriptRecorder> transcript = nullptr);

    Completion complete(const std::vector<ChatMessage>& messages);

    const ProviderConfig& config() const { return config_; }
    size_t live_calls() const;

private:
    ProviderConfig config_;
    std::unique_ptr<Transport> transport_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<TranscriptRecorder> transcript_;

    mutable std::mutex mutex_;
    std::condition_variable inflight_cv_;
    std::unordered_set<std::string> inflight_;
    size_t live_calls_ = 0;
};

// Convenience: transport chosen from config.backend. Pass `replay_archive`
// to force a scripted transport regardless of the backend tag (the tag stays
// in the digest, so recorded digests keep matching).
std::shared_ptr<Provider> make_provider(
    const ProviderConfig& config,
    std::shared_ptr<ResponseCache> cache = nullptr,
    std::shared_ptr<TranscriptRecorder> transcript = nullptr,
    const std::optional<std::filesystem::path>& replay_archive = std::nullopt);

}  // namespace metatune
