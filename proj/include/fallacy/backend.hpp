#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fallacy/schemes.hpp"

namespace fallacy::backend {

struct GenerationParams {
    double temperature = 0.75;
    double top_p = 0.9;
    int top_k = 50;  ///< 0 disables
    int max_new_tokens = 256;
    std::optional<std::int64_t> seed;

    /// ConfigError on out-of-range values.
    void validate() const;
    json to_json() const;
    static GenerationParams from_json(const json& j);
    friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

/// True for model names of the Llama 3 family ("llama-3", "Llama3", "meta-llama/Meta-Llama-3-8B", ...).
bool is_llama3_family(std::string_view model_name);

/// Sampling defaults for a model: temperature 0.75 (0.6 for Llama 3), top_p 0.9, top_k 50.
GenerationParams default_params(std::string_view model_name);

struct RetryPolicy {
    int max_retries = 5;
    std::chrono::milliseconds base_backoff{500};
    std::chrono::milliseconds max_backoff{30000};

    /// Delay before retry `attempt` (1-based): base * 2^(attempt-1), capped at max.
    std::chrono::milliseconds backoff(int attempt) const;
};

enum class BackendKind { http, replay, scripted };
std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view name);

enum class ScriptedBehavior { perfect_oracle, fixed_label, out_of_space, unparseable, round_robin };
std::string_view to_string(ScriptedBehavior b);
ScriptedBehavior parse_scripted_behavior(std::string_view name);

struct ScriptedConfig {
    ScriptedBehavior behavior = ScriptedBehavior::perfect_oracle;
    std::string fixed_label;               ///< fixed_label
    std::vector<std::string> cycle;        ///< round_robin
    std::string out_of_space_label = "Appeal to Consequences";
    /// (discourse, gold label) in a stable order; filled by the runner.
    std::vector<std::pair<std::string, std::string>> answer_key;
};

struct BackendConfig {
    BackendKind kind = BackendKind::scripted;
    std::string endpoint_url;
    std::string model_name = "scripted";
    std::string auth_env_var = "OPENAI_API_KEY";
    int max_in_flight = 4;
    RetryPolicy retry_policy;
    std::filesystem::path record_path;    ///< replay source
    std::filesystem::path record_output;  ///< when set, every live response is appended here
    bool supports_top_k = false;
    std::chrono::seconds request_timeout{120};
    ScriptedConfig scripted;

    /// ConfigError: http without endpoint_url, replay without record_path, max_in_flight < 1.
    void validate() const;
    /// Snapshot for manifests; never contains credentials.
    json to_json() const;
};

/// Preset for a scripted backend.
BackendConfig scripted_backend(ScriptedBehavior behavior, std::string label_or_empty = {},
                               std::vector<std::string> cycle = {});

struct Completion {
    std::string content;
    std::string response_id;  ///< provider id, empty when unknown
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Safe for concurrent use. The transcript ends with a user turn.
    virtual Completion complete(const schemes::Transcript& transcript, const GenerationParams& params) = 0;
    virtual const std::string& model_name() const = 0;
};

/// Stable digest over model name, every generation parameter and the messages.
std::string request_digest(const schemes::Transcript& transcript, const GenerationParams& params,
                           std::string_view model_name);

/// Canonical request serialization hashed by request_digest.
std::string canonical_request(const schemes::Transcript& transcript, const GenerationParams& params,
                              std::string_view model_name);

struct CacheRecord {
    std::string digest;
    std::string model;
    json request;
    std::string response;
    std::string response_id;
    std::string timestamp;

    json to_json() const;
    static CacheRecord from_json(const json& j);
};

/// Digest -> response store backed by a line-delimited file. Appends are serialized.
class ResponseCache {
public:
    /// Reads every record of `path`; later records for the same digest win.
    void load(const std::filesystem::path& path);

    std::optional<CacheRecord> lookup(const std::string& digest) const;
    /// Adds the record in memory and, when `path` is non-empty, appends it to the file.
    void append(const CacheRecord& record, const std::filesystem::path& path = {});
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, CacheRecord> records_;
};

/// Looks responses up by request digest; misses throw CacheMissError.
class ReplayBackend final : public ChatBackend {
public:
    ReplayBackend(std::string model_name, const std::filesystem::path& record_path);
    Completion complete(const schemes::Transcript& transcript, const GenerationParams& params) override;
    const std::string& model_name() const override { return model_; }

private:
    std::string model_;
    ResponseCache cache_;
};

/// Forwards to an inner backend and appends every exchange to a cache file.
class RecordingBackend final : public ChatBackend {
public:
    RecordingBackend(std::unique_ptr<ChatBackend> inner, std::filesystem::path output);
    Completion complete(const schemes::Transcript& transcript, const GenerationParams& params) override;
    const std::string& model_name() const override { return inner_->model_name(); }

private:
    std::unique_ptr<ChatBackend> inner_;
    std::filesystem::path output_;
    ResponseCache cache_;
};

/// Deterministic test double. Intermediate rounds get a fixed filler analysis; the final
/// round (the user turn asking for JSON) gets a reply shaped by the behavior.
class ScriptedBackend final : public ChatBackend {
public:
    ScriptedBackend(std::string model_name, ScriptedConfig config);
    Completion complete(const schemes::Transcript& transcript, const GenerationParams& params) override;
    const std::string& model_name() const override { return model_; }

    static constexpr std::string_view kFiller =
        "Analysis: the premises are stated, the conclusion is identified, and the support between them is weighed.";

private:
    /// Index into the answer key of the example being classified.
    std::size_t locate(const schemes::Transcript& transcript) const;

    std::string model_;
    ScriptedConfig config_;
};

/// OpenAI-compatible chat-completions client with retry and an in-flight bound.
class HttpBackend final : public ChatBackend {
public:
    explicit HttpBackend(BackendConfig config);
    ~HttpBackend() override;
    Completion complete(const schemes::Transcript& transcript, const GenerationParams& params) override;
    const std::string& model_name() const override { return config_.model_name; }

    /// Request body as sent on the wire.
    json request_body(const schemes::Transcript& transcript, const GenerationParams& params) const;

private:
    struct Impl;
    BackendConfig config_;
    std::unique_ptr<Impl> impl_;
};

/// Backend for a config, wrapped for recording when record_output is set.
std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

/// Checks the transcript precondition and delegates to the backend.
Completion complete_chat(ChatBackend& backend, const schemes::Transcript& transcript, const GenerationParams& params);

}  // namespace fallacy::backend
