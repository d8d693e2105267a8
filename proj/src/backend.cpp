#include "fallacy/backend.hpp"

#include <algorithm>
#include <fstream>

#include "fallacy/error.hpp"

namespace fallacy::backend {

void GenerationParams::validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
    if (top_k < 0) throw ConfigError("top_k must be >= 0");
    if (max_new_tokens <= 0) throw ConfigError("max_new_tokens must be > 0");
}

json GenerationParams::to_json() const {
    return json{{"temperature", temperature},
                {"top_p", top_p},
                {"top_k", top_k},
                {"max_new_tokens", max_new_tokens},
                {"seed", seed ? json(*seed) : json(nullptr)}};
}

GenerationParams GenerationParams::from_json(const json& j) {
    GenerationParams p;
    p.temperature = j.value("temperature", p.temperature);
    p.top_p = j.value("top_p", p.top_p);
    p.top_k = j.value("top_k", p.top_k);
    p.max_new_tokens = j.value("max_new_tokens", p.max_new_tokens);
    if (j.contains("seed") && !j["seed"].is_null()) p.seed = j["seed"].get<std::int64_t>();
    return p;
}

bool is_llama3_family(std::string_view model_name) {
    std::string n = text::to_lower(model_name);
    std::erase_if(n, [](char c) { return c == '-' || c == '_' || c == ' ' || c == '.'; });
    return n.find("llama3") != std::string::npos;
}

GenerationParams default_params(std::string_view model_name) {
    GenerationParams p;
    if (is_llama3_family(model_name)) p.temperature = 0.6;
    return p;
}

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
    if (attempt < 1) attempt = 1;
    auto delay = base_backoff;
    for (int i = 1; i < attempt && delay < max_backoff; ++i) delay *= 2;
    return std::min(delay, max_backoff);
}

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::http: return "http";
        case BackendKind::replay: return "replay";
        case BackendKind::scripted: return "scripted";
    }
    return "scripted";
}

BackendKind parse_backend_kind(std::string_view name) {
    const std::string n = text::to_lower(text::trim(name));
    if (n == "http") return BackendKind::http;
    if (n == "replay") return BackendKind::replay;
    if (n == "scripted") return BackendKind::scripted;
    throw ConfigError("unknown backend kind: " + std::string(name));
}

std::string_view to_string(ScriptedBehavior b) {
    switch (b) {
        case ScriptedBehavior::perfect_oracle: return "perfect_oracle";
        case ScriptedBehavior::fixed_label: return "fixed_label";
        case ScriptedBehavior::out_of_space: return "out_of_space";
        case ScriptedBehavior::unparseable: return "unparseable";
        case ScriptedBehavior::round_robin: return "round_robin";
    }
    return "perfect_oracle";
}

ScriptedBehavior parse_scripted_behavior(std::string_view name) {
    std::string n = text::to_lower(text::trim(name));
    std::replace(n.begin(), n.end(), '-', '_');
    if (n == "perfect_oracle" || n == "perfect" || n == "oracle") return ScriptedBehavior::perfect_oracle;
    if (n == "fixed_label" || n == "fixed") return ScriptedBehavior::fixed_label;
    if (n == "out_of_space") return ScriptedBehavior::out_of_space;
    if (n == "unparseable") return ScriptedBehavior::unparseable;
    if (n == "round_robin") return ScriptedBehavior::round_robin;
    throw ConfigError("unknown scripted behavior: " + std::string(name));
}

void BackendConfig::validate() const {
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (kind == BackendKind::http && endpoint_url.empty()) throw ConfigError("http backend requires endpoint_url");
    if (kind == BackendKind::replay && record_path.empty()) throw ConfigError("replay backend requires record_path");
    if (model_name.empty()) throw ConfigError("model_name must not be empty");
    if (retry_policy.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (kind == BackendKind::scripted) {
        if (scripted.behavior == ScriptedBehavior::fixed_label && scripted.fixed_label.empty())
            throw ConfigError("fixed_label behavior requires a label");
        if (scripted.behavior == ScriptedBehavior::round_robin && scripted.cycle.empty())
            throw ConfigError("round_robin behavior requires a label list");
    }
}

json BackendConfig::to_json() const {
    json j{{"kind", std::string(to_string(kind))},
           {"model_name", model_name},
           {"max_in_flight", max_in_flight},
           {"retry_policy",
            {{"max_retries", retry_policy.max_retries},
             {"base_backoff_ms", retry_policy.base_backoff.count()},
             {"max_backoff_ms", retry_policy.max_backoff.count()}}}};
    if (kind == BackendKind::http) {
        j["endpoint_url"] = endpoint_url;
        j["auth_env_var"] = auth_env_var;
        j["supports_top_k"] = supports_top_k;
    }
    if (!record_path.empty()) j["record_path"] = record_path.string();
    if (!record_output.empty()) j["record_output"] = record_output.string();
    if (kind == BackendKind::scripted) {
        j["scripted"] = {{"behavior", std::string(to_string(scripted.behavior))}};
        if (!scripted.fixed_label.empty()) j["scripted"]["fixed_label"] = scripted.fixed_label;
        if (!scripted.cycle.empty()) j["scripted"]["cycle"] = scripted.cycle;
    }
    return j;
}

BackendConfig scripted_backend(ScriptedBehavior behavior, std::string label_or_empty, std::vector<std::string> cycle) {
    BackendConfig c;
    c.kind = BackendKind::scripted;
    c.model_name = "scripted-" + std::string(to_string(behavior));
    c.scripted.behavior = behavior;
    c.scripted.fixed_label = std::move(label_or_empty);
    c.scripted.cycle = std::move(cycle);
    return c;
}

// ---------------------------------------------------------------- digest and cache

std::string canonical_request(const schemes::Transcript& transcript, const GenerationParams& params,
                              std::string_view model_name) {
    // nlohmann objects keep keys sorted, so dump() is canonical.
    const json j{{"model", std::string(model_name)}, {"params", params.to_json()}, {"messages", transcript.to_json()}};
    return j.dump();
}

std::string request_digest(const schemes::Transcript& transcript, const GenerationParams& params,
                           std::string_view model_name) {
    return sha256_hex(canonical_request(transcript, params, model_name));
}

json CacheRecord::to_json() const {
    json j{{"digest", digest}, {"model", model}, {"request", request}, {"response", response}, {"timestamp", timestamp}};
    if (!response_id.empty()) j["response_id"] = response_id;
    return j;
}

CacheRecord CacheRecord::from_json(const json& j) {
    CacheRecord r;
    r.digest = j.at("digest").get<std::string>();
    r.model = j.value("model", std::string{});
    r.request = j.value("request", json::object());
    r.response = j.at("response").get<std::string>();
    r.response_id = j.value("response_id", std::string{});
    r.timestamp = j.value("timestamp", std::string{});
    return r;
}

void ResponseCache::load(const std::filesystem::path& path) {
    std::lock_guard lock(mu_);
    for (const auto& j : read_jsonl(path)) {
        CacheRecord r;
        try {
            r = CacheRecord::from_json(j);
        } catch (const json::exception& e) {
            throw SchemaError("bad cache record in " + path.string() + ": " + e.what());
        }
        records_[r.digest] = std::move(r);
    }
}

std::optional<CacheRecord> ResponseCache::lookup(const std::string& digest) const {
    std::lock_guard lock(mu_);
    if (auto it = records_.find(digest); it != records_.end()) return it->second;
    return std::nullopt;
}

void ResponseCache::append(const CacheRecord& record, const std::filesystem::path& path) {
    std::lock_guard lock(mu_);
    records_[record.digest] = record;
    if (path.empty()) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot append to cache file: " + path.string());
    out << record.to_json().dump() << '\n';
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

// ---------------------------------------------------------------- replay / record

ReplayBackend::ReplayBackend(std::string model_name, const std::filesystem::path& record_path)
    : model_(std::move(model_name)) {
    cache_.load(record_path);
}

Completion ReplayBackend::complete(const schemes::Transcript& transcript, const GenerationParams& params) {
    const std::string digest = request_digest(transcript, params, model_);
    auto rec = cache_.lookup(digest);
    if (!rec) throw CacheMissError(digest);
    return {rec->response, rec->response_id};
}

RecordingBackend::RecordingBackend(std::unique_ptr<ChatBackend> inner, std::filesystem::path output)
    : inner_(std::move(inner)), output_(std::move(output)) {}

Completion RecordingBackend::complete(const schemes::Transcript& transcript, const GenerationParams& params) {
    Completion c = inner_->complete(transcript, params);
    CacheRecord rec;
    rec.model = inner_->model_name();
    rec.digest = request_digest(transcript, params, rec.model);
    rec.request = json::parse(canonical_request(transcript, params, rec.model));
    rec.response = c.content;
    rec.response_id = c.response_id;
    rec.timestamp = utc_timestamp();
    cache_.append(rec, output_);
    return c;
}

// ---------------------------------------------------------------- scripted

ScriptedBackend::ScriptedBackend(std::string model_name, ScriptedConfig config)
    : model_(std::move(model_name)), config_(std::move(config)) {}

std::size_t ScriptedBackend::locate(const schemes::Transcript& transcript) const {
    const auto& turns = transcript.turns();
    auto first_user = std::find_if(turns.begin(), turns.end(),
                                   [](const schemes::Turn& t) { return t.role == schemes::Role::user; });
    if (first_user == turns.end()) throw ContractViolation("transcript has no user turn");
    const std::string& msg = first_user->content;
    // Demonstrations precede the classified discourse, so the match ending last wins.
    std::size_t best = config_.answer_key.size();
    std::size_t best_end = 0;
    for (std::size_t i = 0; i < config_.answer_key.size(); ++i) {
        const std::string& d = config_.answer_key[i].first;
        if (d.empty()) continue;
        const std::size_t pos = msg.rfind(d);
        if (pos == std::string::npos) continue;
        const std::size_t end = pos + d.size();
        if (best == config_.answer_key.size() || end > best_end ||
            (end == best_end && d.size() > config_.answer_key[best].first.size())) {
            best = i;
            best_end = end;
        }
    }
    if (best == config_.answer_key.size()) throw Error("scripted backend: no answer-key entry matches the prompt");
    return best;
}

Completion ScriptedBackend::complete(const schemes::Transcript& transcript, const GenerationParams&) {
    if (!transcript.ends_with_user()) throw ContractViolation("transcript must end with a user turn");
    const bool final_round = transcript.turns().back().content.find("JSON format") != std::string::npos;
    if (!final_round) return {std::string(kFiller), {}};

    auto answer = [](const std::string& label, std::string_view why) {
        return "{\"fallacy\": " + json(label).dump() + ", \"explanation\": \"" + std::string(why) + "\"}";
    };
    switch (config_.behavior) {
        case ScriptedBehavior::perfect_oracle:
            return {answer(config_.answer_key[locate(transcript)].second, "oracle"), {}};
        case ScriptedBehavior::fixed_label:
            return {answer(config_.fixed_label, "fixed"), {}};
        case ScriptedBehavior::out_of_space:
            return {answer(config_.out_of_space_label, "outside"), {}};
        case ScriptedBehavior::unparseable:
            return {"I am unable to decide which of the listed fallacies applies here.", {}};
        case ScriptedBehavior::round_robin: {
            const std::size_t i = locate(transcript);
            return {answer(config_.cycle[i % config_.cycle.size()], "round robin"), {}};
        }
    }
    return {std::string(kFiller), {}};
}

// ---------------------------------------------------------------- factory

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
    config.validate();
    std::unique_ptr<ChatBackend> b;
    switch (config.kind) {
        case BackendKind::http: b = std::make_unique<HttpBackend>(config); break;
        case BackendKind::replay: b = std::make_unique<ReplayBackend>(config.model_name, config.record_path); break;
        case BackendKind::scripted: b = std::make_unique<ScriptedBackend>(config.model_name, config.scripted); break;
    }
    if (!config.record_output.empty()) b = std::make_unique<RecordingBackend>(std::move(b), config.record_output);
    return b;
}

Completion complete_chat(ChatBackend& backend, const schemes::Transcript& transcript, const GenerationParams& params) {
    if (!transcript.ends_with_user()) throw ContractViolation("complete_chat: transcript must end with a user turn");
    params.validate();
    return backend.complete(transcript, params);
}

}  // namespace fallacy::backend
