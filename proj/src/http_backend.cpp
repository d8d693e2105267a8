#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <mutex>
#include <regex>
#include <semaphore>
#include <thread>

#include "fallacy/backend.hpp"
#include "fallacy/error.hpp"

namespace fallacy::backend {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("malformed endpoint url: " + url);
    Endpoint e{m[1].str(), m[2].matched ? m[2].str() : std::string()};
    while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
    if (e.path.empty()) e.path = "/v1";
    const std::string suffix = "/chat/completions";
    if (e.path.size() < suffix.size() || e.path.compare(e.path.size() - suffix.size(), suffix.size(), suffix) != 0)
        e.path += suffix;
    return e;
}

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

struct HttpBackend::Impl {
    explicit Impl(int max_in_flight) : slots(max_in_flight) {}
    std::counting_semaphore<4096> slots;
    Endpoint endpoint;
    std::once_flag top_k_note;
    std::once_flag auth_note;
};

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.max_in_flight > 4096) throw ConfigError("max_in_flight must be <= 4096");
    impl_ = std::make_unique<Impl>(config_.max_in_flight);
    impl_->endpoint = parse_endpoint(config_.endpoint_url);
}

HttpBackend::~HttpBackend() = default;

json HttpBackend::request_body(const schemes::Transcript& transcript, const GenerationParams& params) const {
    json body{{"model", config_.model_name},
              {"messages", transcript.to_json()},
              {"temperature", params.temperature},
              {"top_p", params.top_p},
              {"max_tokens", params.max_new_tokens}};
    if (params.seed) body["seed"] = *params.seed;
    if (params.top_k > 0) {
        if (config_.supports_top_k)
            body["top_k"] = params.top_k;
        else
            std::call_once(impl_->top_k_note, [] { log_note("endpoint does not advertise top_k; dropping it"); });
    }
    return body;
}

Completion HttpBackend::complete(const schemes::Transcript& transcript, const GenerationParams& params) {
    const std::string payload = request_body(transcript, params).dump();
    httplib::Headers headers;
    const char* key = std::getenv(config_.auth_env_var.c_str());
    if (key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);
    else
        std::call_once(impl_->auth_note,
                       [&] { log_note("$" + config_.auth_env_var + " is not set; sending requests without a bearer token"); });

    impl_->slots.acquire();
    struct Release {
        std::counting_semaphore<4096>& s;
        ~Release() { s.release(); }
    } release{impl_->slots};

    int attempts = 0;
    int last_status = 0;
    std::string last_error;
    const int max_attempts = config_.retry_policy.max_retries + 1;
    while (attempts < max_attempts) {
        ++attempts;
        httplib::Client client(impl_->endpoint.origin);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(config_.request_timeout);
        client.set_write_timeout(config_.request_timeout);
        auto res = client.Post(impl_->endpoint.path, headers, payload, "application/json");

        std::chrono::milliseconds wait = config_.retry_policy.backoff(attempts);
        if (!res) {
            last_status = 0;
            last_error = httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            json body;
            try {
                body = json::parse(res->body);
                Completion c;
                c.content = body.at("choices").at(0).at("message").at("content").get<std::string>();
                c.response_id = body.value("id", std::string{});
                return c;
            } catch (const json::exception& e) {
                throw TransportError(res->status, attempts, std::string("malformed completion response: ") + e.what());
            }
        } else {
            last_status = res->status;
            last_error = res->body.substr(0, 300);
            if (!retryable(res->status))
                throw TransportError(last_status, attempts, "HTTP " + std::to_string(last_status) + ": " + last_error);
            if (res->has_header("Retry-After")) {
                try {
                    const auto secs = std::stol(res->get_header_value("Retry-After"));
                    wait = std::min<std::chrono::milliseconds>(std::chrono::seconds(std::max(0L, secs)),
                                                               config_.retry_policy.max_backoff);
                } catch (const std::exception&) {
                }
            }
        }
        if (attempts < max_attempts) std::this_thread::sleep_for(wait);
    }
    throw TransportError(last_status, attempts,
                         "request failed after " + std::to_string(attempts) + " attempts (status " +
                             std::to_string(last_status) + "): " + last_error);
}

}  // namespace fallacy::backend
