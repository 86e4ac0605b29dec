#pragma once

// Client for any OpenAI-compatible chat-completions endpoint with vision
// inputs and logprobs. Request bodies are canonical (fixed key order, image
// embedded as a base64 data URL) so that identical requests hash to identical
// cache keys on every platform. Responses are cached raw, one JSON file per
// exchange, written atomically via rename, so estimator changes never require
// re-querying the API.
//
// Canonical body key order: model, messages, temperature, seed, logprobs,
// top_logprobs (the last only when logprobs is on). Messages carry the system
// prompt as a plain string and the user turn as [text part, image_url part].

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ocrent/detail/strings.hpp"
#include "ocrent/errors.hpp"
#include "ocrent/token_entropy.hpp"

namespace ocrent::client {

inline constexpr const char* kApiKeyEnvVar = "OCR_ENTROPY_API_KEY";
inline constexpr const char* kDefaultEndpoint = "https://api.openai.com/v1";
inline constexpr std::size_t kDefaultMaxImageBytes = 20 * 1024 * 1024;

struct InlineImage {
    std::string media_type;  // e.g. "image/png"
    std::vector<std::uint8_t> bytes;
};

// Used verbatim; also how data URLs round-trip through the cache.
struct RemoteImage {
    std::string url;
};

using ImageSource = std::variant<InlineImage, RemoteImage>;

inline std::string media_type_for_extension(std::string ext) {
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    throw ValidationError("cannot infer media type for image extension '" + ext + "'");
}

inline ImageSource load_image_file(const std::filesystem::path& path,
                                   std::size_t max_bytes = kDefaultMaxImageBytes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read image file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.empty()) throw ValidationError("image file is empty: " + path.string());
    if (bytes.size() > max_bytes) {
        throw ValidationError("image file exceeds the size limit of " +
                              std::to_string(max_bytes) + " bytes: " + path.string());
    }
    return InlineImage{media_type_for_extension(path.extension().string()), std::move(bytes)};
}

inline std::string image_url_string(const ImageSource& image) {
    if (const auto* inline_image = std::get_if<InlineImage>(&image)) {
        return "data:" + inline_image->media_type + ";base64," +
               detail::base64_encode(inline_image->bytes);
    }
    return std::get<RemoteImage>(image).url;
}

struct ChatRequest {
    std::string model = "gpt-4o";
    std::string system_prompt;
    std::string user_prompt;
    ImageSource image = RemoteImage{};
    double temperature = 0.0;
    std::int64_t seed = 12345;
    bool logprobs = true;
    int top_logprobs = 20;  // API maximum; only meaningful with logprobs on
};

inline nlohmann::ordered_json request_body_json(const ChatRequest& request) {
    if (request.system_prompt.empty() || request.user_prompt.empty()) {
        throw ValidationError("prompts must not be empty");
    }
    if (request.temperature < 0.0) throw ValidationError("temperature must be >= 0");
    if (request.top_logprobs < 0 || request.top_logprobs > 20) {
        throw ValidationError("top_logprobs must lie in [0, 20]");
    }
    nlohmann::ordered_json body;
    body["model"] = request.model;
    body["messages"] = nlohmann::ordered_json::array();
    body["messages"].push_back({{"role", "system"}, {"content", request.system_prompt}});
    nlohmann::ordered_json user_content = nlohmann::ordered_json::array();
    user_content.push_back({{"type", "text"}, {"text", request.user_prompt}});
    user_content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", image_url_string(request.image)}}}});
    body["messages"].push_back({{"role", "user"}, {"content", std::move(user_content)}});
    body["temperature"] = request.temperature;
    body["seed"] = request.seed;
    body["logprobs"] = request.logprobs;
    if (request.logprobs) body["top_logprobs"] = request.top_logprobs;
    return body;
}

// Byte-stable canonical wire body.
inline std::string build_request(const ChatRequest& request) {
    return request_body_json(request).dump();
}

// Lowercase hex SHA-256 of the canonical body.
inline std::string cache_key(const ChatRequest& request) {
    return detail::sha256_hex(build_request(request));
}

// Inverse of request_body_json, used when replaying cache files. The image
// comes back as a RemoteImage carrying the original data URL, which
// re-serializes byte-identically.
inline ChatRequest request_from_body(const nlohmann::json& body) {
    try {
        ChatRequest request;
        request.model = body.at("model").get<std::string>();
        const auto& messages = body.at("messages");
        request.system_prompt = messages.at(0).at("content").get<std::string>();
        const auto& user_content = messages.at(1).at("content");
        request.user_prompt = user_content.at(0).at("text").get<std::string>();
        request.image =
            RemoteImage{user_content.at(1).at("image_url").at("url").get<std::string>()};
        request.temperature = body.at("temperature").get<double>();
        request.seed = body.at("seed").get<std::int64_t>();
        request.logprobs = body.at("logprobs").get<bool>();
        request.top_logprobs = body.value("top_logprobs", 0);
        return request;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed request body: ") + e.what());
    }
}

struct ChatExchange {
    ChatRequest request;
    std::string response_text;
    std::vector<token_entropy::TokenRecord> tokens;
    std::string model_fingerprint;
    std::string recorded_at;  // ISO-8601 UTC
    std::string cache_key;
    std::string response_raw;  // full response body as received
};

// Parses a raw chat-completions response body into an exchange.
inline ChatExchange parse_exchange(const ChatRequest& request, const std::string& raw_body,
                                   std::string recorded_at) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(raw_body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed response JSON: ") + e.what(), e.byte);
    }

    ChatExchange exchange;
    exchange.request = request;
    exchange.recorded_at = std::move(recorded_at);
    exchange.cache_key = cache_key(request);
    exchange.response_raw = raw_body;

    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
        throw DegradedResponseError("response has no choices");
    }
    const auto& choice = body["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
        exchange.response_text = choice["message"]["content"].get<std::string>();
    }
    exchange.model_fingerprint = body.value("system_fingerprint", "");

    if (request.logprobs) {
        if (!choice.contains("logprobs") || choice["logprobs"].is_null() ||
            !choice["logprobs"].contains("content") || !choice["logprobs"]["content"].is_array() ||
            choice["logprobs"]["content"].empty()) {
            throw DegradedResponseError("logprobs requested but missing from the response");
        }
        try {
            for (const auto& entry : choice["logprobs"]["content"]) {
                const std::string token = entry.at("token").get<std::string>();
                const double logprob = entry.at("logprob").get<double>();
                std::vector<token_entropy::AlternativeToken> alternatives;
                if (entry.contains("top_logprobs") && entry["top_logprobs"].is_array()) {
                    for (const auto& alt : entry["top_logprobs"]) {
                        alternatives.push_back({alt.at("token").get<std::string>(),
                                                alt.at("logprob").get<double>()});
                    }
                }
                if (alternatives.empty()) alternatives.push_back({token, logprob});
                exchange.tokens.emplace_back(
                    token, logprob, token_entropy::TokenAlternatives(std::move(alternatives)));
            }
        } catch (const nlohmann::json::exception& e) {
            throw DegradedResponseError(std::string("malformed logprobs payload: ") + e.what());
        }
    }
    return exchange;
}

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Transport seam; implementations must be safe to call from multiple threads.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const HttpHeaders& headers,
                              const std::string& body) = 0;
};

// Exponential backoff with full jitter: delay_i = U(0, base * factor^i).
struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::duration<double> base_delay{1.0};
    double factor = 2.0;
    // Seams for tests: jitter yields a factor in [0, 1), sleep performs the wait.
    std::function<double()> jitter = [] {
        thread_local std::mt19937_64 rng{std::random_device{}()};
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    };
    std::function<void(std::chrono::duration<double>)> sleep =
        [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
};

struct ClientConfig {
    std::string path = "/chat/completions";  // appended to the transport's base
    std::string api_key;                     // from OCR_ENTROPY_API_KEY
    RetryPolicy retry;
};

namespace detail {

inline std::string server_message(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        if (j.contains("error") && j["error"].contains("message")) {
            return j["error"]["message"].get<std::string>();
        }
    } catch (const nlohmann::json::exception&) {
    }
    return body.size() > 200 ? body.substr(0, 200) + "..." : body;
}

}  // namespace detail

// POSTs the canonical body, retrying 429/5xx and transport-level failures
// with exponential backoff. 401/403 and other 4xx are not retried.
inline ChatExchange send(const ChatRequest& request, HttpTransport& transport,
                         const ClientConfig& config) {
    if (config.api_key.empty()) {
        throw CredentialError(std::string("no API credential; set ") + kApiKeyEnvVar);
    }
    const std::string body = build_request(request);
    const HttpHeaders headers = {{"Authorization", "Bearer " + config.api_key},
                                 {"Content-Type", "application/json"}};

    const int attempts = std::max(1, config.retry.max_attempts);
    for (int attempt = 0;; ++attempt) {
        bool retryable = false;
        std::string failure;
        try {
            const HttpResponse response = transport.post(config.path, headers, body);
            if (response.status == 200) {
                return parse_exchange(request, response.body, ocrent::detail::utc_timestamp());
            }
            if (response.status == 401 || response.status == 403) {
                throw CredentialError("credential rejected (HTTP " +
                                      std::to_string(response.status) + "): " +
                                      detail::server_message(response.body));
            }
            if (response.status == 429 || response.status >= 500) {
                retryable = true;
                failure = "HTTP " + std::to_string(response.status) + ": " +
                          detail::server_message(response.body);
                if (attempt + 1 >= attempts) {
                    throw RequestError(response.status, detail::server_message(response.body));
                }
            } else {
                throw RequestError(response.status, detail::server_message(response.body));
            }
        } catch (const RequestError&) {
            throw;
        } catch (const CredentialError&) {
            throw;
        } catch (const TransportError& e) {
            retryable = true;
            failure = e.what();
            if (attempt + 1 >= attempts) throw;
        }
        if (retryable) {
            const double cap =
                config.retry.base_delay.count() * std::pow(config.retry.factor, attempt);
            config.retry.sleep(std::chrono::duration<double>(cap * config.retry.jitter()));
        }
    }
}

// One JSON file per exchange at <dir>/<cache_key>.json with schema
// {request, response_raw, recorded_at}. Writes go to a unique temp name in
// the same directory followed by an atomic rename, so concurrent writers of
// the same key can never leave a torn file.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir, std::ostream* diagnostics = nullptr)
        : dir_(std::move(dir)), diagnostics_(diagnostics) {}

    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::filesystem::path path_for(const std::string& key) const {
        return dir_ / (key + ".json");
    }

    std::filesystem::path put(const ChatExchange& exchange) const {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create cache directory: " + dir_.string());

        nlohmann::ordered_json record;
        record["request"] = nlohmann::ordered_json::parse(build_request(exchange.request));
        record["response_raw"] = exchange.response_raw;
        record["recorded_at"] = exchange.recorded_at;

        const std::filesystem::path final_path = path_for(exchange.cache_key);
        const std::filesystem::path temp_path = temp_name(exchange.cache_key);
        {
            std::ofstream out(temp_path, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write cache file: " + temp_path.string());
            out << record.dump(2) << '\n';
            if (!out.flush()) throw IoError("cannot write cache file: " + temp_path.string());
        }
        std::filesystem::rename(temp_path, final_path, ec);
        if (ec) {
            std::filesystem::remove(temp_path, ec);
            throw IoError("cannot publish cache file: " + final_path.string());
        }
        return final_path;
    }

    std::optional<ChatExchange> get(const std::string& key) const {
        const std::filesystem::path path = path_for(key);
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) return std::nullopt;
        try {
            ChatExchange exchange = load_exchange_file(path);
            if (exchange.cache_key != key) {
                report("cache file " + path.string() + " does not match its key; treating as miss");
                return std::nullopt;
            }
            return exchange;
        } catch (const Error& e) {
            report("corrupt cache file " + path.string() + ": " + e.what() +
                   "; treating as miss");
            return std::nullopt;
        }
    }

    // Loads one cache-schema file by path (also serves `analyze --input`).
    static ChatExchange load_exchange_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open exchange file: " + path.string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(buffer.str());
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed exchange file: ") + e.what(), e.byte);
        }
        if (!record.contains("request") || !record.contains("response_raw") ||
            !record["response_raw"].is_string()) {
            throw ValidationError("exchange file lacks request/response_raw fields");
        }
        const ChatRequest request = request_from_body(record["request"]);
        return parse_exchange(request, record["response_raw"].get<std::string>(),
                              record.value("recorded_at", ""));
    }

private:
    std::filesystem::path temp_name(const std::string& key) const {
        thread_local std::mt19937_64 rng{std::random_device{}()};
        std::ostringstream suffix;
        suffix << key << ".tmp-" << std::this_thread::get_id() << '-' << rng();
        return dir_ / suffix.str();
    }

    void report(const std::string& message) const {
        if (diagnostics_) *diagnostics_ << "cache: " << message << '\n';
    }

    std::filesystem::path dir_;
    std::ostream* diagnostics_;
};

}  // namespace ocrent::client
