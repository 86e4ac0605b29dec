#pragma once

// httplib-backed transport. Kept in its own header so the heavy include only
// lands in binaries that actually talk to the network.

#include <httplib.h>

#include <memory>
#include <string>

#include "ocrent/errors.hpp"
#include "ocrent/llm_client.hpp"

namespace ocrent::client {

// Splits "https://host[:port]/prefix" into origin and path prefix.
struct EndpointParts {
    std::string origin;
    std::string path_prefix;
};

inline EndpointParts split_endpoint(const std::string& base_url) {
    const std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        throw ValidationError("endpoint must start with http:// or https://: " + base_url);
    }
    const std::size_t path = base_url.find('/', scheme + 3);
    if (path == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path), prefix};
}

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(const std::string& base_url,
                              std::chrono::seconds timeout = std::chrono::seconds(120))
        : parts_(split_endpoint(base_url)), timeout_(timeout) {}

    HttpResponse post(const std::string& path, const HttpHeaders& headers,
                      const std::string& body) override {
        // One client per call keeps the transport safe under concurrent use.
        httplib::Client client(parts_.origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers request_headers;
        std::string content_type = "application/json";
        for (const auto& [name, value] : headers) {
            if (name == "Content-Type") {
                content_type = value;
            } else {
                request_headers.emplace(name, value);
            }
        }
        auto result = client.Post(parts_.path_prefix + path, request_headers, body, content_type);
        if (!result) {
            throw TransportError("HTTP POST failed: " + httplib::to_string(result.error()));
        }
        return {result->status, result->body};
    }

private:
    EndpointParts parts_;
    std::chrono::seconds timeout_;
};

}  // namespace ocrent::client
