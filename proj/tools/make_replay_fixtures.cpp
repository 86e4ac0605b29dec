// Builds the bundled replay cache: for each dpi-labeled image in a sweep
// config it synthesizes a chat-completions response whose message content is
// a given LaTeX document and whose per-token logprobs sum to a given total
// entropy, then stores it under the config's cache_dir keyed like a real
// recording. Rerun after changing the bundled images, prompts or request
// canonicalization.
//
//   make-replay-fixtures --config tests/fixtures/sweep_replay.toml
//       --entry 300=tests/fixtures/recognized/recognized_300dpi.tex:7.77 ...
//
// --five-token <path> additionally writes a small hand-sized exchange file
// (five tokens spelling "H(p, q)") used by the analyze examples.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ocrent/errors.hpp"
#include "ocrent/experiment.hpp"
#include "ocrent/llm_client.hpp"

namespace {

// recorded_at is pinned so regeneration is byte-reproducible.
constexpr const char* kRecordedAt = "2025-01-01T00:00:00Z";

struct Entry {
    int dpi;
    std::string text_path;
    double total_bits;
};

Entry parse_entry(const std::string& spec) {
    const auto eq = spec.find('=');
    const auto colon = spec.rfind(':');
    if (eq == std::string::npos || colon == std::string::npos || colon <= eq) {
        throw ocrent::ValidationError("--entry expects dpi=path:total_bits, got '" + spec + "'");
    }
    Entry entry;
    entry.dpi = std::stoi(spec.substr(0, eq));
    entry.text_path = spec.substr(eq + 1, colon - eq - 1);
    entry.total_bits = std::stod(spec.substr(colon + 1));
    return entry;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ocrent::IoError("cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Splits text into 2-character pieces; the piece count sets the token count.
std::vector<std::string> chunk_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < text.size(); i += 2) {
        tokens.push_back(text.substr(i, 2));
    }
    return tokens;
}

nlohmann::ordered_json logprob_entry(const std::string& token, double logprob) {
    const double p = std::exp(logprob);
    nlohmann::ordered_json alternatives = nlohmann::ordered_json::array();
    alternatives.push_back({{"token", token}, {"logprob", logprob}});
    if (p < 1.0) {
        // Three filler alternatives sharing part of the leftover mass.
        const double alt_logprob = std::log((1.0 - p) / 5.0);
        for (int k = 0; k < 3; ++k) {
            alternatives.push_back(
                {{"token", "~alt" + std::to_string(k)}, {"logprob", alt_logprob}});
        }
    }
    return {{"token", token}, {"logprob", logprob}, {"top_logprobs", std::move(alternatives)}};
}

std::string synth_response(const std::string& content, double total_bits,
                           const std::string& model) {
    const std::vector<std::string> tokens = chunk_tokens(content);
    const double logprob =
        -total_bits * std::numbers::ln2 / static_cast<double>(tokens.size());
    nlohmann::ordered_json logprobs_content = nlohmann::ordered_json::array();
    for (const auto& t : tokens) logprobs_content.push_back(logprob_entry(t, logprob));

    nlohmann::ordered_json body;
    body["id"] = "chatcmpl-fixture";
    body["object"] = "chat.completion";
    body["created"] = 0;
    body["model"] = model;
    body["system_fingerprint"] = "fp_fixture";
    body["choices"] = nlohmann::ordered_json::array();
    body["choices"].push_back({{"index", 0},
                               {"message", {{"role", "assistant"}, {"content", content}}},
                               {"logprobs", {{"content", std::move(logprobs_content)}}},
                               {"finish_reason", "stop"}});
    return body.dump();
}

void write_five_token_exchange(const std::string& path) {
    ocrent::client::ChatRequest request;
    request.model = "gpt-4o-fixture";
    request.system_prompt = "fixture system prompt";
    request.user_prompt = "fixture user prompt";
    request.image = ocrent::client::RemoteImage{"data:image/png;base64,AAEC"};

    nlohmann::ordered_json logprobs_content = nlohmann::ordered_json::array();
    const std::vector<std::pair<std::string, double>> tokens = {
        {"H", std::log(0.5)}, {"(", std::log(0.25)}, {"p", 0.0},
        {",", std::log(0.8)}, {" q)", std::log(0.1)},
    };
    for (const auto& [token, logprob] : tokens) {
        logprobs_content.push_back(logprob_entry(token, logprob));
    }
    nlohmann::ordered_json body;
    body["id"] = "chatcmpl-fixture-5tok";
    body["object"] = "chat.completion";
    body["created"] = 0;
    body["model"] = request.model;
    body["system_fingerprint"] = "fp_fixture";
    body["choices"] = nlohmann::ordered_json::array();
    body["choices"].push_back({{"index", 0},
                               {"message", {{"role", "assistant"}, {"content", "H(p, q)"}}},
                               {"logprobs", {{"content", std::move(logprobs_content)}}},
                               {"finish_reason", "stop"}});

    nlohmann::ordered_json record;
    record["request"] = nlohmann::ordered_json::parse(ocrent::client::build_request(request));
    record["response_raw"] = body.dump();
    record["recorded_at"] = kRecordedAt;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ocrent::IoError("cannot write " + path);
    out << record.dump(2) << '\n';
    std::cout << "wrote " << path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthesize the bundled replay cache"};
    std::string config_path;
    std::vector<std::string> entry_specs;
    std::string five_token_path;
    app.add_option("--config", config_path, "sweep config TOML")->required();
    app.add_option("--entry", entry_specs, "dpi=recognized.tex:total_bits (repeatable)");
    app.add_option("--five-token", five_token_path, "also write a 5-token exchange file here");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = ocrent::experiment::load_config(config_path);
        const ocrent::client::ResponseCache cache(cfg.cache_dir, &std::cerr);
        for (const auto& spec : entry_specs) {
            const Entry entry = parse_entry(spec);
            const auto image = std::find_if(
                cfg.images.begin(), cfg.images.end(),
                [&](const ocrent::experiment::ImageEntry& e) { return e.dpi == entry.dpi; });
            if (image == cfg.images.end()) {
                throw ocrent::ValidationError("config has no image with dpi " +
                                              std::to_string(entry.dpi));
            }
            ocrent::client::ChatRequest request;
            request.model = cfg.model;
            request.system_prompt = cfg.system_prompt;
            request.user_prompt = cfg.user_prompt;
            request.image = ocrent::client::load_image_file(image->path, cfg.max_image_bytes);
            request.temperature = cfg.temperature;
            request.seed = cfg.seed;
            request.logprobs = true;
            request.top_logprobs = cfg.top_logprobs;

            const std::string raw =
                synth_response(read_file(entry.text_path), entry.total_bits, cfg.model);
            const auto exchange = ocrent::client::parse_exchange(request, raw, kRecordedAt);
            const auto path = cache.put(exchange);
            std::cout << "dpi " << entry.dpi << " -> " << path.string() << '\n';
        }
        if (!five_token_path.empty()) write_five_token_exchange(five_token_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
