#pragma once

// Resolution-sweep harness: runs the OCR prompt over a set of dpi-labeled
// page images (live against an endpoint, or replayed from the response
// cache), computes per-image entropy reports, optionally scores the
// recognized LaTeX against a reference, and checks whether mean entropy per
// token is nonincreasing in resolution. dpi is an opaque ordering label; no
// image inspection happens here.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ocrent/detail/strings.hpp"
#include "ocrent/errors.hpp"
#include "ocrent/latex_eval.hpp"
#include "ocrent/llm_client.hpp"
#include "ocrent/token_entropy.hpp"
#include "ocrent/toml_lite.hpp"

namespace ocrent::experiment {

using infotheory::LogBase;
using token_entropy::Estimator;

// Default prompts for the OCR task, passed verbatim unless the config
// overrides them.
inline constexpr const char* kDefaultSystemPrompt = R"PROMPT(
You are an advanced Optical Character Recognition (OCR) system
designed specifically for mathematical content, integrated with
LaTeX conversion and verification capabilities.
Your primary tasks are:

1. **Accurately recognize mathematical equations** from provided
 images of research paper pages. This includes handling complex
  mathematical symbols, operators, fractions, integrals, summations,
  subscripts, superscripts, and other mathematical notations.

2. **Convert the recognized equations** into syntactically correct
 and semantically accurate LaTeX code. "Semantically accurate" means
  that the LaTeX code must exactly match the original equation
   in terms of symbols, structure, and formatting
    as it is visually represented.

3. **Provide the recognized equations
 in the following LaTeX output format**:
```
\begin{equation}
[LaTeX code of the equation] \tag{equation number if present}
\end{equation}
```
- Ensure that each equation is formatted properly
 and includes the correct LaTeX syntax.
- The "equation number" should be included only
 if it appears in the image.

4. **In your response**, provide only the LaTeX code in
 the specified format without any explanations or comments.
)PROMPT";

inline constexpr const char* kDefaultUserPrompt = R"PROMPT(
Process the attached image of a research paper page and extract
 all mathematical equations present.
Provide only the LaTeX code in the following output format.
)PROMPT";

enum class Mode { live, replay };

inline const char* to_string(Mode m) { return m == Mode::live ? "live" : "replay"; }

inline Mode mode_from_string(const std::string& s) {
    if (s == "live") return Mode::live;
    if (s == "replay") return Mode::replay;
    throw ValidationError("unknown mode '" + s + "' (expected live or replay)");
}

struct ImageEntry {
    std::filesystem::path path;
    int dpi = 0;
};

struct SweepConfig {
    std::vector<ImageEntry> images;
    std::string system_prompt = kDefaultSystemPrompt;
    std::string user_prompt = kDefaultUserPrompt;
    std::string model = "gpt-4o";
    Estimator estimator = Estimator::surprisal;
    LogBase base = LogBase::bits;
    std::optional<std::filesystem::path> reference_latex;
    Mode mode = Mode::replay;

    std::string endpoint = client::kDefaultEndpoint;
    std::filesystem::path cache_dir = "cache";
    double temperature = 0.0;
    std::int64_t seed = 12345;
    int top_logprobs = 20;
    std::size_t vocab_size = token_entropy::kDefaultVocabSize;
    std::size_t max_image_bytes = client::kDefaultMaxImageBytes;
    bool parallel = false;
    int max_in_flight = 2;
};

namespace detail {

inline const toml_lite::Value& require(const toml_lite::Table& root, const std::string& path) {
    const toml_lite::Value* v = toml_lite::find(root, path);
    if (!v) throw ValidationError("config is missing required key '" + path + "'");
    return *v;
}

template <typename F>
auto read_key(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError("config key '" + path + "': " + e.what());
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base,
                                     const std::filesystem::path& p) {
    return p.is_absolute() ? p : base / p;
}

}  // namespace detail

// Loads a TOML sweep config; relative paths resolve against the config file's
// directory.
inline SweepConfig load_config(const std::filesystem::path& config_path) {
    const toml_lite::Table root = toml_lite::parse_file(config_path.string());
    const std::filesystem::path base_dir = config_path.parent_path();
    SweepConfig cfg;

    const toml_lite::Value& images = detail::require(root, "sweep.images");
    detail::read_key("sweep.images", [&] {
        for (const toml_lite::Value& item : images.as_array()) {
            const toml_lite::Table& t = item.as_table();
            const auto path_it = t.find("path");
            const auto dpi_it = t.find("dpi");
            if (path_it == t.end() || dpi_it == t.end()) {
                throw ValidationError("each image needs 'path' and 'dpi'");
            }
            ImageEntry entry;
            entry.path = detail::resolve(base_dir, path_it->second.as_string());
            entry.dpi = static_cast<int>(dpi_it->second.as_integer());
            if (entry.dpi <= 0) throw ValidationError("dpi labels must be positive");
            cfg.images.push_back(std::move(entry));
        }
        return 0;
    });
    if (cfg.images.empty()) throw ValidationError("config key 'sweep.images': list is empty");
    for (std::size_t i = 0; i < cfg.images.size(); ++i) {
        for (std::size_t j = i + 1; j < cfg.images.size(); ++j) {
            if (cfg.images[i].dpi == cfg.images[j].dpi) {
                throw ValidationError("config key 'sweep.images': duplicate dpi label " +
                                      std::to_string(cfg.images[i].dpi));
            }
        }
    }

    const auto opt_string = [&](const std::string& path, std::string& out) {
        if (const auto* v = toml_lite::find(root, path)) {
            detail::read_key(path, [&] {
                out = v->as_string();
                return 0;
            });
        }
    };
    opt_string("sweep.model", cfg.model);
    opt_string("prompts.system", cfg.system_prompt);
    opt_string("prompts.user", cfg.user_prompt);
    opt_string("client.endpoint", cfg.endpoint);

    if (const auto* v = toml_lite::find(root, "sweep.estimator")) {
        detail::read_key("sweep.estimator", [&] {
            cfg.estimator = token_entropy::estimator_from_string(v->as_string());
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "sweep.base")) {
        detail::read_key("sweep.base", [&] {
            cfg.base = infotheory::log_base_from_string(v->as_string());
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "sweep.mode")) {
        detail::read_key("sweep.mode", [&] {
            cfg.mode = mode_from_string(v->as_string());
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "sweep.reference_latex")) {
        detail::read_key("sweep.reference_latex", [&] {
            cfg.reference_latex = detail::resolve(base_dir, v->as_string());
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "client.cache_dir")) {
        detail::read_key("client.cache_dir", [&] {
            cfg.cache_dir = detail::resolve(base_dir, v->as_string());
            return 0;
        });
    } else {
        cfg.cache_dir = base_dir / "cache";
    }
    if (const auto* v = toml_lite::find(root, "client.temperature")) {
        detail::read_key("client.temperature", [&] {
            cfg.temperature = v->as_float();
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "client.seed")) {
        detail::read_key("client.seed", [&] {
            cfg.seed = v->as_integer();
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "client.top_logprobs")) {
        detail::read_key("client.top_logprobs", [&] {
            cfg.top_logprobs = static_cast<int>(v->as_integer());
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "client.vocab_size")) {
        detail::read_key("client.vocab_size", [&] {
            cfg.vocab_size = static_cast<std::size_t>(v->as_integer());
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "client.max_image_bytes")) {
        detail::read_key("client.max_image_bytes", [&] {
            cfg.max_image_bytes = static_cast<std::size_t>(v->as_integer());
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "client.parallel")) {
        detail::read_key("client.parallel", [&] {
            cfg.parallel = v->as_bool();
            return 0;
        });
    }
    if (const auto* v = toml_lite::find(root, "client.max_in_flight")) {
        detail::read_key("client.max_in_flight", [&] {
            cfg.max_in_flight = static_cast<int>(v->as_integer());
            return 0;
        });
    }
    return cfg;
}

// One line of the report. Entropies are always in bits here, whatever base
// the per-position computation used.
struct ReportRow {
    int dpi = 0;
    std::size_t token_count = 0;
    double total_entropy_bits = 0.0;
    double mean_per_token_bits = 0.0;
    double vocab_normalized = 0.0;
    std::optional<double> accuracy_score;

    // Bookkeeping for the manifest.
    std::string image;
    std::string cache_key;
    bool cache_hit = false;
    std::optional<std::string> error;  // per-image failure marker
};

struct SweepEnvironment {
    client::HttpTransport* transport = nullptr;  // required in live mode
    std::string api_key;                         // required in live mode
    client::RetryPolicy retry;
};

namespace detail {

inline client::ChatRequest request_for(const SweepConfig& cfg, const ImageEntry& entry) {
    client::ChatRequest request;
    request.model = cfg.model;
    request.system_prompt = cfg.system_prompt;
    request.user_prompt = cfg.user_prompt;
    request.image = client::load_image_file(entry.path, cfg.max_image_bytes);
    request.temperature = cfg.temperature;
    request.seed = cfg.seed;
    request.logprobs = true;
    request.top_logprobs = cfg.top_logprobs;
    return request;
}

inline ReportRow process_image(const SweepConfig& cfg, const ImageEntry& entry,
                               const std::vector<latex_eval::EquationBlock>* reference,
                               const client::ResponseCache& cache,
                               const SweepEnvironment& env) {
    ReportRow row;
    row.dpi = entry.dpi;
    row.image = entry.path.string();
    try {
        const client::ChatRequest request = request_for(cfg, entry);
        row.cache_key = client::cache_key(request);

        std::optional<client::ChatExchange> exchange = cache.get(row.cache_key);
        row.cache_hit = exchange.has_value();
        if (!exchange) {
            if (cfg.mode == Mode::replay) {
                throw ValidationError("replay cache miss for key " + row.cache_key);
            }
            client::ClientConfig client_config;
            client_config.api_key = env.api_key;
            client_config.retry = env.retry;
            exchange = client::send(request, *env.transport, client_config);
            cache.put(*exchange);
        }

        const token_entropy::SequenceEntropyReport report = token_entropy::sequence_report(
            exchange->tokens, {cfg.vocab_size}, cfg.estimator, cfg.base);
        const double to_bits = cfg.base == LogBase::nats ? 1.0 / std::numbers::ln2 : 1.0;
        row.token_count = report.token_count;
        row.total_entropy_bits = report.total * to_bits;
        row.mean_per_token_bits = report.mean_per_token * to_bits;
        row.vocab_normalized = report.vocab_normalized;

        if (reference) {
            const auto candidate = latex_eval::extract_equations(exchange->response_text);
            row.accuracy_score = latex_eval::score(candidate, *reference).document_score;
        }
    } catch (const Error& e) {
        row.error = e.what();
    } catch (const std::exception& e) {
        // Keeps worker threads alive on anything unexpected.
        row.error = e.what();
    }
    return row;
}

}  // namespace detail

// One row per image, ordered by descending dpi. Per-image failures land in
// the row's error marker instead of aborting the sweep.
inline std::vector<ReportRow> run_sweep(const SweepConfig& cfg,
                                        const SweepEnvironment& env = {}) {
    if (cfg.images.empty()) throw ValidationError("sweep needs at least one image");
    if (cfg.mode == Mode::live) {
        if (env.api_key.empty()) {
            throw CredentialError(std::string("live mode needs a credential; set ") +
                                  client::kApiKeyEnvVar);
        }
        if (!env.transport) throw ValidationError("live mode needs a transport");
    }

    std::vector<ImageEntry> ordered = cfg.images;
    std::sort(ordered.begin(), ordered.end(),
              [](const ImageEntry& a, const ImageEntry& b) { return a.dpi > b.dpi; });

    std::optional<std::vector<latex_eval::EquationBlock>> reference;
    if (cfg.reference_latex) {
        std::ifstream in(*cfg.reference_latex, std::ios::binary);
        if (!in) throw IoError("cannot read reference LaTeX: " + cfg.reference_latex->string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        reference = latex_eval::extract_equations(buffer.str());
    }
    const auto* reference_ptr = reference ? &*reference : nullptr;

    const client::ResponseCache cache(cfg.cache_dir, &std::cerr);
    std::vector<ReportRow> rows(ordered.size());

    if (cfg.mode == Mode::live && cfg.parallel && ordered.size() > 1) {
        // Bounded parallelism; row order stays fixed by index.
        std::counting_semaphore<64> slots(std::clamp(cfg.max_in_flight, 1, 64));
        std::vector<std::thread> workers;
        workers.reserve(ordered.size());
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            workers.emplace_back([&, i] {
                slots.acquire();
                rows[i] = detail::process_image(cfg, ordered[i], reference_ptr, cache, env);
                slots.release();
            });
        }
        for (auto& w : workers) w.join();
    } else {
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            rows[i] = detail::process_image(cfg, ordered[i], reference_ptr, cache, env);
        }
    }
    return rows;
}

// CSV with the fixed header; rows that failed are omitted (the manifest keeps
// them). A missing accuracy is an empty cell, not 0.
inline std::string report_csv(const std::vector<ReportRow>& rows) {
    std::string out =
        "dpi,tokens,total_entropy_bits,mean_entropy_per_token_bits,vocab_normalized,accuracy\n";
    for (const auto& row : rows) {
        if (row.error) continue;
        out += std::to_string(row.dpi);
        out += ',';
        out += std::to_string(row.token_count);
        out += ',';
        out += ocrent::detail::format_real(row.total_entropy_bits);
        out += ',';
        out += ocrent::detail::format_real(row.mean_per_token_bits);
        out += ',';
        out += ocrent::detail::format_real(row.vocab_normalized);
        out += ',';
        if (row.accuracy_score) out += ocrent::detail::format_real(*row.accuracy_score);
        out += '\n';
    }
    return out;
}

inline std::string report_markdown(const std::vector<ReportRow>& rows) {
    std::string out =
        "| dpi | tokens | total_entropy_bits | mean_entropy_per_token_bits | accuracy |\n"
        "| ---: | ---: | ---: | ---: | :--- |\n";
    for (const auto& row : rows) {
        if (row.error) continue;
        out += "| " + std::to_string(row.dpi);
        out += " | " + std::to_string(row.token_count);
        out += " | " + ocrent::detail::format_real(row.total_entropy_bits, 6);
        out += " | " + ocrent::detail::format_real(row.mean_per_token_bits, 6);
        out += " | " + (row.accuracy_score
                            ? ocrent::detail::format_real(*row.accuracy_score, 6)
                            : std::string());
        out += " |\n";
    }
    return out;
}

// Cache keys used by one run, including failed entries.
inline nlohmann::ordered_json run_manifest(const SweepConfig& cfg,
                                           const std::vector<ReportRow>& rows) {
    nlohmann::ordered_json manifest;
    manifest["mode"] = to_string(cfg.mode);
    manifest["model"] = cfg.model;
    manifest["estimator"] = token_entropy::to_string(cfg.estimator);
    manifest["base"] = infotheory::to_string(cfg.base);
    manifest["vocab_size"] = cfg.vocab_size;
    manifest["entries"] = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json entry;
        entry["dpi"] = row.dpi;
        entry["image"] = row.image;
        entry["cache_key"] = row.cache_key;
        entry["cache_hit"] = row.cache_hit;
        entry["error"] = row.error ? nlohmann::ordered_json(*row.error)
                                   : nlohmann::ordered_json(nullptr);
        manifest["entries"].push_back(std::move(entry));
    }
    return manifest;
}

enum class MonotonicityStatus { pass, fail, not_applicable };

struct MonotonicityVerdict {
    MonotonicityStatus status = MonotonicityStatus::not_applicable;
    std::optional<std::pair<int, int>> violating_dpi;  // (higher dpi, lower dpi)
    std::string message;
};

// Pass iff mean entropy per token is nonincreasing in dpi (nonstrict).
// Needs at least two clean rows; reports the first violating adjacent pair.
inline MonotonicityVerdict check_monotonicity(const std::vector<ReportRow>& rows) {
    std::vector<const ReportRow*> clean;
    for (const auto& row : rows) {
        if (!row.error) clean.push_back(&row);
    }
    std::sort(clean.begin(), clean.end(),
              [](const ReportRow* a, const ReportRow* b) { return a->dpi > b->dpi; });

    MonotonicityVerdict verdict;
    if (clean.size() < 2) {
        verdict.status = MonotonicityStatus::not_applicable;
        verdict.message = "monotonicity: not applicable (fewer than 2 rows)";
        return verdict;
    }
    for (std::size_t i = 0; i + 1 < clean.size(); ++i) {
        const ReportRow* hi = clean[i];
        const ReportRow* lo = clean[i + 1];
        if (hi->mean_per_token_bits > lo->mean_per_token_bits) {
            verdict.status = MonotonicityStatus::fail;
            verdict.violating_dpi = {hi->dpi, lo->dpi};
            verdict.message = "monotonicity: FAIL at dpi pair (" + std::to_string(hi->dpi) +
                              ", " + std::to_string(lo->dpi) + "): mean " +
                              ocrent::detail::format_real(hi->mean_per_token_bits, 6) + " > " +
                              ocrent::detail::format_real(lo->mean_per_token_bits, 6);
            return verdict;
        }
    }
    verdict.status = MonotonicityStatus::pass;
    verdict.message = "monotonicity: pass (mean entropy per token nonincreasing in dpi)";
    return verdict;
}

}  // namespace ocrent::experiment
