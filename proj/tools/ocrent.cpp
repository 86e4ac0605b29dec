// ocrent: entropy analysis of LLM OCR runs.
//
// Subcommands: analyze (entropy report for a saved exchange), sweep (the
// resolution experiment), simulate (noisy-channel sweep), score (LaTeX
// accuracy), fano (error-bound queries). Logs go to stderr, data to stdout
// or to --out files. Exit codes: 0 success, 1 validation error, 2 I/O or
// network error, 3 failed property check under --strict.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "ocrent/channel_sim.hpp"
#include "ocrent/detail/strings.hpp"
#include "ocrent/errors.hpp"
#include "ocrent/experiment.hpp"
#include "ocrent/http_transport.hpp"
#include "ocrent/infotheory.hpp"
#include "ocrent/latex_eval.hpp"
#include "ocrent/llm_client.hpp"
#include "ocrent/token_entropy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitCheckFailed = 3;

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ocrent::IoError("cannot write " + path.string());
    out << content;
    if (!out.flush()) throw ocrent::IoError("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ocrent::IoError("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct AnalyzeArgs {
    std::string input;
    std::string estimator = "surprisal";
    std::string base = "bits";
    std::int64_t vocab_size = static_cast<std::int64_t>(ocrent::token_entropy::kDefaultVocabSize);
    std::string positions;
};

int run_analyze(const AnalyzeArgs& args) {
    if (args.vocab_size < 2) {
        throw ocrent::ValidationError("--vocab-size must be >= 2");
    }
    const auto exchange = ocrent::client::ResponseCache::load_exchange_file(args.input);
    const auto report = ocrent::token_entropy::sequence_report(
        exchange.tokens, {static_cast<std::size_t>(args.vocab_size)},
        ocrent::token_entropy::estimator_from_string(args.estimator),
        ocrent::infotheory::log_base_from_string(args.base));
    std::cout << ocrent::token_entropy::report_to_json(report).dump(2) << '\n';
    if (!args.positions.empty()) {
        write_file(args.positions, ocrent::token_entropy::positions_csv(report, exchange.tokens));
        std::cerr << "wrote " << args.positions << '\n';
    }
    return kExitOk;
}

struct SweepArgs {
    std::string config;
    std::string mode;
    std::string endpoint;
    std::string out;
    bool strict = false;
};

int run_sweep(const SweepArgs& args) {
    ocrent::experiment::SweepConfig cfg = ocrent::experiment::load_config(args.config);
    if (!args.mode.empty()) cfg.mode = ocrent::experiment::mode_from_string(args.mode);
    if (!args.endpoint.empty()) cfg.endpoint = args.endpoint;

    ocrent::experiment::SweepEnvironment env;
    std::unique_ptr<ocrent::client::HttplibTransport> transport;
    if (cfg.mode == ocrent::experiment::Mode::live) {
        const char* key = std::getenv(ocrent::client::kApiKeyEnvVar);
        if (!key || !*key) {
            throw ocrent::CredentialError(std::string("live mode needs a credential; set ") +
                                          ocrent::client::kApiKeyEnvVar);
        }
        env.api_key = key;
        transport = std::make_unique<ocrent::client::HttplibTransport>(cfg.endpoint);
        env.transport = transport.get();
    }

    const auto rows = ocrent::experiment::run_sweep(cfg, env);

    const std::filesystem::path csv_path(args.out);
    std::filesystem::path md_path = csv_path;
    md_path.replace_extension(".md");
    std::filesystem::path manifest_path = csv_path;
    manifest_path.replace_extension(".manifest.json");

    write_file(csv_path, ocrent::experiment::report_csv(rows));
    write_file(md_path, ocrent::experiment::report_markdown(rows));
    write_file(manifest_path, ocrent::experiment::run_manifest(cfg, rows).dump(2) + "\n");
    std::cerr << "wrote " << csv_path << ", " << md_path << ", " << manifest_path << '\n';

    std::size_t failed = 0;
    for (const auto& row : rows) {
        if (row.error) {
            ++failed;
            std::cerr << "dpi " << row.dpi << ": " << *row.error << '\n';
        }
    }
    if (failed == rows.size()) {
        std::cerr << "all images failed\n";
        return kExitIo;
    }

    const auto verdict = ocrent::experiment::check_monotonicity(rows);
    std::cerr << verdict.message << '\n';
    if (args.strict && verdict.status == ocrent::experiment::MonotonicityStatus::fail) {
        return kExitCheckFailed;
    }
    return kExitOk;
}

struct SimulateArgs {
    std::int64_t alphabet = 2;
    std::int64_t grid = 11;
    std::string out;
};

int run_simulate(const SimulateArgs& args) {
    if (args.alphabet < 2) throw ocrent::ValidationError("--alphabet must be >= 2");
    if (args.grid < 1) throw ocrent::ValidationError("--grid must be >= 1");
    const auto points = ocrent::channel_sim::resolution_sweep(
        static_cast<std::size_t>(args.alphabet),
        ocrent::channel_sim::uniform_grid(static_cast<std::size_t>(args.grid)));
    const std::string csv = ocrent::channel_sim::sweep_csv(points);
    if (args.out.empty()) {
        std::cout << csv;
    } else {
        write_file(args.out, csv);
        std::cerr << "wrote " << args.out << '\n';
    }
    return kExitOk;
}

struct ScoreArgs {
    std::string candidate;
    std::string reference;
};

int run_score(const ScoreArgs& args) {
    const auto candidate = ocrent::latex_eval::extract_equations(read_file(args.candidate));
    const auto reference = ocrent::latex_eval::extract_equations(read_file(args.reference));
    const auto result = ocrent::latex_eval::score(candidate, reference);
    std::cout << ocrent::latex_eval::score_to_json(result).dump(2) << '\n';
    return kExitOk;
}

struct FanoArgs {
    double h_cond = 0.0;
    std::int64_t alphabet = 2;
    std::string base = "bits";
};

int run_fano(const FanoArgs& args) {
    if (args.alphabet < 2) throw ocrent::ValidationError("--alphabet must be >= 2");
    const double p = ocrent::infotheory::fano_min_error(
        args.h_cond, static_cast<std::size_t>(args.alphabet),
        ocrent::infotheory::log_base_from_string(args.base));
    std::cout << ocrent::detail::format_real_point(p) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy analysis of LLM OCR runs"};
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    auto* analyze = app.add_subcommand("analyze", "entropy report for a saved exchange");
    analyze->add_option("--input", analyze_args.input, "cached exchange JSON")->required();
    analyze->add_option("--estimator", analyze_args.estimator,
                        "surprisal | topk | topk_lower | topk_upper");
    analyze->add_option("--base", analyze_args.base, "bits | nats");
    analyze->add_option("--vocab-size", analyze_args.vocab_size, "vocabulary size |V|");
    analyze->add_option("--positions", analyze_args.positions, "write per-position CSV here");

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "resolution sweep over labeled images");
    sweep->add_option("--config", sweep_args.config, "TOML sweep config")->required();
    sweep->add_option("--mode", sweep_args.mode, "live | replay (overrides config)");
    sweep->add_option("--endpoint", sweep_args.endpoint,
                      "chat-completions base URL (overrides config)");
    sweep->add_option("--out", sweep_args.out, "report CSV path")->required();
    sweep->add_flag("--strict", sweep_args.strict, "exit 3 when monotonicity fails");

    SimulateArgs simulate_args;
    auto* simulate = app.add_subcommand("simulate", "symmetric-channel noise sweep");
    simulate->add_option("--alphabet", simulate_args.alphabet, "alphabet size k")->required();
    simulate->add_option("--grid", simulate_args.grid, "number of noise levels in [0, 1]");
    simulate->add_option("--out", simulate_args.out, "CSV path (default stdout)");

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "LaTeX accuracy of candidate vs reference");
    score->add_option("--candidate", score_args.candidate, "candidate LaTeX file")->required();
    score->add_option("--reference", score_args.reference, "reference LaTeX file")->required();

    FanoArgs fano_args;
    auto* fano = app.add_subcommand("fano", "minimal error probability from Fano's bound");
    fano->set_help_flag("--help", "print help");  // frees -h for the --h option
    fano->add_option("--h", fano_args.h_cond, "conditional entropy")->required();
    fano->add_option("--alphabet", fano_args.alphabet, "alphabet size |Y|")->required();
    fano->add_option("--base", fano_args.base, "bits | nats");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exits 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (app.got_subcommand(analyze)) return run_analyze(analyze_args);
        if (app.got_subcommand(sweep)) return run_sweep(sweep_args);
        if (app.got_subcommand(simulate)) return run_simulate(simulate_args);
        if (app.got_subcommand(score)) return run_score(score_args);
        if (app.got_subcommand(fano)) return run_fano(fano_args);
    } catch (const ocrent::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ocrent::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ocrent::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitValidation;
}
