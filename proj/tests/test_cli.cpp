#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

#include "ocrent/llm_client.hpp"

namespace {

const std::string kCli{OCRENT_CLI_BIN};
const std::filesystem::path kFixtures{OCRENT_FIXTURES_DIR};

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::filesystem::path temp_dir() {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("ocrent_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

CliResult run_cli(const std::string& args, const std::string& prefix = "") {
    const auto dir = temp_dir();
    const auto out_path = dir / "out.txt";
    const auto err_path = dir / "err.txt";
    const std::string command = prefix + kCli + " " + args + " >" + out_path.string() +
                                " 2>" + err_path.string();
    const int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    std::filesystem::remove_all(dir);
    return result;
}

}  // namespace

TEST_CASE("help exits 0 for the app and every subcommand") {
    CHECK(run_cli("--help").exit_code == 0);
    for (const std::string sub : {"analyze", "sweep", "simulate", "score", "fano"}) {
        const auto result = run_cli(sub + " --help");
        CHECK(result.exit_code == 0);
        CHECK_FALSE(result.out.empty());
    }
}

TEST_CASE("unknown flags and subcommands exit 1") {
    CHECK(run_cli("fano --h 0 --alphabet 26 --bogus 1").exit_code == 1);
    CHECK(run_cli("frobnicate").exit_code == 1);
    CHECK(run_cli("").exit_code == 1);  // a subcommand is required
}

TEST_CASE("fano subcommand") {
    const auto zero = run_cli("fano --h 0 --alphabet 26");
    CHECK(zero.exit_code == 0);
    CHECK(zero.out == "0.0\n");

    const auto half = run_cli("fano --h 1 --alphabet 2");
    CHECK(half.exit_code == 0);
    CHECK(half.out.rfind("0.5", 0) == 0);

    // Infeasible query.
    const auto infeasible = run_cli("fano --h 3 --alphabet 2");
    CHECK(infeasible.exit_code == 1);
    CHECK(infeasible.err.find("infeasible") != std::string::npos);

    // Inverse of the binary entropy at 0.469 bits sits at p ~ 0.1.
    const auto inverse = run_cli("fano --h 0.469 --alphabet 2 --base bits");
    CHECK(inverse.exit_code == 0);
    CHECK(std::abs(std::stod(inverse.out) - 0.1) < 1e-4);
    CHECK(run_cli("fano --h 1 --alphabet 1").exit_code == 1);
}

TEST_CASE("simulate subcommand emits the sweep CSV") {
    const auto result = run_cli("simulate --alphabet 2 --grid 11");
    CHECK(result.exit_code == 0);
    std::istringstream lines(result.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 12);
    CHECK(rows[0] == "noise_level,mutual_information_bits,conditional_entropy_bits");
    CHECK(rows[1] == "0,1,0");
    CHECK(rows[11] == "1,0,1");

    CHECK(run_cli("simulate --alphabet 1 --grid 3").exit_code == 1);

    const auto dir = temp_dir();
    const auto out = dir / "sweep.csv";
    CHECK(run_cli("simulate --alphabet 4 --grid 5 --out " + out.string()).exit_code == 0);
    CHECK(slurp(out).rfind("noise_level,", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("score subcommand") {
    const std::string doc = (kFixtures / "recognized/recognized_300dpi.tex").string();
    const auto result = run_cli("score --candidate " + doc + " --reference " + doc);
    CHECK(result.exit_code == 0);
    const auto j = nlohmann::json::parse(result.out);
    CHECK(j["document_score"] == 1.0);
    CHECK(j["unmatched_reference"] == 0);

    const std::string other = (kFixtures / "recognized/recognized_150dpi.tex").string();
    const auto cross = run_cli("score --candidate " + other + " --reference " + doc);
    CHECK(cross.exit_code == 0);
    CHECK(nlohmann::json::parse(cross.out)["document_score"].get<double>() < 1.0);

    CHECK(run_cli("score --candidate /nonexistent --reference " + doc).exit_code == 2);
}

TEST_CASE("analyze subcommand") {
    const std::string input = (kFixtures / "exchange_5tok.json").string();

    const auto result = run_cli("analyze --input " + input);
    REQUIRE(result.exit_code == 0);
    const auto report = nlohmann::json::parse(result.out);
    CHECK(report["estimator"] == "surprisal");
    CHECK(report["base"] == "bits");
    CHECK(report["token_count"] == 5);

    // Total must equal the sum recomputed from the fixture's raw logprobs.
    const auto fixture = nlohmann::json::parse(slurp(input));
    const auto raw = nlohmann::json::parse(fixture["response_raw"].get<std::string>());
    double expected_bits = 0.0;
    for (const auto& entry : raw["choices"][0]["logprobs"]["content"]) {
        expected_bits -= entry["logprob"].get<double>() / std::numbers::ln2;
    }
    CHECK(std::abs(report["total"].get<double>() - expected_bits) < 1e-9);

    // Per-position CSV.
    const auto dir = temp_dir();
    const auto positions = dir / "positions.csv";
    const auto with_positions =
        run_cli("analyze --input " + input + " --positions " + positions.string());
    CHECK(with_positions.exit_code == 0);
    const std::string csv = slurp(positions);
    CHECK(csv.rfind("index,token,h_bits\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

    // Estimator and base flags.
    CHECK(run_cli("analyze --input " + input + " --estimator topk --base nats").exit_code ==
          0);
    CHECK(run_cli("analyze --input " + input + " --estimator bogus").exit_code == 1);
    CHECK(run_cli("analyze --input " + input + " --vocab-size 1").exit_code == 1);
    CHECK(run_cli("analyze --input /nonexistent.json").exit_code == 2);

    // Malformed exchange file: validation exit with a byte offset.
    const auto broken = dir / "broken.json";
    std::ofstream(broken) << "{\"request\": 3";
    const auto parse_fail = run_cli("analyze --input " + broken.string());
    CHECK(parse_fail.exit_code == 1);
    CHECK(parse_fail.err.find("byte") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("analyze reports zero total for an all-certain exchange") {
    ocrent::client::ChatRequest request;
    request.system_prompt = "s";
    request.user_prompt = "u";
    request.image = ocrent::client::RemoteImage{"data:image/png;base64,AAEC"};

    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const char* text : {"a", "b", "c"}) {
        entries.push_back({{"token", text},
                           {"logprob", 0.0},
                           {"top_logprobs", {{{"token", text}, {"logprob", 0.0}}}}});
    }
    nlohmann::ordered_json body;
    body["choices"] = nlohmann::ordered_json::array();
    body["choices"].push_back({{"index", 0},
                               {"message", {{"role", "assistant"}, {"content", "abc"}}},
                               {"logprobs", {{"content", entries}}},
                               {"finish_reason", "stop"}});

    nlohmann::ordered_json record;
    record["request"] =
        nlohmann::ordered_json::parse(ocrent::client::build_request(request));
    record["response_raw"] = body.dump();
    record["recorded_at"] = "t";

    const auto dir = temp_dir();
    const auto path = dir / "certain.json";
    std::ofstream(path) << record.dump();
    const auto result = run_cli("analyze --input " + path.string());
    REQUIRE(result.exit_code == 0);
    const auto report = nlohmann::json::parse(result.out);
    CHECK(report["total"] == 0.0);
    CHECK(report["mean_per_token"] == 0.0);
    CHECK(report["vocab_normalized"] == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cache files written by sweep feed analyze directly") {
    std::filesystem::path cache_file;
    for (const auto& entry :
         std::filesystem::directory_iterator(kFixtures / "replay_cache")) {
        if (entry.path().extension() == ".json") {
            cache_file = entry.path();
            break;
        }
    }
    REQUIRE_FALSE(cache_file.empty());
    const auto result = run_cli("analyze --input " + cache_file.string());
    REQUIRE(result.exit_code == 0);
    const auto report = nlohmann::json::parse(result.out);
    CHECK(report["token_count"].get<int>() > 0);
    CHECK(report["total"].get<double>() > 0.0);
}

TEST_CASE("sweep replay over the bundled fixtures") {
    const auto dir = temp_dir();
    const auto out = dir / "report.csv";
    const std::string config = (kFixtures / "sweep_replay.toml").string();

    const auto result =
        run_cli("sweep --config " + config + " --mode replay --out " + out.string());
    INFO(result.err);
    REQUIRE(result.exit_code == 0);

    const std::string csv = slurp(out);
    CHECK(csv.rfind("dpi,tokens,total_entropy_bits,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 rows

    // Mean-per-token column nondecreasing as dpi drops.
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    double previous_mean = -1.0;
    int previous_dpi = 1 << 30;
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string dpi, tokens, total, mean;
        std::getline(cells, dpi, ',');
        std::getline(cells, tokens, ',');
        std::getline(cells, total, ',');
        std::getline(cells, mean, ',');
        CHECK(std::stoi(dpi) < previous_dpi);
        CHECK(std::stod(mean) >= previous_mean);
        previous_dpi = std::stoi(dpi);
        previous_mean = std::stod(mean);
    }

    // Markdown and manifest land next to the CSV.
    CHECK(std::filesystem::exists(dir / "report.md"));
    CHECK(std::filesystem::exists(dir / "report.manifest.json"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "report.manifest.json"));
    CHECK(manifest["entries"].size() == 4);
    CHECK(result.err.find("monotonicity: pass") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep failure modes") {
    const auto dir = temp_dir();
    const auto out = (dir / "r.csv").string();

    // Bad TOML names the failing key.
    const auto bad = dir / "bad.toml";
    std::ofstream(bad) << "[sweep]\nmodel = \"m\"\n";
    const auto bad_result = run_cli("sweep --config " + bad.string() + " --out " + out);
    CHECK(bad_result.exit_code == 1);
    CHECK(bad_result.err.find("sweep.images") != std::string::npos);

    // Live mode without the credential: exit 2 before any network call.
    const std::string config = (kFixtures / "sweep_replay.toml").string();
    const auto no_key = run_cli("sweep --config " + config + " --mode live --out " + out,
                                "env -u OCR_ENTROPY_API_KEY ");
    CHECK(no_key.exit_code == 2);
    CHECK(no_key.err.find("OCR_ENTROPY_API_KEY") != std::string::npos);

    // A malformed --endpoint override is rejected before any connection.
    const auto bad_endpoint =
        run_cli("sweep --config " + config + " --mode live --endpoint not-a-url --out " + out,
                "env OCR_ENTROPY_API_KEY=k ");
    CHECK(bad_endpoint.exit_code == 1);
    CHECK(bad_endpoint.err.find("http") != std::string::npos);

    // Replay against an empty cache: every row fails, nonzero exit.
    const auto lonely = dir / "lonely.toml";
    std::ofstream(lonely) << "[sweep]\nimages = [ { path = \""
                          << (kFixtures / "images/page_300dpi.png").string()
                          << "\", dpi = 300 } ]\n[client]\ncache_dir = \""
                          << (dir / "empty_cache").string() << "\"\n";
    const auto missed = run_cli("sweep --config " + lonely.string() + " --out " + out);
    CHECK(missed.exit_code == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep --strict exits 3 when monotonicity fails") {
    // Same images and cache, dpi labels swapped: the 300-labeled image now
    // carries the high-entropy recording, so the mean increases with dpi.
    const auto dir = temp_dir();
    const auto config = dir / "swapped.toml";
    std::ofstream(config)
        << "[sweep]\n"
        << "images = [\n"
        << "  { path = \"" << (kFixtures / "images/page_300dpi.png").string()
        << "\", dpi = 72 },\n"
        << "  { path = \"" << (kFixtures / "images/page_72dpi.png").string()
        << "\", dpi = 300 },\n"
        << "]\n"
        << "mode = \"replay\"\n"
        << "[client]\ncache_dir = \"" << (kFixtures / "replay_cache").string() << "\"\n";

    const auto out = (dir / "r.csv").string();
    const auto relaxed = run_cli("sweep --config " + config.string() + " --out " + out);
    CHECK(relaxed.exit_code == 0);  // reported but not enforced
    CHECK(relaxed.err.find("monotonicity: FAIL") != std::string::npos);

    const auto strict =
        run_cli("sweep --config " + config.string() + " --strict --out " + out);
    CHECK(strict.exit_code == 3);
    std::filesystem::remove_all(dir);
}
