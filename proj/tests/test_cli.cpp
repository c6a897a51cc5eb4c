#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "metatune/config.hpp"
#include "metatune/report.hpp"
#include "support/fixtures.hpp"

using namespace metatune;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path dir = testing::make_temp_dir("cliio");
    fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
    fs::path err = dir / ("err" + std::to_string(counter) + ".txt");
    ++counter;

    std::string cmd = std::string(METATUNE_CLI_PATH) + " " + args + " >" + out.string() +
                      " 2>" + err.string();
    int status = std::system(cmd.c_str());
    CliResult result;
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out);
    result.err = slurp(err);
    return result;
}

const testing::RecordedRun& shared_run() {
    static testing::RecordedRun run =
        testing::record_benchmark_run(testing::make_temp_dir("clirun"));
    return run;
}

}  // namespace

TEST_CASE("ingest prints the instance count and level histogram") {
    fs::path dir = testing::make_temp_dir("cliingest");
    testing::write_fixture_dataset(dir / "data.jsonl", 30);

    CliResult r = run_cli("ingest " + (dir / "data.jsonl").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("ingested 30 instances from") != std::string::npos);
    CHECK(r.out.find("level,count") != std::string::npos);
    CHECK(r.out.find("1,6") != std::string::npos);
}

TEST_CASE("ingest rejects bad records with the offending line") {
    fs::path dir = testing::make_temp_dir("clibad");
    std::ofstream f(dir / "bad.jsonl");
    f << R"({"id":"a","problem":"p","solution":"s","answer":"1","level":2})" << "\n";
    f << R"({"id":"b","problem":"p","solution":"s","answer":"1","level":9})" << "\n";
    f.close();

    CliResult r = run_cli("ingest " + (dir / "bad.jsonl").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find("bad.jsonl:2") != std::string::npos);

    CliResult missing = run_cli("ingest " + (dir / "absent.jsonl").string());
    CHECK(missing.code == 2);
}

TEST_CASE("sweep from a recorded config reproduces the metrics byte for byte") {
    const testing::RecordedRun& run = shared_run();
    fs::path fresh = testing::make_temp_dir("clisweep");

    CliResult r = run_cli("sweep --config " + (run.run_dir / "config.json").string() +
                          " --out " + fresh.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("Context Size") != std::string::npos);
    CHECK(slurp(fresh / "metrics.csv") == slurp(run.run_dir / "metrics.csv"));
}

TEST_CASE("run executes a single context size") {
    const testing::RecordedRun& run = shared_run();
    fs::path fresh = testing::make_temp_dir("clisingle");

    CliResult r = run_cli("run --config " + (run.run_dir / "config.json").string() +
                          " --k 10 --out " + fresh.string());
    CHECK(r.code == 0);
    auto rows = parse_metrics_csv(slurp(fresh / "metrics.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].context_size == 10);
    CHECK(rows[0].accuracy_hundredths == 6556);
    CHECK(rows[1].accuracy_hundredths == 7111);
    CHECK(rows[1].delta_hundredths == 556);

    CliResult too_big = run_cli("run --config " + (run.run_dir / "config.json").string() +
                                " --k 150 --out " + fresh.string() + "2");
    CHECK(too_big.code == 2);
}

TEST_CASE("replay confirms the recorded run") {
    const testing::RecordedRun& run = shared_run();

    CliResult r = run_cli("replay --transcript " + run.run_dir.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("replay matches the recorded metrics byte for byte") !=
          std::string::npos);
    CHECK(fs::exists(run.run_dir / "replay" / "metrics.csv"));
}

TEST_CASE("report prints the table for a finished run") {
    const testing::RecordedRun& run = shared_run();

    CliResult r = run_cli("report --run " + run.run_dir.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("Context Size") != std::string::npos);
    CHECK(r.out.find("65.26%") != std::string::npos);
    CHECK(r.out.find("+5.56") != std::string::npos);

    CliResult missing = run_cli("report --run " + run.run_dir.string() + "-nope");
    CHECK(missing.code == 2);
}

TEST_CASE("a backend that cannot answer maps to the provider exit code") {
    const testing::RecordedRun& run = shared_run();
    fs::path dir = testing::make_temp_dir("clidead");

    ExperimentConfig broken = run.config;
    std::ofstream(dir / "empty.ndjson").close();
    broken.candidate.script_path = (dir / "empty.ndjson").string();
    broken.judge.script_path = (dir / "empty.ndjson").string();
    broken.output_dir = (dir / "out").string();
    save_config(broken, dir / "broken.json");

    CliResult r = run_cli("sweep --config " + (dir / "broken.json").string());
    CHECK(r.code == 3);
    CHECK(r.err.find("error: k=5") != std::string::npos);
}

TEST_CASE("the cli requires a subcommand") {
    CliResult r = run_cli("");
    CHECK(r.code != 0);
}
