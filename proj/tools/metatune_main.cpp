#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "metatune/config.hpp"
#include "metatune/dataset.hpp"
#include "metatune/errors.hpp"
#include "metatune/experiment.hpp"
#include "metatune/report.hpp"

namespace fs = std::filesystem;
using namespace metatune;

namespace {

int run_ingest(const std::string& path, const std::string& format) {
    TaskSet set = ingest(path, format);
    std::cout << "ingested " << set.size() << " instances from " << path << "\n";
    std::cout << histogram_csv(level_histogram(set));
    return 0;
}

// Loads config, materializes the working subsample, snapshots everything a
// later replay needs into the output directory, and runs the sweep.
int run_sweep(ExperimentConfig config, const std::string& out_override,
              const std::optional<fs::path>& replay_dir) {
    if (!out_override.empty()) config.output_dir = out_override;
    config.dataset.path = fs::absolute(config.dataset.path).string();
    validate_experiment_config(config);

    TaskSet full = ingest(config.dataset.path, config.dataset.format);
    TaskSet working = subsample(full, config.dataset.subsample_n, config.dataset.seed);

    const fs::path out_dir(config.output_dir);
    save_config(config, out_dir / "config.json");
    write_text_file(out_dir / "histogram.csv", histogram_csv(level_histogram(working)));

    ExperimentRuntime runtime = build_runtime(config, out_dir, replay_dir);
    SweepResult result = sweep(working, config.context_sizes, runtime);
    std::cout << result.table;

    if (result.runs.empty() && !result.failures.empty()) {
        for (const auto& failure : result.failures) {
            std::cerr << "error: k=" << failure.k << ": " << failure.message << "\n";
        }
        bool any_provider = false;
        for (const auto& failure : result.failures) any_provider |= failure.provider_error;
        return any_provider ? 3 : 2;
    }
    return 0;
}

int run_replay(const fs::path& run_dir, const std::string& out_override) {
    ExperimentConfig config = load_config(run_dir / "config.json");
    std::string out =
        out_override.empty() ? (run_dir / "replay").string() : out_override;

    int code = run_sweep(config, out, run_dir / "transcripts");
    if (code != 0) return code;

    const fs::path original = run_dir / "metrics.csv";
    if (fs::exists(original)) {
        std::string recorded = read_text_file(original);
        std::string replayed = read_text_file(fs::path(out) / "metrics.csv");
        if (recorded == replayed) {
            std::cout << "replay matches the recorded metrics byte for byte\n";
        } else {
            std::cerr << "error: replay diverges from the recorded metrics\n";
            return 1;
        }
    }
    return 0;
}

int run_report(const fs::path& run_dir) {
    auto rows = parse_metrics_csv(read_text_file(run_dir / "metrics.csv"));
    std::cout << metrics_table(rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metatuning harness: prompt-state training and evaluation for math tasks"};
    app.require_subcommand(1);

    std::string dataset_path;
    std::string dataset_format = "jsonl";
    auto* ingest_cmd = app.add_subcommand("ingest", "validate a dataset file and print a summary");
    ingest_cmd->add_option("path", dataset_path, "newline-delimited JSON dataset")->required();
    ingest_cmd->add_option("--format", dataset_format, "record format (jsonl)");

    std::string config_path;
    std::string out_override;
    int k = 0;
    auto* run_cmd = app.add_subcommand("run", "run one experiment at a single context size");
    run_cmd->add_option("--config", config_path, "experiment config file")->required();
    run_cmd->add_option("--k", k, "train context size")->required();
    run_cmd->add_option("--out", out_override, "output directory (overrides config)");

    std::string sweep_config_path;
    std::string sweep_out_override;
    auto* sweep_cmd = app.add_subcommand("sweep", "run the experiment across all context sizes");
    sweep_cmd->add_option("--config", sweep_config_path, "experiment config file")->required();
    sweep_cmd->add_option("--out", sweep_out_override, "output directory (overrides config)");

    std::string transcript_dir;
    std::string replay_out;
    auto* replay_cmd =
        app.add_subcommand("replay", "re-run a recorded experiment from its transcripts");
    replay_cmd->add_option("--transcript", transcript_dir, "recorded run directory")->required();
    replay_cmd->add_option("--out", replay_out, "output directory for the replayed run");

    std::string report_dir;
    auto* report_cmd = app.add_subcommand("report", "print the results table for a finished run");
    report_cmd->add_option("--run", report_dir, "run directory containing metrics.csv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ingest_cmd)) {
            return run_ingest(dataset_path, dataset_format);
        }
        if (app.got_subcommand(run_cmd)) {
            if (k <= 0) throw ValidationError("--k must be positive");
            ExperimentConfig config = load_config(config_path);
            config.context_sizes = {static_cast<size_t>(k)};
            return run_sweep(std::move(config), out_override, std::nullopt);
        }
        if (app.got_subcommand(sweep_cmd)) {
            return run_sweep(load_config(sweep_config_path), sweep_out_override, std::nullopt);
        }
        if (app.got_subcommand(replay_cmd)) {
            return run_replay(transcript_dir, replay_out);
        }
        if (app.got_subcommand(report_cmd)) {
            return run_report(report_dir);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ProviderError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
