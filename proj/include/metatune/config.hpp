#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metatune/engine.hpp"
#include "metatune/judge.hpp"
#include "metatune/provider.hpp"

namespace metatune {

struct DatasetConfig {
    std::string path;
    std::string format = "jsonl";
    size_t subsample_n = 100;
    uint64_t seed = 42;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::vector<size_t> context_sizes = {5, 10, 20, 30, 40};
    ProviderConfig candidate;
    ProviderConfig judge;
    ProviderConfig synthesizer;
    bool use_synthesizer = false;
    LoopConfig loop;
    JudgeMode judge_mode = JudgeMode::both;
    std::string output_dir = "runs/out";
    int parallelism = 1;
    bool record_transcripts = true;
    std::string clock = "logical";  // "logical" or "system"
    std::string candidate_system_prompt;  // defaulted when empty

    ExperimentConfig();
};

// The fixed instruction demanding reasoning plus a FINAL ANSWER line.
std::string default_candidate_system_prompt();

// Requires 0 < k < subsample_n for every context size, among other bounds.
void validate_experiment_config(const ExperimentConfig& config);

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const std::string& text);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

}  // namespace metatune
