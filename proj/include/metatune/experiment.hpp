#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metatune/config.hpp"
#include "metatune/dataset.hpp"
#include "metatune/engine.hpp"
#include "metatune/judge.hpp"
#include "metatune/metrics.hpp"
#include "metatune/provider.hpp"
#include "metatune/state.hpp"

namespace metatune {

struct EvalOutcome {
    TaskInstance instance;
    std::string completion;
    Verdict verdict;
};

// Everything a run needs at execution time: providers wired to caches and
// transcripts, loop settings, and the clock for revision timestamps.
struct ExperimentRuntime {
    std::shared_ptr<Provider> candidate;
    std::shared_ptr<Provider> judge;        // null when judging deterministically
    std::shared_ptr<Provider> synthesizer;  // null unless enabled
    JudgeMode judge_mode = JudgeMode::both;
    LoopConfig loop;
    std::string candidate_system_prompt;
    int parallelism = 1;
    ClockFn clock;
    std::optional<std::filesystem::path> out_dir;  // per-k artifacts written when set
};

// Wires providers for a validated config. Transcripts are recorded under
// out_dir/transcripts when the config asks for them. `replay_dir` swaps every
// provider onto a scripted transport fed from that directory's transcripts
// (candidate.ndjson, judge.ndjson, synthesizer.ndjson) while keeping the
// original backend tags, so recorded request digests still match.
ExperimentRuntime build_runtime(
    const ExperimentConfig& config, const std::filesystem::path& out_dir,
    const std::optional<std::filesystem::path>& replay_dir = std::nullopt);

// Renders each instance against `state`, completes, and judges. Results keep
// the set's order; `parallelism` > 1 fans instances out across threads.
std::vector<EvalOutcome> evaluate_with_state(const TaskFunctionalityState& state,
                                             const TaskSet& set, Provider& candidate,
                                             const JudgeSpec& judge, long budget_tokens,
                                             int parallelism = 1);

// Evaluation with an empty state: just the system prompt and the problem.
std::vector<EvalOutcome> zero_shot_eval(const TaskSet& set, Provider& candidate,
                                        const JudgeSpec& judge, const std::string& system_prompt,
                                        long budget_tokens, int parallelism = 1);

// Accuracy row for one evaluation. Supplying the paired baseline fills in the
// delta (computed from raw counts over the identical test set).
RunMetrics compute_metrics(const std::vector<EvalOutcome>& results, size_t context_size,
                           Setting setting, const std::optional<RunMetrics>& baseline);

// Flip counts by level between two runs over the same test instances.
LevelImprovement improvement_by_level(const std::vector<EvalOutcome>& baseline_results,
                                      const std::vector<EvalOutcome>& metatuned_results);

// Applies the solution-infused history built from incorrectly answered train
// instances to `base` as one revision. Guards against leakage: any result
// instance whose id belongs to the test split is a LeakageError.
TaskFunctionalityState build_metatuned_state(const TaskFunctionalityState& base,
                                             const std::vector<EvalOutcome>& train_results,
                                             const Split& split, const std::string& timestamp);

struct RunResult {
    size_t k = 0;
    RunMetrics baseline;
    RunMetrics metatuned;
    LevelImprovement levels;
    TaskFunctionalityState state;
    std::string checkpoint_digest;
};

// The full pipeline for one context size: split, zero-shot over train, build
// the metatuned state from the failures, then evaluate the test set with the
// empty and the metatuned state and pair the metrics.
RunResult run_metatuning_experiment(const TaskSet& subsampled, size_t k,
                                    ExperimentRuntime& runtime);

struct SweepFailure {
    size_t k = 0;
    std::string message;
    bool provider_error = false;  // distinguishes backend trouble from bad input
};

struct SweepResult {
    std::vector<RunResult> runs;
    std::vector<SweepFailure> failures;
    std::string csv;
    std::string table;
};

// One paired run per context size; a failing k is recorded and skipped so the
// remaining rows still come out.
SweepResult sweep(const TaskSet& subsampled, const std::vector<size_t>& context_sizes,
                  ExperimentRuntime& runtime);

}  // namespace metatune
