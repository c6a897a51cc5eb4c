#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "metatune/clock.hpp"
#include "metatune/dataset.hpp"
#include "metatune/judge.hpp"
#include "metatune/provider.hpp"
#include "metatune/state.hpp"

namespace metatune {

struct LoopConfig {
    long max_iterations = 1000000;  // hard bound on total iterations
    int epochs = 1;
    int accumulation_b = 1;  // failures accumulated before a revision fires
    int warm_start_samples = 0;
    std::set<CorrectionKind> correction_kinds_enabled = {CorrectionKind::demonstration,
                                                         CorrectionKind::explanation};
    bool early_stop_on_clean_pass = true;
    // Break out of the loop on the first correct answer instead of after a
    // clean epoch.
    bool per_instance_break = false;
    long context_budget_tokens = 32768;
};

void validate_loop_config(const LoopConfig& cfg);

enum class TerminalReason { exhausted, early_break, clean_epoch };

std::string to_string(TerminalReason reason);

struct IterationRecord {
    long iteration = 0;  // 1-based, global across epochs
    int epoch = 1;
    std::string instance_id;
    std::string completion_digest;  // digest of the candidate's reply text
    Verdict verdict;
    std::vector<Correction> corrections;  // generated this iteration (may be empty)
    uint64_t state_version = 0;           // version after this iteration
};

struct LoopTrace {
    std::vector<IterationRecord> iterations;
    TerminalReason terminal_reason = TerminalReason::exhausted;
};

// Judge configuration for the loop: the mode plus the provider it needs.
struct JudgeSpec {
    JudgeMode mode = JudgeMode::both;
    Provider* provider = nullptr;  // required unless mode is deterministic
};

// True when enough failures have accumulated to fire a revision.
bool revision_trigger(long accumulated_failures, int accumulation_b);

// Turns one incorrect verdict into corrections: a demonstration referencing
// the instance (when enabled), an explanation carrying the judge critique
// (when enabled and non-empty), and a refined instruction from the
// synthesizer (when enabled and one is configured). Throws ValidationError
// when called on a correct verdict.
std::vector<Correction> generate_corrections(const Verdict& feedback, const TaskInstance& instance,
                                             const std::string& completion,
                                             const std::set<CorrectionKind>& enabled_kinds,
                                             Provider* synthesizer = nullptr);

std::vector<ChatMessage> build_synthesizer_messages(const TaskInstance& instance,
                                                    const Verdict& feedback,
                                                    const std::string& completion);

// The learning loop: iterate the training set up to `epochs` times (bounded
// by max_iterations); per instance render the context, complete, judge, and
// on failure accumulate corrections, revising the state whenever
// `accumulation_b` failures have gathered. Failures still pending at the end
// of an epoch are flushed as one revision. If `trace_path` is set, the trace
// is persisted there even when a provider or judge failure aborts the loop.
std::pair<TaskFunctionalityState, LoopTrace> learning_loop(
    const TaskFunctionalityState& state0, const TaskSet& train, const LoopConfig& cfg,
    Provider& candidate, const JudgeSpec& judge, Provider* synthesizer = nullptr,
    ClockFn clock = make_logical_clock(),
    const std::optional<std::filesystem::path>& trace_path = std::nullopt);

struct WarmStartReport {
    std::vector<std::pair<std::string, std::string>> completions;  // (instance id, reply)
    std::string state_digest;  // digest of the (unchanged) state used
};

// Primes caches and transcripts by running a few generations against the
// loaded state. Samples must come from the train split; a test-split id is a
// LeakageError. The state itself is never modified.
WarmStartReport warm_start(const TaskFunctionalityState& state,
                           const std::vector<TaskInstance>& samples, const Split& split,
                           Provider& candidate, long budget_tokens = 32768);

// Newline-delimited iteration records plus a final terminal-reason line.
void save_trace(const LoopTrace& trace, const std::filesystem::path& path);

}  // namespace metatune
