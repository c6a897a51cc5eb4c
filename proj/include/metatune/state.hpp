#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metatune/dataset.hpp"
#include "metatune/judge.hpp"
#include "metatune/provider.hpp"

namespace metatune {

// Critique memory keeps at most this many entries; the oldest are evicted.
inline constexpr size_t kCritiqueMemoryCap = 20;
inline constexpr int kCheckpointSchemaVersion = 1;

enum class CorrectionKind { refined_instruction, demonstration, explanation };
enum class CorrectionOrigin { judge, human, synthesizer };

std::string to_string(CorrectionKind kind);
CorrectionKind correction_kind_from_string(const std::string& s);
std::string to_string(CorrectionOrigin origin);
CorrectionOrigin correction_origin_from_string(const std::string& s);

struct Correction {
    CorrectionKind kind = CorrectionKind::explanation;
    std::string content;
    std::string source_instance;  // required for demonstrations, else may be empty
    CorrectionOrigin origin = CorrectionOrigin::judge;

    bool operator==(const Correction&) const = default;
};

struct DemoPair {
    std::string instance_id;
    std::string problem;
    std::string gold_solution;
    std::string gold_answer;

    bool operator==(const DemoPair&) const = default;
};

struct RevisionEvent {
    uint64_t iteration = 0;  // equals the state version this event produced
    std::string trigger;
    std::vector<Correction> corrections_applied;
    std::string prompt_before;  // digest of base_prompt before the revision
    std::string prompt_after;   // digest after
    std::string timestamp;

    bool operator==(const RevisionEvent&) const = default;
};

// The trainable state: everything the model is conditioned on besides the
// problem itself. Revisions only ever append; version counts them.
struct TaskFunctionalityState {
    std::string base_prompt;
    std::vector<Correction> critique_memory;
    std::vector<DemoPair> demo_history;
    std::vector<RevisionEvent> revision_log;
    uint64_t version = 0;

    bool operator==(const TaskFunctionalityState&) const = default;
};

// Resolves instance ids for demonstration corrections.
using TaskLookup = std::function<std::optional<TaskInstance>(const std::string&)>;

// Lookup backed by a copy of the set's instances.
TaskLookup lookup_from(const TaskSet& set);

// Throws ValidationError when internal invariants are broken.
void validate_state(const TaskFunctionalityState& state);

// Applies one batch of corrections as a single revision: refined instructions
// first, then demonstrations, then explanations. Returns the revised state;
// the input is untouched. Demonstrations resolve their gold fields through
// `lookup`; an unknown id is a ValidationError, as is an empty batch.
TaskFunctionalityState apply_corrections(const TaskFunctionalityState& state,
                                         const std::vector<Correction>& corrections,
                                         const std::string& trigger, const TaskLookup& lookup,
                                         const std::string& timestamp);

// One DemoPair per incorrectly answered instance, in input order. Gold fields
// are copied verbatim; correct instances contribute nothing.
std::vector<DemoPair> build_solution_infused_history(
    const std::vector<std::pair<TaskInstance, Verdict>>& zero_shot_results);

// The assistant turn a demonstration renders to.
std::string render_demo_assistant(const DemoPair& demo);

// chars/4 heuristic, rounded up.
long estimate_tokens(const std::string& text);
long estimate_tokens(const std::vector<ChatMessage>& messages);

// Builds the chat context: [system: base prompt + critique bullets] ++
// [user/assistant per demo, oldest first] ++ [user: problem]. When the
// estimate exceeds `budget_tokens`, the oldest demos are dropped first, then
// the oldest critiques. The base prompt and the problem are never dropped;
// if they alone exceed the budget, throws ValidationError.
std::vector<ChatMessage> render_context(const TaskFunctionalityState& state,
                                        const TaskInstance& problem, long budget_tokens);

// Canonical JSON document (sorted keys, schema_version included).
std::string state_to_json(const TaskFunctionalityState& state);
TaskFunctionalityState state_from_json(const std::string& text);

// Digest of the canonical serialization.
std::string state_digest(const TaskFunctionalityState& state);

// Writes the canonical JSON plus a trailing digest line; returns the digest.
std::string checkpoint_save(const TaskFunctionalityState& state,
                            const std::filesystem::path& path);

// Verifies the trailing digest and schema version before deserializing.
// Throws CorruptionError on mismatch, truncation, or unknown schema.
TaskFunctionalityState checkpoint_load(const std::filesystem::path& path);

}  // namespace metatune
