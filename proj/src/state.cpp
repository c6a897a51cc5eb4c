#include "metatune/state.hpp"

#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "metatune/digest.hpp"
#include "metatune/errors.hpp"

namespace metatune {

using nlohmann::json;

std::string to_string(CorrectionKind kind) {
    switch (kind) {
        case CorrectionKind::refined_instruction: return "refined_instruction";
        case CorrectionKind::demonstration: return "demonstration";
        case CorrectionKind::explanation: return "explanation";
    }
    return "explanation";
}

CorrectionKind correction_kind_from_string(const std::string& s) {
    if (s == "refined_instruction") return CorrectionKind::refined_instruction;
    if (s == "demonstration") return CorrectionKind::demonstration;
    if (s == "explanation") return CorrectionKind::explanation;
    throw ValidationError("unknown correction kind: " + s);
}

std::string to_string(CorrectionOrigin origin) {
    switch (origin) {
        case CorrectionOrigin::judge: return "judge";
        case CorrectionOrigin::human: return "human";
        case CorrectionOrigin::synthesizer: return "synthesizer";
    }
    return "judge";
}

CorrectionOrigin correction_origin_from_string(const std::string& s) {
    if (s == "judge") return CorrectionOrigin::judge;
    if (s == "human") return CorrectionOrigin::human;
    if (s == "synthesizer") return CorrectionOrigin::synthesizer;
    throw ValidationError("unknown correction origin: " + s);
}

TaskLookup lookup_from(const TaskSet& set) {
    auto index = std::make_shared<std::unordered_map<std::string, TaskInstance>>();
    for (const auto& instance : set.instances) {
        index->emplace(instance.id, instance);
    }
    return [index](const std::string& id) -> std::optional<TaskInstance> {
        auto it = index->find(id);
        if (it == index->end()) return std::nullopt;
        return it->second;
    };
}

void validate_state(const TaskFunctionalityState& state) {
    if (state.version != state.revision_log.size()) {
        throw ValidationError("state version " + std::to_string(state.version) +
                              " does not match revision log length " +
                              std::to_string(state.revision_log.size()));
    }
    uint64_t previous = 0;
    for (const auto& event : state.revision_log) {
        if (event.iteration <= previous) {
            throw ValidationError("revision iterations must be strictly increasing");
        }
        previous = event.iteration;
    }
    if (state.critique_memory.size() > kCritiqueMemoryCap) {
        throw ValidationError("critique memory exceeds its cap");
    }
}

// ============================================================================
// Revisions
// ============================================================================

TaskFunctionalityState apply_corrections(const TaskFunctionalityState& state,
                                         const std::vector<Correction>& corrections,
                                         const std::string& trigger, const TaskLookup& lookup,
                                         const std::string& timestamp) {
    if (corrections.empty()) {
        throw ValidationError("apply_corrections requires a non-empty correction list");
    }

    TaskFunctionalityState next = state;
    const std::string prompt_before = sha256_hex(state.base_prompt);

    std::vector<Correction> ordered;
    ordered.reserve(corrections.size());
    for (auto kind : {CorrectionKind::refined_instruction, CorrectionKind::demonstration,
                      CorrectionKind::explanation}) {
        for (const auto& c : corrections) {
            if (c.kind == kind) ordered.push_back(c);
        }
    }

    static const std::string section_header = "\n\nAdditional instructions:\n";
    for (const auto& c : ordered) {
        switch (c.kind) {
            case CorrectionKind::refined_instruction: {
                if (next.base_prompt.find(section_header) == std::string::npos) {
                    next.base_prompt += section_header + c.content;
                } else {
                    next.base_prompt += "\n" + c.content;
                }
                break;
            }
            case CorrectionKind::demonstration: {
                if (c.source_instance.empty()) {
                    throw ValidationError("demonstration correction is missing source_instance");
                }
                auto instance = lookup(c.source_instance);
                if (!instance) {
                    throw ValidationError("demonstration correction references unknown instance '" +
                                          c.source_instance + "'");
                }
                next.demo_history.push_back({instance->id, instance->problem,
                                             instance->gold_solution, instance->gold_answer});
                break;
            }
            case CorrectionKind::explanation: {
                next.critique_memory.push_back(c);
                while (next.critique_memory.size() > kCritiqueMemoryCap) {
                    next.critique_memory.erase(next.critique_memory.begin());
                }
                break;
            }
        }
    }

    RevisionEvent event;
    event.iteration = state.version + 1;
    event.trigger = trigger;
    event.corrections_applied = ordered;
    event.prompt_before = prompt_before;
    event.prompt_after = sha256_hex(next.base_prompt);
    event.timestamp = timestamp;

    next.revision_log.push_back(std::move(event));
    next.version = state.version + 1;
    return next;
}

std::vector<DemoPair> build_solution_infused_history(
    const std::vector<std::pair<TaskInstance, Verdict>>& zero_shot_results) {
    std::vector<DemoPair> history;
    for (const auto& [instance, verdict] : zero_shot_results) {
        if (verdict.correct) continue;
        history.push_back(
            {instance.id, instance.problem, instance.gold_solution, instance.gold_answer});
    }
    return history;
}

// ============================================================================
// Context rendering
// ============================================================================

std::string render_demo_assistant(const DemoPair& demo) {
    return demo.gold_solution + "\nFINAL ANSWER: " + demo.gold_answer;
}

long estimate_tokens(const std::string& text) {
    return static_cast<long>((text.size() + 3) / 4);
}

long estimate_tokens(const std::vector<ChatMessage>& messages) {
    long total = 0;
    for (const auto& m : messages) total += estimate_tokens(m.content);
    return total;
}

namespace {

std::string render_system_prompt(const TaskFunctionalityState& state, size_t critiques_kept) {
    std::string text = state.base_prompt;
    if (critiques_kept > 0) {
        text += "\n\nLessons from previous critiques:";
        size_t start = state.critique_memory.size() - critiques_kept;
        for (size_t i = start; i < state.critique_memory.size(); ++i) {
            text += "\n- " + state.critique_memory[i].content;
        }
    }
    return text;
}

std::vector<ChatMessage> assemble_context(const TaskFunctionalityState& state,
                                          const TaskInstance& problem, size_t demos_dropped,
                                          size_t critiques_kept) {
    std::vector<ChatMessage> messages;
    messages.push_back(system_message(render_system_prompt(state, critiques_kept)));
    for (size_t i = demos_dropped; i < state.demo_history.size(); ++i) {
        messages.push_back(user_message(state.demo_history[i].problem));
        messages.push_back(assistant_message(render_demo_assistant(state.demo_history[i])));
    }
    messages.push_back(user_message(problem.problem));
    return messages;
}

}  // namespace

std::vector<ChatMessage> render_context(const TaskFunctionalityState& state,
                                        const TaskInstance& problem, long budget_tokens) {
    size_t demos_dropped = 0;
    size_t critiques_kept = state.critique_memory.size();

    auto messages = assemble_context(state, problem, demos_dropped, critiques_kept);
    while (estimate_tokens(messages) > budget_tokens) {
        if (demos_dropped < state.demo_history.size()) {
            ++demos_dropped;
        } else if (critiques_kept > 0) {
            --critiques_kept;
        } else {
            throw ValidationError(
                "context budget too small for the base prompt and problem alone");
        }
        messages = assemble_context(state, problem, demos_dropped, critiques_kept);
    }
    return messages;
}

// ============================================================================
// Serialization and checkpoints
// ============================================================================

namespace {

json correction_to_json(const Correction& c) {
    return {{"content", c.content},
            {"kind", to_string(c.kind)},
            {"origin", to_string(c.origin)},
            {"source_instance", c.source_instance}};
}

Correction correction_from_json(const json& j) {
    Correction c;
    c.kind = correction_kind_from_string(j.at("kind").get<std::string>());
    c.content = j.at("content").get<std::string>();
    c.source_instance = j.value("source_instance", "");
    c.origin = correction_origin_from_string(j.value("origin", "judge"));
    return c;
}

}  // namespace

std::string state_to_json(const TaskFunctionalityState& state) {
    json j;
    j["base_prompt"] = state.base_prompt;

    json critiques = json::array();
    for (const auto& c : state.critique_memory) critiques.push_back(correction_to_json(c));
    j["critique_memory"] = critiques;

    json demos = json::array();
    for (const auto& d : state.demo_history) {
        demos.push_back({{"gold_answer", d.gold_answer},
                         {"gold_solution", d.gold_solution},
                         {"instance_id", d.instance_id},
                         {"problem", d.problem}});
    }
    j["demo_history"] = demos;

    json revisions = json::array();
    for (const auto& e : state.revision_log) {
        json applied = json::array();
        for (const auto& c : e.corrections_applied) applied.push_back(correction_to_json(c));
        revisions.push_back({{"corrections_applied", applied},
                             {"iteration", e.iteration},
                             {"prompt_after", e.prompt_after},
                             {"prompt_before", e.prompt_before},
                             {"timestamp", e.timestamp},
                             {"trigger", e.trigger}});
    }
    j["revision_log"] = revisions;

    j["schema_version"] = kCheckpointSchemaVersion;
    j["version"] = state.version;
    return j.dump();
}

TaskFunctionalityState state_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptionError(std::string("checkpoint payload is not valid JSON: ") + e.what());
    }

    int schema = j.value("schema_version", -1);
    if (schema != kCheckpointSchemaVersion) {
        throw CorruptionError("unknown checkpoint schema version: " + std::to_string(schema));
    }

    TaskFunctionalityState state;
    try {
        state.base_prompt = j.at("base_prompt").get<std::string>();
        for (const auto& c : j.at("critique_memory")) {
            state.critique_memory.push_back(correction_from_json(c));
        }
        for (const auto& d : j.at("demo_history")) {
            state.demo_history.push_back({d.at("instance_id").get<std::string>(),
                                          d.at("problem").get<std::string>(),
                                          d.at("gold_solution").get<std::string>(),
                                          d.at("gold_answer").get<std::string>()});
        }
        for (const auto& e : j.at("revision_log")) {
            RevisionEvent event;
            event.iteration = e.at("iteration").get<uint64_t>();
            event.trigger = e.at("trigger").get<std::string>();
            for (const auto& c : e.at("corrections_applied")) {
                event.corrections_applied.push_back(correction_from_json(c));
            }
            event.prompt_before = e.at("prompt_before").get<std::string>();
            event.prompt_after = e.at("prompt_after").get<std::string>();
            event.timestamp = e.at("timestamp").get<std::string>();
            state.revision_log.push_back(std::move(event));
        }
        state.version = j.at("version").get<uint64_t>();
    } catch (const json::exception& e) {
        throw CorruptionError(std::string("checkpoint payload is malformed: ") + e.what());
    }

    validate_state(state);
    return state;
}

std::string state_digest(const TaskFunctionalityState& state) {
    return sha256_hex(state_to_json(state));
}

std::string checkpoint_save(const TaskFunctionalityState& state,
                            const std::filesystem::path& path) {
    validate_state(state);
    const std::string payload = state_to_json(state);
    const std::string digest = sha256_hex(payload);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw ValidationError("cannot open checkpoint for writing: " + path.string());
    out << payload << "\n" << digest << "\n";
    if (!out) throw ValidationError("failed writing checkpoint: " + path.string());
    return digest;
}

TaskFunctionalityState checkpoint_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string content = buffer.str();

    while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) {
        content.pop_back();
    }
    auto split = content.rfind('\n');
    if (split == std::string::npos) {
        throw CorruptionError("checkpoint is truncated (no digest line): " + path.string());
    }
    std::string payload = content.substr(0, split);
    std::string digest = content.substr(split + 1);
    if (!payload.empty() && payload.back() == '\r') payload.pop_back();

    if (!is_hex_digest(digest)) {
        throw CorruptionError("checkpoint digest line is malformed: " + path.string());
    }
    if (sha256_hex(payload) != digest) {
        throw CorruptionError("checkpoint digest mismatch (file corrupted): " + path.string());
    }
    return state_from_json(payload);
}

}  // namespace metatune
