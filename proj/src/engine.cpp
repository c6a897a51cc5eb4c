#include "metatune/engine.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "metatune/digest.hpp"
#include "metatune/errors.hpp"

namespace metatune {

using nlohmann::json;

void validate_loop_config(const LoopConfig& cfg) {
    if (cfg.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (cfg.accumulation_b < 1) throw ValidationError("accumulation_b must be >= 1");
    if (cfg.warm_start_samples < 0) throw ValidationError("warm_start_samples must be >= 0");
    if (cfg.context_budget_tokens < 1) throw ValidationError("context_budget_tokens must be >= 1");
}

std::string to_string(TerminalReason reason) {
    switch (reason) {
        case TerminalReason::exhausted: return "exhausted";
        case TerminalReason::early_break: return "early_break";
        case TerminalReason::clean_epoch: return "clean_epoch";
    }
    return "exhausted";
}

bool revision_trigger(long accumulated_failures, int accumulation_b) {
    if (accumulation_b < 1) throw ValidationError("accumulation_b must be >= 1");
    return accumulated_failures >= accumulation_b;
}

std::vector<ChatMessage> build_synthesizer_messages(const TaskInstance& instance,
                                                    const Verdict& feedback,
                                                    const std::string& completion) {
    std::ostringstream user;
    user << "Problem:\n"
         << instance.problem << "\n\n"
         << "Judge critique:\n"
         << (feedback.critique.empty() ? "(none)" : feedback.critique) << "\n\n"
         << "Assistant's incorrect solution:\n"
         << completion << "\n";
    return {system_message(
                "You improve system prompts for a math-solving assistant. Given a problem the "
                "assistant got wrong and the judge's critique, reply with one concise additional "
                "instruction that would prevent this class of mistake. Reply with the "
                "instruction text only."),
            user_message(user.str())};
}

std::vector<Correction> generate_corrections(const Verdict& feedback, const TaskInstance& instance,
                                             const std::string& completion,
                                             const std::set<CorrectionKind>& enabled_kinds,
                                             Provider* synthesizer) {
    if (feedback.correct) {
        throw ValidationError("generate_corrections called on a correct verdict");
    }

    std::vector<Correction> corrections;
    if (enabled_kinds.count(CorrectionKind::refined_instruction) != 0 && synthesizer != nullptr) {
        Completion reply = synthesizer->complete(
            build_synthesizer_messages(instance, feedback, completion));
        Correction c;
        c.kind = CorrectionKind::refined_instruction;
        c.content = reply.content;
        c.origin = CorrectionOrigin::synthesizer;
        corrections.push_back(std::move(c));
    }
    if (enabled_kinds.count(CorrectionKind::demonstration) != 0) {
        Correction c;
        c.kind = CorrectionKind::demonstration;
        c.content = instance.gold_solution + "\nFINAL ANSWER: " + instance.gold_answer;
        c.source_instance = instance.id;
        c.origin = CorrectionOrigin::judge;
        corrections.push_back(std::move(c));
    }
    if (enabled_kinds.count(CorrectionKind::explanation) != 0 && !feedback.critique.empty()) {
        Correction c;
        c.kind = CorrectionKind::explanation;
        c.content = feedback.critique;
        c.origin = CorrectionOrigin::judge;
        corrections.push_back(std::move(c));
    }
    return corrections;
}

namespace {

json verdict_to_json(const Verdict& v) {
    return {{"confidence_note", v.confidence_note},
            {"correct", v.correct},
            {"critique", v.critique},
            {"judge_error", v.judge_error},
            {"judge_kind", to_string(v.judge_kind)},
            {"parsed_answer", v.parsed_answer}};
}

json record_to_json(const IterationRecord& r) {
    json corrections = json::array();
    for (const auto& c : r.corrections) {
        corrections.push_back({{"content", c.content},
                               {"kind", to_string(c.kind)},
                               {"origin", to_string(c.origin)},
                               {"source_instance", c.source_instance}});
    }
    return {{"completion_digest", r.completion_digest},
            {"corrections", corrections},
            {"epoch", r.epoch},
            {"instance_id", r.instance_id},
            {"iteration", r.iteration},
            {"state_version", r.state_version},
            {"verdict", verdict_to_json(r.verdict)}};
}

}  // namespace

void save_trace(const LoopTrace& trace, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot open trace file for writing: " + path.string());
    for (const auto& record : trace.iterations) {
        out << record_to_json(record).dump() << "\n";
    }
    out << json({{"terminal_reason", to_string(trace.terminal_reason)}}).dump() << "\n";
}

std::pair<TaskFunctionalityState, LoopTrace> learning_loop(
    const TaskFunctionalityState& state0, const TaskSet& train, const LoopConfig& cfg,
    Provider& candidate, const JudgeSpec& judge, Provider* synthesizer, ClockFn clock,
    const std::optional<std::filesystem::path>& trace_path) {
    validate_loop_config(cfg);
    if (train.empty()) throw ValidationError("learning loop requires a non-empty training set");
    if (judge.mode != JudgeMode::deterministic && judge.provider == nullptr) {
        throw ValidationError("judge mode '" + to_string(judge.mode) +
                              "' requires a judge provider");
    }

    TaskLookup lookup = lookup_from(train);
    TaskFunctionalityState state = state0;
    LoopTrace trace;
    trace.terminal_reason = TerminalReason::exhausted;

    long iteration = 0;
    long accumulated_failures = 0;
    std::vector<Correction> pending;

    auto persist = [&]() {
        if (trace_path) save_trace(trace, *trace_path);
    };

    try {
        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            bool clean_epoch = true;
            for (const auto& instance : train.instances) {
                if (iteration >= cfg.max_iterations) {
                    trace.terminal_reason = TerminalReason::exhausted;
                    persist();
                    return {state, trace};
                }
                ++iteration;

                auto messages = render_context(state, instance, cfg.context_budget_tokens);
                Completion completion = candidate.complete(messages);
                Verdict verdict =
                    judge_evaluate(instance, completion.content, judge.mode, judge.provider);

                IterationRecord record;
                record.iteration = iteration;
                record.epoch = epoch;
                record.instance_id = instance.id;
                record.completion_digest = sha256_hex(completion.content);
                record.verdict = verdict;
                record.state_version = state.version;

                if (verdict.correct) {
                    if (cfg.per_instance_break && cfg.early_stop_on_clean_pass) {
                        trace.iterations.push_back(std::move(record));
                        trace.terminal_reason = TerminalReason::early_break;
                        persist();
                        return {state, trace};
                    }
                    trace.iterations.push_back(std::move(record));
                    continue;
                }

                clean_epoch = false;
                ++accumulated_failures;
                auto corrections = generate_corrections(verdict, instance, completion.content,
                                                        cfg.correction_kinds_enabled, synthesizer);
                record.corrections = corrections;
                pending.insert(pending.end(), corrections.begin(), corrections.end());

                if (revision_trigger(accumulated_failures, cfg.accumulation_b)) {
                    if (!pending.empty()) {
                        state = apply_corrections(state, pending, "accumulation", lookup, clock());
                    }
                    pending.clear();
                    accumulated_failures = 0;
                }
                record.state_version = state.version;
                trace.iterations.push_back(std::move(record));
            }

            // Failures below the accumulation threshold still flush at epoch end.
            if (accumulated_failures > 0) {
                if (!pending.empty()) {
                    state = apply_corrections(state, pending, "epoch_flush", lookup, clock());
                    if (!trace.iterations.empty()) {
                        trace.iterations.back().state_version = state.version;
                    }
                }
                pending.clear();
                accumulated_failures = 0;
            }

            if (clean_epoch && cfg.early_stop_on_clean_pass && !cfg.per_instance_break) {
                trace.terminal_reason = TerminalReason::clean_epoch;
                persist();
                return {state, trace};
            }
        }
    } catch (...) {
        persist();
        throw;
    }

    trace.terminal_reason = TerminalReason::exhausted;
    persist();
    return {state, trace};
}

WarmStartReport warm_start(const TaskFunctionalityState& state,
                           const std::vector<TaskInstance>& samples, const Split& split,
                           Provider& candidate, long budget_tokens) {
    std::unordered_set<std::string> test_ids;
    for (const auto& instance : split.test.instances) test_ids.insert(instance.id);
    std::unordered_set<std::string> train_ids;
    for (const auto& instance : split.train.instances) train_ids.insert(instance.id);

    for (const auto& sample : samples) {
        if (test_ids.count(sample.id) != 0) {
            throw LeakageError("warm start sample '" + sample.id + "' belongs to the test split");
        }
        if (train_ids.count(sample.id) == 0) {
            throw ValidationError("warm start sample '" + sample.id +
                                  "' is not drawn from the train split");
        }
    }

    WarmStartReport report;
    report.state_digest = state_digest(state);
    for (const auto& sample : samples) {
        auto messages = render_context(state, sample, budget_tokens);
        Completion completion = candidate.complete(messages);
        report.completions.emplace_back(sample.id, completion.content);
    }
    return report;
}

}  // namespace metatune
