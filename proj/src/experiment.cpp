#include "metatune/experiment.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "metatune/errors.hpp"
#include "metatune/report.hpp"

namespace metatune {

ExperimentRuntime build_runtime(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir,
                                const std::optional<std::filesystem::path>& replay_dir) {
    validate_experiment_config(config);

    ExperimentRuntime runtime;
    runtime.judge_mode = config.judge_mode;
    runtime.loop = config.loop;
    runtime.candidate_system_prompt = config.candidate_system_prompt;
    runtime.parallelism = config.parallelism;
    runtime.clock = make_clock(config.clock);
    runtime.out_dir = out_dir;

    auto build = [&](const ProviderConfig& provider_config,
                     const std::string& role) -> std::shared_ptr<Provider> {
        auto cache = std::make_shared<ResponseCache>();
        std::shared_ptr<TranscriptRecorder> recorder;
        if (config.record_transcripts) {
            recorder = std::make_shared<TranscriptRecorder>(
                out_dir / "transcripts" / (role + ".ndjson"), make_clock(config.clock));
        }
        std::optional<std::filesystem::path> archive;
        if (replay_dir) archive = *replay_dir / (role + ".ndjson");
        return make_provider(provider_config, cache, recorder, archive);
    };

    runtime.candidate = build(config.candidate, "candidate");
    if (config.judge_mode != JudgeMode::deterministic) {
        runtime.judge = build(config.judge, "judge");
    }
    if (config.use_synthesizer) {
        runtime.synthesizer = build(config.synthesizer, "synthesizer");
    }
    return runtime;
}

std::vector<EvalOutcome> evaluate_with_state(const TaskFunctionalityState& state,
                                             const TaskSet& set, Provider& candidate,
                                             const JudgeSpec& judge, long budget_tokens,
                                             int parallelism) {
    if (judge.mode != JudgeMode::deterministic && judge.provider == nullptr) {
        throw ValidationError("judge mode '" + to_string(judge.mode) +
                              "' requires a judge provider");
    }
    std::vector<EvalOutcome> results(set.size());
    if (set.empty()) return results;

    const int workers =
        std::max(1, std::min<int>(parallelism, static_cast<int>(set.size())));

    auto evaluate_slice = [&](int offset) {
        for (size_t i = offset; i < set.size(); i += workers) {
            const TaskInstance& instance = set.instances[i];
            auto messages = render_context(state, instance, budget_tokens);
            Completion completion = candidate.complete(messages);
            Verdict verdict =
                judge_evaluate(instance, completion.content, judge.mode, judge.provider);
            results[i] = {instance, completion.content, std::move(verdict)};
        }
    };

    if (workers == 1) {
        evaluate_slice(0);
        return results;
    }

    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
            try {
                evaluate_slice(w);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

std::vector<EvalOutcome> zero_shot_eval(const TaskSet& set, Provider& candidate,
                                        const JudgeSpec& judge, const std::string& system_prompt,
                                        long budget_tokens, int parallelism) {
    TaskFunctionalityState empty_state;
    empty_state.base_prompt = system_prompt;
    return evaluate_with_state(empty_state, set, candidate, judge, budget_tokens, parallelism);
}

RunMetrics compute_metrics(const std::vector<EvalOutcome>& results, size_t context_size,
                           Setting setting, const std::optional<RunMetrics>& baseline) {
    if (results.empty()) throw ValidationError("cannot compute metrics over zero verdicts");

    RunMetrics metrics;
    metrics.context_size = context_size;
    metrics.setting = setting;
    for (const auto& outcome : results) {
        if (outcome.verdict.correct) {
            ++metrics.correct;
        } else {
            ++metrics.incorrect;
        }
        if (outcome.verdict.judge_error) ++metrics.judge_errors;
    }
    metrics.accuracy_hundredths = accuracy_hundredths(metrics.correct, metrics.total());

    if (baseline) {
        if (baseline->total() != metrics.total()) {
            throw ValidationError("paired metrics must cover test sets of equal size");
        }
        metrics.delta_hundredths =
            delta_hundredths(metrics.correct, baseline->correct, metrics.total());
    }
    return metrics;
}

LevelImprovement improvement_by_level(const std::vector<EvalOutcome>& baseline_results,
                                      const std::vector<EvalOutcome>& metatuned_results) {
    if (baseline_results.size() != metatuned_results.size()) {
        throw ValidationError("paired runs cover different numbers of test instances");
    }
    std::unordered_map<std::string, const EvalOutcome*> metatuned_by_id;
    for (const auto& outcome : metatuned_results) {
        metatuned_by_id.emplace(outcome.instance.id, &outcome);
    }

    LevelImprovement levels;
    for (const auto& base : baseline_results) {
        auto it = metatuned_by_id.find(base.instance.id);
        if (it == metatuned_by_id.end()) {
            throw ValidationError("paired runs cover different test instance ids (missing '" +
                                  base.instance.id + "')");
        }
        const EvalOutcome& tuned = *it->second;
        int level = base.instance.level;
        if (level < 1 || level > 5) {
            throw ValidationError("instance level out of range: " + std::to_string(level));
        }
        if (!base.verdict.correct && tuned.verdict.correct) {
            ++levels.improved[level - 1];
        } else if (base.verdict.correct && !tuned.verdict.correct) {
            ++levels.regressed[level - 1];
        }
    }
    return levels;
}

TaskFunctionalityState build_metatuned_state(const TaskFunctionalityState& base,
                                             const std::vector<EvalOutcome>& train_results,
                                             const Split& split, const std::string& timestamp) {
    std::unordered_set<std::string> test_ids;
    for (const auto& instance : split.test.instances) test_ids.insert(instance.id);
    for (const auto& outcome : train_results) {
        if (test_ids.count(outcome.instance.id) != 0) {
            throw LeakageError("test instance '" + outcome.instance.id +
                               "' leaked into metatuning demo construction");
        }
    }

    std::vector<Correction> corrections;
    for (const auto& outcome : train_results) {
        if (outcome.verdict.correct) continue;
        Correction c;
        c.kind = CorrectionKind::demonstration;
        c.content = outcome.instance.gold_solution + "\nFINAL ANSWER: " +
                    outcome.instance.gold_answer;
        c.source_instance = outcome.instance.id;
        c.origin = CorrectionOrigin::judge;
        corrections.push_back(std::move(c));
    }

    if (corrections.empty()) return base;
    return apply_corrections(base, corrections, "metatune", lookup_from(split.train), timestamp);
}

RunResult run_metatuning_experiment(const TaskSet& subsampled, size_t k,
                                    ExperimentRuntime& runtime) {
    Split split = split_train_test(subsampled, k);
    JudgeSpec judge{runtime.judge_mode, runtime.judge.get()};
    const long budget = runtime.loop.context_budget_tokens;

    auto train_results = zero_shot_eval(split.train, *runtime.candidate, judge,
                                        runtime.candidate_system_prompt, budget,
                                        runtime.parallelism);

    TaskFunctionalityState base_state;
    base_state.base_prompt = runtime.candidate_system_prompt;
    TaskFunctionalityState tuned =
        build_metatuned_state(base_state, train_results, split, runtime.clock());

    if (runtime.loop.warm_start_samples > 0) {
        size_t count = std::min<size_t>(runtime.loop.warm_start_samples, split.train.size());
        std::vector<TaskInstance> samples(split.train.instances.begin(),
                                          split.train.instances.begin() + count);
        warm_start(tuned, samples, split, *runtime.candidate, budget);
    }

    auto baseline_results = zero_shot_eval(split.test, *runtime.candidate, judge,
                                           runtime.candidate_system_prompt, budget,
                                           runtime.parallelism);
    auto metatuned_results = evaluate_with_state(tuned, split.test, *runtime.candidate, judge,
                                                 budget, runtime.parallelism);

    RunResult result;
    result.k = k;
    result.baseline = compute_metrics(baseline_results, k, Setting::baseline, std::nullopt);
    result.metatuned = compute_metrics(metatuned_results, k, Setting::metatuned, result.baseline);
    result.levels = improvement_by_level(baseline_results, metatuned_results);
    result.state = tuned;

    if (runtime.out_dir) {
        auto k_dir = *runtime.out_dir / ("k" + std::to_string(k));
        result.checkpoint_digest = checkpoint_save(result.state, k_dir / "state.ckpt");
        write_text_file(k_dir / "metrics.csv", metrics_csv({result.baseline, result.metatuned}));
        write_text_file(k_dir / "report.txt",
                        metrics_table({result.baseline, result.metatuned}));
        write_text_file(k_dir / "level_improvement.csv", level_improvement_csv(result.levels));
    } else {
        result.checkpoint_digest = state_digest(result.state);
    }
    return result;
}

SweepResult sweep(const TaskSet& subsampled, const std::vector<size_t>& context_sizes,
                  ExperimentRuntime& runtime) {
    if (context_sizes.empty()) throw ValidationError("sweep requires at least one context size");

    SweepResult result;
    std::vector<RunMetrics> rows;
    for (size_t k : context_sizes) {
        try {
            RunResult run = run_metatuning_experiment(subsampled, k, runtime);
            rows.push_back(run.baseline);
            rows.push_back(run.metatuned);
            result.runs.push_back(std::move(run));
        } catch (const ProviderError& e) {
            result.failures.push_back({k, e.what(), true});
        } catch (const Error& e) {
            result.failures.push_back({k, e.what(), false});
        }
    }

    result.csv = metrics_csv(rows);
    result.table = metrics_table(rows);
    if (!result.failures.empty()) {
        result.table += "\nFailed context sizes:\n";
        for (const auto& failure : result.failures) {
            result.table += "  k=" + std::to_string(failure.k) + ": " + failure.message + "\n";
        }
    }

    if (runtime.out_dir) {
        write_text_file(*runtime.out_dir / "metrics.csv", result.csv);
        write_text_file(*runtime.out_dir / "report.txt", result.table);
    }
    return result;
}

}  // namespace metatune
