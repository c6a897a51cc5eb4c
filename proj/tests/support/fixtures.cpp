#include "support/fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "metatune/clock.hpp"
#include "metatune/digest.hpp"
#include "metatune/errors.hpp"
#include "metatune/report.hpp"

namespace metatune::testing {

using nlohmann::json;

std::filesystem::path make_temp_dir(const std::string& hint) {
    static std::atomic<uint64_t> counter{0};
    auto base = std::filesystem::temp_directory_path() / "metatune_tests";
    auto dir = base / (hint + "_" + std::to_string(::getpid()) + "_" +
                       std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

std::string fixture_answer(size_t index) { return std::to_string(100 + 7 * index); }

void write_fixture_dataset(const std::filesystem::path& path, size_t count) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write fixture dataset: " + path.string());
    char id[16];
    for (size_t i = 0; i < count; ++i) {
        std::snprintf(id, sizeof id, "q%03zu", i);
        json record;
        record["id"] = id;
        record["problem"] = std::string("Problem ") + id + ". Compute the value for case " +
                            std::to_string(i) + ".";
        record["solution"] = "Work through case " + std::to_string(i) +
                             " step by step.\nThe value equals " + fixture_answer(i) + ".";
        record["answer"] = fixture_answer(i);
        record["level"] = static_cast<int>(i % 5) + 1;
        record["subject"] = (i % 2 == 0) ? "Algebra" : "Counting & Probability";
        out << record.dump() << "\n";
    }
}

std::string parse_problem_id(const std::string& problem_text) {
    const std::string marker = "Problem ";
    auto pos = problem_text.find(marker);
    if (pos == std::string::npos) {
        throw std::logic_error("fixture problem text has no id marker: " + problem_text);
    }
    auto start = pos + marker.size();
    auto end = problem_text.find('.', start);
    if (end == std::string::npos) {
        throw std::logic_error("fixture problem text has no id terminator");
    }
    return problem_text.substr(start, end - start);
}

ProviderConfig fixture_provider_config(const std::string& model) {
    ProviderConfig config;
    config.backend = BackendKind::scripted;
    config.model_name = model;
    config.temperature = 0.0;
    config.max_output_tokens = 2048;
    return config;
}

std::unordered_map<std::string, std::string> answers_by_id(const TaskSet& set) {
    std::unordered_map<std::string, std::string> answers;
    for (const auto& instance : set.instances) answers.emplace(instance.id, instance.gold_answer);
    return answers;
}

// ============================================================================
// Table plan
// ============================================================================

TablePlan TablePlan::benchmark(const TaskSet& subsampled) {
    if (subsampled.size() != 100) {
        throw std::logic_error("table plan expects a 100-instance subsample");
    }

    TablePlan plan;
    for (const auto& instance : subsampled.instances) {
        plan.order.push_back(instance.id);
        plan.answers.emplace(instance.id, instance.gold_answer);
    }

    std::unordered_set<size_t> incorrect = {1, 3, 6, 8, 10, 13, 16, 20, 22, 24, 26, 28, 31, 35, 39};
    for (size_t p = 40; p < 100; p += 3) incorrect.insert(p);

    for (size_t p = 0; p < 100; ++p) {
        if (incorrect.count(p) == 0) plan.baseline_correct.insert(plan.order[p]);
    }

    const std::map<size_t, std::unordered_set<size_t>> flips_up = {
        {5, {10, 13}}, {10, {10, 13, 16, 20, 22}}, {20, {}}, {30, {}}, {40, {}}};
    const std::map<size_t, std::unordered_set<size_t>> flips_down = {
        {5, {}}, {10, {}}, {20, {}}, {30, {32, 33}}, {40, {}}};

    for (size_t k : {5, 10, 20, 30, 40}) {
        std::unordered_set<std::string> correct_ids;
        for (size_t p = k; p < 100; ++p) {
            bool correct = incorrect.count(p) == 0;
            if (flips_up.at(k).count(p) != 0) correct = true;
            if (flips_down.at(k).count(p) != 0) correct = false;
            if (correct) correct_ids.insert(plan.order[p]);
        }
        plan.metatuned_correct.emplace(k, std::move(correct_ids));

        size_t demos = 0;
        for (size_t p = 0; p < k; ++p) {
            if (incorrect.count(p) != 0) ++demos;
        }
        auto [it, inserted] = plan.k_by_demo_count.emplace(demos, k);
        if (!inserted) throw std::logic_error("table plan demo counts must be distinct per k");
    }
    return plan;
}

// ============================================================================
// Scripted transports
// ============================================================================

namespace {

TransportReply candidate_reply(const std::string& answer) {
    TransportReply reply;
    reply.content = "Working through the problem step by step.\nFINAL ANSWER: " + answer;
    reply.finish_reason = "stop";
    reply.usage.prompt_tokens = 64;
    reply.usage.completion_tokens = 16;
    return reply;
}

std::string wrong_answer(const std::string& gold) {
    return std::to_string(std::stol(gold) + 1);
}

std::string rest_of_line(const std::string& text, size_t from) {
    auto end = text.find('\n', from);
    std::string line =
        end == std::string::npos ? text.substr(from) : text.substr(from, end - from);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    while (!line.empty() && line.front() == ' ') line.erase(line.begin());
    return line;
}

}  // namespace

TransportReply TableOracle::send(const ProviderConfig&, const std::vector<ChatMessage>& messages) {
    const std::string id = parse_problem_id(messages.back().content);
    bool correct = false;
    if (messages.size() <= 2) {
        correct = plan_.baseline_correct.count(id) != 0;
    } else {
        const size_t demos = (messages.size() - 2) / 2;
        auto it = plan_.k_by_demo_count.find(demos);
        if (it == plan_.k_by_demo_count.end()) {
            throw std::logic_error("unexpected demo count in candidate request: " +
                                   std::to_string(demos));
        }
        correct = plan_.metatuned_correct.at(it->second).count(id) != 0;
    }
    const std::string& gold = plan_.answers.at(id);
    return candidate_reply(correct ? gold : wrong_answer(gold));
}

TransportReply AnswerOracle::send(const ProviderConfig&, const std::vector<ChatMessage>& messages) {
    const std::string id = parse_problem_id(messages.back().content);
    const std::string& gold = answers_.at(id);
    const bool correct = wrong_ids_.count(id) == 0;
    return candidate_reply(correct ? gold : wrong_answer(gold));
}

TransportReply JudgeOracle::send(const ProviderConfig&, const std::vector<ChatMessage>& messages) {
    const std::string& prompt = messages.at(1).content;

    const std::string expected_marker = "Expected answer: ";
    auto expected_pos = prompt.find(expected_marker);
    if (expected_pos == std::string::npos) {
        throw std::logic_error("judge prompt is missing the expected answer");
    }
    const std::string expected = rest_of_line(prompt, expected_pos + expected_marker.size());

    const std::string answer_marker = "FINAL ANSWER:";
    auto answer_pos = prompt.rfind(answer_marker);
    if (answer_pos == std::string::npos) {
        throw std::logic_error("judge prompt has no candidate FINAL ANSWER line");
    }
    const std::string candidate = rest_of_line(prompt, answer_pos + answer_marker.size());

    TransportReply reply;
    if (candidate == expected) {
        reply.content = "VERDICT: CORRECT";
    } else {
        reply.content = "VERDICT: INCORRECT\nThe final answer should be " + expected +
                        " but the solution concluded " + candidate + ".";
    }
    return reply;
}

TransportReply SequenceTransport::send(const ProviderConfig&, const std::vector<ChatMessage>&) {
    if (next_ >= replies_.size()) {
        throw ScriptedMissError("sequence transport exhausted after " +
                                std::to_string(replies_.size()) + " replies");
    }
    TransportReply reply;
    reply.content = replies_[next_++];
    return reply;
}

// ============================================================================
// Recorded table-1 run
// ============================================================================

RecordedRun record_benchmark_run(const std::filesystem::path& base_dir) {
    RecordedRun run;
    run.dataset_path = base_dir / "dataset.jsonl";
    write_fixture_dataset(run.dataset_path);

    TaskSet full = ingest(run.dataset_path);
    run.working = subsample(full, 100, 42);
    run.plan = TablePlan::benchmark(run.working);
    run.run_dir = base_dir / "record";

    ExperimentConfig config;
    config.dataset.path = std::filesystem::absolute(run.dataset_path).string();
    config.dataset.subsample_n = 100;
    config.dataset.seed = 42;
    config.context_sizes = {5, 10, 20, 30, 40};
    config.candidate = fixture_provider_config("fixture-candidate");
    config.judge = fixture_provider_config("fixture-judge");
    config.candidate.script_path = (run.run_dir / "transcripts" / "candidate.ndjson").string();
    config.judge.script_path = (run.run_dir / "transcripts" / "judge.ndjson").string();
    config.judge_mode = JudgeMode::both;
    config.clock = "logical";
    config.output_dir = run.run_dir.string();
    save_config(config, run.run_dir / "config.json");
    write_text_file(run.run_dir / "histogram.csv", histogram_csv(level_histogram(run.working)));

    ExperimentRuntime runtime;
    runtime.judge_mode = config.judge_mode;
    runtime.loop = config.loop;
    runtime.candidate_system_prompt = config.candidate_system_prompt;
    runtime.parallelism = 1;
    runtime.clock = make_clock("logical");
    runtime.out_dir = run.run_dir;
    runtime.candidate = std::make_shared<Provider>(
        config.candidate, std::make_unique<TableOracle>(run.plan),
        std::make_shared<ResponseCache>(),
        std::make_shared<TranscriptRecorder>(run.run_dir / "transcripts" / "candidate.ndjson",
                                             make_clock("logical")));
    runtime.judge = std::make_shared<Provider>(
        config.judge, std::make_unique<JudgeOracle>(), std::make_shared<ResponseCache>(),
        std::make_shared<TranscriptRecorder>(run.run_dir / "transcripts" / "judge.ndjson",
                                             make_clock("logical")));

    run.sweep_result = sweep(run.working, config.context_sizes, runtime);
    run.config = config;
    return run;
}

// ============================================================================
// Random states
// ============================================================================

namespace {

std::string random_text(SplitMix64& rng, const char* stem) {
    return std::string(stem) + " " + std::to_string(rng.next() % 1000000);
}

Correction random_correction(SplitMix64& rng) {
    Correction c;
    switch (rng.next_below(3)) {
        case 0:
            c.kind = CorrectionKind::refined_instruction;
            c.origin = CorrectionOrigin::synthesizer;
            break;
        case 1:
            c.kind = CorrectionKind::demonstration;
            c.source_instance = "q" + std::to_string(rng.next_below(500));
            c.origin = CorrectionOrigin::judge;
            break;
        default:
            c.kind = CorrectionKind::explanation;
            c.origin = rng.next_below(2) == 0 ? CorrectionOrigin::judge : CorrectionOrigin::human;
            break;
    }
    c.content = random_text(rng, "correction");
    return c;
}

}  // namespace

TaskFunctionalityState random_state(SplitMix64& rng) {
    TaskFunctionalityState state;
    state.base_prompt = random_text(rng, "Solve the problem carefully, variant");

    const size_t critiques = rng.next_below(kCritiqueMemoryCap + 1);
    for (size_t i = 0; i < critiques; ++i) {
        Correction c;
        c.kind = CorrectionKind::explanation;
        c.content = random_text(rng, "lesson");
        c.origin = CorrectionOrigin::judge;
        state.critique_memory.push_back(std::move(c));
    }

    const size_t demos = rng.next_below(8);
    for (size_t i = 0; i < demos; ++i) {
        DemoPair demo;
        demo.instance_id = "q" + std::to_string(rng.next_below(500));
        demo.problem = random_text(rng, "Problem about value");
        demo.gold_solution = random_text(rng, "Derive the value as");
        demo.gold_answer = std::to_string(rng.next_below(100000));
        state.demo_history.push_back(std::move(demo));
    }

    const size_t revisions = rng.next_below(8);
    uint64_t iteration = 0;
    for (size_t i = 0; i < revisions; ++i) {
        iteration += 1 + rng.next_below(3);
        RevisionEvent event;
        event.iteration = iteration;
        switch (rng.next_below(3)) {
            case 0: event.trigger = "accumulation"; break;
            case 1: event.trigger = "epoch_flush"; break;
            default: event.trigger = "metatune"; break;
        }
        const size_t applied = 1 + rng.next_below(3);
        for (size_t c = 0; c < applied; ++c) {
            event.corrections_applied.push_back(random_correction(rng));
        }
        event.prompt_before = sha256_hex(random_text(rng, "before"));
        event.prompt_after = sha256_hex(random_text(rng, "after"));
        char tick[24];
        std::snprintf(tick, sizeof tick, "tick:%06zu", i);
        event.timestamp = tick;
        state.revision_log.push_back(std::move(event));
    }
    state.version = revisions;
    return state;
}

}  // namespace metatune::testing
