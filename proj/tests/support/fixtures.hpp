#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "metatune/config.hpp"
#include "metatune/dataset.hpp"
#include "metatune/experiment.hpp"
#include "metatune/provider.hpp"
#include "metatune/rng.hpp"
#include "metatune/state.hpp"

namespace metatune::testing {

// Fresh directory under the system temp root; never reused across calls.
std::filesystem::path make_temp_dir(const std::string& hint);

// Writes `count` solvable problems as newline-delimited JSON. Ids are q000..,
// answers are integers derived from the record index, levels cycle 1..5.
void write_fixture_dataset(const std::filesystem::path& path, size_t count = 120);

std::string fixture_answer(size_t index);

// "Problem q017. ..." -> "q017".
std::string parse_problem_id(const std::string& problem_text);

ProviderConfig fixture_provider_config(const std::string& model);

// Which instances the scripted candidate answers correctly: one global
// zero-shot set plus per-context-size sets for demo-bearing requests, chosen
// so the sweep lands on the accuracy table the tests pin. Built over the
// working subsample's order.
struct TablePlan {
    std::vector<std::string> order;                        // ids in subsample order
    std::unordered_map<std::string, std::string> answers;  // id -> gold answer
    std::unordered_set<std::string> baseline_correct;
    std::map<size_t, std::unordered_set<std::string>> metatuned_correct;  // by k
    std::map<size_t, size_t> k_by_demo_count;  // demo-pair count -> k

    static TablePlan benchmark(const TaskSet& subsampled);
};

// Candidate transport scripted from a plan: a bare [system, user] request is
// answered per the zero-shot set; a demo-bearing request infers its context
// size from the demo count and answers per that size's set.
class TableOracle : public Transport {
public:
    explicit TableOracle(TablePlan plan) : plan_(std::move(plan)) {}
    TransportReply send(const ProviderConfig& config,
                        const std::vector<ChatMessage>& messages) override;

private:
    TablePlan plan_;
};

// Candidate transport answering with the gold value unless the instance id
// is in the wrong set, in which case it answers gold+1.
class AnswerOracle : public Transport {
public:
    AnswerOracle(std::unordered_map<std::string, std::string> answers,
                 std::unordered_set<std::string> wrong_ids)
        : answers_(std::move(answers)), wrong_ids_(std::move(wrong_ids)) {}
    TransportReply send(const ProviderConfig& config,
                        const std::vector<ChatMessage>& messages) override;

private:
    std::unordered_map<std::string, std::string> answers_;
    std::unordered_set<std::string> wrong_ids_;
};

// Judge transport that compares the candidate's FINAL ANSWER line against the
// expected answer quoted in the grading prompt (plain string comparison).
class JudgeOracle : public Transport {
public:
    TransportReply send(const ProviderConfig& config,
                        const std::vector<ChatMessage>& messages) override;
};

// Replies from a fixed queue, one per call, ignoring the request content.
class SequenceTransport : public Transport {
public:
    explicit SequenceTransport(std::vector<std::string> replies)
        : replies_(std::move(replies)) {}
    TransportReply send(const ProviderConfig& config,
                        const std::vector<ChatMessage>& messages) override;
    size_t calls() const { return next_; }

private:
    std::vector<std::string> replies_;
    size_t next_ = 0;
};

std::unordered_map<std::string, std::string> answers_by_id(const TaskSet& set);

// A complete recorded sweep over k in {5,10,20,30,40}: dataset written,
// fixture providers run with transcripts on, artifacts persisted under
// run_dir (config.json, transcripts/, metrics.csv, per-k checkpoints).
struct RecordedRun {
    std::filesystem::path dataset_path;
    std::filesystem::path run_dir;
    TaskSet working;
    TablePlan plan;
    SweepResult sweep_result;
    ExperimentConfig config;
};

RecordedRun record_benchmark_run(const std::filesystem::path& base_dir);

// Arbitrary state satisfying every structural invariant, for round-trip tests.
TaskFunctionalityState random_state(SplitMix64& rng);

}  // namespace metatune::testing
