#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace metatune {

// One math problem with its gold solution and final answer.
struct TaskInstance {
    std::string id;             // unique within a TaskSet
    std::string problem;
    std::string gold_solution;  // full worked solution
    std::string gold_answer;    // final answer, verbatim from the source
    int level = 1;              // 1..5
    std::string subject;        // optional
};

// Where a TaskSet came from, for replayable lineage.
struct Provenance {
    std::string source;                 // file path of the original records
    std::optional<uint64_t> seed;       // set by subsample()
    std::string parent_digest;          // digest of the set this was drawn from
};

struct TaskSet {
    std::vector<TaskInstance> instances;
    Provenance provenance;

    size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }
};

struct Split {
    TaskSet train;
    TaskSet test;
    size_t k = 0;  // |train|
};

// Reads newline-delimited JSON records (fields: problem, solution, answer,
// level, plus optional id/unique_id and subject) and validates them.
// Errors name the offending line. `format` currently accepts "jsonl".
TaskSet ingest(const std::filesystem::path& path, const std::string& format = "jsonl");

// Deterministic seeded shuffle, then the first n instances in shuffled order.
TaskSet subsample(const TaskSet& set, size_t n, uint64_t seed);

// Prefix split: first k instances train, remainder test. Requires 0 < k < |set|.
Split split_train_test(const TaskSet& set, size_t k);

// Counts per level 1..5; absent levels are present with count 0.
std::map<int, size_t> level_histogram(const TaskSet& set);

// Lowercase hex SHA-256 over the canonical serialization of the instances.
std::string task_set_digest(const TaskSet& set);

// Canonical single-line JSON for one instance (sorted keys, no extra spaces).
std::string canonical_instance_json(const TaskInstance& instance);

void validate_instance(const TaskInstance& instance, const std::string& where);

}  // namespace metatune
