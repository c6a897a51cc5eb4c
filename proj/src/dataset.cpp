#include "metatune/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "metatune/digest.hpp"
#include "metatune/errors.hpp"
#include "metatune/rng.hpp"

namespace metatune {

using nlohmann::json;

namespace {

json instance_to_json(const TaskInstance& t) {
    json j;
    j["answer"] = t.gold_answer;
    j["id"] = t.id;
    j["level"] = t.level;
    j["problem"] = t.problem;
    j["solution"] = t.gold_solution;
    j["subject"] = t.subject;
    return j;
}

std::string field_as_string(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_float()) {
        std::ostringstream oss;
        oss << v.get<double>();
        return oss.str();
    }
    return v.dump();
}

}  // namespace

void validate_instance(const TaskInstance& t, const std::string& where) {
    if (t.id.empty()) throw ValidationError(where + ": empty id");
    if (t.problem.empty()) throw ValidationError(where + ": empty problem");
    if (t.gold_answer.empty()) throw ValidationError(where + ": empty answer");
    if (t.level < 1 || t.level > 5) {
        throw ValidationError(where + ": level " + std::to_string(t.level) +
                              " out of range 1..5 (id=" + t.id + ")");
    }
}

TaskSet ingest(const std::filesystem::path& path, const std::string& format) {
    if (format != "jsonl") {
        throw ValidationError("unsupported record format: " + format);
    }
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open dataset file: " + path.string());
    }

    TaskSet set;
    set.provenance.source = path.string();

    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    size_t record_index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        const std::string where = path.filename().string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(where + ": malformed record: " + e.what());
        }

        TaskInstance t;
        for (const char* required : {"problem", "solution", "answer", "level"}) {
            if (!j.contains(required)) {
                throw ValidationError(where + ": record missing required field '" +
                                      std::string(required) + "'");
            }
        }
        t.problem = field_as_string(j, "problem");
        t.gold_solution = field_as_string(j, "solution");
        t.gold_answer = field_as_string(j, "answer");
        if (!j.at("level").is_number_integer()) {
            throw ValidationError(where + ": level must be an integer");
        }
        t.level = j.at("level").get<int>();
        if (j.contains("id")) {
            t.id = field_as_string(j, "id");
        } else if (j.contains("unique_id")) {
            t.id = field_as_string(j, "unique_id");
        } else {
            t.id = std::to_string(record_index);
        }
        if (j.contains("subject")) t.subject = field_as_string(j, "subject");

        validate_instance(t, where);
        if (!seen_ids.insert(t.id).second) {
            throw ValidationError(where + ": duplicate id '" + t.id + "'");
        }
        set.instances.push_back(std::move(t));
        ++record_index;
    }
    return set;
}

TaskSet subsample(const TaskSet& set, size_t n, uint64_t seed) {
    if (n > set.size()) {
        throw ValidationError("subsample size " + std::to_string(n) +
                              " exceeds set size " + std::to_string(set.size()));
    }
    TaskSet out;
    out.provenance.source = set.provenance.source;
    out.provenance.seed = seed;
    out.provenance.parent_digest = task_set_digest(set);

    std::vector<TaskInstance> shuffled = set.instances;
    seeded_shuffle(shuffled, seed);
    shuffled.resize(n);
    out.instances = std::move(shuffled);
    return out;
}

Split split_train_test(const TaskSet& set, size_t k) {
    if (k == 0 || k >= set.size()) {
        throw ValidationError("split point k=" + std::to_string(k) +
                              " must satisfy 0 < k < " + std::to_string(set.size()));
    }
    Split s;
    s.k = k;
    std::string parent = task_set_digest(set);
    s.train.provenance = set.provenance;
    s.train.provenance.parent_digest = parent;
    s.test.provenance = set.provenance;
    s.test.provenance.parent_digest = parent;
    s.train.instances.assign(set.instances.begin(), set.instances.begin() + static_cast<long>(k));
    s.test.instances.assign(set.instances.begin() + static_cast<long>(k), set.instances.end());
    return s;
}

std::map<int, size_t> level_histogram(const TaskSet& set) {
    std::map<int, size_t> hist;
    for (int level = 1; level <= 5; ++level) hist[level] = 0;
    for (const auto& t : set.instances) ++hist[t.level];
    return hist;
}

std::string canonical_instance_json(const TaskInstance& instance) {
    return instance_to_json(instance).dump();
}

std::string task_set_digest(const TaskSet& set) {
    // Content-addressed: the digest covers the instances in order, nothing else.
    json arr = json::array();
    for (const auto& t : set.instances) arr.push_back(instance_to_json(t));
    return sha256_hex(arr.dump());
}

}  // namespace metatune
