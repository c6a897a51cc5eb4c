#include "metatune/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metatune/errors.hpp"

namespace metatune {

using nlohmann::json;

std::string default_candidate_system_prompt() {
    return "You are an expert mathematician. Solve the given problem step by step, showing "
           "your full reasoning before the result. End your reply with a line reading exactly "
           "'FINAL ANSWER: <answer>' where <answer> is the final answer in simplest form.";
}

ExperimentConfig::ExperimentConfig() : candidate_system_prompt(default_candidate_system_prompt()) {}

void validate_experiment_config(const ExperimentConfig& config) {
    if (config.dataset.path.empty()) throw ValidationError("dataset.path is required");
    if (config.dataset.subsample_n == 0) throw ValidationError("dataset.subsample_n must be > 0");
    if (config.context_sizes.empty()) throw ValidationError("context_sizes must be non-empty");
    for (size_t k : config.context_sizes) {
        if (k == 0 || k >= config.dataset.subsample_n) {
            throw ValidationError("context size " + std::to_string(k) +
                                  " must satisfy 0 < k < " +
                                  std::to_string(config.dataset.subsample_n));
        }
    }
    if (config.parallelism < 1) throw ValidationError("parallelism must be >= 1");
    if (config.clock != "logical" && config.clock != "system") {
        throw ValidationError("clock must be 'logical' or 'system'");
    }
    if (config.candidate_system_prompt.empty()) {
        throw ValidationError("candidate_system_prompt must be non-empty");
    }
    validate_loop_config(config.loop);
}

namespace {

json provider_to_json(const ProviderConfig& p) {
    return {{"backend", to_string(p.backend)},
            {"credential_ref", p.credential_ref},
            {"endpoint", p.endpoint},
            {"max_attempts", p.max_attempts},
            {"max_output_tokens", p.max_output_tokens},
            {"model_name", p.model_name},
            {"retry_base_ms", p.retry_base_ms},
            {"retry_cap_ms", p.retry_cap_ms},
            {"script_path", p.script_path},
            {"temperature", p.temperature},
            {"timeout_sec", p.timeout_sec}};
}

ProviderConfig provider_from_json(const json& j) {
    ProviderConfig p;
    p.backend = backend_kind_from_string(j.value("backend", "scripted"));
    p.model_name = j.value("model_name", "");
    p.temperature = j.value("temperature", 0.0);
    p.max_output_tokens = j.value("max_output_tokens", 2048);
    p.endpoint = j.value("endpoint", "");
    p.credential_ref = j.value("credential_ref", "");
    p.script_path = j.value("script_path", "");
    p.max_attempts = j.value("max_attempts", 5);
    p.retry_base_ms = j.value("retry_base_ms", 500);
    p.retry_cap_ms = j.value("retry_cap_ms", 8000);
    p.timeout_sec = j.value("timeout_sec", 120);
    return p;
}

json loop_to_json(const LoopConfig& l) {
    json kinds = json::array();
    for (auto kind : l.correction_kinds_enabled) kinds.push_back(to_string(kind));
    return {{"accumulation_b", l.accumulation_b},
            {"context_budget_tokens", l.context_budget_tokens},
            {"correction_kinds_enabled", kinds},
            {"early_stop_on_clean_pass", l.early_stop_on_clean_pass},
            {"epochs", l.epochs},
            {"max_iterations", l.max_iterations},
            {"per_instance_break", l.per_instance_break},
            {"warm_start_samples", l.warm_start_samples}};
}

LoopConfig loop_from_json(const json& j) {
    LoopConfig l;
    l.max_iterations = j.value("max_iterations", l.max_iterations);
    l.epochs = j.value("epochs", l.epochs);
    l.accumulation_b = j.value("accumulation_b", l.accumulation_b);
    l.warm_start_samples = j.value("warm_start_samples", l.warm_start_samples);
    if (j.contains("correction_kinds_enabled")) {
        l.correction_kinds_enabled.clear();
        for (const auto& kind : j["correction_kinds_enabled"]) {
            l.correction_kinds_enabled.insert(
                correction_kind_from_string(kind.get<std::string>()));
        }
    }
    l.early_stop_on_clean_pass = j.value("early_stop_on_clean_pass", l.early_stop_on_clean_pass);
    l.per_instance_break = j.value("per_instance_break", l.per_instance_break);
    l.context_budget_tokens = j.value("context_budget_tokens", l.context_budget_tokens);
    return l;
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& config) {
    json j;
    json dataset;
    dataset["format"] = config.dataset.format;
    dataset["path"] = config.dataset.path;
    dataset["seed"] = config.dataset.seed;
    dataset["subsample_n"] = config.dataset.subsample_n;
    j["dataset"] = dataset;
    j["candidate"] = provider_to_json(config.candidate);
    j["judge"] = provider_to_json(config.judge);
    j["synthesizer"] = provider_to_json(config.synthesizer);
    j["use_synthesizer"] = config.use_synthesizer;
    j["candidate_system_prompt"] = config.candidate_system_prompt;
    j["clock"] = config.clock;
    j["context_sizes"] = config.context_sizes;
    j["judge_mode"] = to_string(config.judge_mode);
    j["loop"] = loop_to_json(config.loop);
    j["output_dir"] = config.output_dir;
    j["parallelism"] = config.parallelism;
    j["record_transcripts"] = config.record_transcripts;
    return j.dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }

    ExperimentConfig config;
    try {
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            config.dataset.path = d.value("path", "");
            config.dataset.format = d.value("format", "jsonl");
            config.dataset.subsample_n = d.value("subsample_n", config.dataset.subsample_n);
            config.dataset.seed = d.value("seed", config.dataset.seed);
        }
        if (j.contains("context_sizes")) {
            config.context_sizes = j["context_sizes"].get<std::vector<size_t>>();
        }
        if (j.contains("candidate")) config.candidate = provider_from_json(j["candidate"]);
        if (j.contains("judge")) config.judge = provider_from_json(j["judge"]);
        if (j.contains("synthesizer")) config.synthesizer = provider_from_json(j["synthesizer"]);
        config.use_synthesizer = j.value("use_synthesizer", false);
        if (j.contains("loop")) config.loop = loop_from_json(j["loop"]);
        config.judge_mode = judge_mode_from_string(j.value("judge_mode", "both"));
        config.output_dir = j.value("output_dir", config.output_dir);
        config.parallelism = j.value("parallelism", 1);
        config.record_transcripts = j.value("record_transcripts", true);
        config.clock = j.value("clock", "logical");
        config.candidate_system_prompt =
            j.value("candidate_system_prompt", default_candidate_system_prompt());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is malformed: ") + e.what());
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    ExperimentConfig config = experiment_config_from_json(buffer.str());
    validate_experiment_config(config);
    return config;
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot open config file for writing: " + path.string());
    out << experiment_config_to_json(config);
}

}  // namespace metatune
