#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metatune/dataset.hpp"
#include "metatune/provider.hpp"

namespace metatune {

enum class JudgeMode { deterministic, llm, both };

std::string to_string(JudgeMode mode);
JudgeMode judge_mode_from_string(const std::string& s);

struct Verdict {
    bool correct = false;
    std::string critique;         // empty when correct
    std::string parsed_answer;    // candidate's extracted final answer, normalized
    JudgeMode judge_kind = JudgeMode::deterministic;
    std::string confidence_note;  // set when the two graders of `both` mode disagree
    bool judge_error = false;     // judge reply unparseable after one reprompt
};

// Pulls the final answer out of a completion: last boxed expression if any,
// else the text after the last "FINAL ANSWER:" marker, else the last
// non-empty line. Throws ValidationError on an empty completion.
std::string extract_final_answer(const std::string& completion_text);

// Canonical form for answer comparison: strips math delimiters, \boxed, and
// leading prose ("the answer is", ...); converts \frac{a}{b} to a/b; removes
// whitespace; reduces integer and rational literals. Never fails; if the
// pipeline empties the string, returns the trimmed input.
std::string normalize_answer(const std::string& raw);

// Exact-value rational parse of an already normalized answer. Handles
// integers, a/b fractions, and finite decimals; rejects anything symbolic.
// Denominator of the result is always positive.
std::optional<std::pair<long long, long long>> parse_rational(const std::string& normalized);

// True iff the two answers normalize to the same string or both parse as
// rationals with equal value.
bool grade_deterministic(const std::string& candidate, const std::string& gold);

// Splits a judge reply on its "VERDICT: CORRECT|INCORRECT" line; the rest is
// the critique. Throws ValidationError when no verdict line is present.
std::pair<bool, std::string> parse_judge_reply(const std::string& reply);

std::string judge_system_prompt();
std::string judge_reprompt_text();

// The fixed grading prompt: problem, expected answer, reference solution,
// candidate output.
std::vector<ChatMessage> build_judge_messages(const TaskInstance& instance,
                                              const std::string& completion);

// Full evaluation of one completion. `judge_provider` is required for llm and
// both modes. An unparseable judge reply (after one reprompt) yields a verdict
// with judge_error=true and correct=false rather than a guess.
Verdict judge_evaluate(const TaskInstance& instance, const std::string& completion,
                       JudgeMode mode, Provider* judge_provider);

}  // namespace metatune
