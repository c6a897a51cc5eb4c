#include "metatune/judge.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <regex>
#include <sstream>

#include "metatune/errors.hpp"

namespace metatune {

std::string to_string(JudgeMode mode) {
    switch (mode) {
        case JudgeMode::deterministic: return "deterministic";
        case JudgeMode::llm: return "llm";
        case JudgeMode::both: return "both";
    }
    return "deterministic";
}

JudgeMode judge_mode_from_string(const std::string& s) {
    if (s == "deterministic") return JudgeMode::deterministic;
    if (s == "llm") return JudgeMode::llm;
    if (s == "both") return JudgeMode::both;
    throw ValidationError("unknown judge mode: " + s);
}

// ============================================================================
// Answer extraction
// ============================================================================

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Index of the brace matching s[open] ('{'), or nullopt if unbalanced.
std::optional<size_t> match_brace(const std::string& s, size_t open) {
    if (open >= s.size() || s[open] != '{') return std::nullopt;
    int depth = 0;
    for (size_t i = open; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        else if (s[i] == '}') {
            --depth;
            if (depth == 0) return i;
        }
    }
    return std::nullopt;
}

std::string last_nonempty_line(const std::string& text) {
    size_t end = text.size();
    while (end > 0) {
        size_t start = text.rfind('\n', end - 1);
        size_t line_begin = (start == std::string::npos) ? 0 : start + 1;
        std::string line = trim(text.substr(line_begin, end - line_begin));
        if (!line.empty()) return line;
        if (start == std::string::npos) break;
        end = start;
    }
    return "";
}

}  // namespace

std::string extract_final_answer(const std::string& completion_text) {
    if (trim(completion_text).empty()) {
        throw ValidationError("cannot extract a final answer from an empty completion");
    }

    size_t boxed = completion_text.rfind("\\boxed{");
    if (boxed != std::string::npos) {
        size_t open = boxed + 6;
        if (auto close = match_brace(completion_text, open)) {
            std::string inner = trim(completion_text.substr(open + 1, *close - open - 1));
            if (!inner.empty()) return inner;
        }
    }

    const std::string marker = "final answer";
    std::string lower = lowercase(completion_text);
    size_t pos = lower.rfind(marker);
    if (pos != std::string::npos) {
        size_t after = pos + marker.size();
        while (after < completion_text.size() &&
               (completion_text[after] == ':' || completion_text[after] == ' ' ||
                completion_text[after] == '\t')) {
            ++after;
        }
        std::string rest = completion_text.substr(after);
        size_t nl = rest.find('\n');
        std::string line = trim(nl == std::string::npos ? rest : rest.substr(0, nl));
        if (!line.empty()) return line;
        std::string remainder = trim(rest);
        if (!remainder.empty()) return remainder;
    }

    return last_nonempty_line(completion_text);
}

// ============================================================================
// Normalization
// ============================================================================

namespace {

std::string strip_enclosing(const std::string& s, const std::string& open,
                            const std::string& close) {
    if (s.size() > open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
        s.compare(s.size() - close.size(), close.size(), close) == 0) {
        return s.substr(open.size(), s.size() - open.size() - close.size());
    }
    return s;
}

std::string strip_boxed(const std::string& s) {
    const std::string prefix = "\\boxed{";
    if (s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0 && s.back() == '}') {
        auto close = match_brace(s, prefix.size() - 1);
        if (close && *close == s.size() - 1) {
            return s.substr(prefix.size(), s.size() - prefix.size() - 1);
        }
    }
    return s;
}

std::string strip_prose_prefix(const std::string& s) {
    static const std::vector<std::string> prefixes = {
        "the final answer is", "the final answer:", "final answer is", "final answer:",
        "the answer is",       "the answer:",       "answer is",       "answer:",
    };
    std::string lower = lowercase(s);
    for (const auto& p : prefixes) {
        if (lower.size() > p.size() && lower.compare(0, p.size(), p) == 0) {
            return trim(s.substr(p.size()));
        }
    }
    return s;
}

std::string strip_trailing_period(const std::string& s) {
    if (!s.empty() && s.back() == '.') return s.substr(0, s.size() - 1);
    return s;
}

// "x = 5" -> "5": a short identifier followed by '=' is an equation label,
// not part of the value.
std::string strip_identifier_equals(const std::string& s) {
    size_t i = 0;
    if (i >= s.size() || std::isalpha(static_cast<unsigned char>(s[i])) == 0) return s;
    ++i;
    size_t name_len = 1;
    while (i < s.size() && name_len < 3 &&
           (std::isalnum(static_cast<unsigned char>(s[i])) != 0 || s[i] == '_')) {
        ++i;
        ++name_len;
    }
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size() || s[i] != '=') return s;
    ++i;
    std::string rest = trim(s.substr(i));
    return rest.empty() ? s : rest;
}

std::string convert_frac(std::string s) {
    static const std::vector<std::string> markers = {"\\dfrac", "\\tfrac", "\\frac"};
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& m : markers) {
            size_t pos = s.find(m + "{");
            if (pos == std::string::npos) continue;
            size_t open1 = pos + m.size();
            auto close1 = match_brace(s, open1);
            if (!close1) continue;
            size_t open2 = *close1 + 1;
            if (open2 >= s.size() || s[open2] != '{') continue;
            auto close2 = match_brace(s, open2);
            if (!close2) continue;
            std::string num = s.substr(open1 + 1, *close1 - open1 - 1);
            std::string den = s.substr(open2 + 1, *close2 - open2 - 1);
            s = s.substr(0, pos) + num + "/" + den + s.substr(*close2 + 1);
            changed = true;
        }
    }
    return s;
}

std::string remove_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (!is_space(c)) out.push_back(c);
    }
    return out;
}

std::string strip_grouping_commas(const std::string& s) {
    static const std::regex grouped(R"(^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$)");
    if (!std::regex_match(s, grouped)) return s;
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c != ',') out.push_back(c);
    }
    return out;
}

bool all_digits(const std::string& s) {
    if (s.empty() || s.size() > 18) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::optional<long long> parse_signed_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    size_t start = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    std::string digits = s.substr(start);
    if (!all_digits(digits)) return std::nullopt;
    long long value = std::stoll(digits);
    return s[0] == '-' ? -value : value;
}

// Canonical text for already-parsed integers and a/b rationals: lowest terms,
// sign on the numerator, no leading zeros.
std::string reduce_number(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) {
        if (auto v = parse_signed_int(s)) return std::to_string(*v);
        return s;
    }
    if (s.find('/', slash + 1) != std::string::npos) return s;
    auto num = parse_signed_int(s.substr(0, slash));
    auto den = parse_signed_int(s.substr(slash + 1));
    if (!num || !den || *den == 0) return s;
    long long n = *num, d = *den;
    if (d < 0) {
        n = -n;
        d = -d;
    }
    long long g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) {
        n /= g;
        d /= g;
    }
    if (n == 0) return "0";
    if (d == 1) return std::to_string(n);
    return std::to_string(n) + "/" + std::to_string(d);
}

}  // namespace

std::string normalize_answer(const std::string& raw) {
    const std::string fallback = trim(raw);
    std::string s = fallback;
    for (;;) {
        std::string before = s;
        s = trim(s);
        s = strip_enclosing(s, "$$", "$$");
        s = strip_enclosing(s, "$", "$");
        s = strip_enclosing(s, "\\(", "\\)");
        s = strip_enclosing(s, "\\[", "\\]");
        s = strip_boxed(s);
        s = strip_prose_prefix(s);
        s = strip_trailing_period(s);
        s = strip_identifier_equals(s);
        if (s == before) break;
    }
    s = convert_frac(s);
    s = remove_whitespace(s);
    s = strip_grouping_commas(s);
    s = reduce_number(s);
    return s.empty() ? fallback : s;
}

std::optional<std::pair<long long, long long>> parse_rational(const std::string& normalized) {
    const std::string& s = normalized;
    if (s.empty()) return std::nullopt;

    auto slash = s.find('/');
    if (slash != std::string::npos) {
        if (s.find('/', slash + 1) != std::string::npos) return std::nullopt;
        auto num = parse_signed_int(s.substr(0, slash));
        auto den = parse_signed_int(s.substr(slash + 1));
        if (!num || !den || *den == 0) return std::nullopt;
        long long n = *num, d = *den;
        if (d < 0) {
            n = -n;
            d = -d;
        }
        return std::make_pair(n, d);
    }

    auto dot = s.find('.');
    if (dot != std::string::npos) {
        std::string head = s.substr(0, dot);
        std::string frac = s.substr(dot + 1);
        if (!all_digits(frac) || frac.size() > 17) return std::nullopt;
        bool negative = !head.empty() && head[0] == '-';
        if (!head.empty() && (head[0] == '+' || head[0] == '-')) head = head.substr(1);
        if (head.empty()) head = "0";
        if (!all_digits(head)) return std::nullopt;
        long long whole = std::stoll(head);
        long long scale = 1;
        for (size_t i = 0; i < frac.size(); ++i) {
            if (scale > 922337203685477580LL / 10) return std::nullopt;
            scale *= 10;
        }
        long long part = frac.empty() ? 0 : std::stoll(frac);
        if (whole > (922337203685477580LL - part) / scale) return std::nullopt;
        long long n = whole * scale + part;
        return std::make_pair(negative ? -n : n, scale);
    }

    if (auto v = parse_signed_int(s)) return std::make_pair(*v, 1LL);
    return std::nullopt;
}

bool grade_deterministic(const std::string& candidate, const std::string& gold) {
    std::string nc = normalize_answer(candidate);
    std::string ng = normalize_answer(gold);
    if (nc == ng) return true;
    auto rc = parse_rational(nc);
    auto rg = parse_rational(ng);
    if (rc && rg) {
        return static_cast<__int128>(rc->first) * rg->second ==
               static_cast<__int128>(rg->first) * rc->second;
    }
    return false;
}

// ============================================================================
// LLM judge
// ============================================================================

std::string judge_system_prompt() {
    return "You are a strict mathematics grader. You will be given a problem, the expected "
           "answer with a reference solution, and a candidate solution. Critique the following "
           "solution step by step, checking each claim against the reference. Your reply must "
           "start with a line reading exactly 'VERDICT: CORRECT' or 'VERDICT: INCORRECT', "
           "followed by the critique on subsequent lines. Judge only the final answer's "
           "correctness; style does not matter.";
}

std::string judge_reprompt_text() {
    return "Your reply did not follow the required format. Reply again, starting with a line "
           "reading exactly 'VERDICT: CORRECT' or 'VERDICT: INCORRECT', followed by your "
           "critique.";
}

std::vector<ChatMessage> build_judge_messages(const TaskInstance& instance,
                                              const std::string& completion) {
    std::ostringstream user;
    user << "Problem:\n"
         << instance.problem << "\n\n"
         << "Expected answer: " << instance.gold_answer << "\n\n"
         << "Reference solution:\n"
         << instance.gold_solution << "\n\n"
         << "Candidate solution:\n"
         << completion << "\n";
    return {system_message(judge_system_prompt()), user_message(user.str())};
}

std::pair<bool, std::string> parse_judge_reply(const std::string& reply) {
    std::istringstream in(reply);
    std::string line;
    std::optional<bool> verdict;
    std::string critique;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (!verdict) {
            if (t == "VERDICT: CORRECT") {
                verdict = true;
                continue;
            }
            if (t == "VERDICT: INCORRECT") {
                verdict = false;
                continue;
            }
        }
        if (!critique.empty()) critique += "\n";
        critique += line;
    }
    if (!verdict) {
        throw ValidationError("judge reply has no 'VERDICT: CORRECT|INCORRECT' line");
    }
    return {*verdict, trim(critique)};
}

Verdict judge_evaluate(const TaskInstance& instance, const std::string& completion,
                       JudgeMode mode, Provider* judge_provider) {
    const std::string extracted = extract_final_answer(completion);

    Verdict verdict;
    verdict.judge_kind = mode;
    verdict.parsed_answer = normalize_answer(extracted);

    const bool det_correct = grade_deterministic(extracted, instance.gold_answer);

    if (mode == JudgeMode::deterministic) {
        verdict.correct = det_correct;
        if (!det_correct) {
            verdict.critique = "Expected final answer '" + normalize_answer(instance.gold_answer) +
                               "' but the candidate concluded '" + verdict.parsed_answer + "'.";
        }
        return verdict;
    }

    if (judge_provider == nullptr) {
        throw ValidationError("judge mode '" + to_string(mode) + "' requires a judge provider");
    }

    auto messages = build_judge_messages(instance, completion);
    std::optional<std::pair<bool, std::string>> parsed;
    Completion reply = judge_provider->complete(messages);
    try {
        parsed = parse_judge_reply(reply.content);
    } catch (const ValidationError&) {
        auto retry = messages;
        retry.push_back(assistant_message(reply.content));
        retry.push_back(user_message(judge_reprompt_text()));
        Completion second = judge_provider->complete(retry);
        try {
            parsed = parse_judge_reply(second.content);
        } catch (const ValidationError&) {
        }
    }

    if (!parsed) {
        verdict.correct = false;
        verdict.judge_error = true;
        verdict.critique = "judge reply did not follow the verdict contract after one reprompt";
        if (mode == JudgeMode::both) {
            verdict.confidence_note = std::string("deterministic cross-check: ") +
                                      (det_correct ? "correct" : "incorrect");
        }
        return verdict;
    }

    verdict.correct = parsed->first;
    verdict.critique = parsed->second;
    if (mode == JudgeMode::both && parsed->first != det_correct) {
        verdict.confidence_note = std::string("llm judge says ") +
                                  (parsed->first ? "correct" : "incorrect") +
                                  " but deterministic grader says " +
                                  (det_correct ? "correct" : "incorrect");
    }
    return verdict;
}

}  // namespace metatune
