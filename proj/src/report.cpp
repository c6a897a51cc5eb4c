#include "metatune/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "metatune/errors.hpp"

namespace metatune {

std::string format_hundredths(long hundredths) {
    if (hundredths < 0) throw ValidationError("format_hundredths expects a non-negative value");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%ld.%02ld", hundredths / 100, hundredths % 100);
    return buf;
}

std::string format_delta(long hundredths) {
    if (hundredths > 0) return "+" + format_hundredths(hundredths);
    if (hundredths < 0) return "-" + format_hundredths(-hundredths);
    return "0.00";
}

namespace {
const char* const kMetricsHeader = "context_size,setting,correct,incorrect,accuracy,delta";
}

std::string metrics_csv(const std::vector<RunMetrics>& rows) {
    std::ostringstream out;
    out << kMetricsHeader << '\n';
    for (const auto& row : rows) {
        out << row.context_size << ',' << to_string(row.setting) << ',' << row.correct << ','
            << row.incorrect << ',' << format_hundredths(row.accuracy_hundredths) << ',';
        if (row.delta_hundredths) out << format_delta(*row.delta_hundredths);
        out << '\n';
    }
    return out.str();
}

std::string metrics_table(const std::vector<RunMetrics>& rows) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %-10s %8s %10s %10s %8s\n", "Context Size",
                  "Setting", "Correct", "Incorrect", "Accuracy", "Delta");
    out << line;
    out << std::string(64, '-') << "\n";
    long judge_errors = 0;
    for (const auto& row : rows) {
        std::string accuracy = format_hundredths(row.accuracy_hundredths) + "%";
        std::string delta = row.delta_hundredths ? format_delta(*row.delta_hundredths) + "%" : "-";
        std::snprintf(line, sizeof line, "%-14zu %-10s %8ld %10ld %10s %8s\n", row.context_size,
                      to_string(row.setting).c_str(), row.correct, row.incorrect,
                      accuracy.c_str(), delta.c_str());
        out << line;
        judge_errors += row.judge_errors;
    }
    if (judge_errors > 0) {
        out << "\nNote: " << judge_errors
            << " judge failures were counted as incorrect answers.\n";
    }
    return out.str();
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

long parse_hundredths(const std::string& text, size_t line_no) {
    auto fail = [&]() -> long {
        throw ValidationError("metrics CSV line " + std::to_string(line_no) +
                              ": bad percentage '" + text + "'");
    };
    std::string s = text;
    long sign = 1;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
        if (s[0] == '-') sign = -1;
        s = s.substr(1);
    }
    auto dot = s.find('.');
    if (dot == std::string::npos || s.size() - dot - 1 != 2) return fail();
    std::string whole = s.substr(0, dot);
    std::string cents = s.substr(dot + 1);
    if (whole.empty() ||
        !std::all_of(whole.begin(), whole.end(), [](unsigned char c) { return isdigit(c); }) ||
        !std::all_of(cents.begin(), cents.end(), [](unsigned char c) { return isdigit(c); })) {
        return fail();
    }
    return sign * (std::stol(whole) * 100 + std::stol(cents));
}

}  // namespace

std::vector<RunMetrics> parse_metrics_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("metrics CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsHeader) {
        throw ValidationError("metrics CSV line 1: expected header '" +
                              std::string(kMetricsHeader) + "'");
    }

    std::vector<RunMetrics> rows;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_fields(line);
        if (fields.size() != 6) {
            throw ValidationError("metrics CSV line " + std::to_string(line_no) +
                                  ": expected 6 fields, got " + std::to_string(fields.size()));
        }
        RunMetrics row;
        try {
            row.context_size = std::stoul(fields[0]);
            row.correct = std::stol(fields[2]);
            row.incorrect = std::stol(fields[3]);
        } catch (const std::exception&) {
            throw ValidationError("metrics CSV line " + std::to_string(line_no) +
                                  ": bad numeric field");
        }
        if (fields[1] == "baseline") {
            row.setting = Setting::baseline;
        } else if (fields[1] == "metatuned") {
            row.setting = Setting::metatuned;
        } else {
            throw ValidationError("metrics CSV line " + std::to_string(line_no) +
                                  ": unknown setting '" + fields[1] + "'");
        }
        row.accuracy_hundredths = parse_hundredths(fields[4], line_no);
        if (!fields[5].empty()) row.delta_hundredths = parse_hundredths(fields[5], line_no);
        rows.push_back(row);
    }
    return rows;
}

std::string level_improvement_csv(const LevelImprovement& levels) {
    std::ostringstream out;
    out << "level,improved,regressed\n";
    for (size_t i = 0; i < levels.improved.size(); ++i) {
        out << (i + 1) << ',' << levels.improved[i] << ',' << levels.regressed[i] << '\n';
    }
    return out.str();
}

std::string histogram_csv(const std::map<int, size_t>& histogram) {
    std::ostringstream out;
    out << "level,count\n";
    for (const auto& [level, count] : histogram) {
        out << level << ',' << count << '\n';
    }
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw ValidationError("cannot open file for writing: " + path.string());
    out << content;
    if (!out) throw ValidationError("failed writing file: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace metatune
