#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metatune/metrics.hpp"

namespace metatune {

// 6526 -> "65.26"; input must be non-negative.
std::string format_hundredths(long hundredths);

// 211 -> "+2.11", -286 -> "-2.86", 0 -> "0.00".
std::string format_delta(long hundredths);

// Machine-readable rows. Header:
// context_size,setting,correct,incorrect,accuracy,delta
// Baseline rows leave the delta column empty.
std::string metrics_csv(const std::vector<RunMetrics>& rows);

// Aligned human-readable table; baseline delta prints as "-".
std::string metrics_table(const std::vector<RunMetrics>& rows);

// Inverse of metrics_csv. Throws ValidationError on a malformed document.
std::vector<RunMetrics> parse_metrics_csv(const std::string& csv);

// Columns: level,improved,regressed (one row per level 1-5).
std::string level_improvement_csv(const LevelImprovement& levels);

// Columns: level,count.
std::string histogram_csv(const std::map<int, size_t>& histogram);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace metatune
