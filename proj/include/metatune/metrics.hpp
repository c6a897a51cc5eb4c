#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>

namespace metatune {

enum class Setting { baseline, metatuned };

std::string to_string(Setting setting);

// One row of the results table. Accuracy and delta are stored in hundredths
// of a percent so the printed 2-decimal values are exact.
struct RunMetrics {
    size_t context_size = 0;  // k
    Setting setting = Setting::baseline;
    long correct = 0;
    long incorrect = 0;
    long accuracy_hundredths = 0;
    std::optional<long> delta_hundredths;  // vs the paired baseline
    long judge_errors = 0;                 // counted as incorrect

    long total() const { return correct + incorrect; }
};

// Test instances that flipped between the paired runs, grouped by level 1-5.
struct LevelImprovement {
    std::array<long, 5> improved{};   // incorrect at baseline, correct after
    std::array<long, 5> regressed{};  // correct at baseline, incorrect after
};

// 100*correct/total in hundredths, rounded half-up. Throws on total <= 0.
long accuracy_hundredths(long correct, long total);

// Exact accuracy difference in hundredths, rounded half away from zero.
// Computed from the raw counts, not from the two rounded accuracies, so the
// printed delta matches the true difference.
long delta_hundredths(long correct_after, long correct_before, long total);

}  // namespace metatune
