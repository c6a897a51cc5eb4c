#include "metatune/metrics.hpp"

#include "metatune/errors.hpp"

namespace metatune {

std::string to_string(Setting setting) {
    return setting == Setting::baseline ? "baseline" : "metatuned";
}

long accuracy_hundredths(long correct, long total) {
    if (total <= 0) throw ValidationError("accuracy requires a positive total");
    if (correct < 0 || correct > total) throw ValidationError("correct count out of range");
    return (20000L * correct + total) / (2L * total);
}

long delta_hundredths(long correct_after, long correct_before, long total) {
    if (total <= 0) throw ValidationError("delta requires a positive total");
    long diff = 10000L * (correct_after - correct_before);
    long magnitude = diff < 0 ? -diff : diff;
    long rounded = (2L * magnitude + total) / (2L * total);
    return diff < 0 ? -rounded : rounded;
}

}  // namespace metatune
