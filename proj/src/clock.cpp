#include "metatune/clock.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "metatune/errors.hpp"

namespace metatune {

ClockFn make_logical_clock() {
    auto counter = std::make_shared<std::atomic<uint64_t>>(0);
    return [counter]() {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "tick:%06llu",
                      static_cast<unsigned long long>(counter->fetch_add(1)));
        return std::string(buf);
    };
}

ClockFn make_system_clock() {
    return []() {
        auto now = std::chrono::system_clock::now();
        std::time_t t = std::chrono::system_clock::to_time_t(now);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return std::string(buf);
    };
}

ClockFn make_clock(const std::string& kind) {
    if (kind == "logical") return make_logical_clock();
    if (kind == "system") return make_system_clock();
    throw ValidationError("unknown clock kind: " + kind);
}

}  // namespace metatune
