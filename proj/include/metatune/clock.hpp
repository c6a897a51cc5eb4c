#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>

namespace metatune {

// Timestamps flow into revision logs and transcripts as opaque strings.
// Runs default to a logical clock so that repeated executions of the same
// scripted experiment serialize byte-identically; wall-clock time is opt-in.
using ClockFn = std::function<std::string()>;

// Monotone tick strings: "tick:000000", "tick:000001", ...
ClockFn make_logical_clock();

// ISO-8601 UTC wall clock.
ClockFn make_system_clock();

// "logical" or "system"; anything else is a ValidationError.
ClockFn make_clock(const std::string& kind);

}  // namespace metatune
