#pragma once

#include "prvkit/analysis.hpp"
#include "prvkit/records.hpp"

#include <iosfwd>
#include <optional>
#include <string_view>

namespace prvkit::cli
{

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

/// Runs the `prvkit` command line and returns its exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "10ms", "250us", "1.5s", "42ns" or a bare nanosecond count. Throws ConfigError.
Nanoseconds parse_duration(std::string_view text);

/// "t0:t1" with durations on both sides. Throws ConfigError.
TimeWindow parse_window(std::string_view text);

/// The span between the first workload-phase begin marker and the last end marker, if any.
std::optional<TimeWindow> find_workload_window(const TraceBundle& bundle);

/// The bins lying entirely inside `window`.
TimeSeries restrict_to_window(const TimeSeries& series, const TimeWindow& window);

} // namespace prvkit::cli
