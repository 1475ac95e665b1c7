#pragma once

#include "prvkit/records.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prvkit
{

/// Half-open time range [begin, end).
struct TimeWindow
{
    Nanoseconds begin = 0;
    Nanoseconds end = 0;

    Nanoseconds length() const
    {
        return end > begin ? end - begin : 0;
    }
};

struct TimeSeries
{
    Nanoseconds bin_width = 0;
    Nanoseconds origin = 0;
    /// End of the analysed range; the last bin may be cut short by it.
    Nanoseconds end = 0;
    std::vector<double> values;
    std::string label;
    std::string units;

    Nanoseconds bin_begin(std::size_t i) const
    {
        return origin + i * bin_width;
    }
    Nanoseconds bin_end(std::size_t i) const;
};

/// Key of one timeline row: (appl, task, thread).
struct RowKey
{
    std::uint32_t appl = 1;
    std::uint32_t task = 1;
    std::uint32_t thread = 1;

    friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

struct Interval
{
    Nanoseconds begin = 0;
    Nanoseconds end = 0;
    std::uint64_t code = 0;
    std::string label;

    Nanoseconds duration() const
    {
        return end - begin;
    }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct IntervalTimeline
{
    std::uint32_t event_type = 0;
    Nanoseconds total_time = 0;
    std::map<RowKey, std::vector<Interval>> rows;
    /// Rows whose last block was still open at the end of the trace (closed at total_time).
    std::vector<RowKey> open_at_end;
    /// Value label per code seen in the timeline.
    std::map<std::uint64_t, std::string> legend;
};

struct CountMatrix
{
    std::vector<std::string> labels;
    /// Row-major n x n; entry (x, y) counts messages sent from task x to task y.
    std::vector<std::uint64_t> counts;

    std::size_t size() const
    {
        return labels.size();
    }
    std::uint64_t at(std::size_t sender, std::size_t receiver) const
    {
        return counts[sender * size() + receiver];
    }
    std::uint64_t total() const;
};

struct RoutineFraction
{
    std::uint64_t code = 0;
    std::string label;
    /// One entry per task, in global task order.
    std::vector<double> per_task;
    double mean = 0;
    double min = 0;
    double max = 0;
    double q1 = 0;
    double median = 0;
    double q3 = 0;
};

struct RoutineStats
{
    std::uint32_t event_type = 0;
    TimeWindow window;
    std::vector<std::string> task_labels;
    std::vector<RoutineFraction> routines;

    const RoutineFraction* find(std::uint64_t code) const;
};

struct ParallelismOptions
{
    /// Treat time inside routine-event blocks as Idle regardless of the state records.
    bool derive_states_from_routine_events = false;
    std::uint32_t routine_event_type = 0;
};

/**
 * Time-weighted average number of tasks not in the Idle state, per bin.
 *
 * A task counts while any of its threads is in a state other than 0. Each bin
 * is integrated exactly over its overlap with [0, total_time); a last bin that
 * is cut short is averaged over its covered part. Throws EmptySeriesError
 * when the bundle has no state records.
 */
TimeSeries instantaneous_parallelism(const TraceBundle& bundle, Nanoseconds bin_width,
                                     const ParallelismOptions& options = {});

/**
 * Replays the events of `event_type` per row: a nonzero value opens a block,
 * the next event of that type closes it (and opens another if nonzero).
 * Blocks left open are closed at total_time and listed in open_at_end.
 */
IntervalTimeline call_timeline(const TraceBundle& bundle, std::uint32_t event_type);

CountMatrix connectivity_matrix(const TraceBundle& bundle);

/// Per task, time inside each routine over the window. Multi-thread tasks average over their threads.
RoutineStats routine_time_fractions(const TraceBundle& bundle, std::uint32_t event_type,
                                    std::optional<TimeWindow> window = {});

/**
 * Node network bandwidth in MB/s (1 MB = 10^6 bytes).
 *
 * Each message's bytes are spread uniformly over [physical_send,
 * physical_recv) and attributed to the nodes of its sender and receiver
 * (once if both are on the same node). Bin values divide by the full bin
 * width, so summing value * width recovers the bytes.
 */
std::vector<TimeSeries> node_bandwidth(const TraceBundle& bundle, Nanoseconds bin_width);

/// Linear-interpolated quantile of already sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

} // namespace prvkit
