#include "prvkit/analysis.hpp"

#include "prvkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prvkit
{

Nanoseconds TimeSeries::bin_end(std::size_t i) const
{
    return std::min(bin_begin(i) + bin_width, std::max(end, bin_begin(i)));
}

std::uint64_t CountMatrix::total() const
{
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

const RoutineFraction* RoutineStats::find(std::uint64_t code) const
{
    for (const auto& r : routines)
        if (r.code == code)
            return &r;
    return nullptr;
}

double quantile_sorted(const std::vector<double>& sorted, double q)
{
    if (sorted.empty())
        return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace
{

struct Span
{
    Nanoseconds begin;
    Nanoseconds end;
};

std::size_t bin_count(Nanoseconds length, Nanoseconds width)
{
    return static_cast<std::size_t>((length + width - 1) / width);
}

std::vector<Span> merge(std::vector<Span> spans)
{
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });
    std::vector<Span> out;
    for (const auto& s : spans)
    {
        if (s.begin >= s.end)
            continue;
        if (!out.empty() && s.begin <= out.back().end)
            out.back().end = std::max(out.back().end, s.end);
        else
            out.push_back(s);
    }
    return out;
}

// a minus b; both sorted and internally non-overlapping.
std::vector<Span> subtract(const std::vector<Span>& a, const std::vector<Span>& b)
{
    std::vector<Span> out;
    std::size_t j = 0;
    for (auto s : a)
    {
        while (j < b.size() && b[j].end <= s.begin)
            ++j;
        auto cursor = s.begin;
        for (auto k = j; k < b.size() && b[k].begin < s.end; ++k)
        {
            if (b[k].begin > cursor)
                out.push_back({cursor, b[k].begin});
            cursor = std::max(cursor, b[k].end);
        }
        if (cursor < s.end)
            out.push_back({cursor, s.end});
    }
    return out;
}

RowKey row_of(const Location& loc)
{
    return {loc.appl, loc.task, loc.thread};
}

std::vector<std::string> task_labels(const TraceBundle& bundle)
{
    const auto& process = bundle.header.process;
    if (bundle.row_labels.tasks.size() == process.total_tasks())
        return bundle.row_labels.tasks;
    std::vector<std::string> labels;
    for (std::size_t a = 0; a < process.applications.size(); ++a)
        for (std::size_t t = 0; t < process.applications[a].tasks.size(); ++t)
            labels.push_back("TASK " + std::to_string(a + 1) + "." + std::to_string(t + 1));
    return labels;
}

} // namespace

TimeSeries instantaneous_parallelism(const TraceBundle& bundle, Nanoseconds bin_width,
                                     const ParallelismOptions& options)
{
    if (bin_width == 0)
        throw AnalysisError("bin width must be positive");

    const auto& process = bundle.header.process;
    std::map<RowKey, std::vector<Span>> busy_by_thread;
    bool any_state = false;
    for (const auto& record : bundle.records)
        if (const auto* s = std::get_if<StateRecord>(&record))
        {
            any_state = true;
            if (s->state != states::idle && s->begin < s->end)
                busy_by_thread[row_of(s->location)].push_back({s->begin, s->end});
        }
    if (!any_state)
        throw EmptySeriesError("bundle has no state records");

    std::optional<IntervalTimeline> routines;
    if (options.derive_states_from_routine_events)
        routines = call_timeline(bundle, options.routine_event_type);

    std::vector<std::vector<Span>> busy_by_task(process.total_tasks());
    for (auto& [row, spans] : busy_by_thread)
    {
        if (process.find_task(row.appl, row.task) == nullptr)
            continue;
        auto merged = merge(std::move(spans));
        if (routines)
            if (auto it = routines->rows.find(row); it != routines->rows.end())
            {
                std::vector<Span> calls;
                for (const auto& iv : it->second)
                    calls.push_back({iv.begin, iv.end});
                merged = subtract(merged, merge(std::move(calls)));
            }
        auto& target = busy_by_task[process.global_task_index(row.appl, row.task)];
        target.insert(target.end(), merged.begin(), merged.end());
    }

    std::vector<std::pair<Nanoseconds, int>> deltas;
    for (auto& spans : busy_by_task)
        for (const auto& s : merge(std::move(spans)))
        {
            deltas.emplace_back(s.begin, +1);
            deltas.emplace_back(s.end, -1);
        }
    std::sort(deltas.begin(), deltas.end());

    const auto total = bundle.header.total_time;
    TimeSeries series;
    series.bin_width = bin_width;
    series.origin = 0;
    series.end = total;
    series.label = "Instantaneous parallelism";
    series.units = "tasks";
    const auto n_bins = bin_count(total, bin_width);
    std::vector<std::uint64_t> area(n_bins, 0);

    auto integrate = [&](Nanoseconds a, Nanoseconds b, std::uint64_t count) {
        b = std::min(b, total);
        if (count == 0 || a >= b)
            return;
        for (auto bin = a / bin_width; bin < n_bins && bin * bin_width < b; ++bin)
        {
            const auto lo = std::max(a, bin * bin_width);
            const auto hi = std::min(b, (bin + 1) * bin_width);
            area[bin] += count * (hi - lo);
        }
    };

    std::int64_t level = 0;
    Nanoseconds cursor = 0;
    for (const auto& [t, d] : deltas)
    {
        if (t > cursor)
        {
            integrate(cursor, t, static_cast<std::uint64_t>(level));
            cursor = t;
        }
        level += d;
    }

    series.values.resize(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i)
    {
        const auto covered = series.bin_end(i) - series.bin_begin(i);
        series.values[i] = static_cast<double>(area[i]) / static_cast<double>(covered);
    }
    return series;
}

IntervalTimeline call_timeline(const TraceBundle& bundle, std::uint32_t event_type)
{
    struct Mark
    {
        Nanoseconds time;
        std::uint64_t value;
    };
    std::map<RowKey, std::vector<Mark>> marks;
    for (const auto& record : bundle.records)
        if (const auto* e = std::get_if<EventRecord>(&record))
            for (const auto& p : e->pairs)
                if (p.type == event_type)
                    marks[row_of(e->location)].push_back({e->time, p.value});
    if (marks.empty())
        throw AnalysisError("event type " + std::to_string(event_type) + " not present in the trace");

    IntervalTimeline timeline;
    timeline.event_type = event_type;
    timeline.total_time = bundle.header.total_time;

    auto label_of = [&](std::uint64_t code) {
        auto label = bundle.registry.value_label(event_type, code);
        return label.empty() ? std::to_string(code) : label;
    };

    for (auto& [row, list] : marks)
    {
        std::stable_sort(list.begin(), list.end(), [](const Mark& a, const Mark& b) { return a.time < b.time; });
        auto& intervals = timeline.rows[row];
        std::optional<Mark> open;
        for (const auto& m : list)
        {
            if (open)
                intervals.push_back({open->time, m.time, open->value, label_of(open->value)});
            open = m.value != 0 ? std::optional(m) : std::nullopt;
        }
        if (open)
        {
            intervals.push_back({open->time, std::max(open->time, timeline.total_time), open->value,
                                 label_of(open->value)});
            timeline.open_at_end.push_back(row);
        }
        for (const auto& iv : intervals)
            timeline.legend.emplace(iv.code, iv.label);
    }
    return timeline;
}

CountMatrix connectivity_matrix(const TraceBundle& bundle)
{
    const auto& process = bundle.header.process;
    CountMatrix matrix;
    matrix.labels = task_labels(bundle);
    const auto n = matrix.labels.size();
    matrix.counts.assign(n * n, 0);
    for (const auto& record : bundle.records)
        if (const auto* c = std::get_if<CommRecord>(&record))
        {
            const auto& s = c->send_location;
            const auto& r = c->recv_location;
            if (process.find_task(s.appl, s.task) == nullptr || process.find_task(r.appl, r.task) == nullptr)
                continue;
            ++matrix.counts[process.global_task_index(s.appl, s.task) * n + process.global_task_index(r.appl, r.task)];
        }
    return matrix;
}

RoutineStats routine_time_fractions(const TraceBundle& bundle, std::uint32_t event_type,
                                    std::optional<TimeWindow> window)
{
    const auto timeline = call_timeline(bundle, event_type);
    const auto w = window.value_or(TimeWindow{0, bundle.header.total_time});
    if (w.end <= w.begin)
        throw DegenerateWindowError("analysis window [" + std::to_string(w.begin) + ", " + std::to_string(w.end) +
                                    ") is empty");

    const auto& process = bundle.header.process;
    const auto n_tasks = process.total_tasks();
    std::map<std::uint64_t, std::vector<Nanoseconds>> time_in;
    for (const auto& [code, label] : timeline.legend)
        time_in[code].assign(n_tasks, 0);

    for (const auto& [row, intervals] : timeline.rows)
    {
        if (process.find_task(row.appl, row.task) == nullptr)
            continue;
        const auto task = process.global_task_index(row.appl, row.task);
        for (const auto& iv : intervals)
        {
            const auto lo = std::max(iv.begin, w.begin);
            const auto hi = std::min(iv.end, w.end);
            if (hi > lo)
                time_in[iv.code][task] += hi - lo;
        }
    }

    std::vector<double> threads_of(n_tasks, 1.0);
    for (std::size_t a = 0; a < process.applications.size(); ++a)
        for (std::size_t t = 0; t < process.applications[a].tasks.size(); ++t)
            threads_of[process.global_task_index(static_cast<std::uint32_t>(a + 1), static_cast<std::uint32_t>(t + 1))] =
                process.applications[a].tasks[t].threads;

    RoutineStats stats;
    stats.event_type = event_type;
    stats.window = w;
    stats.task_labels = task_labels(bundle);
    for (const auto& [code, per_task_ns] : time_in)
    {
        RoutineFraction r;
        r.code = code;
        r.label = timeline.legend.at(code);
        for (std::size_t t = 0; t < n_tasks; ++t)
            r.per_task.push_back(static_cast<double>(per_task_ns[t]) /
                                 (static_cast<double>(w.length()) * threads_of[t]));
        auto sorted = r.per_task;
        std::sort(sorted.begin(), sorted.end());
        r.min = sorted.front();
        r.max = sorted.back();
        r.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
        r.q1 = quantile_sorted(sorted, 0.25);
        r.median = quantile_sorted(sorted, 0.5);
        r.q3 = quantile_sorted(sorted, 0.75);
        stats.routines.push_back(std::move(r));
    }
    return stats;
}

std::vector<TimeSeries> node_bandwidth(const TraceBundle& bundle, Nanoseconds bin_width)
{
    if (bin_width == 0)
        throw AnalysisError("bin width must be positive");

    const auto& header = bundle.header;
    const auto total = header.total_time;
    const auto n_bins = bin_count(total, bin_width);
    const auto n_nodes = header.resources.node_count();
    std::vector<std::vector<double>> bytes(n_nodes, std::vector<double>(n_bins, 0.0));

    auto node_of = [&](const Location& loc) -> std::optional<std::size_t> {
        const auto* task = header.process.find_task(loc.appl, loc.task);
        if (task == nullptr || task->node == 0 || task->node > n_nodes)
            return std::nullopt;
        return task->node - 1;
    };

    for (const auto& record : bundle.records)
    {
        const auto* c = std::get_if<CommRecord>(&record);
        if (c == nullptr || n_bins == 0)
            continue;
        std::vector<std::size_t> nodes;
        if (auto n = node_of(c->send_location))
            nodes.push_back(*n);
        if (auto n = node_of(c->recv_location); n && (nodes.empty() || *n != nodes.front()))
            nodes.push_back(*n);

        const auto send = c->physical_send;
        const auto recv = std::max(c->physical_recv, send);
        const auto size = static_cast<double>(c->size);
        if (recv == send)
        {
            const auto bin = std::min<std::size_t>(send / bin_width, n_bins - 1);
            for (auto n : nodes)
                bytes[n][bin] += size;
            continue;
        }
        const auto flight = static_cast<double>(recv - send);
        for (auto bin = send / bin_width; bin < n_bins && bin * bin_width < recv; ++bin)
        {
            const auto lo = std::max(send, bin * bin_width);
            const auto hi = std::min(recv, (bin + 1) * bin_width);
            const auto share = size * static_cast<double>(hi - lo) / flight;
            for (auto n : nodes)
                bytes[n][bin] += share;
        }
    }

    std::vector<TimeSeries> out;
    for (std::size_t n = 0; n < n_nodes; ++n)
    {
        TimeSeries s;
        s.bin_width = bin_width;
        s.origin = 0;
        s.end = total;
        s.label = bundle.row_labels.nodes.size() == n_nodes ? bundle.row_labels.nodes[n]
                                                            : "node" + std::to_string(n + 1);
        s.units = "MB/s";
        s.values.resize(n_bins);
        // bytes per ns * 1e9 / 1e6
        for (std::size_t b = 0; b < n_bins; ++b)
            s.values[b] = bytes[n][b] * 1e3 / static_cast<double>(bin_width);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace prvkit
