#include "prvkit/records.hpp"

#include "prvkit/error.hpp"

#include <algorithm>
#include <ctime>
#include <tuple>

namespace prvkit
{

Nanoseconds record_time(const TraceRecord& record)
{
    struct Visitor
    {
        Nanoseconds operator()(const StateRecord& r) const
        {
            return r.begin;
        }
        Nanoseconds operator()(const EventRecord& r) const
        {
            return r.time;
        }
        Nanoseconds operator()(const CommRecord& r) const
        {
            return r.logical_send;
        }
    };
    return std::visit(Visitor{}, record);
}

const Location& record_location(const TraceRecord& record)
{
    struct Visitor
    {
        const Location& operator()(const StateRecord& r) const
        {
            return r.location;
        }
        const Location& operator()(const EventRecord& r) const
        {
            return r.location;
        }
        const Location& operator()(const CommRecord& r) const
        {
            return r.send_location;
        }
    };
    return std::visit(Visitor{}, record);
}

void sort_records(std::vector<TraceRecord>& records)
{
    auto key = [](const TraceRecord& r) {
        const auto& loc = record_location(r);
        return std::make_tuple(record_time(r), r.index(), loc.appl, loc.task, loc.thread);
    };
    std::stable_sort(records.begin(), records.end(),
                     [&](const TraceRecord& a, const TraceRecord& b) { return key(a) < key(b); });
}

StateTable default_state_table()
{
    return {{states::idle, "Idle"}, {states::running, "Running"}, {states::external, "External"}};
}

bool EventRegistry::add(std::uint32_t type, const std::string& description,
                        const std::map<std::uint64_t, std::string>& value_labels)
{
    if (type == 0)
        throw RegistryConflictError("event type 0 is reserved");
    auto it = std::lower_bound(entries_.begin(), entries_.end(), type,
                               [](const EventTypeInfo& e, std::uint32_t t) { return e.type < t; });
    if (it != entries_.end() && it->type == type)
    {
        if (it->description != description)
            throw RegistryConflictError("event type " + std::to_string(type) + " already registered as \"" +
                                        it->description + "\"");
        bool changed = false;
        for (const auto& [value, label] : value_labels)
        {
            auto [pos, inserted] = it->value_labels.try_emplace(value, label);
            if (!inserted && pos->second != label)
                throw RegistryConflictError("event type " + std::to_string(type) + " value " +
                                            std::to_string(value) + " already labelled \"" + pos->second + "\"");
            changed |= inserted;
        }
        return changed;
    }
    entries_.insert(it, EventTypeInfo{type, description, value_labels});
    return true;
}

void EventRegistry::add_unchecked(EventTypeInfo info)
{
    auto it = std::upper_bound(entries_.begin(), entries_.end(), info.type,
                               [](std::uint32_t t, const EventTypeInfo& e) { return t < e.type; });
    entries_.insert(it, std::move(info));
}

const EventTypeInfo* EventRegistry::find(std::uint32_t type) const
{
    auto it = std::lower_bound(entries_.begin(), entries_.end(), type,
                               [](const EventTypeInfo& e, std::uint32_t t) { return e.type < t; });
    return it != entries_.end() && it->type == type ? &*it : nullptr;
}

std::string EventRegistry::value_label(std::uint32_t type, std::uint64_t value) const
{
    if (const auto* info = find(type))
        if (auto it = info->value_labels.find(value); it != info->value_labels.end())
            return it->second;
    return value == 0 ? "End" : std::string{};
}

RowLabels default_row_labels(const ProcessModel& process, const ResourceModel& resources)
{
    RowLabels labels;
    for (std::size_t a = 0; a < process.applications.size(); ++a)
    {
        const auto& tasks = process.applications[a].tasks;
        for (std::size_t t = 0; t < tasks.size(); ++t)
        {
            const auto task_name = std::to_string(a + 1) + "." + std::to_string(t + 1);
            labels.tasks.push_back("TASK " + task_name);
            for (std::uint32_t th = 1; th <= tasks[t].threads; ++th)
                labels.threads.push_back("THREAD " + task_name + "." + std::to_string(th));
        }
    }
    for (std::size_t n = 1; n <= resources.node_count(); ++n)
        labels.nodes.push_back("node" + std::to_string(n));
    return labels;
}

CaptureTime CaptureTime::now()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    localtime_r(&t, &tm);
    return {tm.tm_mday, tm.tm_mon + 1, tm.tm_year + 1900, tm.tm_hour, tm.tm_min};
}

} // namespace prvkit
