#pragma once

#include "prvkit/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace prvkit
{

struct EventPair
{
    std::uint32_t type = 0;
    std::uint64_t value = 0;

    friend bool operator==(const EventPair&, const EventPair&) = default;
};

struct StateRecord
{
    Location location;
    Nanoseconds begin = 0;
    Nanoseconds end = 0;
    std::uint32_t state = 0;

    friend bool operator==(const StateRecord&, const StateRecord&) = default;
};

struct EventRecord
{
    Location location;
    Nanoseconds time = 0;
    std::vector<EventPair> pairs;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct CommRecord
{
    Location send_location;
    Location recv_location;
    Nanoseconds logical_send = 0;
    Nanoseconds physical_send = 0;
    Nanoseconds logical_recv = 0;
    Nanoseconds physical_recv = 0;
    std::uint64_t size = 0;
    std::uint64_t tag = 0;

    friend bool operator==(const CommRecord&, const CommRecord&) = default;
};

using TraceRecord = std::variant<StateRecord, EventRecord, CommRecord>;

/// The time a record is sorted by: begin for states, time for events, logical send for comms.
Nanoseconds record_time(const TraceRecord& record);

/// The location a record is sorted by (the sender for comms).
const Location& record_location(const TraceRecord& record);

/// Stable sort by time, then kind (state < event < comm), then (appl, task, thread).
void sort_records(std::vector<TraceRecord>& records);

namespace states
{
inline constexpr std::uint32_t idle = 0;
inline constexpr std::uint32_t running = 1;
inline constexpr std::uint32_t external = 7;
} // namespace states

using StateTable = std::map<std::uint32_t, std::string>;

/// 0 Idle, 1 Running, 7 External.
StateTable default_state_table();

struct EventTypeInfo
{
    std::uint32_t type = 0;
    std::string description;
    std::map<std::uint64_t, std::string> value_labels;

    friend bool operator==(const EventTypeInfo&, const EventTypeInfo&) = default;
};

/**
 * Event type dictionary, kept sorted by type code.
 *
 * `add` rejects a second description for an existing code. Parsed
 * dictionaries may carry duplicates (`add_unchecked`); validation reports them.
 */
class EventRegistry
{
public:
    /// Returns false if the identical entry already existed. Throws RegistryConflictError.
    bool add(std::uint32_t type, const std::string& description,
             const std::map<std::uint64_t, std::string>& value_labels = {});
    void add_unchecked(EventTypeInfo info);

    const EventTypeInfo* find(std::uint32_t type) const;
    bool contains(std::uint32_t type) const
    {
        return find(type) != nullptr;
    }

    /// Value label with "End" as the fallback for value 0; empty if none.
    std::string value_label(std::uint32_t type, std::uint64_t value) const;

    const std::vector<EventTypeInfo>& entries() const
    {
        return entries_;
    }

    bool empty() const
    {
        return entries_.empty();
    }

    friend bool operator==(const EventRegistry&, const EventRegistry&) = default;

private:
    std::vector<EventTypeInfo> entries_;
};

/// Names for the THREAD, TASK and NODE rows shown by a viewer.
struct RowLabels
{
    std::vector<std::string> threads;
    std::vector<std::string> tasks;
    std::vector<std::string> nodes;

    bool empty() const
    {
        return threads.empty() && tasks.empty() && nodes.empty();
    }

    friend bool operator==(const RowLabels&, const RowLabels&) = default;
};

RowLabels default_row_labels(const ProcessModel& process, const ResourceModel& resources);

/// Wall-clock capture date written in the trace header.
struct CaptureTime
{
    int day = 1;
    int month = 1;
    int year = 2000;
    int hour = 0;
    int minute = 0;

    static CaptureTime now();

    friend bool operator==(const CaptureTime&, const CaptureTime&) = default;
};

struct TraceHeader
{
    CaptureTime captured;
    Nanoseconds total_time = 0;
    ResourceModel resources;
    ProcessModel process;

    friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

enum class CommDirection
{
    send,
    recv
};

/// One half of a communication that never found its partner.
struct PendingComm
{
    CommDirection direction = CommDirection::send;
    Location sender;
    Location receiver;
    std::uint64_t tag = 0;
    std::uint64_t size = 0;
    Nanoseconds time = 0;
    std::string reason;

    friend bool operator==(const PendingComm&, const PendingComm&) = default;
};

struct TraceBundle
{
    TraceHeader header;
    std::vector<TraceRecord> records;
    EventRegistry registry;
    StateTable state_table = default_state_table();
    RowLabels row_labels;

    /// Not serialized: set by the tracer when communication halves stay unmatched.
    std::vector<PendingComm> pending_comms;

    friend bool operator==(const TraceBundle&, const TraceBundle&) = default;
};

} // namespace prvkit
