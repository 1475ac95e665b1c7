#pragma once

#include "prvkit/records.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace prvkit
{

/// Receives non-fatal diagnostics (missing .pcf, unregistered event types). Defaults to stderr.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

/// `#Paraver (dd/mm/yy at hh:mm):FTIME_ns:NNODES(cpus,...):NAPPL:NTASKS(threads:node,...)[:...]`
std::string format_header(const TraceHeader& header);
TraceHeader parse_header(std::string_view line);

std::string format_record(const TraceRecord& record);

/// The .prv file: header line plus records in the order given (callers sort first).
std::string format_prv(const TraceHeader& header, const std::vector<TraceRecord>& records);

/// Event types used by records but absent from the registry get "Unregistered type N".
std::string format_pcf(const EventRegistry& registry, const StateTable& states,
                       const std::vector<TraceRecord>& records = {});
std::string format_row(const RowLabels& labels);

struct PrvContents
{
    TraceHeader header;
    std::vector<TraceRecord> records;
};

/// Throws ParseError carrying the 1-based line number.
PrvContents parse_prv(std::string_view text);

struct PcfContents
{
    EventRegistry registry;
    StateTable states;
};

PcfContents parse_pcf(std::string_view text);
RowLabels parse_row(std::string_view text);

/// Writes basename.prv, basename.pcf and basename.row. The bundle must validate.
void write_bundle(const TraceBundle& bundle, const std::filesystem::path& basename);

/// Missing .pcf/.row files are tolerated with a warning.
TraceBundle parse_bundle(const std::filesystem::path& basename);

enum class ViolationKind
{
    invalid_model,
    location_out_of_range,
    state_order,
    unknown_state,
    malformed_event,
    causality,
    beyond_end,
    duplicate_type,
    unmatched_comm,
    bad_label,
    row_label_count
};

struct Violation
{
    ViolationKind kind;
    std::string message;
    /// Index into bundle.records when the violation is about one record.
    std::optional<std::size_t> record;
};

struct ValidationReport
{
    std::vector<Violation> violations;

    bool ok() const
    {
        return violations.empty();
    }
    std::size_t count(ViolationKind kind) const;
};

/// Never throws on content.
ValidationReport validate_bundle(const TraceBundle& bundle);

std::string to_string(ViolationKind kind);

} // namespace prvkit
