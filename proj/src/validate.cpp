#include "prvkit/prv_format.hpp"

#include "prvkit/error.hpp"

#include <algorithm>

namespace prvkit
{
namespace
{

std::string describe(const Location& loc)
{
    return std::to_string(loc.cpu) + ":" + std::to_string(loc.appl) + ":" + std::to_string(loc.task) + ":" +
           std::to_string(loc.thread);
}

bool bad_label(const std::string& label)
{
    return label.find_first_of("\n\r") != std::string::npos;
}

// .pcf labels are read back trimmed, so padding would not survive a round trip.
bool bad_pcf_label(const std::string& label)
{
    const auto padded = [](char c) { return c == ' ' || c == '\t'; };
    return bad_label(label) || (!label.empty() && (padded(label.front()) || padded(label.back())));
}

class Checker
{
public:
    explicit Checker(const TraceBundle& bundle) : bundle_(bundle)
    {
    }

    ValidationReport run()
    {
        try
        {
            validate_models(bundle_.header.process, bundle_.header.resources);
            models_ok_ = true;
        }
        catch (const InvalidModelError& e)
        {
            add(ViolationKind::invalid_model, std::string("invalid header model: ") + e.what());
        }

        for (std::size_t i = 0; i < bundle_.records.size(); ++i)
            std::visit([&](const auto& r) { check(r, i); }, bundle_.records[i]);

        check_registry();
        check_rows();
        for (const auto& p : bundle_.pending_comms)
            add(ViolationKind::unmatched_comm,
                std::string("unmatched communication ") + (p.direction == CommDirection::send ? "send" : "receive") +
                    " from " + describe(p.sender) + " to " + describe(p.receiver) + " tag " + std::to_string(p.tag) +
                    " at " + std::to_string(p.time) + ": " + p.reason);
        return std::move(report_);
    }

private:
    void add(ViolationKind kind, std::string message, std::optional<std::size_t> record = {})
    {
        if (record)
            message = "record " + std::to_string(*record + 1) + ": " + message;
        report_.violations.push_back({kind, std::move(message), record});
    }

    void check_location(const Location& loc, std::size_t i)
    {
        if (!models_ok_)
            return;
        const auto& header = bundle_.header;
        if (!header.process.contains(loc.appl, loc.task, loc.thread) || loc.cpu > header.resources.total_cpus())
            add(ViolationKind::location_out_of_range, "location out of range (" + describe(loc) + ")", i);
    }

    void check_end(Nanoseconds t, std::size_t i)
    {
        if (t > bundle_.header.total_time)
            add(ViolationKind::beyond_end,
                "timestamp " + std::to_string(t) + " beyond trace end " + std::to_string(bundle_.header.total_time), i);
    }

    void check(const StateRecord& r, std::size_t i)
    {
        check_location(r.location, i);
        if (r.begin > r.end)
            add(ViolationKind::state_order,
                "state begins at " + std::to_string(r.begin) + " after it ends at " + std::to_string(r.end), i);
        if (!bundle_.state_table.empty() && bundle_.state_table.count(r.state) == 0)
            add(ViolationKind::unknown_state, "state " + std::to_string(r.state) + " not in the state table", i);
        check_end(std::max(r.begin, r.end), i);
    }

    void check(const EventRecord& r, std::size_t i)
    {
        check_location(r.location, i);
        if (r.pairs.empty())
            add(ViolationKind::malformed_event, "event without type/value pairs", i);
        if (std::any_of(r.pairs.begin(), r.pairs.end(), [](const EventPair& p) { return p.type == 0; }))
            add(ViolationKind::malformed_event, "event type 0", i);
        check_end(r.time, i);
    }

    void check(const CommRecord& r, std::size_t i)
    {
        check_location(r.send_location, i);
        check_location(r.recv_location, i);
        if (r.physical_recv < r.physical_send)
            add(ViolationKind::causality, "communication received before it was sent", i);
        if (r.logical_send > r.physical_send)
            add(ViolationKind::causality, "logical send after physical send", i);
        if (r.logical_recv > r.physical_recv)
            add(ViolationKind::causality, "logical receive after physical receive", i);
        check_end(std::max({r.logical_send, r.physical_send, r.logical_recv, r.physical_recv}), i);
    }

    void check_registry()
    {
        const auto& entries = bundle_.registry.entries();
        for (std::size_t i = 1; i < entries.size(); ++i)
            if (entries[i].type == entries[i - 1].type)
                add(ViolationKind::duplicate_type, "duplicate .pcf event type " + std::to_string(entries[i].type));
        for (const auto& e : entries)
        {
            if (bad_pcf_label(e.description))
                add(ViolationKind::bad_label, "event type " + std::to_string(e.type) +
                                                  " description has a line break or padding");
            for (const auto& [value, label] : e.value_labels)
                if (bad_pcf_label(label))
                    add(ViolationKind::bad_label, "event type " + std::to_string(e.type) + " value " +
                                                      std::to_string(value) + " label has a line break or padding");
        }
        for (const auto& [code, label] : bundle_.state_table)
            if (bad_pcf_label(label))
                add(ViolationKind::bad_label, "state " + std::to_string(code) + " label has a line break or padding");
    }

    void check_rows()
    {
        const auto& rows = bundle_.row_labels;
        for (const auto* level : {&rows.threads, &rows.tasks, &rows.nodes})
            for (const auto& name : *level)
                if (bad_label(name))
                    add(ViolationKind::bad_label, "row label has a line break");
        if (rows.empty() || !models_ok_)
            return;
        const auto& h = bundle_.header;
        if (rows.threads.size() != h.process.total_threads())
            add(ViolationKind::row_label_count, "THREAD level has " + std::to_string(rows.threads.size()) +
                                                    " names for " + std::to_string(h.process.total_threads()) +
                                                    " threads");
        if (rows.tasks.size() != h.process.total_tasks())
            add(ViolationKind::row_label_count, "TASK level has " + std::to_string(rows.tasks.size()) + " names for " +
                                                    std::to_string(h.process.total_tasks()) + " tasks");
        if (rows.nodes.size() != h.resources.node_count())
            add(ViolationKind::row_label_count, "NODE level has " + std::to_string(rows.nodes.size()) + " names for " +
                                                    std::to_string(h.resources.node_count()) + " nodes");
    }

    const TraceBundle& bundle_;
    bool models_ok_ = false;
    ValidationReport report_;
};

} // namespace

std::size_t ValidationReport::count(ViolationKind kind) const
{
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                  [kind](const Violation& v) { return v.kind == kind; }));
}

ValidationReport validate_bundle(const TraceBundle& bundle)
{
    return Checker(bundle).run();
}

std::string to_string(ViolationKind kind)
{
    switch (kind)
    {
    case ViolationKind::invalid_model:
        return "invalid-model";
    case ViolationKind::location_out_of_range:
        return "location-out-of-range";
    case ViolationKind::state_order:
        return "state-order";
    case ViolationKind::unknown_state:
        return "unknown-state";
    case ViolationKind::malformed_event:
        return "malformed-event";
    case ViolationKind::causality:
        return "causality";
    case ViolationKind::beyond_end:
        return "beyond-end";
    case ViolationKind::duplicate_type:
        return "duplicate-type";
    case ViolationKind::unmatched_comm:
        return "unmatched-comm";
    case ViolationKind::bad_label:
        return "bad-label";
    case ViolationKind::row_label_count:
        return "row-label-count";
    }
    return "unknown";
}

} // namespace prvkit
