#include "prvkit/prv_format.hpp"

#include "prvkit/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>

namespace prvkit
{
namespace
{

std::mutex warning_mutex;
WarningHandler warning_handler;

void append_number(std::string& out, std::uint64_t v)
{
    char buf[24];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

void append_fields(std::string& out, std::initializer_list<std::uint64_t> fields)
{
    bool first = true;
    for (auto f : fields)
    {
        if (!first)
            out.push_back(':');
        first = false;
        append_number(out, f);
    }
}

void append_location(std::string& out, const Location& loc)
{
    out.push_back(':');
    append_fields(out, {loc.cpu, loc.appl, loc.task, loc.thread});
}

std::string two_digits(int v)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out)
        throw IoError("failed writing " + path.string());
}

// Conventional palette for the first few states.
constexpr int state_colors[][3] = {{117, 195, 255}, {0, 0, 255},     {255, 255, 255}, {255, 0, 0},
                                   {255, 0, 174},   {179, 0, 0},     {0, 255, 0},     {255, 255, 0},
                                   {235, 0, 0},     {0, 162, 0},     {255, 0, 255},   {100, 100, 177},
                                   {172, 174, 41},  {255, 144, 26},  {2, 255, 177},   {192, 224, 0}};

} // namespace

void set_warning_handler(WarningHandler handler)
{
    std::lock_guard lock(warning_mutex);
    warning_handler = std::move(handler);
}

void warn(const std::string& message)
{
    std::lock_guard lock(warning_mutex);
    if (warning_handler)
        warning_handler(message);
    else
        std::cerr << "prvkit: warning: " << message << '\n';
}

std::string format_header(const TraceHeader& header)
{
    const auto& c = header.captured;
    std::string out = "#Paraver (" + two_digits(c.day) + "/" + two_digits(c.month) + "/" + two_digits(c.year % 100) +
                      " at " + two_digits(c.hour) + ":" + two_digits(c.minute) + "):";
    append_number(out, header.total_time);
    out += "_ns:";
    append_number(out, header.resources.node_count());
    out.push_back('(');
    for (std::size_t n = 0; n < header.resources.cpus_per_node.size(); ++n)
    {
        if (n > 0)
            out.push_back(',');
        append_number(out, header.resources.cpus_per_node[n]);
    }
    out += "):";
    append_number(out, header.process.applications.size());
    for (const auto& app : header.process.applications)
    {
        out.push_back(':');
        append_number(out, app.tasks.size());
        out.push_back('(');
        for (std::size_t t = 0; t < app.tasks.size(); ++t)
        {
            if (t > 0)
                out.push_back(',');
            append_fields(out, {app.tasks[t].threads, app.tasks[t].node});
        }
        out.push_back(')');
    }
    return out;
}

std::string format_record(const TraceRecord& record)
{
    std::string out;
    if (const auto* s = std::get_if<StateRecord>(&record))
    {
        out = "1";
        append_location(out, s->location);
        out.push_back(':');
        append_fields(out, {s->begin, s->end, s->state});
    }
    else if (const auto* e = std::get_if<EventRecord>(&record))
    {
        out = "2";
        append_location(out, e->location);
        out.push_back(':');
        append_number(out, e->time);
        for (const auto& p : e->pairs)
        {
            out.push_back(':');
            append_fields(out, {p.type, p.value});
        }
    }
    else
    {
        const auto& c = std::get<CommRecord>(record);
        out = "3";
        append_location(out, c.send_location);
        out.push_back(':');
        append_fields(out, {c.logical_send, c.physical_send});
        append_location(out, c.recv_location);
        out.push_back(':');
        append_fields(out, {c.logical_recv, c.physical_recv, c.size, c.tag});
    }
    return out;
}

std::string format_prv(const TraceHeader& header, const std::vector<TraceRecord>& records)
{
    std::string out = format_header(header);
    out.push_back('\n');
    out.reserve(out.size() + records.size() * 40);
    for (const auto& r : records)
    {
        out += format_record(r);
        out.push_back('\n');
    }
    return out;
}

std::string format_pcf(const EventRegistry& registry, const StateTable& states,
                       const std::vector<TraceRecord>& records)
{
    std::string out = "DEFAULT_OPTIONS\n\n"
                      "LEVEL               THREAD\n"
                      "UNITS               NANOSEC\n"
                      "LOOK_BACK           100\n"
                      "SPEED               1\n"
                      "FLAG_ICONS          ENABLED\n"
                      "NUM_OF_STATE_COLORS 1000\n"
                      "YMAX_SCALE          37\n\n\n"
                      "DEFAULT_SEMANTIC\n\n"
                      "THREAD_FUNC          State As Is\n\n\n";

    out += "STATES\n";
    for (const auto& [code, label] : states)
    {
        append_number(out, code);
        out += "    " + label + "\n";
    }
    out += "\n\nSTATES_COLOR\n";
    for (const auto& [code, label] : states)
    {
        const auto& rgb = state_colors[code % std::size(state_colors)];
        append_number(out, code);
        out += "    {" + std::to_string(rgb[0]) + "," + std::to_string(rgb[1]) + "," + std::to_string(rgb[2]) + "}\n";
    }
    out += "\n\n";

    std::set<std::uint32_t> unregistered;
    for (const auto& r : records)
        if (const auto* e = std::get_if<EventRecord>(&r))
            for (const auto& p : e->pairs)
                if (!registry.contains(p.type))
                    unregistered.insert(p.type);

    EventRegistry merged = registry;
    for (auto type : unregistered)
    {
        warn("event type " + std::to_string(type) + " was never registered; labelling it \"Unregistered type " +
             std::to_string(type) + "\"");
        merged.add_unchecked({type, "Unregistered type " + std::to_string(type), {}});
    }

    for (const auto& info : merged.entries())
    {
        out += "EVENT_TYPE\n0    ";
        append_number(out, info.type);
        out += "    " + info.description + "\n";
        if (!info.value_labels.empty())
        {
            out += "VALUES\n";
            for (const auto& [value, label] : info.value_labels)
            {
                append_number(out, value);
                out += "    " + label + "\n";
            }
        }
        out += "\n\n";
    }
    return out;
}

std::string format_row(const RowLabels& labels)
{
    std::string out;
    auto level = [&](const char* name, const std::vector<std::string>& names) {
        out += "LEVEL ";
        out += name;
        out += " SIZE " + std::to_string(names.size()) + "\n";
        for (const auto& n : names)
            out += n + "\n";
        out += "\n";
    };
    level("THREAD", labels.threads);
    level("TASK", labels.tasks);
    level("NODE", labels.nodes);
    return out;
}

void write_bundle(const TraceBundle& bundle, const std::filesystem::path& basename)
{
    const auto report = validate_bundle(bundle);
    if (!report.ok())
        throw InvalidBundleError("refusing to write an invalid bundle: " + report.violations.front().message +
                                 (report.violations.size() > 1
                                      ? " (and " + std::to_string(report.violations.size() - 1) + " more)"
                                      : std::string{}));

    auto with_ext = [&](const char* ext) {
        auto p = basename;
        p += ext;
        return p;
    };
    auto sorted = bundle.records;
    sort_records(sorted);
    write_file(with_ext(".prv"), format_prv(bundle.header, sorted));
    write_file(with_ext(".pcf"), format_pcf(bundle.registry, bundle.state_table, bundle.records));
    write_file(with_ext(".row"), format_row(bundle.row_labels));
}

} // namespace prvkit
