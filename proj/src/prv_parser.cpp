#include "prvkit/prv_format.hpp"

#include "prvkit/error.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace prvkit
{
namespace
{

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T to_number(std::string_view text, std::size_t line, const char* what)
{
    T value{};
    if (text.empty())
        throw ParseError(std::string("empty ") + what, line);
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec == std::errc::result_out_of_range)
        throw ParseError(std::string(what) + " \"" + std::string(text) + "\" out of range", line);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(std::string("non-numeric ") + what + " \"" + std::string(text) + "\"", line);
    return value;
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true)
    {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos)
        {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

// Splits on `sep` only outside parentheses.
std::vector<std::string_view> split_top_level(std::string_view s, char sep, std::size_t line)
{
    std::vector<std::string_view> parts;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (s[i] == '(')
            ++depth;
        else if (s[i] == ')')
        {
            if (--depth < 0)
                throw ParseError("malformed header: unbalanced parenthesis", line);
        }
        else if (s[i] == sep && depth == 0)
        {
            parts.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    if (depth != 0)
        throw ParseError("malformed header: unbalanced parenthesis", line);
    parts.push_back(s.substr(start));
    return parts;
}

// "N(a,b,...)" -> (N, inner). Throws if the shape is wrong.
std::pair<std::uint64_t, std::string_view> count_with_list(std::string_view token, std::size_t line)
{
    const auto open = token.find('(');
    if (token.empty() || open == std::string_view::npos || token.back() != ')')
        throw ParseError("malformed header: expected N(...) but got \"" + std::string(token) + "\"", line);
    const auto n = to_number<std::uint64_t>(token.substr(0, open), line, "header count");
    return {n, token.substr(open + 1, token.size() - open - 2)};
}

std::uint32_t to_u32(std::string_view text, std::size_t line, const char* what)
{
    return to_number<std::uint32_t>(text, line, what);
}

CaptureTime parse_date(std::string_view date, std::size_t line)
{
    // dd/mm/yy at hh:mm (four-digit years are accepted too)
    const auto at = date.find(" at ");
    if (at == std::string_view::npos)
        throw ParseError("malformed header date", line);
    const auto dmy = split(date.substr(0, at), '/');
    const auto hm = split(date.substr(at + 4), ':');
    if (dmy.size() != 3 || hm.size() != 2)
        throw ParseError("malformed header date", line);
    CaptureTime c;
    c.day = static_cast<int>(to_u32(dmy[0], line, "day"));
    c.month = static_cast<int>(to_u32(dmy[1], line, "month"));
    const auto year = static_cast<int>(to_u32(dmy[2], line, "year"));
    c.year = dmy[2].size() <= 2 ? 2000 + year : year;
    c.hour = static_cast<int>(to_u32(hm[0], line, "hour"));
    c.minute = static_cast<int>(to_u32(hm[1], line, "minute"));
    return c;
}

TraceHeader parse_header_at(std::string_view line_text, std::size_t line)
{
    line_text = trim(line_text);
    constexpr std::string_view magic = "#Paraver (";
    if (line_text.substr(0, magic.size()) != magic)
        throw ParseError("malformed header: missing \"#Paraver (\"", line);
    const auto close = line_text.find("):", magic.size());
    if (close == std::string_view::npos)
        throw ParseError("malformed header: unterminated date", line);

    TraceHeader header;
    header.captured = parse_date(line_text.substr(magic.size(), close - magic.size()), line);

    auto fields = split_top_level(line_text.substr(close + 2), ':', line);
    if (fields.size() < 3)
        throw ParseError("malformed header: too few fields", line);

    auto ftime = fields[0];
    if (ftime.size() > 3 && ftime.substr(ftime.size() - 3) == "_ns")
        ftime.remove_suffix(3);
    header.total_time = to_number<Nanoseconds>(ftime, line, "final time");

    auto [n_nodes, cpu_list] = count_with_list(fields[1], line);
    if (n_nodes > 0)
    {
        const auto cpus = split(cpu_list, ',');
        if (cpus.size() != n_nodes)
            throw ParseError("malformed header: node count does not match cpu list", line);
        for (auto c : cpus)
            header.resources.cpus_per_node.push_back(to_u32(c, line, "cpu count"));
    }

    const auto n_appl = to_number<std::uint64_t>(fields[2], line, "application count");
    if (fields.size() != 3 + n_appl)
        throw ParseError("malformed header: expected " + std::to_string(n_appl) + " application descriptions", line);
    for (std::size_t a = 0; a < n_appl; ++a)
    {
        auto token = fields[3 + a];
        // Trailing ",N" communicator count written by some tracers.
        if (auto comma = token.rfind(','); comma != std::string_view::npos && token.back() != ')' &&
                                           token.rfind(')') != std::string_view::npos &&
                                           comma > token.rfind(')'))
            token = token.substr(0, comma);
        auto [n_tasks, task_list] = count_with_list(token, line);
        Application app;
        const auto tasks = split(task_list, ',');
        if (tasks.size() != n_tasks)
            throw ParseError("malformed header: task count does not match task list", line);
        for (auto t : tasks)
        {
            const auto parts = split(t, ':');
            if (parts.size() != 2)
                throw ParseError("malformed header: task must be threads:node", line);
            app.tasks.push_back({to_u32(parts[0], line, "thread count"), to_u32(parts[1], line, "node")});
        }
        header.process.applications.push_back(std::move(app));
    }
    return header;
}

Location location_from(const std::vector<std::string_view>& f, std::size_t at, std::size_t line)
{
    return {to_u32(f[at], line, "cpu"), to_u32(f[at + 1], line, "application"), to_u32(f[at + 2], line, "task"),
            to_u32(f[at + 3], line, "thread")};
}

TraceRecord parse_record(std::string_view text, std::size_t line)
{
    const auto f = split(text, ':');
    const auto kind = to_number<std::uint64_t>(f[0], line, "record type");
    switch (kind)
    {
    case 1: {
        if (f.size() != 8)
            throw ParseError("state record needs 8 fields, got " + std::to_string(f.size()), line);
        return StateRecord{location_from(f, 1, line), to_number<Nanoseconds>(f[5], line, "time"),
                           to_number<Nanoseconds>(f[6], line, "time"), to_u32(f[7], line, "state")};
    }
    case 2: {
        if (f.size() < 8 || (f.size() - 6) % 2 != 0)
            throw ParseError("event record needs type:value pairs, got " + std::to_string(f.size()) + " fields", line);
        EventRecord e{location_from(f, 1, line), to_number<Nanoseconds>(f[5], line, "time"), {}};
        for (std::size_t i = 6; i < f.size(); i += 2)
            e.pairs.push_back({to_u32(f[i], line, "event type"), to_number<std::uint64_t>(f[i + 1], line, "value")});
        return e;
    }
    case 3: {
        if (f.size() != 15)
            throw ParseError("communication record needs 15 fields, got " + std::to_string(f.size()), line);
        CommRecord c;
        c.send_location = location_from(f, 1, line);
        c.logical_send = to_number<Nanoseconds>(f[5], line, "time");
        c.physical_send = to_number<Nanoseconds>(f[6], line, "time");
        c.recv_location = location_from(f, 7, line);
        c.logical_recv = to_number<Nanoseconds>(f[11], line, "time");
        c.physical_recv = to_number<Nanoseconds>(f[12], line, "time");
        c.size = to_number<std::uint64_t>(f[13], line, "size");
        c.tag = to_number<std::uint64_t>(f[14], line, "tag");
        return c;
    }
    default:
        throw ParseError("unknown record type " + std::to_string(kind), line);
    }
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn)
{
    std::size_t line = 0;
    std::size_t start = 0;
    while (start < text.size())
    {
        ++line;
        const auto nl = text.find('\n', start);
        const bool terminated = nl != std::string_view::npos;
        auto content = text.substr(start, terminated ? nl - start : std::string_view::npos);
        if (!content.empty() && content.back() == '\r')
            content.remove_suffix(1);
        fn(content, line, terminated);
        if (!terminated)
            break;
        start = nl + 1;
    }
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

bool is_section(std::string_view s)
{
    if (s.empty())
        return false;
    for (char c : s)
        if (!(std::isupper(static_cast<unsigned char>(c)) || c == '_'))
            return false;
    return true;
}

// "<number><spaces><label>" -> (number, label)
std::pair<std::uint64_t, std::string> number_and_label(std::string_view s, std::size_t line)
{
    const auto sep = s.find_first_of(" \t");
    const auto number = to_number<std::uint64_t>(s.substr(0, sep), line, "code");
    const auto label = sep == std::string_view::npos ? std::string_view{} : trim(s.substr(sep));
    return {number, std::string(label)};
}

} // namespace

TraceHeader parse_header(std::string_view line)
{
    return parse_header_at(line, 1);
}

PrvContents parse_prv(std::string_view text)
{
    PrvContents contents;
    bool have_header = false;
    for_each_line(text, [&](std::string_view content, std::size_t line, bool terminated) {
        if (!have_header)
        {
            contents.header = parse_header_at(content, line);
            have_header = true;
            return;
        }
        if (trim(content).empty())
            return;
        if (!terminated)
            throw ParseError("truncated record (no trailing newline)", line);
        // Comments and communicator definitions carry nothing we model.
        if (content.front() == '#' || content.front() == 'c')
            return;
        contents.records.push_back(parse_record(content, line));
    });
    if (!have_header)
        throw ParseError("malformed header: empty trace", 1);
    return contents;
}

PcfContents parse_pcf(std::string_view text)
{
    PcfContents pcf;
    enum class Section
    {
        other,
        states,
        event_type,
        values
    } section = Section::other;

    std::vector<EventTypeInfo> group;
    auto flush_group = [&] {
        for (auto& info : group)
            pcf.registry.add_unchecked(std::move(info));
        group.clear();
    };

    for_each_line(text, [&](std::string_view content, std::size_t line, bool) {
        const auto s = trim(content);
        if (s.empty())
        {
            if (section == Section::values || section == Section::event_type)
                flush_group();
            section = Section::other;
            return;
        }
        if (is_section(s))
        {
            if (s == "EVENT_TYPE")
            {
                flush_group();
                section = Section::event_type;
            }
            else if (s == "VALUES" && section == Section::event_type)
                section = Section::values;
            else if (s == "STATES")
                section = Section::states;
            else
            {
                flush_group();
                section = Section::other;
            }
            return;
        }
        switch (section)
        {
        case Section::states: {
            auto [code, label] = number_and_label(s, line);
            if (code > std::numeric_limits<std::uint32_t>::max())
                throw ParseError("state code out of range", line);
            pcf.states[static_cast<std::uint32_t>(code)] = label;
            break;
        }
        case Section::event_type: {
            const auto sep = s.find_first_of(" \t");
            if (sep == std::string_view::npos)
                throw ParseError("EVENT_TYPE line needs gradient, type and label", line);
            to_number<std::uint64_t>(s.substr(0, sep), line, "gradient");
            auto [type, label] = number_and_label(trim(s.substr(sep)), line);
            if (type == 0 || type > std::numeric_limits<std::uint32_t>::max())
                throw ParseError("event type out of range", line);
            group.push_back({static_cast<std::uint32_t>(type), label, {}});
            break;
        }
        case Section::values: {
            auto [value, label] = number_and_label(s, line);
            for (auto& info : group)
                info.value_labels[value] = label;
            break;
        }
        case Section::other:
            break;
        }
    });
    flush_group();
    return pcf;
}

RowLabels parse_row(std::string_view text)
{
    RowLabels labels;
    std::vector<std::string>* target = nullptr;
    std::size_t remaining = 0;
    std::size_t last_line = 0;
    for_each_line(text, [&](std::string_view content, std::size_t line, bool) {
        last_line = line;
        if (remaining > 0)
        {
            if (target != nullptr)
                target->emplace_back(content);
            --remaining;
            return;
        }
        const auto s = trim(content);
        if (s.empty())
            return;
        const auto words = split(s, ' ');
        if (words.size() != 4 || words[0] != "LEVEL" || words[2] != "SIZE")
            throw ParseError("expected \"LEVEL <name> SIZE <n>\"", line);
        remaining = to_number<std::size_t>(words[3], line, "level size");
        if (words[1] == "THREAD")
            target = &labels.threads;
        else if (words[1] == "TASK")
            target = &labels.tasks;
        else if (words[1] == "NODE")
            target = &labels.nodes;
        else
            target = nullptr;
        if (target != nullptr)
            target->clear();
    });
    if (remaining > 0)
        throw ParseError("row level ends early", last_line);
    return labels;
}

TraceBundle parse_bundle(const std::filesystem::path& basename)
{
    auto with_ext = [&](const char* ext) {
        auto p = basename;
        p += ext;
        return p;
    };

    TraceBundle bundle;
    auto prv = parse_prv(read_file(with_ext(".prv")));
    bundle.header = std::move(prv.header);
    bundle.records = std::move(prv.records);

    if (std::filesystem::exists(with_ext(".pcf")))
    {
        auto pcf = parse_pcf(read_file(with_ext(".pcf")));
        bundle.registry = std::move(pcf.registry);
        bundle.state_table = std::move(pcf.states);
    }
    else
    {
        warn(with_ext(".pcf").string() + " not found; continuing without event labels");
        bundle.state_table.clear();
    }

    if (std::filesystem::exists(with_ext(".row")))
        bundle.row_labels = parse_row(read_file(with_ext(".row")));
    else
        warn(with_ext(".row").string() + " not found; continuing without row labels");
    return bundle;
}

} // namespace prvkit
