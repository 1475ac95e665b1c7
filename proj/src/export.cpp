#include "prvkit/export.hpp"

#include "prvkit/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace prvkit
{
namespace
{

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
    {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s)
    {
        switch (c)
        {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

double seconds(Nanoseconds t)
{
    return static_cast<double>(t) * 1e-9;
}

bool is_empty(const TimeSeries& s)
{
    return s.values.empty();
}
bool is_empty(const std::vector<TimeSeries>& s)
{
    return s.empty() || std::all_of(s.begin(), s.end(), [](const TimeSeries& t) { return t.values.empty(); });
}
bool is_empty(const IntervalTimeline& t)
{
    return t.rows.empty();
}
bool is_empty(const CountMatrix& m)
{
    return m.size() == 0;
}
bool is_empty(const RoutineStats& s)
{
    return s.routines.empty();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out)
        throw IoError("failed writing " + path.string());
}

// Plot frame shared by the time-based charts.
struct Frame
{
    double left = 90;
    double right = 30;
    double top = 40;
    double bottom = 50;
    double width = 1000;
    double height = 400;

    double plot_width() const
    {
        return width - left - right;
    }
    double plot_height() const
    {
        return height - top - bottom;
    }
};

std::string svg_open(const Frame& f, const std::string& title)
{
    auto out = fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
                           "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"11\">\n",
                           f.width, f.height, f.width, f.height);
    out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", f.width, f.height);
    if (!title.empty())
        out += fmt::format("<text x=\"{:.1f}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                           f.width / 2, xml_escape(title));
    return out;
}

std::string time_axis(const Frame& f, Nanoseconds t0, Nanoseconds t1)
{
    const double y = f.top + f.plot_height();
    std::string out = fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n",
                                  f.left, y, f.left + f.plot_width(), y);
    constexpr int ticks = 5;
    for (int i = 0; i <= ticks; ++i)
    {
        const double frac = static_cast<double>(i) / ticks;
        const double x = f.left + frac * f.plot_width();
        const double t = seconds(t0) + frac * (seconds(t1) - seconds(t0));
        out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", x,
                           y, y + 4);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.4g}</text>\n", x, y + 16, t);
    }
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">time (s)</text>\n",
                       f.left + f.plot_width() / 2, y + 34);
    return out;
}

std::string value_axis(const Frame& f, double lo, double hi, const std::string& units)
{
    std::string out = fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n",
                                  f.left, f.top, f.top + f.plot_height());
    constexpr int ticks = 4;
    for (int i = 0; i <= ticks; ++i)
    {
        const double frac = static_cast<double>(i) / ticks;
        const double y = f.top + f.plot_height() * (1 - frac);
        out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#dddddd\"/>\n",
                           f.left, y, f.left + f.plot_width(), y);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", f.left - 6, y + 4,
                           lo + frac * (hi - lo));
    }
    out += fmt::format("<text x=\"14\" y=\"{:.1f}\" transform=\"rotate(-90 14 {:.1f})\" text-anchor=\"middle\">{}</text>\n",
                       f.top + f.plot_height() / 2, f.top + f.plot_height() / 2, xml_escape(units));
    return out;
}

TimeWindow series_window(const std::vector<TimeSeries>& series, const SvgStyle& style)
{
    if (style.window)
        return *style.window;
    TimeWindow w{series.front().origin, series.front().end};
    for (const auto& s : series)
        w.end = std::max(w.end, s.end);
    return w;
}

} // namespace

std::string palette_color(std::size_t index)
{
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                   "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a"};
    return colors[index % std::size(colors)];
}

std::string to_csv(const TimeSeries& series)
{
    return to_csv(std::vector<TimeSeries>{series});
}

std::string to_csv(const std::vector<TimeSeries>& series)
{
    std::string out = "bin_start_ns,bin_end_ns";
    std::size_t n = 0;
    for (const auto& s : series)
    {
        out += "," + csv_field(s.units.empty() ? s.label : s.label + " (" + s.units + ")");
        n = std::max(n, s.values.size());
    }
    out += "\n";
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto& ref = series.front();
        out += fmt::format("{},{}", ref.bin_begin(i), ref.bin_end(i));
        for (const auto& s : series)
            out += i < s.values.size() ? fmt::format(",{}", s.values[i]) : std::string(",");
        out += "\n";
    }
    return out;
}

std::string to_csv(const IntervalTimeline& timeline)
{
    std::string out = "appl,task,thread,begin_ns,end_ns,duration_ns,code,label\n";
    for (const auto& [row, intervals] : timeline.rows)
        for (const auto& iv : intervals)
            out += fmt::format("{},{},{},{},{},{},{},{}\n", row.appl, row.task, row.thread, iv.begin, iv.end,
                               iv.duration(), iv.code, csv_field(iv.label));
    return out;
}

std::string to_csv(const CountMatrix& matrix)
{
    std::string out = "sender\\receiver";
    for (const auto& l : matrix.labels)
        out += "," + csv_field(l);
    out += "\n";
    for (std::size_t x = 0; x < matrix.size(); ++x)
    {
        out += csv_field(matrix.labels[x]);
        for (std::size_t y = 0; y < matrix.size(); ++y)
            out += fmt::format(",{}", matrix.at(x, y));
        out += "\n";
    }
    return out;
}

std::string to_csv(const RoutineStats& stats)
{
    std::string out = "code,routine,mean,min,max,q1,median,q3";
    for (const auto& l : stats.task_labels)
        out += "," + csv_field(l);
    out += "\n";
    for (const auto& r : stats.routines)
    {
        out += fmt::format("{},{},{},{},{},{},{},{}", r.code, csv_field(r.label), r.mean, r.min, r.max, r.q1, r.median,
                           r.q3);
        for (double f : r.per_task)
            out += fmt::format(",{}", f);
        out += "\n";
    }
    return out;
}

std::string to_svg(const TimeSeries& series, const SvgStyle& style)
{
    return to_svg(std::vector<TimeSeries>{series}, style);
}

std::string to_svg(const std::vector<TimeSeries>& series, const SvgStyle& style)
{
    Frame f;
    f.width = style.width;
    f.height = style.plot_height + f.top + f.bottom;
    const auto w = series_window(series, style);

    double hi = 0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.values.size(); ++i)
            if (s.bin_end(i) > w.begin && s.bin_begin(i) < w.end)
                hi = std::max(hi, s.values[i]);
    if (hi <= 0)
        hi = 1;

    const auto span = static_cast<double>(std::max<Nanoseconds>(w.length(), 1));
    auto x_of = [&](Nanoseconds t) {
        t = std::clamp(t, w.begin, w.end);
        return f.left + static_cast<double>(t - w.begin) / span * f.plot_width();
    };
    auto y_of = [&](double v) { return f.top + f.plot_height() * (1 - v / hi); };

    std::string out = svg_open(f, style.title.empty() ? series.front().label : style.title);
    out += value_axis(f, 0, hi, series.front().units);
    out += time_axis(f, w.begin, w.end);
    for (std::size_t k = 0; k < series.size(); ++k)
    {
        const auto& s = series[k];
        std::string path;
        for (std::size_t i = 0; i < s.values.size(); ++i)
        {
            if (s.bin_end(i) <= w.begin || s.bin_begin(i) >= w.end)
                continue;
            const double y = y_of(s.values[i]);
            path += fmt::format("{}{:.2f},{:.2f} L{:.2f},{:.2f} ", path.empty() ? "M" : "L", x_of(s.bin_begin(i)), y,
                                x_of(s.bin_end(i)), y);
        }
        out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", path,
                           palette_color(k));
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">{}</text>\n", f.left + 8,
                           f.top + 14 + 14.0 * static_cast<double>(k), palette_color(k), xml_escape(s.label));
    }
    return out + "</svg>\n";
}

std::string to_svg(const IntervalTimeline& timeline, const SvgStyle& style)
{
    Frame f;
    f.width = style.width;
    f.left = 110;
    const double legend_height = 20;
    const auto rows = static_cast<double>(timeline.rows.size());
    f.height = f.top + f.bottom + legend_height + rows * style.row_height;
    const auto w = style.window.value_or(TimeWindow{0, timeline.total_time});
    const auto span = static_cast<double>(std::max<Nanoseconds>(w.length(), 1));
    auto x_of = [&](Nanoseconds t) {
        t = std::clamp(t, w.begin, w.end);
        return f.left + static_cast<double>(t - w.begin) / span * f.plot_width();
    };

    std::map<std::uint64_t, std::size_t> color_index;
    for (const auto& [code, label] : timeline.legend)
        color_index.emplace(code, color_index.size());

    Frame axis = f;
    axis.bottom = f.bottom + legend_height;
    std::string out = svg_open(f, style.title);
    std::size_t r = 0;
    for (const auto& [row, intervals] : timeline.rows)
    {
        const double y = f.top + static_cast<double>(r) * style.row_height;
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">THREAD {}.{}.{}</text>\n", f.left - 6,
                           y + style.row_height * 0.7, row.appl, row.task, row.thread);
        for (const auto& iv : intervals)
        {
            if (iv.end < w.begin || iv.begin > w.end)
                continue;
            const double x0 = x_of(iv.begin);
            const double x1 = x_of(iv.end);
            out += fmt::format("<rect class=\"interval\" x=\"{:.2f}\" y=\"{:.1f}\" width=\"{:.2f}\" height=\"{:.1f}\" "
                               "fill=\"{}\"/>\n",
                               x0,
                               y + 1, std::max(x1 - x0, 0.0), style.row_height - 2.0,
                               palette_color(color_index[iv.code]));
        }
        ++r;
    }
    out += time_axis(axis, w.begin, w.end);

    double lx = f.left;
    const double ly = f.height - legend_height;
    for (const auto& [code, label] : timeline.legend)
    {
        out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", lx, ly - 10,
                           palette_color(color_index[code]));
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", lx + 16, ly, xml_escape(label));
        lx += 40 + 7.0 * static_cast<double>(label.size());
    }
    return out + "</svg>\n";
}

std::string to_svg(const CountMatrix& matrix, const SvgStyle& style)
{
    const auto n = matrix.size();
    Frame f;
    f.left = 110;
    f.top = 110;
    const double cell = std::max(8.0, std::min(40.0, (style.width - f.left - f.right) / std::max<double>(n, 1)));
    f.width = f.left + f.right + cell * static_cast<double>(n);
    f.height = f.top + f.bottom + cell * static_cast<double>(n);

    std::uint64_t hi = 1;
    for (auto c : matrix.counts)
        hi = std::max(hi, c);

    std::string out = svg_open(f, style.title.empty() ? "Messages sent (row: sender, column: receiver)" : style.title);
    for (std::size_t x = 0; x < n; ++x)
    {
        const double y = f.top + static_cast<double>(x) * cell;
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n", f.left - 4,
                           y + cell * 0.65, xml_escape(matrix.labels[x]));
        const double cx = f.left + static_cast<double>(x) * cell + cell * 0.65;
        out += fmt::format("<text x=\"{0:.1f}\" y=\"{1:.1f}\" transform=\"rotate(-90 {0:.1f} {1:.1f})\">{2}</text>\n",
                           cx, f.top - 4, xml_escape(matrix.labels[x]));
        for (std::size_t yv = 0; yv < n; ++yv)
        {
            const auto count = matrix.at(x, yv);
            std::string fill = "#bfbfbf";
            if (count > 0)
            {
                const double shade = 0.35 + 0.65 * static_cast<double>(count) / static_cast<double>(hi);
                fill = fmt::format("rgb(0,{},0)", static_cast<int>(std::lround(90 + 120 * shade)));
            }
            const double cx0 = f.left + static_cast<double>(yv) * cell;
            out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\" "
                               "stroke=\"white\"><title>{}</title></rect>\n",
                               cx0, y, cell, cell, fill, count);
        }
    }
    return out + "</svg>\n";
}

std::string to_svg(const RoutineStats& stats, const SvgStyle& style)
{
    Frame f;
    f.width = style.width;
    f.height = style.plot_height + f.top + f.bottom;
    const double slot = f.plot_width() / std::max<double>(static_cast<double>(stats.routines.size()), 1);
    auto y_of = [&](double v) { return f.top + f.plot_height() * (1 - v); };

    std::string out = svg_open(f, style.title.empty() ? "Fraction of time per routine" : style.title);
    out += value_axis(f, 0, 1, "fraction of time");
    const double base = f.top + f.plot_height();
    out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n", f.left,
                       base, f.left + f.plot_width(), base);
    for (std::size_t i = 0; i < stats.routines.size(); ++i)
    {
        const auto& r = stats.routines[i];
        const double x0 = f.left + slot * (static_cast<double>(i) + 0.2);
        const double bw = slot * 0.6;
        const auto color = palette_color(i);
        out += fmt::format("<rect class=\"band\" x=\"{:.1f}\" y=\"{:.2f}\" width=\"{:.1f}\" height=\"{:.2f}\" "
                           "fill=\"{}\" fill-opacity=\"0.35\"/>\n",
                           x0, y_of(r.max), bw, std::max(y_of(r.min) - y_of(r.max), 1.0), color);
        out += fmt::format("<line class=\"mean\" x1=\"{:.1f}\" y1=\"{:.2f}\" x2=\"{:.1f}\" y2=\"{:.2f}\" "
                           "stroke=\"{}\" stroke-width=\"2\"/>\n",
                           x0, y_of(r.mean), x0 + bw, y_of(r.mean), color);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", x0 + bw / 2,
                           base + 16, xml_escape(r.label));
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.1f}%</text>\n", x0 + bw / 2,
                           y_of(r.max) - 4, r.mean * 100);
    }
    return out + "</svg>\n";
}

template <typename Result>
void export_csv(const Result& result, const std::filesystem::path& path)
{
    if (is_empty(result))
        throw AnalysisError("nothing to export");
    write_text(path, to_csv(result));
}

template <typename Result>
void export_svg(const Result& result, const std::filesystem::path& path, const SvgStyle& style)
{
    if (is_empty(result))
        throw AnalysisError("nothing to export");
    write_text(path, to_svg(result, style));
}

template void export_csv(const TimeSeries&, const std::filesystem::path&);
template void export_csv(const std::vector<TimeSeries>&, const std::filesystem::path&);
template void export_csv(const IntervalTimeline&, const std::filesystem::path&);
template void export_csv(const CountMatrix&, const std::filesystem::path&);
template void export_csv(const RoutineStats&, const std::filesystem::path&);
template void export_svg(const TimeSeries&, const std::filesystem::path&, const SvgStyle&);
template void export_svg(const std::vector<TimeSeries>&, const std::filesystem::path&, const SvgStyle&);
template void export_svg(const IntervalTimeline&, const std::filesystem::path&, const SvgStyle&);
template void export_svg(const CountMatrix&, const std::filesystem::path&, const SvgStyle&);
template void export_svg(const RoutineStats&, const std::filesystem::path&, const SvgStyle&);

} // namespace prvkit
