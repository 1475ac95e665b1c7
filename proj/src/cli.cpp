#include "prvkit/cli.hpp"

#include "prvkit/config.hpp"
#include "prvkit/error.hpp"
#include "prvkit/export.hpp"
#include "prvkit/prv_format.hpp"
#include "prvkit/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <ostream>

namespace prvkit::cli
{
namespace
{

struct AnalyzeOptions
{
    std::string kind;
    std::string base;
    std::string bin = "10ms";
    std::string window;
    std::optional<std::uint32_t> event_type;
    std::string csv;
    std::string svg;
    bool derive_states = false;
};

struct DemoOptions
{
    std::string out = "demo";
    std::uint32_t tasks = 16;
    std::uint32_t iterations = 252;
    std::uint64_t seed = 1;
    std::string topology = "ring";
    bool full_report = false;
    std::string report_dir;
    std::string sample_period;
    std::optional<double> sample_jitter;
    std::optional<std::uint64_t> sample_counter_threshold;
};

struct DumpOptions
{
    std::string base;
    bool pcf = false;
    bool row = false;
    bool records = false;
};

std::string seconds(Nanoseconds ns)
{
    return fmt::format("{:.3f} s", static_cast<double>(ns) / 1e9);
}

TimeWindow resolve_window(const std::string& text, const TraceBundle& bundle)
{
    if (text.empty())
        return {0, bundle.header.total_time};
    if (text == "workload")
    {
        const auto w = find_workload_window(bundle);
        if (!w)
            throw ConfigError("trace has no workload-phase markers");
        return *w;
    }
    return parse_window(text);
}

struct Summary
{
    double min = 0;
    double max = 0;
    double mean = 0;
};

Summary summarize(const TimeSeries& series)
{
    if (series.values.empty())
        throw EmptySeriesError("no complete bin inside the window");
    Summary s{series.values.front(), series.values.front(), 0};
    for (const double v : series.values)
    {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        s.mean += v;
    }
    s.mean /= static_cast<double>(series.values.size());
    return s;
}

void print_fractions(const RoutineStats& stats, std::ostream& out)
{
    out << fmt::format("routine time fractions over [{}, {}), {} tasks\n", seconds(stats.window.begin),
                       seconds(stats.window.end), stats.task_labels.size());
    out << fmt::format("{:<20} {:>7} {:>7} {:>7} {:>7}\n", "routine", "mean", "min", "max", "median");
    for (const auto& r : stats.routines)
        out << fmt::format("{:<20} {:>6.2f}% {:>6.2f}% {:>6.2f}% {:>6.2f}%\n", r.label, 100 * r.mean, 100 * r.min,
                           100 * r.max, 100 * r.median);
}

void print_matrix(const CountMatrix& m, std::ostream& out)
{
    out << fmt::format("{} messages between {} tasks\n", m.total(), m.size());
    std::size_t width = 0;
    for (const auto& l : m.labels)
        width = std::max(width, l.size());
    for (std::size_t x = 0; x < m.size(); ++x)
    {
        out << fmt::format("{:<{}}", m.labels[x], width);
        for (std::size_t y = 0; y < m.size(); ++y)
            out << fmt::format(" {:>5}", m.at(x, y));
        out << '\n';
    }
}

void write_outputs(const auto& result, const AnalyzeOptions& opt, const SvgStyle& style)
{
    if (!opt.csv.empty())
        export_csv(result, opt.csv);
    if (!opt.svg.empty())
        export_svg(result, opt.svg, style);
}

int analyze(const AnalyzeOptions& opt, const TracerConfig& config, std::ostream& out)
{
    const auto bundle = parse_bundle(opt.base);
    const auto window = resolve_window(opt.window, bundle);
    const auto bin = parse_duration(opt.bin);
    const auto type = opt.event_type.value_or(config.routine_event_type);

    SvgStyle style;
    style.title = fmt::format("{} ({})", opt.kind, std::filesystem::path(opt.base).filename().string());
    if (!opt.window.empty())
        style.window = window;

    if (opt.kind == "parallelism")
    {
        ParallelismOptions popt;
        popt.derive_states_from_routine_events = opt.derive_states;
        popt.routine_event_type = type;
        const auto series = restrict_to_window(instantaneous_parallelism(bundle, bin, popt), window);
        const auto s = summarize(series);
        out << fmt::format("parallelism, {} bins of {}: min {:.3f} max {:.3f} mean {:.3f}\n", series.values.size(),
                           opt.bin, s.min, s.max, s.mean);
        write_outputs(series, opt, style);
    }
    else if (opt.kind == "timeline")
    {
        const auto timeline = call_timeline(bundle, type);
        std::map<std::string, std::pair<std::size_t, Nanoseconds>> totals;
        for (const auto& [row, intervals] : timeline.rows)
            for (const auto& iv : intervals)
            {
                auto& [count, time] = totals[iv.label];
                ++count;
                time += iv.duration();
            }
        out << fmt::format("timeline of event type {}: {} rows\n", type, timeline.rows.size());
        for (const auto& [label, ct] : totals)
            out << fmt::format("{:<20} {:>8} calls {:>12}\n", label, ct.first, seconds(ct.second));
        if (!timeline.open_at_end.empty())
            out << fmt::format("{} rows end inside an open block\n", timeline.open_at_end.size());
        write_outputs(timeline, opt, style);
    }
    else if (opt.kind == "connectivity")
    {
        const auto matrix = connectivity_matrix(bundle);
        print_matrix(matrix, out);
        write_outputs(matrix, opt, style);
    }
    else if (opt.kind == "fractions")
    {
        const auto stats = routine_time_fractions(bundle, type, window);
        print_fractions(stats, out);
        write_outputs(stats, opt, style);
    }
    else
    {
        std::vector<TimeSeries> series;
        for (const auto& s : node_bandwidth(bundle, bin))
            series.push_back(restrict_to_window(s, window));
        for (const auto& s : series)
            out << fmt::format("{}: peak {:.2f} MB/s, mean {:.2f} MB/s ({} bins of {})\n", s.label,
                               summarize(s).max, summarize(s).mean, s.values.size(), opt.bin);
        write_outputs(series, opt, style);
    }
    return exit_ok;
}

int validate(const std::string& base, std::ostream& out, std::ostream& err)
{
    const auto bundle = parse_bundle(base);
    const auto report = validate_bundle(bundle);
    if (report.ok())
    {
        out << fmt::format("{}: valid, {} records, {} event types\n", base, bundle.records.size(),
                           bundle.registry.entries().size());
        return exit_ok;
    }
    for (const auto& v : report.violations)
        err << fmt::format("{}: {}: {}\n", base, to_string(v.kind), v.message);
    err << fmt::format("{}: {} violations\n", base, report.violations.size());
    return exit_failure;
}

int dump(const DumpOptions& opt, std::ostream& out)
{
    const auto bundle = parse_bundle(opt.base);
    if (opt.pcf)
        out << format_pcf(bundle.registry, bundle.state_table);
    if (opt.row)
        out << format_row(bundle.row_labels);
    if (opt.records)
        for (const auto& r : bundle.records)
            out << format_record(r) << '\n';
    if (opt.pcf || opt.row || opt.records)
        return exit_ok;

    std::size_t states = 0, events = 0, comms = 0;
    for (const auto& r : bundle.records)
    {
        states += std::holds_alternative<StateRecord>(r);
        events += std::holds_alternative<EventRecord>(r);
        comms += std::holds_alternative<CommRecord>(r);
    }
    const auto& h = bundle.header;
    out << format_header(h) << '\n';
    out << fmt::format("duration      {}\n", seconds(h.total_time));
    out << fmt::format("nodes         {} ({} cpus)\n", h.resources.node_count(), h.resources.total_cpus());
    out << fmt::format("applications  {}, tasks {}, threads {}\n", h.process.applications.size(),
                       h.process.total_tasks(), h.process.total_threads());
    out << fmt::format("records       {} states, {} events, {} communications\n", states, events, comms);
    for (const auto& e : bundle.registry.entries())
        out << fmt::format("event type    {} {} ({} labelled values)\n", e.type, e.description,
                           e.value_labels.size());
    return exit_ok;
}

int demo(const DemoOptions& opt, const TracerConfig& config, std::ostream& out, std::ostream& err)
{
    SyntheticSpec spec;
    spec.n_tasks = opt.tasks;
    spec.n_iterations = opt.iterations;
    spec.seed = opt.seed;
    spec.topology = opt.topology == "ring" ? Topology::ring : Topology::nearest_neighbor_2d;
    spec.tracer_config = config;
    if (!opt.sample_period.empty())
    {
        auto sampling = SamplerConfig::from_defaults(config.sampler, SamplingMode::time);
        sampling.period_ns = parse_duration(opt.sample_period);
        if (opt.sample_jitter)
            sampling.jitter_fraction = *opt.sample_jitter;
        spec.sampling = sampling;
    }
    else if (opt.sample_counter_threshold)
    {
        auto sampling = SamplerConfig::from_defaults(config.sampler, SamplingMode::counter);
        sampling.counter_threshold = *opt.sample_counter_threshold;
        spec.sampling = sampling;
    }

    const auto trace = generate_synthetic_trace(spec);
    if (const auto parent = std::filesystem::path(opt.out).parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    write_bundle(trace.bundle, opt.out);
    out << fmt::format("wrote {}.prv/.pcf/.row: {} tasks, {} records, workload [{}, {})\n", opt.out, spec.n_tasks,
                       trace.bundle.records.size(), seconds(trace.workload.begin), seconds(trace.workload.end));
    if (trace.sampling)
        out << fmt::format("sampler emitted {} samples\n", trace.sampling->samples);
    if (!opt.full_report)
        return exit_ok;

    if (validate(opt.out, out, err) != exit_ok)
        return exit_failure;

    const std::filesystem::path dir = opt.report_dir.empty() ? opt.out + "-report" : opt.report_dir;
    std::filesystem::create_directories(dir);
    for (const std::string kind : {"parallelism", "timeline", "connectivity", "fractions", "bandwidth"})
    {
        AnalyzeOptions a;
        a.kind = kind;
        a.base = opt.out;
        a.window = kind == "timeline" ? "" : "workload";
        a.csv = (dir / (kind + ".csv")).string();
        a.svg = (dir / (kind + ".svg")).string();
        analyze(a, config, out);
    }
    out << fmt::format("report written to {}\n", dir.string());
    return exit_ok;
}

} // namespace

Nanoseconds parse_duration(std::string_view text)
{
    static constexpr std::pair<std::string_view, double> units[] = {
        {"ns", 1.0}, {"us", 1e3}, {"ms", 1e6}, {"s", 1e9}};
    double scale = 1.0;
    std::string_view number = text;
    for (const auto& [suffix, factor] : units)
        if (text.size() > suffix.size() && text.ends_with(suffix))
        {
            number = text.substr(0, text.size() - suffix.size());
            scale = factor;
            break;
        }
    double value = 0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
    if (ec != std::errc{} || ptr != number.data() + number.size() || !(value >= 0))
        throw ConfigError(fmt::format("invalid duration '{}'", text));
    return static_cast<Nanoseconds>(std::llround(value * scale));
}

TimeWindow parse_window(std::string_view text)
{
    const auto colon = text.find(':');
    if (colon == std::string_view::npos)
        throw ConfigError(fmt::format("window '{}' is not of the form t0:t1", text));
    const TimeWindow w{parse_duration(text.substr(0, colon)), parse_duration(text.substr(colon + 1))};
    if (w.end <= w.begin)
        throw ConfigError(fmt::format("window '{}' is empty", text));
    return w;
}

std::optional<TimeWindow> find_workload_window(const TraceBundle& bundle)
{
    std::optional<Nanoseconds> begin, end;
    for (const auto& r : bundle.records)
        if (const auto* e = std::get_if<EventRecord>(&r))
            for (const auto& p : e->pairs)
                if (p.type == workload_phase_event_type)
                {
                    if (p.value != 0 && !begin)
                        begin = e->time;
                    else if (p.value == 0)
                        end = e->time;
                }
    if (!begin || !end || *end <= *begin)
        return std::nullopt;
    return TimeWindow{*begin, *end};
}

TimeSeries restrict_to_window(const TimeSeries& series, const TimeWindow& window)
{
    TimeSeries out = series;
    out.values.clear();
    bool first = true;
    for (std::size_t i = 0; i < series.values.size(); ++i)
        if (series.bin_begin(i) >= window.begin && series.bin_end(i) <= window.end)
        {
            if (first)
                out.origin = series.bin_begin(i);
            first = false;
            out.values.push_back(series.values[i]);
            out.end = series.bin_end(i);
        }
    if (first)
        out.end = out.origin;
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Paraver trace toolkit: generate, validate, dump and analyze .prv/.pcf/.row bundles", "prvkit"};
    app.require_subcommand(1);

    DemoOptions demo_opt;
    auto* demo_cmd = app.add_subcommand("demo", "Generate the calibrated synthetic halo-exchange trace");
    demo_cmd->add_option("--out", demo_opt.out, "Output basename")->capture_default_str();
    demo_cmd->add_option("--tasks", demo_opt.tasks, "Number of tasks")->capture_default_str()->check(
        CLI::PositiveNumber);
    demo_cmd->add_option("--iterations", demo_opt.iterations, "Number of iterations")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    demo_cmd->add_option("--seed", demo_opt.seed, "Noise seed")->capture_default_str();
    demo_cmd->add_option("--topology", demo_opt.topology, "ring or grid")
        ->capture_default_str()
        ->check(CLI::IsMember({"ring", "grid"}));
    demo_cmd->add_flag("--full-report", demo_opt.full_report, "Validate, re-read and run every analysis");
    demo_cmd->add_option("--report-dir", demo_opt.report_dir, "Directory for report files (default <out>-report)");
    auto* period_opt =
        demo_cmd->add_option("--sample-period", demo_opt.sample_period, "Sample task 1's caller with this period");
    demo_cmd->add_option("--sample-jitter", demo_opt.sample_jitter, "Sampling jitter fraction in [0, 1)")
        ->check(CLI::Range(0.0, 0.999999))
        ->needs(period_opt);
    demo_cmd
        ->add_option("--sample-counter-threshold", demo_opt.sample_counter_threshold,
                     "Sample task 1's caller every N counted instructions (one per us of compute)")
        ->check(CLI::PositiveNumber)
        ->excludes(period_opt);

    std::string validate_base;
    auto* validate_cmd = app.add_subcommand("validate", "Parse and check a trace bundle");
    validate_cmd->add_option("base", validate_base, "Trace basename (without .prv)")->required();

    DumpOptions dump_opt;
    auto* dump_cmd = app.add_subcommand("dump", "Print a trace bundle");
    dump_cmd->add_option("base", dump_opt.base, "Trace basename (without .prv)")->required();
    dump_cmd->add_flag("--pcf", dump_opt.pcf, "Print the semantic dictionary");
    dump_cmd->add_flag("--row", dump_opt.row, "Print the row labels");
    dump_cmd->add_flag("--records", dump_opt.records, "Print every record");

    AnalyzeOptions an;
    auto* analyze_cmd = app.add_subcommand("analyze", "Run one analysis over a trace bundle");
    analyze_cmd->add_option("kind", an.kind, "parallelism, timeline, connectivity, fractions or bandwidth")
        ->required()
        ->check(CLI::IsMember({"parallelism", "timeline", "connectivity", "fractions", "bandwidth"}));
    analyze_cmd->add_option("base", an.base, "Trace basename (without .prv)")->required();
    analyze_cmd->add_option("--bin", an.bin, "Bin width, e.g. 10ms")->capture_default_str();
    analyze_cmd->add_option("--window", an.window, "t0:t1 (durations) or 'workload'");
    analyze_cmd->add_option("--event-type", an.event_type, "Routine event type");
    analyze_cmd->add_option("--csv", an.csv, "Write the result as CSV");
    analyze_cmd->add_option("--svg", an.svg, "Write the result as SVG");
    analyze_cmd->add_flag("--derive-states-from-routine-events", an.derive_states,
                          "Parallelism: treat time inside routine blocks as idle");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n\n" << app.help();
        return exit_usage;
    }

    TracerConfig config;
    try
    {
        config = config_from_environment();
        if (demo_cmd->parsed())
            return demo(demo_opt, config, out, err);
        if (validate_cmd->parsed())
            return validate(validate_base, out, err);
        if (dump_cmd->parsed())
            return dump(dump_opt, out);
        return analyze(an, config, out);
    }
    catch (const ConfigError& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

} // namespace prvkit::cli
