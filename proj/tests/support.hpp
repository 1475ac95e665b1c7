// Generators and reference models shared by the unit and acceptance tests.
#pragma once

#include "prvkit/analysis.hpp"
#include "prvkit/config.hpp"
#include "prvkit/error.hpp"
#include "prvkit/model.hpp"
#include "prvkit/prv_format.hpp"
#include "prvkit/records.hpp"
#include "prvkit/tracer.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace prvkit::testing
{

inline std::uint64_t pick(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi)
{
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

/// Printable ASCII without leading or trailing blanks; possibly empty.
inline std::string random_label(std::mt19937_64& rng, bool allow_padding = false)
{
    std::string s(pick(rng, 0, 12), ' ');
    for (auto& c : s)
        c = static_cast<char>(pick(rng, 32, 126));
    if (!allow_padding)
    {
        while (!s.empty() && s.back() == ' ')
            s.pop_back();
        while (!s.empty() && s.front() == ' ')
            s.erase(s.begin());
    }
    return s;
}

inline Location random_location(std::mt19937_64& rng, const ProcessModel& process, const ResourceModel& resources)
{
    Location loc;
    loc.cpu = static_cast<std::uint32_t>(pick(rng, 0, resources.total_cpus()));
    loc.appl = static_cast<std::uint32_t>(pick(rng, 1, process.applications.size()));
    const auto& tasks = process.applications[loc.appl - 1].tasks;
    loc.task = static_cast<std::uint32_t>(pick(rng, 1, tasks.size()));
    loc.thread = static_cast<std::uint32_t>(pick(rng, 1, tasks[loc.task - 1].threads));
    return loc;
}

/// A bundle that passes validate_bundle, with sorted records and no pending halves.
inline TraceBundle random_bundle(std::mt19937_64& rng)
{
    const auto n_nodes = pick(rng, 1, 3);
    std::vector<std::uint32_t> cpus;
    for (std::uint64_t n = 0; n < n_nodes; ++n)
        cpus.push_back(static_cast<std::uint32_t>(pick(rng, 1, 4)));
    const auto n_apps = pick(rng, 1, 2);
    std::vector<std::uint32_t> tasks_per_app, threads, nodes;
    for (std::uint64_t a = 0; a < n_apps; ++a)
    {
        tasks_per_app.push_back(static_cast<std::uint32_t>(pick(rng, 1, 4)));
        for (std::uint32_t t = 0; t < tasks_per_app.back(); ++t)
        {
            threads.push_back(static_cast<std::uint32_t>(pick(rng, 1, 3)));
            nodes.push_back(static_cast<std::uint32_t>(pick(rng, 1, n_nodes)));
        }
    }
    const auto [process, resources] = build_model(n_apps, tasks_per_app, threads, nodes, cpus);

    TraceBundle b;
    b.header.captured = {static_cast<int>(pick(rng, 1, 28)), static_cast<int>(pick(rng, 1, 12)),
                         static_cast<int>(pick(rng, 2000, 2099)), static_cast<int>(pick(rng, 0, 23)),
                         static_cast<int>(pick(rng, 0, 59))};
    b.header.total_time = pick(rng, 0, 3) == 0 ? pick(rng, 0, 10) : pick(rng, 0, std::uint64_t{1} << 50);
    b.header.process = process;
    b.header.resources = resources;

    switch (pick(rng, 0, 2))
    {
    case 0:
        b.state_table = default_state_table();
        break;
    case 1:
        b.state_table.clear();
        break;
    default:
        b.state_table.clear();
        for (auto n = pick(rng, 1, 4); n > 0; --n)
            b.state_table[static_cast<std::uint32_t>(pick(rng, 0, 40))] = random_label(rng);
    }

    for (auto n = pick(rng, 0, 4); n > 0; --n)
    {
        const auto type = static_cast<std::uint32_t>(pick(rng, 1, 0xffffffffu));
        std::map<std::uint64_t, std::string> values;
        for (auto v = pick(rng, 0, 3); v > 0; --v)
            values[pick(rng, 0, 3) == 0 ? pick(rng, 0, 5) : rng()] = random_label(rng);
        if (!b.registry.contains(type))
            b.registry.add(type, random_label(rng), values);
    }

    std::vector<std::uint32_t> state_codes;
    for (const auto& [code, label] : b.state_table)
        state_codes.push_back(code);
    const auto& types = b.registry.entries();
    const auto total = b.header.total_time;
    for (auto n = pick(rng, 0, 30); n > 0; --n)
    {
        const auto kind = pick(rng, 0, 2);
        if (kind == 0 && !state_codes.empty())
        {
            const auto begin = pick(rng, 0, total);
            b.records.emplace_back(StateRecord{random_location(rng, process, resources), begin,
                                               pick(rng, begin, total),
                                               state_codes[pick(rng, 0, state_codes.size() - 1)]});
        }
        else if (kind == 1 && !types.empty())
        {
            EventRecord e{random_location(rng, process, resources), pick(rng, 0, total), {}};
            for (auto p = pick(rng, 1, 3); p > 0; --p)
                e.pairs.push_back({types[pick(rng, 0, types.size() - 1)].type, rng()});
            b.records.emplace_back(std::move(e));
        }
        else if (kind == 2)
        {
            CommRecord c;
            c.send_location = random_location(rng, process, resources);
            c.recv_location = random_location(rng, process, resources);
            c.physical_send = pick(rng, 0, total);
            c.physical_recv = pick(rng, c.physical_send, total);
            c.logical_send = pick(rng, 0, c.physical_send);
            c.logical_recv = pick(rng, c.logical_send, c.physical_recv);
            c.size = rng();
            c.tag = rng();
            b.records.emplace_back(c);
        }
    }
    sort_records(b.records);

    switch (pick(rng, 0, 2))
    {
    case 0:
        b.row_labels = default_row_labels(process, resources);
        break;
    case 1:
        b.row_labels = {};
        break;
    default:
        for (std::size_t i = 0; i < process.total_threads(); ++i)
            b.row_labels.threads.push_back(random_label(rng, true));
        for (std::size_t i = 0; i < process.total_tasks(); ++i)
            b.row_labels.tasks.push_back(random_label(rng, true));
        for (std::size_t i = 0; i < resources.node_count(); ++i)
            b.row_labels.nodes.push_back(random_label(rng, true));
    }
    return b;
}

/// One-sample Kolmogorov-Smirnov test against Uniform[lo, hi]; returns the asymptotic p-value.
inline double ks_uniform_pvalue(std::vector<double> xs, double lo, double hi)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        const double f = std::clamp((xs[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0;
    for (int k = 1; k <= 100; ++k)
        p += 2 * ((k % 2 == 1) ? 1 : -1) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

/// Point-samples every nanosecond: the reference for exact integration.
inline std::vector<double> parallelism_oracle(const TraceBundle& b, Nanoseconds bin)
{
    const auto total = b.header.total_time;
    const auto tasks = b.header.process.total_tasks();
    std::vector<std::vector<char>> busy(tasks, std::vector<char>(total, 0));
    for (const auto& r : b.records)
        if (const auto* s = std::get_if<StateRecord>(&r); s && s->state != states::idle)
            for (auto t = s->begin; t < s->end; ++t)
                busy[s->location.task - 1][t] = 1;
    std::vector<double> out;
    for (Nanoseconds b0 = 0; b0 < total; b0 += bin)
    {
        const auto b1 = std::min(total, b0 + bin);
        double sum = 0;
        for (auto t = b0; t < b1; ++t)
            for (const auto& row : busy)
                sum += row[t];
        out.push_back(sum / static_cast<double>(b1 - b0));
    }
    return out;
}

/// Creates (and empties) a scratch directory for file-based tests.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("prvkit-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct LifecycleOutcome
{
    bool ok = true;
    std::string failure;
};

/**
 * Drives a tracer with `steps` random operations and checks each one against
 * the reference lifecycle: init once, then recording calls, then finish once.
 * Every finished bundle must validate and have balanced user-function scopes.
 */
inline LifecycleOutcome run_lifecycle_sequence(std::mt19937_64& rng, std::size_t steps)
{
    enum class Phase
    {
        before,
        active,
        after
    } phase = Phase::before;

    const auto [process, resources] = single_node_model(2);
    VirtualClock clock;
    Tracer tracer({}, clock.source());
    std::vector<ScopeToken> scopes;
    LifecycleOutcome out;
    const auto fail = [&](std::string why) {
        if (out.ok)
            out = {false, std::move(why)};
    };

    const auto check_finished = [&](const TraceBundle& bundle) {
        if (!validate_bundle(bundle).ok())
            fail("finished bundle does not validate");
        std::int64_t balance = 0;
        for (const auto& r : bundle.records)
            if (const auto* e = std::get_if<EventRecord>(&r))
                for (const auto& p : e->pairs)
                    if (p.type == default_user_function_type)
                        balance += p.value != 0 ? 1 : -1;
        if (balance != 0)
            fail("unbalanced user-function events");
    };

    for (std::size_t i = 0; i < steps && out.ok; ++i)
    {
        clock.advance(pick(rng, 0, 50));
        const auto op = pick(rng, 0, 7);
        const bool legal = op == 0 ? phase == Phase::before : phase == Phase::active;
        try
        {
            switch (op)
            {
            case 0:
                tracer.init(process, resources);
                break;
            case 1:
                check_finished(tracer.finish());
                scopes.clear();
                break;
            case 2:
                tracer.emit(84210, pick(rng, 0, 9));
                break;
            case 3:
                tracer.register_event(84210, "Vector length");
                break;
            case 4:
                tracer.set_state(pick(rng, 0, 1) == 0 ? states::idle : states::external);
                break;
            case 5:
                scopes.push_back(tracer.user_function_enter(pick(rng, 1, 5)));
                break;
            case 6:
                if (scopes.empty())
                    tracer.user_function_exit(ScopeToken{});
                else
                {
                    tracer.user_function_exit(scopes.back());
                    scopes.pop_back();
                }
                break;
            default: {
                CommMark mark;
                mark.peer = Location{0, 1, 1, 1};
                mark.size = 8;
                tracer.emit_comm(mark);
                mark.direction = CommDirection::recv;
                tracer.emit_comm(mark);
            }
            }
            if (!legal)
                fail("operation " + std::to_string(op) + " accepted outside its phase");
            if (op == 0)
                phase = Phase::active;
            if (op == 1)
                phase = Phase::after;
        }
        catch (const LifecycleError&)
        {
            if (legal)
                fail("legal operation " + std::to_string(op) + " rejected");
        }
        catch (const ScopeMismatchError&)
        {
            // An exit with no open scope must be rejected this way.
            if (!(op == 6 && phase == Phase::active && scopes.empty()))
                fail("unexpected scope mismatch");
        }
        catch (const std::exception& e)
        {
            fail("operation " + std::to_string(op) + " threw " + e.what());
        }
    }
    if (out.ok && phase == Phase::active)
        check_finished(tracer.finish());
    return out;
}

} // namespace prvkit::testing
