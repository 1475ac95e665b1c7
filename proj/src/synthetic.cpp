#include "prvkit/synthetic.hpp"

#include "prvkit/error.hpp"
#include "prvkit/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <thread>

namespace prvkit
{
namespace
{

thread_local std::uint32_t current_task = 1;

// Frame identifiers reported by the demo call-stack source.
constexpr std::uint64_t frame_main = 1;
constexpr std::uint64_t frame_compute = 2;
constexpr std::uint64_t frame_waitany = 3;
constexpr std::uint64_t frame_allreduce = 4;

struct Iteration
{
    Nanoseconds start = 0;
    std::vector<Nanoseconds> compute;
    std::vector<Nanoseconds> waitany;
    Nanoseconds last_arrival = 0;
    Nanoseconds end = 0;

    Nanoseconds waitany_begin(std::size_t i) const
    {
        return start + compute[i];
    }
    Nanoseconds arrival(std::size_t i) const
    {
        return start + compute[i] + waitany[i];
    }
};

struct Action
{
    Nanoseconds time;
    std::function<void(Tracer&)> run;
};

std::uint32_t grid_rows(std::uint32_t n)
{
    auto rows = static_cast<std::uint32_t>(std::sqrt(static_cast<double>(n)));
    while (rows > 1 && n % rows != 0)
        --rows;
    return std::max<std::uint32_t>(rows, 1);
}

} // namespace

void validate_spec(const SyntheticSpec& spec)
{
    if (spec.n_tasks == 0 || spec.n_iterations == 0)
        throw ConfigError("synthetic workload needs at least one task and one iteration");
    if (spec.compute_ns == 0 || spec.waitany_ns == 0 || spec.allreduce_ns == 0)
        throw ConfigError("phase durations must be positive");
    if (!(spec.noise_sigma >= 0.0) || spec.noise_sigma >= 1.0 / 3.0)
        throw ConfigError("noise sigma must lie in [0, 1/3)");
    if (spec.sampling && spec.sampling->mode == SamplingMode::counter && spec.compute_ns_per_tick == 0)
        throw ConfigError("compute_ns_per_tick must be positive");
    if (spec.messages_per_neighbor_pair > 0)
    {
        if (spec.flight_ns == 0)
            throw ConfigError("message flight time must be positive");
        const double shortest_waitany = static_cast<double>(spec.waitany_ns) * (1.0 - 3.0 * spec.noise_sigma);
        const double shortest_compute = static_cast<double>(spec.compute_ns) * (1.0 - 3.0 * spec.noise_sigma);
        const double longest_compute = static_cast<double>(spec.compute_ns) * (1.0 + 3.0 * spec.noise_sigma);
        const double stream = static_cast<double>(spec.messages_per_neighbor_pair) * spec.flight_ns;
        // Every message must arrive while its receiver is still in Waitany.
        if (longest_compute + stream > shortest_compute + shortest_waitany)
            throw ConfigError("messages do not fit inside the Waitany phase");
    }
}

std::vector<std::uint32_t> topology_neighbors(Topology topology, std::uint32_t n_tasks, std::uint32_t task)
{
    std::set<std::uint32_t> out;
    const std::uint32_t i = task - 1;
    if (topology == Topology::ring)
    {
        out.insert((i + 1) % n_tasks + 1);
        out.insert((i + n_tasks - 1) % n_tasks + 1);
    }
    else
    {
        const auto rows = grid_rows(n_tasks);
        const auto cols = n_tasks / rows;
        const auto r = i / cols;
        const auto c = i % cols;
        out.insert(((r + 1) % rows) * cols + c + 1);
        out.insert(((r + rows - 1) % rows) * cols + c + 1);
        out.insert(r * cols + (c + 1) % cols + 1);
        out.insert(r * cols + (c + cols - 1) % cols + 1);
    }
    out.erase(task);
    return {out.begin(), out.end()};
}

SyntheticTrace generate_synthetic_trace(const SyntheticSpec& spec)
{
    validate_spec(spec);
    const auto n = spec.n_tasks;
    const auto routine = spec.tracer_config.routine_event_type;

    // Draw every duration up front so the result does not depend on thread scheduling.
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.noise_sigma);
    const auto noisy = [&](Nanoseconds nominal) {
        const double limit = 3.0 * spec.noise_sigma;
        const double factor = 1.0 + (spec.noise_sigma > 0 ? std::clamp(normal(rng), -limit, limit) : 0.0);
        return std::max<Nanoseconds>(1, static_cast<Nanoseconds>(std::llround(nominal * factor)));
    };

    std::vector<Iteration> iterations(spec.n_iterations);
    Nanoseconds t = spec.setup_ns;
    for (auto& it : iterations)
    {
        it.start = t;
        for (std::uint32_t i = 0; i < n; ++i)
        {
            it.compute.push_back(noisy(spec.compute_ns));
            it.waitany.push_back(noisy(spec.waitany_ns));
        }
        for (std::uint32_t i = 0; i < n; ++i)
            it.last_arrival = std::max(it.last_arrival, it.arrival(i));
        it.end = it.last_arrival + spec.allreduce_ns;
        t = it.end;
    }
    const TimeWindow workload{spec.setup_ns, t};
    const Nanoseconds total = t + spec.teardown_ns;

    std::vector<std::vector<std::uint32_t>> neighbors(n);
    for (std::uint32_t task = 1; task <= n; ++task)
        neighbors[task - 1] = topology_neighbors(spec.topology, n, task);

    std::vector<std::vector<Action>> actions(n);
    for (std::uint32_t i = 0; i < n; ++i)
    {
        auto& list = actions[i];
        const std::uint32_t task = i + 1;
        if (task != 1)
            list.push_back({0, [](Tracer& tr) { tr.set_state(states::running, 0); }});
        else
            list.push_back({workload.begin,
                            [at = workload.begin](Tracer& tr) { tr.emit(workload_phase_event_type, 1, at); }});

        for (const auto& it : iterations)
        {
            const auto wb = it.waitany_begin(i);
            const auto arrival = it.arrival(i);
            list.push_back({wb, [=](Tracer& tr) {
                                tr.emit(routine, routines::waitany, wb);
                                tr.set_state(states::external, wb);
                            }});
            for (const auto peer : neighbors[i])
                for (std::uint32_t m = 0; m < spec.messages_per_neighbor_pair; ++m)
                {
                    const Nanoseconds send = wb + m * spec.flight_ns;
                    CommMark mark;
                    mark.direction = CommDirection::send;
                    mark.peer = Location{0, 1, peer, 1};
                    mark.tag = spec.message_tag;
                    mark.size = spec.message_size;
                    mark.send_times = CommTimes{send, send};
                    list.push_back({send, [mark](Tracer& tr) { tr.emit_comm(mark); }});

                    const Nanoseconds recv = it.waitany_begin(peer - 1) + (m + 1) * spec.flight_ns;
                    CommMark in;
                    in.direction = CommDirection::recv;
                    in.peer = Location{0, 1, peer, 1};
                    in.tag = spec.message_tag;
                    in.size = spec.message_size;
                    in.recv_times = CommTimes{recv, recv};
                    list.push_back({recv, [in](Tracer& tr) { tr.emit_comm(in); }});
                }
            const auto last = it.last_arrival;
            list.push_back({arrival, [=](Tracer& tr) {
                                tr.emit(routine, routines::end, arrival);
                                tr.emit(routine, routines::allreduce, arrival);
                                if (arrival < last)
                                    tr.set_state(states::idle, arrival);
                            }});
            if (arrival < last)
                list.push_back({last, [=](Tracer& tr) { tr.set_state(states::external, last); }});
            list.push_back({it.end, [end = it.end, total, routine](Tracer& tr) {
                                tr.emit(routine, routines::end, end);
                                if (end < total)
                                    tr.set_state(states::running, end);
                            }});
        }
        if (task == 1)
            list.push_back(
                {workload.end, [at = workload.end](Tracer& tr) { tr.emit(workload_phase_event_type, 0, at); }});
        std::stable_sort(list.begin(), list.end(),
                         [](const Action& a, const Action& b) { return a.time < b.time; });
    }

    auto [process, resources] = single_node_model(n, 1, n);
    VirtualClock clock;
    Tracer tracer(spec.tracer_config, clock.source());
    const auto provider = set_threadid_function(
        set_taskid_function(IdentityProvider{}, [] { return current_task; }, [n] { return n; }),
        [] { return 1u; }, [] { return 1u; });
    current_task = 1;
    tracer.init(process, resources, provider);

    tracer.register_event(routine, "MPI routine",
                          {{routines::end, "End"},
                           {routines::waitany, "MPI_Waitany"},
                           {routines::allreduce, "MPI_Allreduce"}});
    tracer.register_event(workload_phase_event_type, "Workload phase", {{0, "End"}, {1, "Iterations"}});

    std::unique_ptr<Sampler> sampler;
    if (spec.sampling)
    {
        // Task 1's innermost frame over time, as (begin, frame) steps.
        std::vector<std::pair<Nanoseconds, std::uint64_t>> steps{{0, frame_main}};
        for (const auto& it : iterations)
        {
            steps.emplace_back(it.start, frame_compute);
            steps.emplace_back(it.waitany_begin(0), frame_waitany);
            steps.emplace_back(it.arrival(0), frame_allreduce);
        }
        steps.emplace_back(workload.end, frame_main);
        auto source = [steps = std::move(steps)](Nanoseconds at) {
            auto pos = std::upper_bound(steps.begin(), steps.end(), at,
                                        [](Nanoseconds v, const auto& s) { return v < s.first; });
            return std::vector<std::uint64_t>{std::prev(pos)->second};
        };
        const auto& config = *spec.sampling;
        tracer.register_event(config.callstack_event_type, "Sampled caller",
                              {{frame_main, "main"},
                               {frame_compute, "compute_kernel"},
                               {frame_waitany, "MPI_Waitany"},
                               {frame_allreduce, "MPI_Allreduce"}});
        sampler = start_sampler(tracer, config, std::move(source), SamplerDriver::manual);
        if (config.mode == SamplingMode::counter)
        {
            if (config.counter_event_type != config.callstack_event_type)
                tracer.register_event(config.counter_event_type, "Dispatched instructions");
            auto& list = actions[0];
            for (const auto& it : iterations)
                list.push_back({it.waitany_begin(0), [s = sampler.get(), at = it.waitany_begin(0),
                                                      ticks = it.compute[0] / spec.compute_ns_per_tick](Tracer&) {
                                    s->counter_tick(ticks, at);
                                }});
            std::stable_sort(list.begin(), list.end(),
                             [](const Action& a, const Action& b) { return a.time < b.time; });
        }
    }

    const auto replay = [&tracer, &actions](std::uint32_t task) {
        current_task = task;
        for (const auto& action : actions[task - 1])
            action.run(tracer);
    };

    // Task 1 runs on the initialising thread, the others on their own threads.
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> failures(n);
    for (std::uint32_t task = 2; task <= n; ++task)
        workers.emplace_back([&, task] {
            try
            {
                replay(task);
            }
            catch (...)
            {
                failures[task - 1] = std::current_exception();
            }
        });
    try
    {
        replay(1);
    }
    catch (...)
    {
        failures[0] = std::current_exception();
    }
    for (auto& w : workers)
        w.join();
    current_task = 1;
    for (const auto& f : failures)
        if (f)
            std::rethrow_exception(f);

    clock.set(total);
    SyntheticTrace out;
    if (sampler)
    {
        if (spec.sampling->mode == SamplingMode::time)
            sampler->poll();
        out.sampling = sampler->stop();
    }
    out.bundle = tracer.finish();
    out.bundle.header.captured = spec.captured;
    out.workload = workload;
    return out;
}

} // namespace prvkit
