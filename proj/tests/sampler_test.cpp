#include "support.hpp"

#include "prvkit/error.hpp"
#include "prvkit/sampler.hpp"

#include <doctest.h>

#include <numeric>
#include <set>
#include <thread>

using namespace prvkit;

namespace
{

struct Fixture
{
    VirtualClock clock;
    Tracer tracer{{}, clock.source()};

    Fixture()
    {
        auto [process, resources] = single_node_model(1);
        tracer.init(process, resources, set_threadid_function(IdentityProvider{}, [] { return 1u; }));
    }
};

SamplerConfig time_mode(Nanoseconds period, double jitter = 0.0, std::uint64_t seed = 1)
{
    SamplerConfig c;
    c.period_ns = period;
    c.jitter_fraction = jitter;
    c.rng_seed = seed;
    return c;
}

SamplerConfig counter_mode(std::uint64_t threshold)
{
    SamplerConfig c;
    c.mode = SamplingMode::counter;
    c.counter_threshold = threshold;
    return c;
}

std::vector<EventRecord> events_of_type(const TraceBundle& b, std::uint32_t type)
{
    std::vector<EventRecord> out;
    for (const auto& r : b.records)
        if (const auto* e = std::get_if<EventRecord>(&r))
            if (std::any_of(e->pairs.begin(), e->pairs.end(), [&](const EventPair& p) { return p.type == type; }))
                out.push_back(*e);
    return out;
}

CallstackSource constant_stack(std::vector<std::uint64_t> frames)
{
    return [frames](Nanoseconds) { return frames; };
}

} // namespace

TEST_CASE("unjittered schedule is exactly periodic")
{
    Fixture f;
    auto s = start_sampler(f.tracer, time_mode(1000), constant_stack({42}));
    f.clock.set(10'000);
    s->poll();
    const auto report = s->stop();
    CHECK(report.samples == 10);
    CHECK(report.intervals == std::vector<Nanoseconds>(10, 1000));
    const auto b = f.tracer.finish();
    const auto samples = events_of_type(b, default_callstack_event_type);
    REQUIRE(samples.size() == 10);
    for (std::size_t k = 0; k < samples.size(); ++k)
    {
        CHECK(samples[k].time == 1000 * (k + 1));
        CHECK(samples[k].pairs == std::vector<EventPair>{{default_callstack_event_type, 42}});
    }
    CHECK(validate_bundle(b).ok());
}

TEST_CASE("polling in steps gives the same samples as one poll")
{
    Fixture f;
    auto s = start_sampler(f.tracer, time_mode(700, 0.3, 4), constant_stack({1}));
    for (Nanoseconds t = 0; t <= 50'000; t += 333)
    {
        f.clock.set(t);
        s->poll();
    }
    const auto stepped = s->stop().intervals;
    Sampler::Schedule schedule(700, 0.3, 4);
    for (const auto interval : stepped)
        CHECK(interval == schedule.next_interval());
}

TEST_CASE("jittered intervals are uniform within bounds")
{
    Sampler::Schedule schedule(1000, 0.2, 123);
    std::vector<double> xs;
    for (int i = 0; i < 10'000; ++i)
    {
        const auto v = schedule.next_interval();
        REQUIRE(v >= 800);
        REQUIRE(v <= 1200);
        xs.push_back(static_cast<double>(v));
    }
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    CHECK(std::abs(mean - 1000) < 20);

    Sampler::Schedule fine(1'000'000, 0.2, 123);
    std::vector<double> ys;
    for (int i = 0; i < 10'000; ++i)
        ys.push_back(static_cast<double>(fine.next_interval()));
    CHECK(testing::ks_uniform_pvalue(ys, 800'000, 1'200'000) > 0.01);
}

TEST_CASE("the KS helper rejects a skewed sample")
{
    std::vector<double> skewed;
    for (int i = 0; i < 10'000; ++i)
        skewed.push_back(800 + 400 * std::pow((i + 0.5) / 10'000.0, 1.3));
    CHECK(testing::ks_uniform_pvalue(skewed, 800, 1200) < 0.01);
}

TEST_CASE("fixed seed gives a fixed schedule")
{
    Sampler::Schedule a(1000, 0.5, 77), b(1000, 0.5, 77), c(1000, 0.5, 78);
    bool differs = false;
    for (int i = 0; i < 100; ++i)
    {
        const auto x = a.next_interval();
        CHECK(x == b.next_interval());
        differs |= x != c.next_interval();
    }
    CHECK(differs);
}

TEST_CASE("counter mode")
{
    Fixture f;
    auto s = start_sampler(f.tracer, counter_mode(1000), constant_stack({9}));
    s->counter_tick(999, 10);
    s->counter_tick(1, 20);
    s->counter_tick(0, 30);
    s->counter_tick(3500, 40);
    CHECK_THROWS_AS(s->poll(), SamplerModeError);
    const auto report = s->stop();
    CHECK(report.samples == 4);
    const auto samples = events_of_type(f.tracer.finish(), default_counter_event_type);
    REQUIRE(samples.size() == 4);
    CHECK(samples[0].time == 20);
    CHECK(samples[0].pairs == std::vector<EventPair>{{default_counter_event_type, 1000}, {default_callstack_event_type, 9}});
    CHECK(samples[1].pairs[0].value == 2000);
    CHECK(samples[3].pairs[0].value == 4000);
    CHECK(samples[3].time == 40);
}

TEST_CASE("counter samples do not depend on how the ticks are split")
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial)
    {
        Fixture f;
        const auto threshold = testing::pick(rng, 1, 2000);
        auto s = start_sampler(f.tracer, counter_mode(threshold));
        std::uint64_t total = 0;
        for (auto n = testing::pick(rng, 0, 60); n > 0; --n)
        {
            const auto inc = testing::pick(rng, 0, 3) == 0 ? 0 : testing::pick(rng, 1, 2500);
            s->counter_tick(inc);
            total += inc;
        }
        CHECK(s->stop().samples == total / threshold);
        CHECK(events_of_type(f.tracer.finish(), default_counter_event_type).size() == total / threshold);
    }
}

TEST_CASE("concurrent counter ticks")
{
    VirtualClock clock;
    Tracer tracer({}, clock.source());
    auto [process, resources] = single_node_model(1, 4);
    thread_local std::uint32_t id = 1;
    tracer.init(process, resources, set_threadid_function(IdentityProvider{}, [] { return id; }));
    auto s = start_sampler(tracer, counter_mode(1000));
    std::vector<std::thread> threads;
    for (std::uint32_t t = 1; t <= 4; ++t)
        threads.emplace_back([&, t] {
            id = t;
            for (int i = 0; i < 5000; ++i)
                s->counter_tick(37);
        });
    for (auto& t : threads)
        t.join();
    CHECK(s->stop().samples == 4 * 5000 * 37 / 1000);
    const auto b = tracer.finish();
    std::set<std::uint64_t> values;
    for (const auto& e : events_of_type(b, default_counter_event_type))
        values.insert(e.pairs[0].value);
    CHECK(values.size() == 4 * 5000 * 37 / 1000);
    CHECK(*values.rbegin() == 740'000);
    CHECK(validate_bundle(b).ok());
}

TEST_CASE("mode and lifecycle errors")
{
    Fixture f;
    {
        auto s = start_sampler(f.tracer, time_mode(1000));
        CHECK_THROWS_AS(s->counter_tick(5), SamplerModeError);
        CHECK_THROWS_AS(start_sampler(f.tracer, time_mode(1000)), SamplerLifecycleError);
        CHECK(s->stop().samples == 0);
        CHECK_THROWS_AS(s->stop(), SamplerLifecycleError);
    }
    CHECK_THROWS_AS(start_sampler(f.tracer, time_mode(0)), ConfigError);
    CHECK_THROWS_AS(start_sampler(f.tracer, time_mode(10, 1.0)), ConfigError);
    CHECK_THROWS_AS(start_sampler(f.tracer, counter_mode(0)), ConfigError);
    auto again = start_sampler(f.tracer, counter_mode(10));
    again->stop();
    f.tracer.finish();
    CHECK_THROWS_AS(start_sampler(f.tracer, time_mode(1000)), SamplerLifecycleError);

    Tracer idle;
    CHECK_THROWS_AS(start_sampler(idle, time_mode(1000)), SamplerLifecycleError);
}

TEST_CASE("empty stacks are not emitted; counter snapshots are")
{
    Fixture f;
    std::uint64_t counter = 0;
    auto s = start_sampler(f.tracer, time_mode(100), constant_stack({}), SamplerDriver::manual, {},
                           [&] { return counter += 5; });
    f.clock.set(300);
    s->poll();
    CHECK(s->stop().samples == 3);
    const auto samples = events_of_type(f.tracer.finish(), default_counter_event_type);
    REQUIRE(samples.size() == 3);
    CHECK(samples[2].pairs == std::vector<EventPair>{{default_counter_event_type, 15}});

    Fixture g;
    auto quiet = start_sampler(g.tracer, time_mode(100), constant_stack({}));
    g.clock.set(300);
    quiet->poll();
    const auto report = quiet->stop();
    CHECK(report.samples == 0);
    CHECK(report.intervals.size() == 3);
}

TEST_CASE("full stack encoding")
{
    Fixture f;
    auto c = time_mode(100);
    c.full_stack = true;
    auto s = start_sampler(f.tracer, c, constant_stack({7, 8, 9}));
    f.clock.set(100);
    s->poll();
    s->stop();
    const auto samples = events_of_type(f.tracer.finish(), default_callstack_event_type);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].pairs == std::vector<EventPair>{{default_callstack_event_type, 7},
                                                     {default_callstack_event_type + 1, 8},
                                                     {default_callstack_event_type + 2, 9}});
}

TEST_CASE("the call-stack source sees the sample time")
{
    Fixture f;
    auto s = start_sampler(f.tracer, time_mode(250), [](Nanoseconds t) { return std::vector<std::uint64_t>{t}; });
    f.clock.set(1000);
    s->poll();
    s->stop();
    for (const auto& e : events_of_type(f.tracer.finish(), default_callstack_event_type))
        CHECK(e.pairs[0].value == e.time);
}

TEST_CASE("background driver on the steady clock")
{
    Tracer tracer;
    auto [process, resources] = single_node_model(1);
    tracer.init(process, resources);
    auto s = start_sampler(tracer, time_mode(1'000'000, 0.2, 3), constant_stack({1}), SamplerDriver::background);
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    const auto report = s->stop();
    const auto b = tracer.finish();
    CHECK(report.samples > 5);
    const auto samples = events_of_type(b, default_callstack_event_type);
    CHECK(samples.size() == report.samples);
    for (std::size_t i = 1; i < samples.size(); ++i)
        CHECK(samples[i].time >= samples[i - 1].time);
    CHECK(validate_bundle(b).ok());
}

TEST_CASE("sampler config from tracer defaults")
{
    SamplerDefaults d;
    d.period_ns = 5;
    d.jitter_fraction = 0.1;
    d.seed = 3;
    const auto c = SamplerConfig::from_defaults(d, SamplingMode::counter);
    CHECK(c.mode == SamplingMode::counter);
    CHECK(c.period_ns == 5);
    CHECK(c.rng_seed == 3);
}
