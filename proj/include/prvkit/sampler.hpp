#pragma once

#include "prvkit/tracer.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <vector>

namespace prvkit
{

enum class SamplingMode
{
    time,
    counter
};

struct SamplerConfig
{
    SamplingMode mode = SamplingMode::time;
    Nanoseconds period_ns = 1'000'000;
    /// Intervals are drawn uniformly from [period * (1 - jitter), period * (1 + jitter)].
    double jitter_fraction = 0.0;
    std::uint64_t counter_threshold = 1000;
    std::uint32_t callstack_event_type = default_callstack_event_type;
    std::uint32_t counter_event_type = default_counter_event_type;
    std::uint64_t rng_seed = 0;
    /// Emit one pair per frame (type + depth) instead of only the innermost frame.
    bool full_stack = false;

    static SamplerConfig from_defaults(const SamplerDefaults& defaults, SamplingMode mode);
};

/// Frame identifiers at the given time, innermost first. May be empty.
using CallstackSource = std::function<std::vector<std::uint64_t>(Nanoseconds)>;

/// Optional counter snapshot attached to time-mode samples.
using CounterSource = std::function<std::uint64_t()>;

enum class SamplerDriver
{
    /// Samples are emitted when poll() is called; suits virtual clocks.
    manual,
    /// A dedicated thread sleeps until each due time and polls.
    background
};

struct SamplerReport
{
    std::uint64_t samples = 0;
    /// Time mode: the drawn intervals whose samples were emitted.
    std::vector<Nanoseconds> intervals;
};

/**
 * Statistical sampler driving a Tracer.
 *
 * Time-mode samples go to a dedicated tracer channel attributed to `target`
 * (by default the location of the thread that started the sampler).
 * Counter-mode samples are emitted by whichever thread calls counter_tick.
 */
class Sampler
{
public:
    ~Sampler();

    Sampler(const Sampler&) = delete;
    Sampler& operator=(const Sampler&) = delete;

    /// Emits every time-mode sample due at or before the tracer's current time.
    void poll();

    /// Adds to the counter; emits one sample per threshold multiple crossed.
    void counter_tick(std::uint64_t increment, std::optional<Nanoseconds> at = {});

    SamplerReport stop();

    bool running() const
    {
        return running_.load();
    }

    /// Time of the next scheduled time-mode sample.
    Nanoseconds next_due() const;

    /// The interval generator on its own, for inspecting a schedule without a tracer.
    class Schedule
    {
    public:
        Schedule(Nanoseconds period, double jitter, std::uint64_t seed);
        Nanoseconds next_interval();

    private:
        Nanoseconds period_;
        double jitter_;
        std::mt19937_64 rng_;
        std::uniform_real_distribution<double> unit_{0.0, 1.0};
    };

private:
    friend std::unique_ptr<Sampler> start_sampler(Tracer&, const SamplerConfig&, CallstackSource, SamplerDriver,
                                                  std::optional<Location>, CounterSource);

    Sampler(Tracer& tracer, SamplerConfig config, CallstackSource source, CounterSource counters, Location target);

    std::vector<EventPair> stack_pairs(Nanoseconds t) const;
    void background_loop();

    Tracer& tracer_;
    SamplerConfig config_;
    CallstackSource source_;
    CounterSource counters_;
    Location target_;
    Tracer::ChannelId channel_ = 0;

    mutable std::mutex mutex_;
    Schedule schedule_;
    Nanoseconds pending_interval_ = 0;
    Nanoseconds next_due_ = 0;
    SamplerReport report_;

    std::atomic<std::uint64_t> accumulated_{0};
    std::atomic<std::uint64_t> counter_samples_{0};
    std::atomic<bool> running_{true};

    std::condition_variable wake_;
    std::thread worker_;
};

/// Throws SamplerLifecycleError if the tracer is not active or already has a sampler.
std::unique_ptr<Sampler> start_sampler(Tracer& tracer, const SamplerConfig& config, CallstackSource source = {},
                                       SamplerDriver driver = SamplerDriver::manual,
                                       std::optional<Location> target = {}, CounterSource counters = {});

} // namespace prvkit
