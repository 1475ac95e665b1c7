#include "prvkit/sampler.hpp"

#include "prvkit/error.hpp"

#include <chrono>
#include <cmath>

namespace prvkit
{

SamplerConfig SamplerConfig::from_defaults(const SamplerDefaults& defaults, SamplingMode mode)
{
    SamplerConfig c;
    c.mode = mode;
    c.period_ns = defaults.period_ns;
    c.jitter_fraction = defaults.jitter_fraction;
    c.counter_threshold = defaults.counter_threshold;
    c.callstack_event_type = defaults.callstack_event_type;
    c.counter_event_type = defaults.counter_event_type;
    c.rng_seed = defaults.seed;
    c.full_stack = defaults.full_stack;
    return c;
}

Sampler::Schedule::Schedule(Nanoseconds period, double jitter, std::uint64_t seed)
: period_(period), jitter_(jitter), rng_(seed)
{
}

Nanoseconds Sampler::Schedule::next_interval()
{
    if (jitter_ == 0.0)
        return period_;
    const double p = static_cast<double>(period_);
    const double v = p * (1.0 - jitter_) + unit_(rng_) * 2.0 * jitter_ * p;
    return std::max<Nanoseconds>(1, static_cast<Nanoseconds>(std::llround(v)));
}

std::unique_ptr<Sampler> start_sampler(Tracer& tracer, const SamplerConfig& config, CallstackSource source,
                                       SamplerDriver driver, std::optional<Location> target, CounterSource counters)
{
    if (config.mode == SamplingMode::time)
    {
        if (config.period_ns == 0)
            throw ConfigError("sampling period must be positive");
        if (!(config.jitter_fraction >= 0.0 && config.jitter_fraction < 1.0))
            throw ConfigError("jitter fraction must lie in [0, 1)");
    }
    else if (config.counter_threshold == 0)
        throw ConfigError("counter threshold must be positive");

    if (tracer.lifecycle() != Lifecycle::active)
        throw SamplerLifecycleError("sampler needs an active tracer");
    if (!tracer.try_attach_sampler())
        throw SamplerLifecycleError("a sampler is already running on this tracer");

    std::unique_ptr<Sampler> sampler;
    try
    {
        const auto where = target ? *target : tracer.current_location();
        sampler.reset(new Sampler(tracer, config, std::move(source), std::move(counters), where));
    }
    catch (...)
    {
        tracer.detach_sampler();
        throw;
    }
    if (config.mode == SamplingMode::time && driver == SamplerDriver::background)
        sampler->worker_ = std::thread([s = sampler.get()] { s->background_loop(); });
    return sampler;
}

Sampler::Sampler(Tracer& tracer, SamplerConfig config, CallstackSource source, CounterSource counters,
                 Location target)
: tracer_(tracer), config_(config), source_(std::move(source)), counters_(std::move(counters)), target_(target),
  schedule_(config.period_ns, config.jitter_fraction, config.rng_seed)
{
    if (config_.mode == SamplingMode::time)
    {
        channel_ = tracer_.open_channel();
        pending_interval_ = schedule_.next_interval();
        next_due_ = tracer_.now() + pending_interval_;
    }
}

Sampler::~Sampler()
{
    if (running_.load())
    {
        running_.store(false);
        wake_.notify_all();
        if (worker_.joinable())
            worker_.join();
        tracer_.detach_sampler();
    }
}

Nanoseconds Sampler::next_due() const
{
    std::lock_guard lock(mutex_);
    return next_due_;
}

std::vector<EventPair> Sampler::stack_pairs(Nanoseconds t) const
{
    std::vector<EventPair> pairs;
    if (!source_)
        return pairs;
    const auto frames = source_(t);
    if (frames.empty())
        return pairs;
    if (config_.full_stack)
        for (std::size_t depth = 0; depth < frames.size(); ++depth)
            pairs.push_back({config_.callstack_event_type + static_cast<std::uint32_t>(depth), frames[depth]});
    else
        pairs.push_back({config_.callstack_event_type, frames.front()});
    return pairs;
}

void Sampler::poll()
{
    if (config_.mode != SamplingMode::time)
        throw SamplerModeError("poll is only meaningful for time-based sampling");
    std::lock_guard lock(mutex_);
    if (!running_.load())
        throw SamplerLifecycleError("sampler is stopped");

    const auto now = tracer_.now();
    while (next_due_ <= now)
    {
        auto pairs = stack_pairs(next_due_);
        if (counters_)
            pairs.push_back({config_.counter_event_type, counters_()});
        if (!pairs.empty())
        {
            tracer_.emit_on_channel(channel_, target_, next_due_, std::move(pairs));
            ++report_.samples;
        }
        report_.intervals.push_back(pending_interval_);
        pending_interval_ = schedule_.next_interval();
        next_due_ += pending_interval_;
    }
}

void Sampler::counter_tick(std::uint64_t increment, std::optional<Nanoseconds> at)
{
    if (config_.mode != SamplingMode::counter)
        throw SamplerModeError("counter_tick on a time-based sampler");
    if (!running_.load())
        throw SamplerLifecycleError("sampler is stopped");
    if (increment == 0)
        return;

    const auto threshold = config_.counter_threshold;
    const auto before = accumulated_.fetch_add(increment, std::memory_order_acq_rel);
    const auto after = before + increment;
    const auto t = at ? *at : tracer_.now();
    for (auto k = before / threshold + 1; k <= after / threshold; ++k)
    {
        auto pairs = stack_pairs(t);
        pairs.insert(pairs.begin(), EventPair{config_.counter_event_type, k * threshold});
        tracer_.emit(std::move(pairs), t);
        counter_samples_.fetch_add(1, std::memory_order_relaxed);
    }
}

SamplerReport Sampler::stop()
{
    {
        std::lock_guard lock(mutex_);
        if (!running_.exchange(false))
            throw SamplerLifecycleError("sampler already stopped");
    }
    wake_.notify_all();
    if (worker_.joinable())
        worker_.join();
    tracer_.detach_sampler();

    std::lock_guard lock(mutex_);
    auto report = report_;
    report.samples += counter_samples_.load();
    return report;
}

void Sampler::background_loop()
{
    std::unique_lock lock(mutex_);
    while (running_.load())
    {
        const auto now = tracer_.now();
        if (next_due_ > now)
        {
            wake_.wait_for(lock, std::chrono::nanoseconds(next_due_ - now), [this] { return !running_.load(); });
            continue;
        }
        lock.unlock();
        try
        {
            poll();
        }
        catch (const Error&)
        {
            // The tracer finished underneath us; nothing more can be recorded.
            lock.lock();
            return;
        }
        lock.lock();
    }
}

} // namespace prvkit
