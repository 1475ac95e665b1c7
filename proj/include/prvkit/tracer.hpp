#pragma once

#include "prvkit/config.hpp"
#include "prvkit/model.hpp"
#include "prvkit/records.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace prvkit
{

/// Absolute nanosecond source; the tracer subtracts the value read at init.
using Clock = std::function<Nanoseconds()>;

Clock steady_clock_source();

/// A manually driven clock for tests and trace generation. Copies share the same time.
class VirtualClock
{
public:
    VirtualClock();

    Nanoseconds now() const;
    void set(Nanoseconds t);
    void advance(Nanoseconds dt);
    Clock source() const;

private:
    std::shared_ptr<std::atomic<Nanoseconds>> time_;
};

enum class Lifecycle
{
    uninitialized,
    active,
    finished
};

/// Handle returned by user_function_enter; only valid on the thread that created it.
struct ScopeToken
{
    std::uint64_t buffer = 0;
    std::uint64_t serial = 0;
};

struct CommTimes
{
    Nanoseconds logical = 0;
    Nanoseconds physical = 0;
};

/**
 * One half of a message as seen by the calling thread.
 *
 * A send half registers the message. A recv half completes it and may carry
 * the sender's times; when it does not, they are taken from the matching send
 * half. Halves match FIFO on (sender, receiver, tag) unless `sequence` pins
 * the position explicitly.
 */
struct CommMark
{
    CommDirection direction = CommDirection::send;
    Location peer;
    std::uint64_t tag = 0;
    std::uint64_t size = 0;
    std::optional<std::uint64_t> sequence;
    std::optional<CommTimes> send_times;
    std::optional<CommTimes> recv_times;
};

/**
 * The in-process recording engine.
 *
 * Every recording call may take an explicit timestamp (relative to init);
 * without one the tracer reads its clock. Each OS thread appends to its own
 * buffer, and timestamps in a buffer must not go backwards. finish() needs
 * external quiescence.
 */
class Tracer
{
public:
    explicit Tracer(TracerConfig config = {}, Clock clock = steady_clock_source());
    ~Tracer();

    Tracer(const Tracer&) = delete;
    Tracer& operator=(const Tracer&) = delete;

    /// Opens a Running state for the calling thread at t = 0.
    void init(ProcessModel process, ResourceModel resources, IdentityProvider provider = {});

    /// Closes every open state and scope, matches communications and returns the sorted bundle.
    TraceBundle finish();

    Lifecycle lifecycle() const
    {
        return lifecycle_.load(std::memory_order_acquire);
    }

    /// Nanoseconds since init.
    Nanoseconds now() const;

    void register_event(std::uint32_t type, const std::string& description,
                        const std::map<std::uint64_t, std::string>& value_labels = {});

    void emit(std::uint32_t type, std::uint64_t value, std::optional<Nanoseconds> at = {});
    void emit(std::vector<EventPair> pairs, std::optional<Nanoseconds> at = {});

    ScopeToken user_function_enter(std::uint64_t function_id, std::optional<Nanoseconds> at = {});
    void user_function_exit(ScopeToken token, std::optional<Nanoseconds> at = {});

    void set_state(std::uint32_t state, std::optional<Nanoseconds> at = {});

    void emit_comm(const CommMark& mark, std::optional<Nanoseconds> at = {});

    /// Where the calling thread's records land.
    Location current_location() const;

    using ChannelId = std::size_t;

    /// A buffer not bound to any thread, for emitters such as the sampler.
    ChannelId open_channel();
    /// Callers serialise access to one channel themselves.
    void emit_on_channel(ChannelId channel, const Location& location, Nanoseconds time,
                         std::vector<EventPair> pairs);

    /// Claims the single sampler slot; false if a sampler is already attached.
    bool try_attach_sampler();
    void detach_sampler();

    const TracerConfig& config() const
    {
        return config_;
    }
    const ProcessModel& process() const
    {
        return process_;
    }
    const ResourceModel& resources() const
    {
        return resources_;
    }

private:
    struct Buffer;
    struct CommMatcher;

    void require_active(const char* what) const;
    Buffer& local_buffer();
    Nanoseconds stamp(Buffer& buffer, std::optional<Nanoseconds> at);
    void touch(Buffer& buffer, const Location& loc, Nanoseconds t, std::optional<std::uint32_t> first_state);
    void switch_state(Buffer& buffer, const Location& loc, Nanoseconds t, std::uint32_t state);
    void append_event(Buffer& buffer, const Location& loc, Nanoseconds t, std::vector<EventPair> pairs);

    TracerConfig config_;
    Clock clock_;
    std::uint64_t uid_;
    std::atomic<Lifecycle> lifecycle_{Lifecycle::uninitialized};
    Nanoseconds epoch_ = 0;

    ProcessModel process_;
    ResourceModel resources_;
    IdentityProvider provider_;

    mutable std::mutex registry_mutex_;
    EventRegistry registry_;

    std::mutex buffers_mutex_;
    std::vector<std::unique_ptr<Buffer>> buffers_;

    std::unique_ptr<CommMatcher> comms_;
    std::atomic<bool> sampler_attached_{false};
};

/// Enters a user function on construction and exits it on destruction.
class UserFunctionScope
{
public:
    UserFunctionScope(Tracer& tracer, std::uint64_t function_id)
    : tracer_(tracer), token_(tracer.user_function_enter(function_id))
    {
    }
    ~UserFunctionScope()
    {
        if (tracer_.lifecycle() == Lifecycle::active)
            tracer_.user_function_exit(token_);
    }

    UserFunctionScope(const UserFunctionScope&) = delete;
    UserFunctionScope& operator=(const UserFunctionScope&) = delete;

private:
    Tracer& tracer_;
    ScopeToken token_;
};

} // namespace prvkit
