#include "prvkit/tracer.hpp"

#include "prvkit/error.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <tuple>
#include <unordered_map>

namespace prvkit
{

Clock steady_clock_source()
{
    return [] {
        return static_cast<Nanoseconds>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
                .count());
    };
}

VirtualClock::VirtualClock() : time_(std::make_shared<std::atomic<Nanoseconds>>(0))
{
}

Nanoseconds VirtualClock::now() const
{
    return time_->load(std::memory_order_acquire);
}

void VirtualClock::set(Nanoseconds t)
{
    time_->store(t, std::memory_order_release);
}

void VirtualClock::advance(Nanoseconds dt)
{
    time_->fetch_add(dt, std::memory_order_acq_rel);
}

Clock VirtualClock::source() const
{
    return [time = time_] { return time->load(std::memory_order_acquire); };
}

namespace
{

std::atomic<std::uint64_t> next_tracer_uid{1};

struct OpenState
{
    Location location;
    Nanoseconds begin = 0;
    std::uint32_t state = 0;
};

struct Scope
{
    std::uint64_t serial = 0;
    std::uint32_t previous_state = 0;
};

struct SendHalf
{
    Location sender;
    Location receiver;
    std::uint64_t size = 0;
    CommTimes send;
};

struct RecvHalf
{
    Location sender;
    Location receiver;
    std::uint64_t size = 0;
    std::optional<CommTimes> send;
    CommTimes recv;
};

void check_causality(const CommTimes& send, const CommTimes& recv)
{
    if (recv.physical < send.physical)
        throw CausalityError("message received at " + std::to_string(recv.physical) + " before it was sent at " +
                             std::to_string(send.physical));
}

void check_ordering(const CommTimes& times, const char* side)
{
    if (times.logical > times.physical)
        throw CausalityError(std::string("logical ") + side + " time after physical " + side + " time");
}

} // namespace

struct Tracer::Buffer
{
    std::uint64_t id = 0;
    bool is_channel = false;
    std::vector<TraceRecord> records;
    bool has_last = false;
    Nanoseconds last = 0;
    bool touched = false;
    std::optional<OpenState> open;
    std::vector<Scope> scopes;
    std::uint64_t next_serial = 1;
};

struct Tracer::CommMatcher
{
    using Key = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t, std::uint64_t>;

    struct Channel
    {
        std::map<std::uint64_t, SendHalf> sends;
        std::map<std::uint64_t, RecvHalf> recvs;
        std::uint64_t next_send = 0;
        std::uint64_t next_recv = 0;
    };

    std::mutex mutex;
    std::map<Key, Channel> channels;

    static Key key_of(const Location& sender, const Location& receiver, std::uint64_t tag)
    {
        return {sender.appl, sender.task, receiver.appl, receiver.task, tag};
    }
};

Tracer::Tracer(TracerConfig config, Clock clock)
: config_(std::move(config)), clock_(std::move(clock)), uid_(next_tracer_uid.fetch_add(1)),
  comms_(std::make_unique<CommMatcher>())
{
}

Tracer::~Tracer() = default;

void Tracer::require_active(const char* what) const
{
    switch (lifecycle())
    {
    case Lifecycle::uninitialized:
        throw LifecycleError(std::string(what) + " before init");
    case Lifecycle::finished:
        throw LifecycleError(std::string(what) + " after finish");
    case Lifecycle::active:
        break;
    }
}

Nanoseconds Tracer::now() const
{
    const auto t = clock_();
    return t > epoch_ ? t - epoch_ : 0;
}

void Tracer::init(ProcessModel process, ResourceModel resources, IdentityProvider provider)
{
    if (lifecycle() != Lifecycle::uninitialized)
        throw LifecycleError("tracer already initialised");
    validate_models(process, resources);
    if (config_.state_table.count(states::running) == 0)
        throw UnknownStateError("state table has no Running (1) entry");

    process_ = std::move(process);
    resources_ = std::move(resources);
    provider_ = std::move(provider);
    provider_.freeze();
    epoch_ = clock_();

    auto expected = Lifecycle::uninitialized;
    if (!lifecycle_.compare_exchange_strong(expected, Lifecycle::active))
        throw LifecycleError("tracer already initialised");

    auto& buffer = local_buffer();
    const auto loc = current_location();
    touch(buffer, loc, stamp(buffer, Nanoseconds{0}), std::nullopt);
}

Location Tracer::current_location() const
{
    return resolve_location(provider_, process_, resources_);
}

Tracer::Buffer& Tracer::local_buffer()
{
    thread_local std::unordered_map<std::uint64_t, Buffer*> cache;
    if (auto it = cache.find(uid_); it != cache.end())
        return *it->second;

    std::lock_guard lock(buffers_mutex_);
    auto buffer = std::make_unique<Buffer>();
    buffer->id = buffers_.size() + 1;
    auto* raw = buffer.get();
    buffers_.push_back(std::move(buffer));
    cache.emplace(uid_, raw);
    return *raw;
}

Nanoseconds Tracer::stamp(Buffer& buffer, std::optional<Nanoseconds> at)
{
    const auto t = at ? *at : now();
    if (buffer.has_last && t < buffer.last)
        throw ClockError("timestamp " + std::to_string(t) + " precedes " + std::to_string(buffer.last) +
                         " already recorded on this thread");
    buffer.has_last = true;
    buffer.last = t;
    return t;
}

void Tracer::touch(Buffer& buffer, const Location& loc, Nanoseconds t, std::optional<std::uint32_t> first_state)
{
    if (buffer.touched)
        return;
    buffer.touched = true;
    buffer.open = OpenState{loc, t, first_state.value_or(states::running)};
}

void Tracer::switch_state(Buffer& buffer, const Location& loc, Nanoseconds t, std::uint32_t state)
{
    if (buffer.open)
        buffer.records.emplace_back(StateRecord{buffer.open->location, buffer.open->begin, t, buffer.open->state});
    buffer.open = OpenState{loc, t, state};
}

void Tracer::append_event(Buffer& buffer, const Location& loc, Nanoseconds t, std::vector<EventPair> pairs)
{
    buffer.records.emplace_back(EventRecord{loc, t, std::move(pairs)});
}

void Tracer::register_event(std::uint32_t type, const std::string& description,
                            const std::map<std::uint64_t, std::string>& value_labels)
{
    require_active("register");
    std::lock_guard lock(registry_mutex_);
    registry_.add(type, description, value_labels);
}

void Tracer::emit(std::uint32_t type, std::uint64_t value, std::optional<Nanoseconds> at)
{
    emit(std::vector<EventPair>{{type, value}}, at);
}

void Tracer::emit(std::vector<EventPair> pairs, std::optional<Nanoseconds> at)
{
    require_active("emit");
    if (pairs.empty())
        throw Error("an event needs at least one type/value pair");
    for (const auto& p : pairs)
        if (p.type == 0)
            throw Error("event type 0 is reserved");

    auto& buffer = local_buffer();
    const auto loc = current_location();
    const auto t = stamp(buffer, at);
    touch(buffer, loc, t, std::nullopt);
    append_event(buffer, loc, t, std::move(pairs));
}

ScopeToken Tracer::user_function_enter(std::uint64_t function_id, std::optional<Nanoseconds> at)
{
    require_active("user_function_enter");
    if (function_id == 0)
        throw Error("user function id 0 is reserved for exits");

    auto& buffer = local_buffer();
    const auto loc = current_location();
    const auto t = stamp(buffer, at);
    const bool first = !buffer.touched;
    touch(buffer, loc, t, states::running);

    append_event(buffer, loc, t, {{config_.user_function_type, function_id}});
    const auto previous = buffer.open ? buffer.open->state : states::running;
    if (!first)
        switch_state(buffer, loc, t, states::running);

    const auto serial = buffer.next_serial++;
    buffer.scopes.push_back({serial, previous});
    return {buffer.id, serial};
}

void Tracer::user_function_exit(ScopeToken token, std::optional<Nanoseconds> at)
{
    require_active("user_function_exit");
    auto& buffer = local_buffer();
    if (token.buffer != buffer.id || buffer.scopes.empty() || buffer.scopes.back().serial != token.serial)
        throw ScopeMismatchError("user function exit does not match the innermost open enter on this thread");

    const auto loc = current_location();
    const auto t = stamp(buffer, at);
    append_event(buffer, loc, t, {{config_.user_function_type, 0}});
    switch_state(buffer, loc, t, buffer.scopes.back().previous_state);
    buffer.scopes.pop_back();
}

void Tracer::set_state(std::uint32_t state, std::optional<Nanoseconds> at)
{
    require_active("set_state");
    if (config_.state_table.count(state) == 0)
        throw UnknownStateError("state " + std::to_string(state) + " is not in the state table");

    auto& buffer = local_buffer();
    const auto loc = current_location();
    const auto t = stamp(buffer, at);
    if (!buffer.touched)
    {
        touch(buffer, loc, t, state);
        return;
    }
    switch_state(buffer, loc, t, state);
}

void Tracer::emit_comm(const CommMark& mark, std::optional<Nanoseconds> at)
{
    require_active("emit_comm");
    if (!process_.contains(mark.peer.appl, mark.peer.task, mark.peer.thread))
        throw IdentityRangeError("communication peer outside the process model");

    auto& buffer = local_buffer();
    const auto self = current_location();

    if (mark.direction == CommDirection::send)
    {
        const auto t = stamp(buffer, mark.send_times ? std::optional(mark.send_times->physical) : at);
        touch(buffer, self, t, std::nullopt);
        const auto send = mark.send_times.value_or(CommTimes{t, t});
        check_ordering(send, "send");

        std::lock_guard lock(comms_->mutex);
        auto& channel = comms_->channels[CommMatcher::key_of(self, mark.peer, mark.tag)];
        const auto seq = mark.sequence.value_or(channel.next_send);
        channel.next_send = std::max(channel.next_send, seq + 1);
        if (!channel.sends.try_emplace(seq, SendHalf{self, mark.peer, mark.size, send}).second)
            throw Error("duplicate send sequence " + std::to_string(seq));
        return;
    }

    const auto t = stamp(buffer, mark.recv_times ? std::optional(mark.recv_times->physical) : at);
    touch(buffer, self, t, std::nullopt);
    const auto recv = mark.recv_times.value_or(CommTimes{t, t});
    check_ordering(recv, "receive");
    if (mark.send_times)
    {
        check_ordering(*mark.send_times, "send");
        check_causality(*mark.send_times, recv);
    }

    std::lock_guard lock(comms_->mutex);
    auto& channel = comms_->channels[CommMatcher::key_of(mark.peer, self, mark.tag)];
    const auto seq = mark.sequence.value_or(channel.next_recv);
    channel.next_recv = std::max(channel.next_recv, seq + 1);
    if (!channel.recvs.try_emplace(seq, RecvHalf{mark.peer, self, mark.size, mark.send_times, recv}).second)
        throw Error("duplicate receive sequence " + std::to_string(seq));
}

Tracer::ChannelId Tracer::open_channel()
{
    require_active("open_channel");
    std::lock_guard lock(buffers_mutex_);
    auto buffer = std::make_unique<Buffer>();
    buffer->id = buffers_.size() + 1;
    buffer->is_channel = true;
    buffers_.push_back(std::move(buffer));
    return buffers_.size() - 1;
}

void Tracer::emit_on_channel(ChannelId channel, const Location& location, Nanoseconds time,
                             std::vector<EventPair> pairs)
{
    require_active("emit");
    Buffer* buffer = nullptr;
    {
        std::lock_guard lock(buffers_mutex_);
        if (channel >= buffers_.size() || !buffers_[channel]->is_channel)
            throw Error("unknown channel");
        buffer = buffers_[channel].get();
    }
    if (!process_.contains(location.appl, location.task, location.thread))
        throw IdentityRangeError("channel location outside the process model");
    stamp(*buffer, time);
    append_event(*buffer, location, time, std::move(pairs));
}

bool Tracer::try_attach_sampler()
{
    bool expected = false;
    return sampler_attached_.compare_exchange_strong(expected, true);
}

void Tracer::detach_sampler()
{
    sampler_attached_.store(false);
}

TraceBundle Tracer::finish()
{
    auto expected = Lifecycle::active;
    if (!lifecycle_.compare_exchange_strong(expected, Lifecycle::finished))
        throw LifecycleError(expected == Lifecycle::uninitialized ? "finish before init" : "tracer already finished");

    std::lock_guard lock(buffers_mutex_);
    Nanoseconds end = now();
    for (const auto& buffer : buffers_)
        if (buffer->has_last)
            end = std::max(end, buffer->last);

    TraceBundle bundle;
    for (auto& buffer : buffers_)
    {
        while (!buffer->scopes.empty())
        {
            const auto loc = buffer->open ? buffer->open->location : Location{};
            append_event(*buffer, loc, end, {{config_.user_function_type, 0}});
            switch_state(*buffer, loc, end, buffer->scopes.back().previous_state);
            buffer->scopes.pop_back();
        }
        if (buffer->open)
        {
            const auto& open = *buffer->open;
            buffer->records.emplace_back(StateRecord{open.location, open.begin, end, open.state});
            buffer->open.reset();
        }
        std::move(buffer->records.begin(), buffer->records.end(), std::back_inserter(bundle.records));
        buffer->records.clear();
    }

    {
        std::lock_guard comm_lock(comms_->mutex);
        for (auto& [key, channel] : comms_->channels)
        {
            for (auto& [seq, recv] : channel.recvs)
            {
                auto send = channel.sends.find(seq);
                if (send == channel.sends.end())
                {
                    bundle.pending_comms.push_back({CommDirection::recv, recv.sender, recv.receiver, std::get<4>(key),
                                                    recv.size, recv.recv.physical, "receive without matching send"});
                    continue;
                }
                const auto send_times = recv.send.value_or(send->second.send);
                if (send_times.physical > recv.recv.physical || send_times.logical > send_times.physical)
                {
                    bundle.pending_comms.push_back({CommDirection::recv, recv.sender, recv.receiver, std::get<4>(key),
                                                    recv.size, recv.recv.physical, "causality violation"});
                }
                else
                {
                    CommRecord comm;
                    comm.send_location = send->second.sender;
                    comm.recv_location = recv.receiver;
                    comm.logical_send = send_times.logical;
                    comm.physical_send = send_times.physical;
                    comm.logical_recv = recv.recv.logical;
                    comm.physical_recv = recv.recv.physical;
                    comm.size = recv.size;
                    comm.tag = std::get<4>(key);
                    bundle.records.emplace_back(comm);
                }
                channel.sends.erase(send);
            }
            for (auto& [seq, send] : channel.sends)
                bundle.pending_comms.push_back({CommDirection::send, send.sender, send.receiver, std::get<4>(key),
                                                send.size, send.send.physical, "send without matching receive"});
        }
        comms_->channels.clear();
    }

    sort_records(bundle.records);
    bundle.header.captured = CaptureTime::now();
    bundle.header.total_time = end;
    bundle.header.process = process_;
    bundle.header.resources = resources_;
    {
        std::lock_guard reg_lock(registry_mutex_);
        bundle.registry = registry_;
    }
    bundle.state_table = config_.state_table;
    bundle.row_labels = default_row_labels(process_, resources_);
    return bundle;
}

} // namespace prvkit
