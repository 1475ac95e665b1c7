#pragma once

#include "prvkit/analysis.hpp"
#include "prvkit/config.hpp"
#include "prvkit/records.hpp"
#include "prvkit/sampler.hpp"

#include <cstdint>
#include <optional>

namespace prvkit
{

enum class Topology
{
    ring,
    nearest_neighbor_2d
};

inline constexpr std::uint32_t workload_phase_event_type = 84300;

/// Routine values written under the tracer's routine event type.
namespace routines
{
inline constexpr std::uint64_t end = 0;
inline constexpr std::uint64_t waitany = 1;
inline constexpr std::uint64_t allreduce = 2;
} // namespace routines

/**
 * An iterative halo-exchange workload, all tasks on one node.
 *
 * Each iteration is a compute phase (Running), a Waitany block (External)
 * during which every task streams messages to its topology neighbours, and
 * an Allreduce block: Idle until the last task arrives, then External for
 * `allreduce_ns`. Compute and Waitany durations are scaled per task and
 * iteration by (1 + N(0, noise_sigma)) clipped to three sigma.
 *
 * The defaults give Waitany/Allreduce shares of about 0.60/0.30, 2016
 * messages per neighbour pair and a 188.73 MB/s bandwidth peak in 10 ms bins.
 */
struct SyntheticSpec
{
    std::uint32_t n_tasks = 16;
    std::uint32_t n_iterations = 252;
    Nanoseconds compute_ns = 10'000'000;
    Nanoseconds waitany_ns = 60'000'000;
    Nanoseconds allreduce_ns = 24'630'000;
    double noise_sigma = 0.05;
    std::uint32_t messages_per_neighbor_pair = 8;
    std::uint64_t message_size = 29489;
    /// Messages on one channel are sent back to back, each in flight this long.
    Nanoseconds flight_ns = 5'000'000;
    Topology topology = Topology::ring;
    std::uint64_t seed = 1;
    Nanoseconds setup_ns = 200'000'000;
    Nanoseconds teardown_ns = 100'000'000;
    std::uint64_t message_tag = 1;
    /// Fixed so that identical specs give byte-identical files.
    CaptureTime captured{1, 1, 2025, 0, 0};
    TracerConfig tracer_config;
    /// Samples task 1's call stack. In counter mode task 1 ticks the counter
    /// at the end of each compute phase, once per `compute_ns_per_tick`.
    std::optional<SamplerConfig> sampling;
    Nanoseconds compute_ns_per_tick = 1000;
};

/// Throws ConfigError.
void validate_spec(const SyntheticSpec& spec);

struct SyntheticTrace
{
    TraceBundle bundle;
    /// From the first iteration's start to the last iteration's end.
    TimeWindow workload;
    std::optional<SamplerReport> sampling;
};

SyntheticTrace generate_synthetic_trace(const SyntheticSpec& spec);

/// Neighbours of a 1-based task, ascending, without duplicates or the task itself.
std::vector<std::uint32_t> topology_neighbors(Topology topology, std::uint32_t n_tasks, std::uint32_t task);

} // namespace prvkit
