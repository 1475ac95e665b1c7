#pragma once

#include "prvkit/records.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace prvkit
{

inline constexpr std::uint32_t default_user_function_type = 60000019;
inline constexpr std::uint32_t default_routine_event_type = 50000001;
inline constexpr std::uint32_t default_callstack_event_type = 30000000;
inline constexpr std::uint32_t default_counter_event_type = 42000050;

/// Defaults for the sampler that can come from the same config file.
struct SamplerDefaults
{
    Nanoseconds period_ns = 1'000'000;
    double jitter_fraction = 0.0;
    std::uint64_t counter_threshold = 1000;
    std::uint32_t callstack_event_type = default_callstack_event_type;
    std::uint32_t counter_event_type = default_counter_event_type;
    std::uint64_t seed = 0;
    bool full_stack = false;
};

struct TracerConfig
{
    std::uint32_t user_function_type = default_user_function_type;
    std::uint32_t routine_event_type = default_routine_event_type;
    StateTable state_table = default_state_table();
    SamplerDefaults sampler;
};

/**
 * Parses the key/value configuration format:
 *
 *     # comment
 *     user_function_type = 60000019
 *     routine_event_type = 50000001
 *     state.<code> = <label>          (first state.* key replaces the default table)
 *     sampler.period_ns = 1000000
 *     sampler.jitter = 0.2
 *     sampler.counter_threshold = 1000
 *     sampler.callstack_event_type = 30000000
 *     sampler.counter_event_type = 42000050
 *     sampler.seed = 42
 *     sampler.full_stack = true
 *
 * Unknown keys and malformed values throw ConfigError with the line number.
 */
TracerConfig parse_config(const std::string& text, TracerConfig base = {});
TracerConfig load_config(const std::filesystem::path& path, TracerConfig base = {});

/// Applies PRVKIT_USER_FUNCTION_TYPE and PRVKIT_ROUTINE_EVENT_TYPE when set.
TracerConfig apply_environment(TracerConfig config);

/// Defaults, then the file named by PRVKIT_CONFIG (if any), then the environment overrides.
TracerConfig config_from_environment();

} // namespace prvkit
