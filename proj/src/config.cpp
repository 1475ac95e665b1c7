#include "prvkit/config.hpp"

#include "prvkit/error.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace prvkit
{
namespace
{

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& text, const std::string& key, std::size_t line)
{
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError("config line " + std::to_string(line) + ": bad value \"" + text + "\" for " + key);
    return value;
}

double parse_double(const std::string& text, const std::string& key, std::size_t line)
{
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
        throw ConfigError("config line " + std::to_string(line) + ": bad value \"" + text + "\" for " + key);
    return value;
}

bool parse_bool(const std::string& text, const std::string& key, std::size_t line)
{
    if (text == "true" || text == "1" || text == "yes")
        return true;
    if (text == "false" || text == "0" || text == "no")
        return false;
    throw ConfigError("config line " + std::to_string(line) + ": bad boolean \"" + text + "\" for " + key);
}

std::uint32_t parse_event_type(const std::string& text, const std::string& key, std::size_t line)
{
    const auto v = parse_number<std::uint32_t>(text, key, line);
    if (v == 0)
        throw ConfigError("config line " + std::to_string(line) + ": " + key + " must be nonzero");
    return v;
}

} // namespace

TracerConfig parse_config(const std::string& text, TracerConfig config)
{
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    bool states_replaced = false;
    while (std::getline(in, raw))
    {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        raw = trim(raw);
        if (raw.empty())
            continue;
        const auto eq = raw.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
        const auto key = trim(raw.substr(0, eq));
        const auto value = trim(raw.substr(eq + 1));

        if (key == "user_function_type")
            config.user_function_type = parse_event_type(value, key, line);
        else if (key == "routine_event_type")
            config.routine_event_type = parse_event_type(value, key, line);
        else if (key.rfind("state.", 0) == 0)
        {
            if (!states_replaced)
            {
                config.state_table.clear();
                states_replaced = true;
            }
            const auto code = parse_number<std::uint32_t>(key.substr(6), key, line);
            if (value.empty())
                throw ConfigError("config line " + std::to_string(line) + ": empty state label");
            config.state_table[code] = value;
        }
        else if (key == "sampler.period_ns")
            config.sampler.period_ns = parse_number<Nanoseconds>(value, key, line);
        else if (key == "sampler.jitter")
        {
            config.sampler.jitter_fraction = parse_double(value, key, line);
            if (!(config.sampler.jitter_fraction >= 0.0 && config.sampler.jitter_fraction < 1.0))
                throw ConfigError("config line " + std::to_string(line) + ": jitter must lie in [0, 1)");
        }
        else if (key == "sampler.counter_threshold")
            config.sampler.counter_threshold = parse_number<std::uint64_t>(value, key, line);
        else if (key == "sampler.callstack_event_type")
            config.sampler.callstack_event_type = parse_event_type(value, key, line);
        else if (key == "sampler.counter_event_type")
            config.sampler.counter_event_type = parse_event_type(value, key, line);
        else if (key == "sampler.seed")
            config.sampler.seed = parse_number<std::uint64_t>(value, key, line);
        else if (key == "sampler.full_stack")
            config.sampler.full_stack = parse_bool(value, key, line);
        else
            throw ConfigError("config line " + std::to_string(line) + ": unknown key \"" + key + "\"");
    }
    return config;
}

TracerConfig load_config(const std::filesystem::path& path, TracerConfig base)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::move(base));
}

TracerConfig apply_environment(TracerConfig config)
{
    if (const char* v = std::getenv("PRVKIT_USER_FUNCTION_TYPE"))
        config.user_function_type = parse_event_type(v, "PRVKIT_USER_FUNCTION_TYPE", 0);
    if (const char* v = std::getenv("PRVKIT_ROUTINE_EVENT_TYPE"))
        config.routine_event_type = parse_event_type(v, "PRVKIT_ROUTINE_EVENT_TYPE", 0);
    return config;
}

TracerConfig config_from_environment()
{
    TracerConfig config;
    if (const char* path = std::getenv("PRVKIT_CONFIG"); path != nullptr && *path != '\0')
        config = load_config(path, config);
    return apply_environment(std::move(config));
}

} // namespace prvkit
