#pragma once

#include "prvkit/analysis.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace prvkit
{

struct SvgStyle
{
    int width = 1000;
    /// Height of one timeline row or, for other plots, of the plotting area.
    int row_height = 18;
    int plot_height = 320;
    std::string title;
    /// Restricts time-based plots to this range.
    std::optional<TimeWindow> window;
};

// CSV: one header row, stable column order.
std::string to_csv(const TimeSeries& series);
/// Several series sharing bins (e.g. one per node) become one column each.
std::string to_csv(const std::vector<TimeSeries>& series);
std::string to_csv(const IntervalTimeline& timeline);
std::string to_csv(const CountMatrix& matrix);
std::string to_csv(const RoutineStats& stats);

std::string to_svg(const TimeSeries& series, const SvgStyle& style = {});
std::string to_svg(const std::vector<TimeSeries>& series, const SvgStyle& style = {});
std::string to_svg(const IntervalTimeline& timeline, const SvgStyle& style = {});
std::string to_svg(const CountMatrix& matrix, const SvgStyle& style = {});
std::string to_svg(const RoutineStats& stats, const SvgStyle& style = {});

/// Writes to_csv(result) to `path`; empty results are rejected with AnalysisError.
template <typename Result>
void export_csv(const Result& result, const std::filesystem::path& path);

template <typename Result>
void export_svg(const Result& result, const std::filesystem::path& path, const SvgStyle& style = {});

/// Fill colour used for the i-th distinct code.
std::string palette_color(std::size_t index);

} // namespace prvkit
