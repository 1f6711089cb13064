#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "dpmc/experiment.hpp"

namespace dpmc {

extern const char* const kCsvHeader;

/// %.17g for finite values, "nan"/"inf" otherwise; absent tv_grid is empty.
std::string format_double(double v);
std::string csv_line(const ResultRow& row);
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

void write_trend_csv(const std::filesystem::path& path, const std::string& axis,
                     const std::vector<TrendPoint>& trend);
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss);

/// Scatter of the first two coordinates (samples vs reference); 1-D data
/// becomes overlaid histograms.
std::string svg_overlay(const std::vector<Vector>& samples, const std::vector<Vector>& reference,
                        const std::string& title);

}  // namespace dpmc
