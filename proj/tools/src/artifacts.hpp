#pragma once

#include <filesystem>
#include <string>

#include "mrf/eval.hpp"
#include "mrf/types.hpp"

namespace mrf::cli {

/// Contrast stacks are stored as complex [height][width][frames] tensors.
void save_stack(const std::filesystem::path &path, const ContrastStack &stack);
ContrastStack load_stack(const std::filesystem::path &path);

/// Parameter maps are real [height][width] tensors.
void save_map(const std::filesystem::path &path, const MatrixXd &map);
MatrixXd load_map(const std::filesystem::path &path);

/// t1_map.hyt, t2_map.hyt and their PGM renderings over [0, display max].
void save_maps(const std::filesystem::path &dir, const ParameterMaps &maps, double t1_display_max,
               double t2_display_max);

/// Writes metrics.json and metrics.csv.
void save_metrics(const std::filesystem::path &dir, const MetricsReport &report);

} // namespace mrf::cli
