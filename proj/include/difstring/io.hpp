#pragma once

#include "difstring/finite_temperature.hpp"
#include "difstring/score_net.hpp"
#include "difstring/string_method.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace difstring {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Writes content to path through a temporary file in the same directory and
/// a rename, so readers never see a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& content);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// index,t,x0..x{d-1}; one row per image.
std::string string_csv(const MatrixXd& images, double t);
/// index,x0..x{d-1},reject_count; one row per walker.
std::string walkers_csv(const WalkerEnsemble& walkers);
/// step,t,arc_length,max_displacement,logp_0..logp_N.
std::string diagnostics_csv(const PathDiagnostics& diagnostics);
/// t,mean_error,n_excluded.
std::string error_curve_csv(const std::vector<ScoreErrorRow>& rows);
/// t,x0..x{d-1}; one row per trajectory entry.
std::string trajectory_csv(const Trajectory& trajectory);

/// Reads a numeric CSV of points, one per row. A first row that does not
/// parse as numbers is treated as a header. Blank lines are skipped. Throws
/// ConfigError naming the 1-based line of the first malformed row. With
/// expected_dim > 0 every row must have that many columns; a leading "id"
/// column is not supported (all columns are coordinates).
MatrixXd read_points_csv(const std::filesystem::path& path, int expected_dim = 0);

} // namespace difstring
