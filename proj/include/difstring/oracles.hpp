#pragma once

// Brute-force references for tests and acceptance runs. Nothing here uses the
// string, walker or reparametrization code; only field evaluation is shared.

#include "difstring/field_oracle.hpp"

#include <array>
#include <optional>
#include <vector>

namespace difstring {

/// Regular 2-d grid: n[k] points spanning [lo[k], hi[k]] on axis k.
struct GridSpec {
  std::array<double, 2> lo{-1.0, -1.0};
  std::array<double, 2> hi{1.0, 1.0};
  std::array<int, 2> n{64, 64};

  void validate() const;
  VectorXd point(int i, int j) const;
  double cell(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }
};

struct SaddleResult {
  bool has_barrier = false;
  VectorXd point;
  double log_density = 0.0;
  /// Grid maxima of the two basins.
  VectorXd basin_a, basin_b;
};

/// Max-min point between two basins of log rho_t on the grid. Each seed is
/// moved uphill (8-neighbour steepest ascent) to a grid maximum; cells are
/// then added in order of decreasing density to a union-find structure and
/// the saddle is the cell whose addition first joins the two maxima. With no
/// seeds the two highest grid maxima are used. Both seeds reaching the same
/// maximum (or fewer than two maxima) means no barrier.
SaddleResult locate_saddle_2d(const FieldOracle& oracle, double t, const GridSpec& grid,
                              std::optional<std::array<VectorXd, 2>> seeds = std::nullopt);

struct FrozenMepOptions {
  int max_iterations = 200000;
  double step = 0.02;
  double tolerance = 1e-9;
};

struct ReferenceCurve {
  MatrixXd images;
  int iterations = 0;
  double last_displacement = 0.0;
  bool converged = false;
  /// Images whose cell was empty at some iteration (hastie only).
  std::vector<bool> empty_flag;
  /// Every sample fell in one cell at the final iteration (hastie only).
  bool degenerate = false;
};

/// Classical string on the frozen landscape log rho_t: interior images move
/// by step * s_t, then the string is resampled to equal arc length, until the
/// largest displacement falls below tolerance. Endpoints stay fixed. Throws
/// BudgetExceededError when the budget runs out.
ReferenceCurve frozen_mep_string(const FieldOracle& oracle, double t, const MatrixXd& init,
                                 const FrozenMepOptions& options = {});

/// Straight segment of n_segments + 1 images used as the default start.
MatrixXd straight_string(const VectorXd& a, const VectorXd& b, int n_segments);

struct HastieOptions {
  int max_iterations = 1000;
  double tolerance = 1e-6;
};

/// Expectation-projection iteration with fixed endpoints: assign samples to
/// their nearest image, move interior images to their cell means (empty cells
/// hold and are flagged), resample to equal arc length.
ReferenceCurve hastie_principal_curve(const MatrixXd& samples, const MatrixXd& init,
                                      const HastieOptions& options = {});

/// Symmetric Hausdorff distance between two polylines, measured from each
/// vertex of one to the nearest point on the segments of the other.
double hausdorff_distance(const MatrixXd& a, const MatrixXd& b);

/// Distance from x to the polyline through the columns of poly.
double distance_to_polyline(const MatrixXd& poly, const VectorXd& x);

} // namespace difstring
