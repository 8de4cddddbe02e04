#pragma once

#include "difstring/gaussian_mixture.hpp"
#include "difstring/string_method.hpp"

#include <random>
#include <vector>

namespace difstring {

/// One walker per string image, each with its own random stream.
struct WalkerEnsemble {
  MatrixXd walkers;
  std::vector<std::mt19937_64> rngs;
  std::vector<long> reject_counts;
  std::vector<long> proposal_counts;

  /// Walkers placed on the images; stream i seeded from (seed, i).
  static WalkerEnsemble at_images(const MatrixXd& images, std::uint64_t seed);

  int size() const { return static_cast<int>(walkers.cols()); }
};

/// Index of the image nearest to x; ties go to the lower index.
int nearest_image(const MatrixXd& images, const VectorXd& x);

/// One Euler-Maruyama step of dx = (b + gamma^2 s) dt + sqrt(2T) gamma dW for
/// every interior walker at time string.t, with gamma and T taken from
/// string.regime. A proposal whose nearest image (in string.images) is not its
/// own is rejected. Endpoint walkers are set to the endpoint images.
WalkerEnsemble walker_step(const WalkerEnsemble& ensemble, const StringState& string, const FieldOracle& oracle,
                           double dt);

/// phi_i <- (1 - eta) phi_i + eta x_i on interior images. No reparametrization.
StringState ema_update(const StringState& string, const WalkerEnsemble& ensemble, double eta);

struct FiniteTemperatureRun {
  StringState final;
  WalkerEnsemble walkers;
  PathDiagnostics diagnostics;
};

/// Per step: images are carried by the probability flow (endpoints only by
/// it), walkers take a constrained SDE step against the carried images, the
/// EMA pulls interior images toward their walkers, and the string is
/// reparametrized. Each walker is then shifted by its image's
/// reparametrization displacement when the shifted point stays in its own
/// cell, so that walkers keep tracking the images they belong to.
FiniteTemperatureRun run_finite_temperature_string(const StringState& state, const FieldOracle& oracle,
                                                   const StepperConfig& cfg, const RunOptions& options = {});

/// Distance of each image to the mean of the samples whose nearest image it
/// is. Cells with no samples get NaN; cells with fewer than kMinOccupancy
/// samples are flagged.
struct SelfConsistency {
  static constexpr long kMinOccupancy = 10;
  VectorXd residual;
  std::vector<long> counts;
  std::vector<bool> low_occupancy;

  /// Median over interior images with a finite residual.
  double median_interior() const;
};

SelfConsistency self_consistency_residual(const MatrixXd& images, const MatrixXd& samples);

/// Draws n_samples from the mixture tempered to rho^(1/T) and measures the
/// self-consistency of the string against them.
SelfConsistency self_consistency_residual(const MatrixXd& images, const GaussianMixture& target, double temperature,
                                          int n_samples, std::uint64_t seed);

} // namespace difstring
