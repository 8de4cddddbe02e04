#pragma once

#include "difstring/field_oracle.hpp"
#include "difstring/integrators.hpp"
#include "difstring/reparametrize.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace difstring {

enum class Regime { transport, mep, principal_curve };

std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

/// How interior images move. transport: b only; mep: b + gamma^2 s;
/// principal_curve: walkers at temperature T dragging images by an EMA.
struct RegimeConfig {
  Regime regime = Regime::transport;
  GammaSchedule gamma;
  double temperature = 0.0;
  double eta = 0.2;
  SplineKind spline = SplineKind::linear;
  /// c in the step contract dt <= c / gamma(t)^2.
  double step_constant = 0.1;

  /// transport needs gamma == 0, mep needs T == 0, principal_curve needs T > 0.
  void validate() const;
};

/// N+1 images (columns) at time t.
struct StringState {
  MatrixXd images;
  double t = 0.0;
  RegimeConfig regime;

  int dim() const { return static_cast<int>(images.rows()); }
  int n_images() const { return static_cast<int>(images.cols()); }
};

/// phi_i = z0 cos(pi i / 2N) + z1 sin(pi i / 2N), i = 0..N, followed by one
/// reparametrization pass. z0 == z1 gives a constant string and a warning.
MatrixXd geodesic_images(const VectorXd& z0, const VectorXd& z1, int n_segments);
StringState init_string_geodesic(const VectorXd& z0, const VectorXd& z1, int n_segments,
                                 const RegimeConfig& regime = {});

/// Backward probability-flow images of two data points. cfg must run backward
/// (t_start > t_end), normally from 1 to the string's initial time.
std::pair<VectorXd, VectorXd> encode_endpoints(const FieldOracle& oracle, const VectorXd& xa, const VectorXd& xb,
                                               const StepperConfig& cfg);

/// One move + reparametrize step from state.t to state.t + dt. Endpoints
/// move by b only; interior images by b (transport) or b + gamma^2 s (mep).
/// The principal_curve regime has its own stepper (walkers) and is rejected
/// here; run_string dispatches it.
StringState string_step(const StringState& state, const FieldOracle& oracle, double dt,
                        StepMethod method = StepMethod::euler);

struct DiagnosticRow {
  int step = 0;
  double t = 0.0;
  VectorXd logp;
  double arc_length = 0.0;
  double max_displacement = 0.0;
};

struct PathDiagnostics {
  std::vector<DiagnosticRow> rows;
  /// Largest interior log-likelihood in the last row.
  double peak_interior_logp() const;
};

struct RunOptions {
  /// Diagnostics row cadence in steps (the final step is always recorded).
  /// 0 records the final step only.
  int record_every = 1;
  /// Called with the state after every snapshot_every steps (and the initial
  /// and final states). 0 disables snapshots.
  int snapshot_every = 0;
  std::function<void(const StringState&, int step)> on_snapshot;
  /// Steps of the backward likelihood integration used when the oracle has
  /// no exact log-density.
  int likelihood_steps = 200;
};

/// Steps for a run from t0 to 1 that honour dt <= c / gamma_max^2, and at
/// least min_steps.
int default_string_steps(const RegimeConfig& regime, double t0, int min_steps = 400);

/// Per-image log rho_t: exact when the oracle has it, otherwise by backward
/// probability-flow integration (exact divergence if available, else
/// Hutchinson probes).
VectorXd image_log_likelihood(const FieldOracle& oracle, double t, const MatrixXd& images, int steps,
                              std::uint64_t seed);

struct StringRun {
  StringState final;
  PathDiagnostics diagnostics;
};

/// Evolves the string from cfg.t_start (= state.t) to cfg.t_end (= 1) in
/// cfg.n_steps steps of cfg.method.
StringRun run_string(const StringState& state, const FieldOracle& oracle, const StepperConfig& cfg,
                     const RunOptions& options = {});

/// ||s_perp|| at interior images 1..N-1 (returned in that order) with the
/// tangent taken from central differences of the neighbours.
VectorXd mep_residual(const StringState& state, const FieldOracle& oracle, double t);

double arc_length(const MatrixXd& images);

} // namespace difstring
