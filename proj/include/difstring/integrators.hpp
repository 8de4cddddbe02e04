#pragma once

#include "difstring/field_oracle.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace difstring {

enum class StepMethod { euler, heun };

std::string to_string(StepMethod m);
StepMethod parse_step_method(const std::string& s);

struct StepperConfig {
  StepMethod method = StepMethod::heun;
  int n_steps = 400;
  double t_start = 0.0;
  double t_end = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  double dt() const { return (t_end - t_start) / n_steps; }
  /// Grid time of step k; computed directly so every consumer sees identical values.
  double time(int k) const { return k == n_steps ? t_end : t_start + (t_end - t_start) * k / n_steps; }
};

enum class Quench { hard_window, linear_ramp };

std::string to_string(Quench q);
Quench parse_quench(const std::string& s);

/// gamma_t: base inside [lo, hi]; outside it is 0 (hard_window) or decays
/// linearly to 0 over ramp_width beyond each edge (linear_ramp).
struct GammaSchedule {
  double base = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  Quench quench = Quench::hard_window;
  double ramp_width = 0.05;

  static GammaSchedule zero() { return {}; }
  static GammaSchedule constant(double g) { return {g, 0.0, 1.0, Quench::hard_window, 0.05}; }

  void validate() const;
  double operator()(double t) const;
  double max() const { return base; }
};

/// Column k holds the state at times(k).
struct Trajectory {
  VectorXd times;
  MatrixXd points;
};

Trajectory integrate_ode(const FieldOracle& oracle, const VectorXd& x0, const StepperConfig& cfg);

/// Final states of independent ODE trajectories (one per column of x0).
MatrixXd integrate_ode_batch(const FieldOracle& oracle, const MatrixXd& x0, const StepperConfig& cfg);

/// Euler-Maruyama for dx = (b + gamma^2 s) dt + sqrt(2T) gamma dW, forward in time.
/// With gamma == 0 the update is exactly the Euler ODE update.
Trajectory integrate_sde(const FieldOracle& oracle, const VectorXd& x0, const GammaSchedule& gamma,
                         double temperature, const StepperConfig& cfg);

/// Batched Euler-Maruyama. Returns the states at each requested record time
/// (which must be grid times; matched to the nearest grid index). Columns are
/// split into blocks of kSdeBlock trajectories; each block draws from its own
/// stream seeded by (cfg.seed, block index), so results do not depend on
/// evaluation order.
inline constexpr int kSdeBlock = 256;
std::vector<MatrixXd> integrate_sde_batch(const FieldOracle& oracle, const MatrixXd& x0, const GammaSchedule& gamma,
                                          double temperature, const StepperConfig& cfg,
                                          std::span<const double> record_times);

enum class DivergenceMode { exact, hutchinson };

DivergenceMode parse_divergence_mode(const std::string& s);

struct LikelihoodResult {
  double logp;
  VectorXd x0;
};

/// log rho_1(x1) = log rho_0(x0) - int_0^1 div b dt, integrating the
/// probability-flow ODE backward from t_start (normally 1) to t_end (normally
/// 0) with the configured method. Hutchinson mode draws one Rademacher probe
/// per stage and differentiates b by central differences along it.
LikelihoodResult log_likelihood(const FieldOracle& oracle, const VectorXd& x1, const StepperConfig& cfg,
                                DivergenceMode mode);

/// Exact-mode likelihood for many points at once (one per column).
std::vector<LikelihoodResult> log_likelihood_batch(const FieldOracle& oracle, const MatrixXd& x1,
                                                   const StepperConfig& cfg);

/// Single-probe Hutchinson estimate eps^T (grad b) eps with a Rademacher eps.
double hutchinson_divergence(const FieldOracle& oracle, double t, const VectorXd& x, const VectorXd& probe);

double standard_normal_log_density(const VectorXd& x);

} // namespace difstring
