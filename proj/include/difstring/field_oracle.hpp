#pragma once

#include "difstring/core.hpp"
#include "difstring/schedule.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace difstring {

enum class OracleKind { analytic_gmm, learned_net, user_supplied };

/// Bit flags selecting which quantities FieldOracle::evaluate computes.
enum FieldMask : unsigned {
  kVelocity = 1u << 0,
  kScore = 1u << 1,
  kDivergence = 1u << 2,
  kLogDensity = 1u << 3,
};

/// Field values at a batch of points (columns). Unrequested members are empty.
struct FieldValues {
  MatrixXd velocity;
  MatrixXd score;
  VectorXd divergence;
  VectorXd log_density;
};

/// Time-dependent velocity b_t and score s_t, optionally with the exact
/// divergence of b_t and log rho_t.
///
/// All members are const and must be safe to call concurrently. Points are
/// passed column-wise so one call can evaluate a whole string or sample set.
class FieldOracle {
public:
  virtual ~FieldOracle() = default;

  virtual OracleKind kind() const = 0;
  virtual int dim() const = 0;
  virtual bool has_divergence() const { return false; }
  virtual bool has_log_density() const { return false; }
  /// The interpolant schedule the fields belong to, when known.
  virtual std::optional<Schedule<double>> schedule() const { return std::nullopt; }

  virtual FieldValues evaluate(double t, const MatrixXd& x, unsigned mask) const = 0;

  MatrixXd velocity(double t, const MatrixXd& x) const { return evaluate(t, x, kVelocity).velocity; }
  MatrixXd score(double t, const MatrixXd& x) const { return evaluate(t, x, kScore).score; }
  VectorXd divergence(double t, const MatrixXd& x) const;
  VectorXd log_density(double t, const MatrixXd& x) const;
};

// Single-point conveniences.
VectorXd velocity_at(const FieldOracle& oracle, double t, const VectorXd& x);
VectorXd score_at(const FieldOracle& oracle, double t, const VectorXd& x);
double log_density_at(const FieldOracle& oracle, double t, const VectorXd& x);

/// Oracle assembled from user callbacks (kind = user_supplied). Velocity and
/// score are batch callbacks; divergence and log-density are optional.
class FunctionOracle final : public FieldOracle {
public:
  using BatchField = std::function<MatrixXd(double, const MatrixXd&)>;
  using BatchScalar = std::function<VectorXd(double, const MatrixXd&)>;

  FunctionOracle(int dim, BatchField velocity, BatchField score, BatchScalar divergence = {},
                 BatchScalar log_density = {});

  OracleKind kind() const override { return OracleKind::user_supplied; }
  int dim() const override { return dim_; }
  bool has_divergence() const override { return static_cast<bool>(divergence_); }
  bool has_log_density() const override { return static_cast<bool>(log_density_); }
  FieldValues evaluate(double t, const MatrixXd& x, unsigned mask) const override;

private:
  int dim_;
  BatchField velocity_, score_;
  BatchScalar divergence_, log_density_;
};

/// b = 0, s = 0, div b = 0; log-density of N(0, I) at every time.
std::shared_ptr<FieldOracle> make_zero_oracle(int dim);

/// Evaluates an inner oracle at a fixed time, optionally with the velocity
/// switched off. Used for frozen-landscape experiments and reference strings.
class FrozenOracle final : public FieldOracle {
public:
  FrozenOracle(std::shared_ptr<const FieldOracle> inner, double frozen_time, bool disable_velocity);

  OracleKind kind() const override { return inner_->kind(); }
  int dim() const override { return inner_->dim(); }
  bool has_divergence() const override { return disable_velocity_ || inner_->has_divergence(); }
  bool has_log_density() const override { return inner_->has_log_density(); }
  FieldValues evaluate(double t, const MatrixXd& x, unsigned mask) const override;

private:
  std::shared_ptr<const FieldOracle> inner_;
  double frozen_time_;
  bool disable_velocity_;
};

} // namespace difstring
