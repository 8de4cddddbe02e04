#include "difstring/field_oracle.hpp"

#include <cmath>

namespace difstring {

VectorXd FieldOracle::divergence(double t, const MatrixXd& x) const {
  if (!has_divergence()) throw CapabilityError("oracle does not provide the divergence of the velocity");
  return evaluate(t, x, kDivergence).divergence;
}

VectorXd FieldOracle::log_density(double t, const MatrixXd& x) const {
  if (!has_log_density()) throw CapabilityError("oracle does not provide the log-density");
  return evaluate(t, x, kLogDensity).log_density;
}

VectorXd velocity_at(const FieldOracle& oracle, double t, const VectorXd& x) {
  return oracle.velocity(t, x).col(0);
}

VectorXd score_at(const FieldOracle& oracle, double t, const VectorXd& x) {
  return oracle.score(t, x).col(0);
}

double log_density_at(const FieldOracle& oracle, double t, const VectorXd& x) {
  return oracle.log_density(t, x)(0);
}

FunctionOracle::FunctionOracle(int dim, BatchField velocity, BatchField score, BatchScalar divergence,
                               BatchScalar log_density)
    : dim_(dim), velocity_(std::move(velocity)), score_(std::move(score)), divergence_(std::move(divergence)),
      log_density_(std::move(log_density)) {
  if (dim_ < 1) throw ConfigError("oracle dimension must be positive");
  if (!velocity_ || !score_) throw ConfigError("function oracle needs velocity and score callbacks");
}

FieldValues FunctionOracle::evaluate(double t, const MatrixXd& x, unsigned mask) const {
  FieldValues out;
  if (mask & kVelocity) out.velocity = velocity_(t, x);
  if (mask & kScore) out.score = score_(t, x);
  if (mask & kDivergence) {
    if (!divergence_) throw CapabilityError("oracle does not provide the divergence of the velocity");
    out.divergence = divergence_(t, x);
  }
  if (mask & kLogDensity) {
    if (!log_density_) throw CapabilityError("oracle does not provide the log-density");
    out.log_density = log_density_(t, x);
  }
  return out;
}

std::shared_ptr<FieldOracle> make_zero_oracle(int dim) {
  auto zeros = [dim](double, const MatrixXd& x) -> MatrixXd { return MatrixXd::Zero(dim, x.cols()); };
  auto zero_div = [](double, const MatrixXd& x) -> VectorXd { return VectorXd::Zero(x.cols()); };
  auto std_normal = [dim](double, const MatrixXd& x) -> VectorXd {
    return (-0.5 * x.colwise().squaredNorm().array() - 0.5 * dim * std::log(2.0 * M_PI)).transpose();
  };
  return std::make_shared<FunctionOracle>(dim, zeros, zeros, zero_div, std_normal);
}

FrozenOracle::FrozenOracle(std::shared_ptr<const FieldOracle> inner, double frozen_time, bool disable_velocity)
    : inner_(std::move(inner)), frozen_time_(frozen_time), disable_velocity_(disable_velocity) {
  if (!inner_) throw ConfigError("frozen oracle needs an inner oracle");
}

FieldValues FrozenOracle::evaluate(double /*t*/, const MatrixXd& x, unsigned mask) const {
  unsigned inner_mask = mask;
  if (disable_velocity_) inner_mask &= ~(kVelocity | kDivergence);
  FieldValues out = inner_->evaluate(frozen_time_, x, inner_mask);
  if (disable_velocity_) {
    if (mask & kVelocity) out.velocity = MatrixXd::Zero(x.rows(), x.cols());
    if (mask & kDivergence) out.divergence = VectorXd::Zero(x.cols());
  }
  return out;
}

} // namespace difstring
