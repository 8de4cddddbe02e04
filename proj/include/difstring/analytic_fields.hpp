#pragma once

#include "difstring/field_oracle.hpp"
#include "difstring/gaussian_mixture.hpp"

#include <memory>

namespace difstring {

/// Exact fields of the interpolant between N(0, I) and a Gaussian mixture.
///
/// Component k of rho_t is N(beta mu_k, alpha^2 I + beta^2 Sigma_k). With the
/// eigendecomposition Sigma_k = U diag(lambda) U^T computed once at
/// construction, C_k(t)^{-1} and log|C_k(t)| are diagonal in U for every t,
/// so no per-time factorization (and no mutable cache) is needed.
///
/// The velocity is the exact conditional expectation E[d/dt I_t | I_t = x]:
///   b_k(x) = U diag((alpha alpha' + beta beta' lambda) / c) U^T (x - beta mu_k) + beta' mu_k,
///   c = alpha^2 + beta^2 lambda,
/// mixed with responsibilities computed in log space.
class AnalyticGmmOracle final : public FieldOracle {
public:
  AnalyticGmmOracle(Schedule<double> schedule, GaussianMixture target);

  OracleKind kind() const override { return OracleKind::analytic_gmm; }
  int dim() const override { return target_.dim(); }
  bool has_divergence() const override { return true; }
  bool has_log_density() const override { return true; }
  std::optional<Schedule<double>> schedule() const override { return schedule_; }

  FieldValues evaluate(double t, const MatrixXd& x, unsigned mask) const override;

  const GaussianMixture& target() const { return target_; }

private:
  struct Component {
    double log_weight;
    VectorXd mean;
    VectorXd lambda;
    MatrixXd basis; // empty when Sigma_k is diagonal
  };

  Schedule<double> schedule_;
  GaussianMixture target_;
  std::vector<Component> components_;
};

std::shared_ptr<AnalyticGmmOracle> analytic_fields(const Schedule<double>& schedule, const GaussianMixture& target);

/// || s_t(x) - (beta b_t(x) - beta' x) / (alpha (alpha beta' - alpha' beta)) ||.
/// Throws SingularTimeError when the denominator is below 1e-12 in magnitude.
double check_velocity_score_relation(const FieldOracle& oracle, const Schedule<double>& schedule, double t,
                                     const VectorXd& x);

/// Velocity implied by a score through the inverted relation
///   b = (s alpha (alpha beta' - alpha' beta) + beta' x) / beta.
/// Singular where beta = 0; callers clamp t away from it.
MatrixXd velocity_from_score(const Schedule<double>& schedule, double t, const MatrixXd& x, const MatrixXd& score);

/// log rho_t(x) / T, the unnormalized log-density of rho_t^(1/T).
double tempered_log_density(const FieldOracle& oracle, double t, const VectorXd& x, double temperature);

} // namespace difstring
