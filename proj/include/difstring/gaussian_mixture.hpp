#pragma once

#include "difstring/core.hpp"
#include "difstring/schedule.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <string>
#include <vector>

namespace difstring {

/// Finite Gaussian mixture sum_k w_k N(mu_k, Sigma_k) in R^d.
struct GaussianMixture {
  VectorXd weights;
  std::vector<VectorXd> means;
  std::vector<MatrixXd> covariances;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  int size() const { return static_cast<int>(weights.size()); }

  /// Throws ConfigError unless weights are a probability vector (1e-12) and
  /// every covariance is symmetric (1e-12) with a positive minimum eigenvalue.
  void validate() const;
};

GaussianMixture standard_normal(int dim);

/// Two-component benchmark target: means (+-3, 0, ..., 0), covariance
/// R(+-60deg) diag(7, 0.3) R^T padded with the identity, equal weights.
/// Requires dim >= 2.
GaussianMixture benchmark_mixture(int dim);

/// Law of I_t = alpha_t x0 + beta_t x1: component k becomes
/// N(beta_t mu_k, alpha_t^2 I + beta_t^2 Sigma_k) with unchanged weight.
GaussianMixture gmm_marginal_at(const Schedule<double>& schedule, const GaussianMixture& target, double t);

/// Exact log-density of the mixture at each column of x.
VectorXd log_density(const GaussianMixture& mixture, const MatrixXd& x);

/// n i.i.d. draws, one per column.
MatrixXd sample(const GaussianMixture& mixture, int n, std::mt19937_64& rng);

/// n i.i.d. draws from the tempered law proportional to rho^(1/T).
///
/// Exact rejection sampler: for p = 1/T >= 1, (sum_k a_k)^p <= K^(p-1) sum_k a_k^p
/// and each a_k^p is an unnormalized Gaussian with covariance T Sigma_k. At
/// T = 1 every proposal is accepted. Acceptance degrades like K^(1 - 1/T).
MatrixXd sample_tempered(const GaussianMixture& mixture, double temperature, int n, std::mt19937_64& rng);

// {"weights":[...], "means":[[...]], "covariances":[[[...]]]}
nlohmann::json to_json(const GaussianMixture& mixture);
GaussianMixture mixture_from_json(const nlohmann::json& j);
GaussianMixture load_mixture(const std::string& path);

} // namespace difstring
