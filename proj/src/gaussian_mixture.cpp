#include "difstring/gaussian_mixture.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <numbers>

namespace difstring {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Returns the lower Cholesky factor, or throws if the matrix is not SPD.
MatrixXd cholesky_lower(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  return llt.matrixL();
}

} // namespace

void GaussianMixture::validate() const {
  const int k = size();
  if (k == 0) throw ConfigError("mixture has no components");
  if (static_cast<int>(means.size()) != k || static_cast<int>(covariances.size()) != k)
    throw ConfigError("mixture weights/means/covariances have different lengths");
  const int d = dim();
  if (d == 0) throw ConfigError("mixture dimension is zero");
  if ((weights.array() < 0.0).any()) throw ConfigError("mixture weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
  for (int i = 0; i < k; ++i) {
    if (means[i].size() != d) throw ConfigError("mixture means have inconsistent dimensions");
    const MatrixXd& c = covariances[i];
    if (c.rows() != d || c.cols() != d) throw ConfigError("covariance has wrong shape");
    if (!c.allFinite() || !means[i].allFinite()) throw ConfigError("mixture parameters must be finite");
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) throw ConfigError("covariance is not positive definite");
  }
}

GaussianMixture standard_normal(int dim) {
  if (dim < 1) throw ConfigError("dimension must be positive");
  GaussianMixture g;
  g.weights = VectorXd::Ones(1);
  g.means = {VectorXd::Zero(dim)};
  g.covariances = {MatrixXd::Identity(dim, dim)};
  return g;
}

GaussianMixture benchmark_mixture(int dim) {
  if (dim < 2) throw ConfigError("the appendix_c preset needs dim >= 2");
  const double off = 6.7 * std::numbers::sqrt3 / 4.0;
  GaussianMixture g;
  g.weights = VectorXd::Constant(2, 0.5);
  for (double sign : {+1.0, -1.0}) {
    VectorXd mu = VectorXd::Zero(dim);
    mu(0) = 3.0 * sign;
    MatrixXd cov = MatrixXd::Identity(dim, dim);
    cov(0, 0) = 7.9 / 4.0;
    cov(1, 1) = 21.3 / 4.0;
    cov(0, 1) = cov(1, 0) = sign * off;
    g.means.push_back(std::move(mu));
    g.covariances.push_back(std::move(cov));
  }
  return g;
}

GaussianMixture gmm_marginal_at(const Schedule<double>& schedule, const GaussianMixture& target, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time must lie in [0, 1]");
  const double a = schedule.alpha(t);
  const double b = schedule.beta(t);
  const int d = target.dim();
  GaussianMixture out;
  out.weights = target.weights;
  for (int k = 0; k < target.size(); ++k) {
    out.means.push_back(b * target.means[k]);
    out.covariances.push_back(a * a * MatrixXd::Identity(d, d) + b * b * target.covariances[k]);
  }
  return out;
}

VectorXd log_density(const GaussianMixture& mixture, const MatrixXd& x) {
  const int d = mixture.dim();
  const int k = mixture.size();
  MatrixXd comp(k, x.cols());
  for (int c = 0; c < k; ++c) {
    Eigen::LLT<MatrixXd> llt(mixture.covariances[c]);
    const MatrixXd y = llt.matrixL().solve(x.colwise() - mixture.means[c]);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    comp.row(c) = (-0.5 * y.colwise().squaredNorm().array() - 0.5 * logdet - 0.5 * d * kLog2Pi +
                   std::log(mixture.weights(c)))
                      .matrix();
  }
  const Eigen::RowVectorXd mx = comp.colwise().maxCoeff();
  return (mx.array() + (comp.rowwise() - mx).array().exp().colwise().sum().log()).transpose();
}

MatrixXd sample(const GaussianMixture& mixture, int n, std::mt19937_64& rng) {
  const int d = mixture.dim();
  std::vector<MatrixXd> chol;
  for (const auto& c : mixture.covariances) chol.push_back(cholesky_lower(c));
  std::discrete_distribution<int> pick(mixture.weights.data(), mixture.weights.data() + mixture.size());
  std::normal_distribution<double> normal;
  MatrixXd out(d, n);
  VectorXd z(d);
  for (int i = 0; i < n; ++i) {
    const int c = pick(rng);
    for (int j = 0; j < d; ++j) z(j) = normal(rng);
    out.col(i) = mixture.means[c] + chol[c] * z;
  }
  return out;
}

MatrixXd sample_tempered(const GaussianMixture& mixture, double temperature, int n, std::mt19937_64& rng) {
  if (!(temperature > 0.0 && temperature <= 1.0)) throw DomainError("temperature must lie in (0, 1]");
  if (temperature == 1.0) return sample(mixture, n, rng);

  const double p = 1.0 / temperature;
  const int d = mixture.dim();
  const int k = mixture.size();

  // a_k(x)^p = w_k^p N_k(x)^p = w_k^p c_k N(x; mu_k, T Sigma_k) with
  // c_k = (2 pi)^{d(1-p)/2} |Sigma_k|^{(1-p)/2} T^{d/2}.
  GaussianMixture proposal;
  VectorXd log_mass(k);
  for (int c = 0; c < k; ++c) {
    Eigen::LLT<MatrixXd> llt(mixture.covariances[c]);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    log_mass(c) = p * std::log(mixture.weights(c)) + 0.5 * d * (1.0 - p) * kLog2Pi + 0.5 * (1.0 - p) * logdet +
                  0.5 * d * std::log(temperature);
    proposal.means.push_back(mixture.means[c]);
    proposal.covariances.push_back(temperature * mixture.covariances[c]);
  }
  proposal.weights = (log_mass.array() - log_mass.maxCoeff()).exp();
  proposal.weights /= proposal.weights.sum();

  // Accept with probability (sum_k a_k)^p / (K^(p-1) sum_k a_k^p), all in log space.
  MatrixXd out(d, n);
  int filled = 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int batch = std::max(256, n);
  while (filled < n) {
    const MatrixXd cand = sample(proposal, batch, rng);
    const VectorXd log_rho = log_density(mixture, cand);
    // log sum_k a_k^p = log sum_k exp(p log a_k)
    MatrixXd comp(k, batch);
    for (int c = 0; c < k; ++c) {
      GaussianMixture single;
      single.weights = VectorXd::Ones(1);
      single.means = {mixture.means[c]};
      single.covariances = {mixture.covariances[c]};
      comp.row(c) = (p * (log_density(single, cand).array() + std::log(mixture.weights(c)))).transpose();
    }
    for (int i = 0; i < batch && filled < n; ++i) {
      const double mx = comp.col(i).maxCoeff();
      const double log_bound = (p - 1.0) * std::log(static_cast<double>(k)) + mx +
                               std::log((comp.col(i).array() - mx).exp().sum());
      const double log_accept = p * log_rho(i) - log_bound;
      if (std::log(unif(rng)) < log_accept) out.col(filled++) = cand.col(i);
    }
  }
  return out;
}

nlohmann::json to_json(const GaussianMixture& mixture) {
  nlohmann::json j;
  j["weights"] = std::vector<double>(mixture.weights.data(), mixture.weights.data() + mixture.size());
  j["means"] = nlohmann::json::array();
  j["covariances"] = nlohmann::json::array();
  for (int c = 0; c < mixture.size(); ++c) {
    const VectorXd& m = mixture.means[c];
    j["means"].push_back(std::vector<double>(m.data(), m.data() + m.size()));
    nlohmann::json rows = nlohmann::json::array();
    const MatrixXd& cov = mixture.covariances[c];
    for (int r = 0; r < cov.rows(); ++r) {
      std::vector<double> row(cov.cols());
      for (int q = 0; q < cov.cols(); ++q) row[q] = cov(r, q);
      rows.push_back(row);
    }
    j["covariances"].push_back(rows);
  }
  return j;
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
  GaussianMixture g;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "weights" && key != "means" && key != "covariances")
        throw ConfigError("unknown mixture key '" + key + "'");
    }
    const auto w = j.at("weights").get<std::vector<double>>();
    g.weights = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    for (const auto& m : j.at("means")) {
      const auto v = m.get<std::vector<double>>();
      g.means.emplace_back(Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    for (const auto& c : j.at("covariances")) {
      const auto rows = c.get<std::vector<std::vector<double>>>();
      MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != m.cols()) throw ConfigError("ragged covariance matrix");
        for (std::size_t q = 0; q < rows[r].size(); ++q) m(r, q) = rows[r][q];
      }
      g.covariances.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed mixture JSON: ") + e.what());
  }
  g.validate();
  return g;
}

GaussianMixture load_mixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mixture file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse mixture file '" + path + "': " + e.what());
  }
  return mixture_from_json(j);
}

} // namespace difstring
