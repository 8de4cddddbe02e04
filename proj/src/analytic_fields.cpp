#include "difstring/analytic_fields.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace difstring {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

bool is_diagonal(const MatrixXd& m) {
  MatrixXd off = m;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff() == 0.0;
}
} // namespace

AnalyticGmmOracle::AnalyticGmmOracle(Schedule<double> schedule, GaussianMixture target)
    : schedule_(schedule), target_(std::move(target)) {
  target_.validate();
  for (int k = 0; k < target_.size(); ++k) {
    Component c;
    c.log_weight = std::log(target_.weights(k));
    c.mean = target_.means[k];
    const MatrixXd& cov = target_.covariances[k];
    if (is_diagonal(cov)) {
      c.lambda = cov.diagonal();
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
      c.lambda = es.eigenvalues();
      c.basis = es.eigenvectors();
    }
    components_.push_back(std::move(c));
  }
}

FieldValues AnalyticGmmOracle::evaluate(double t, const MatrixXd& x, unsigned mask) const {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("field time must lie in [0, 1]");
  if (x.rows() != dim()) throw DomainError("point dimension does not match the oracle");

  const Eigen::Index n = x.cols();
  const int k_count = static_cast<int>(components_.size());
  const double a = schedule_.alpha(t);
  const double b = schedule_.beta(t);
  const double aad = schedule_.alpha_alpha_dot(t);
  const double bd = schedule_.beta_dot(t);
  const int d = dim();

  const bool want_v = mask & (kVelocity | kDivergence);
  const bool want_s = mask & (kScore | kDivergence);
  const bool want_div = mask & kDivergence;

  // Per component: log N_k, score g_k, velocity b_k, trace of the Jacobian of b_k.
  MatrixXd logc(k_count, n);
  std::vector<MatrixXd> g(k_count), bk(k_count);
  VectorXd tr_a(k_count);

  for (int k = 0; k < k_count; ++k) {
    const Component& c = components_[k];
    const VectorXd var = (a * a + b * b * c.lambda.array()).matrix();
    const MatrixXd centered = x.colwise() - b * c.mean;
    const MatrixXd y = c.basis.size() ? MatrixXd(c.basis.transpose() * centered) : centered;
    const MatrixXd z = y.array().colwise() / var.array(); // C^{-1}(x - m) in eigen-coordinates

    logc.row(k) = (-0.5 * (y.array() * z.array()).colwise().sum() - 0.5 * var.array().log().sum() -
                   0.5 * d * kLog2Pi + c.log_weight)
                      .matrix();
    if (want_s) g[k] = c.basis.size() ? MatrixXd(-(c.basis * z)) : MatrixXd(-z);
    if (want_v) {
      const VectorXd gain = ((aad + b * bd * c.lambda.array()) / var.array()).matrix();
      const MatrixXd gz = y.array().colwise() * gain.array();
      bk[k] = c.basis.size() ? MatrixXd(c.basis * gz) : gz;
      bk[k].colwise() += bd * c.mean;
      tr_a(k) = gain.sum();
    }
  }

  const Eigen::RowVectorXd mx = logc.colwise().maxCoeff();
  const MatrixXd w = (logc.rowwise() - mx).array().exp();
  const Eigen::RowVectorXd total = w.colwise().sum();
  const MatrixXd resp = w.array().rowwise() / total.array();

  FieldValues out;
  MatrixXd s, v;
  if (want_s) {
    s = MatrixXd::Zero(d, n);
    for (int k = 0; k < k_count; ++k) s += g[k] * resp.row(k).asDiagonal();
  }
  if (want_v) {
    v = MatrixXd::Zero(d, n);
    for (int k = 0; k < k_count; ++k) v += bk[k] * resp.row(k).asDiagonal();
  }
  if (want_div) {
    // div b = sum_k r_k (tr A_k + g_k . b_k) - s . b, from grad r_k = r_k (g_k - s).
    VectorXd div = VectorXd::Zero(n);
    for (int k = 0; k < k_count; ++k)
      div += (resp.row(k).array() * (tr_a(k) + (g[k].array() * bk[k].array()).colwise().sum())).matrix().transpose();
    div -= (s.array() * v.array()).colwise().sum().matrix().transpose();
    out.divergence = std::move(div);
  }
  if (mask & kLogDensity) out.log_density = (mx.array() + total.array().log()).matrix().transpose();
  if (mask & kScore) out.score = std::move(s);
  if (mask & kVelocity) out.velocity = std::move(v);
  return out;
}

std::shared_ptr<AnalyticGmmOracle> analytic_fields(const Schedule<double>& schedule, const GaussianMixture& target) {
  return std::make_shared<AnalyticGmmOracle>(schedule, target);
}

double check_velocity_score_relation(const FieldOracle& oracle, const Schedule<double>& schedule, double t,
                                     const VectorXd& x) {
  const double den = schedule.score_denominator(t);
  if (std::abs(den) < 1e-12) throw SingularTimeError("velocity-score relation is singular at this time", t);
  const FieldValues f = oracle.evaluate(t, x, kVelocity | kScore);
  const VectorXd implied = (schedule.beta(t) * f.velocity.col(0) - schedule.beta_dot(t) * x) / den;
  return (f.score.col(0) - implied).norm();
}

MatrixXd velocity_from_score(const Schedule<double>& schedule, double t, const MatrixXd& x, const MatrixXd& score) {
  const double b = schedule.beta(t);
  if (std::abs(b) < 1e-12) throw SingularTimeError("velocity from score is singular where beta vanishes", t);
  return (schedule.score_denominator(t) * score + schedule.beta_dot(t) * x) / b;
}

double tempered_log_density(const FieldOracle& oracle, double t, const VectorXd& x, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
  if (temperature > 1.0) throw DomainError("temperature must not exceed 1");
  if (!oracle.has_log_density()) throw CapabilityError("tempered log-density needs an exact log-density");
  return log_density_at(oracle, t, x) / temperature;
}

} // namespace difstring
