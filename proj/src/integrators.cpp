#include "difstring/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace difstring {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_finite(const MatrixXd& next, const MatrixXd& prev, double t_prev) {
  if (next.allFinite()) return;
  for (Eigen::Index j = 0; j < next.cols(); ++j) {
    if (!next.col(j).allFinite())
      throw DivergenceError("non-finite state during integration", t_prev, prev.col(j), static_cast<long>(j));
  }
}

MatrixXd ode_step(const FieldOracle& oracle, StepMethod method, double t, double h, const MatrixXd& x) {
  const MatrixXd k1 = oracle.velocity(t, x);
  if (method == StepMethod::euler) return x + h * k1;
  const MatrixXd xp = x + h * k1;
  const MatrixXd k2 = oracle.velocity(t + h, xp);
  return x + (0.5 * h) * (k1 + k2);
}

void check_dim(const FieldOracle& oracle, Eigen::Index rows) {
  if (rows != oracle.dim())
    throw ConfigError("state dimension " + std::to_string(rows) + " does not match oracle dimension " +
                      std::to_string(oracle.dim()));
}

MatrixXd rademacher(int rows, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  MatrixXd out(rows, 1);
  for (int i = 0; i < rows; ++i) out(i, 0) = coin(rng) ? 1.0 : -1.0;
  return out;
}

} // namespace

std::string to_string(StepMethod m) { return m == StepMethod::euler ? "euler" : "heun"; }

StepMethod parse_step_method(const std::string& s) {
  if (s == "euler") return StepMethod::euler;
  if (s == "heun") return StepMethod::heun;
  throw ConfigError("unknown step method '" + s + "' (expected euler or heun)");
}

void StepperConfig::validate() const {
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1");
  if (!(t_start >= 0.0 && t_start <= 1.0 && t_end >= 0.0 && t_end <= 1.0))
    throw ConfigError("integration times must lie in [0, 1]");
  if (t_start == t_end) throw ConfigError("t_start and t_end must differ");
}

std::string to_string(Quench q) { return q == Quench::hard_window ? "hard_window" : "linear_ramp"; }

Quench parse_quench(const std::string& s) {
  if (s == "hard_window") return Quench::hard_window;
  if (s == "linear_ramp") return Quench::linear_ramp;
  throw ConfigError("unknown quench '" + s + "' (expected hard_window or linear_ramp)");
}

void GammaSchedule::validate() const {
  if (!(base >= 0.0) || !std::isfinite(base)) throw ConfigError("gamma must be finite and nonnegative");
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw ConfigError("gamma window must satisfy 0 <= lo <= hi <= 1");
  if (quench == Quench::linear_ramp && !(ramp_width > 0.0)) throw ConfigError("ramp width must be positive");
}

double GammaSchedule::operator()(double t) const {
  if (t >= lo && t <= hi) return base;
  if (quench == Quench::hard_window) return 0.0;
  const double dist = t < lo ? lo - t : t - hi;
  return base * std::max(0.0, 1.0 - dist / ramp_width);
}

Trajectory integrate_ode(const FieldOracle& oracle, const VectorXd& x0, const StepperConfig& cfg) {
  cfg.validate();
  check_dim(oracle, x0.size());
  Trajectory out;
  out.times.resize(cfg.n_steps + 1);
  out.points.resize(x0.size(), cfg.n_steps + 1);
  out.times(0) = cfg.time(0);
  out.points.col(0) = x0;
  MatrixXd x = x0;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = cfg.time(k);
    const double h = cfg.time(k + 1) - t;
    MatrixXd next = ode_step(oracle, cfg.method, t, h, x);
    check_finite(next, x, t);
    x = std::move(next);
    out.times(k + 1) = cfg.time(k + 1);
    out.points.col(k + 1) = x.col(0);
  }
  return out;
}

MatrixXd integrate_ode_batch(const FieldOracle& oracle, const MatrixXd& x0, const StepperConfig& cfg) {
  cfg.validate();
  check_dim(oracle, x0.rows());
  MatrixXd x = x0;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = cfg.time(k);
    MatrixXd next = ode_step(oracle, cfg.method, t, cfg.time(k + 1) - t, x);
    check_finite(next, x, t);
    x = std::move(next);
  }
  return x;
}

Trajectory integrate_sde(const FieldOracle& oracle, const VectorXd& x0, const GammaSchedule& gamma,
                         double temperature, const StepperConfig& cfg) {
  cfg.validate();
  gamma.validate();
  if (!(cfg.t_start < cfg.t_end)) throw ConfigError("SDE integration runs forward in time only");
  if (!(temperature >= 0.0 && temperature <= 1.0)) throw DomainError("temperature must lie in [0, 1]");

  std::mt19937_64 rng(stream_seed(cfg.seed, 0));
  std::normal_distribution<double> normal;
  Trajectory out;
  out.times.resize(cfg.n_steps + 1);
  out.points.resize(x0.size(), cfg.n_steps + 1);
  out.times(0) = cfg.time(0);
  out.points.col(0) = x0;
  MatrixXd x = x0;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = cfg.time(k);
    const double h = cfg.time(k + 1) - t;
    const double g = gamma(t);
    MatrixXd next;
    if (g == 0.0) {
      next = x + h * oracle.velocity(t, x);
    } else {
      const FieldValues f = oracle.evaluate(t, x, kVelocity | kScore);
      next = x + h * (f.velocity + (g * g) * f.score);
      if (temperature > 0.0) {
        const double amp = std::sqrt(2.0 * temperature * h) * g;
        for (Eigen::Index i = 0; i < next.rows(); ++i) next(i, 0) += amp * normal(rng);
      }
    }
    check_finite(next, x, t);
    x = std::move(next);
    out.times(k + 1) = cfg.time(k + 1);
    out.points.col(k + 1) = x.col(0);
  }
  return out;
}

std::vector<MatrixXd> integrate_sde_batch(const FieldOracle& oracle, const MatrixXd& x0, const GammaSchedule& gamma,
                                          double temperature, const StepperConfig& cfg,
                                          std::span<const double> record_times) {
  cfg.validate();
  gamma.validate();
  if (!(cfg.t_start < cfg.t_end)) throw ConfigError("SDE integration runs forward in time only");
  if (!(temperature >= 0.0 && temperature <= 1.0)) throw DomainError("temperature must lie in [0, 1]");

  std::vector<int> record_steps;
  for (double rt : record_times) {
    const double frac = (rt - cfg.t_start) / (cfg.t_end - cfg.t_start);
    const long k = std::lround(frac * cfg.n_steps);
    if (k < 0 || k > cfg.n_steps) throw DomainError("record time outside the integration interval");
    record_steps.push_back(static_cast<int>(k));
  }

  const Eigen::Index n = x0.cols();
  const Eigen::Index blocks = (n + kSdeBlock - 1) / kSdeBlock;
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(blocks);
  for (Eigen::Index b = 0; b < blocks; ++b) rngs.emplace_back(stream_seed(cfg.seed, static_cast<std::uint64_t>(b)));
  std::normal_distribution<double> normal;

  std::vector<MatrixXd> out(record_steps.size());
  auto record = [&](int k, const MatrixXd& x) {
    for (std::size_t r = 0; r < record_steps.size(); ++r)
      if (record_steps[r] == k) out[r] = x;
  };

  MatrixXd x = x0;
  MatrixXd noise(x0.rows(), n);
  record(0, x);
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = cfg.time(k);
    const double h = cfg.time(k + 1) - t;
    const double g = gamma(t);
    MatrixXd next;
    if (g == 0.0) {
      next = x + h * oracle.velocity(t, x);
    } else {
      const FieldValues f = oracle.evaluate(t, x, kVelocity | kScore);
      next = x + h * (f.velocity + (g * g) * f.score);
      if (temperature > 0.0) {
        for (Eigen::Index b = 0; b < blocks; ++b) {
          const Eigen::Index end = std::min(n, (b + 1) * kSdeBlock);
          for (Eigen::Index j = b * kSdeBlock; j < end; ++j)
            for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = normal(rngs[b]);
        }
        next += (std::sqrt(2.0 * temperature * h) * g) * noise;
      }
    }
    check_finite(next, x, t);
    x = std::move(next);
    record(k + 1, x);
  }
  return out;
}

DivergenceMode parse_divergence_mode(const std::string& s) {
  if (s == "exact") return DivergenceMode::exact;
  if (s == "hutchinson") return DivergenceMode::hutchinson;
  throw ConfigError("unknown divergence mode '" + s + "' (expected exact or hutchinson)");
}

double standard_normal_log_density(const VectorXd& x) {
  return -0.5 * x.squaredNorm() - 0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

double hutchinson_divergence(const FieldOracle& oracle, double t, const VectorXd& x, const VectorXd& probe) {
  const double fd = 1e-4 * std::max(1.0, x.cwiseAbs().maxCoeff());
  MatrixXd pts(x.size(), 2);
  pts.col(0) = x + fd * probe;
  pts.col(1) = x - fd * probe;
  const MatrixXd v = oracle.velocity(t, pts);
  return probe.dot(v.col(0) - v.col(1)) / (2.0 * fd);
}

namespace {

void check_likelihood_config(const StepperConfig& cfg) {
  cfg.validate();
  if (cfg.t_end != 0.0 || !(cfg.t_start > cfg.t_end))
    throw ConfigError("likelihood integration runs backward from t_start to t_end = 0");
}

} // namespace

LikelihoodResult log_likelihood(const FieldOracle& oracle, const VectorXd& x1, const StepperConfig& cfg,
                                DivergenceMode mode) {
  check_likelihood_config(cfg);
  if (mode == DivergenceMode::exact && !oracle.has_divergence())
    throw CapabilityError("exact likelihood needs the divergence of the velocity");

  std::mt19937_64 rng(stream_seed(cfg.seed, 0));
  // Returns velocity and divergence (exact or single-probe estimate) at (t, x).
  auto eval = [&](double t, const VectorXd& x) -> std::pair<VectorXd, double> {
    if (mode == DivergenceMode::exact) {
      const FieldValues f = oracle.evaluate(t, x, kVelocity | kDivergence);
      return {f.velocity.col(0), f.divergence(0)};
    }
    const VectorXd probe = rademacher(static_cast<int>(x.size()), rng).col(0);
    return {velocity_at(oracle, t, x), hutchinson_divergence(oracle, t, x, probe)};
  };

  VectorXd x = x1;
  double acc = 0.0;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = cfg.time(k);
    const double h = cfg.time(k + 1) - t;
    const auto [k1, d1] = eval(t, x);
    VectorXd next;
    if (cfg.method == StepMethod::euler) {
      next = x + h * k1;
      acc += h * d1;
    } else {
      const VectorXd xp = x + h * k1;
      const auto [k2, d2] = eval(t + h, xp);
      next = x + (0.5 * h) * (k1 + k2);
      acc += 0.5 * h * (d1 + d2);
    }
    if (!next.allFinite() || !std::isfinite(acc)) throw DivergenceError("non-finite state in likelihood", t, x);
    x = std::move(next);
  }
  return {standard_normal_log_density(x) + acc, x};
}

std::vector<LikelihoodResult> log_likelihood_batch(const FieldOracle& oracle, const MatrixXd& x1,
                                                   const StepperConfig& cfg) {
  check_likelihood_config(cfg);
  if (!oracle.has_divergence()) throw CapabilityError("exact likelihood needs the divergence of the velocity");
  MatrixXd x = x1;
  VectorXd acc = VectorXd::Zero(x1.cols());
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = cfg.time(k);
    const double h = cfg.time(k + 1) - t;
    const FieldValues f1 = oracle.evaluate(t, x, kVelocity | kDivergence);
    MatrixXd next;
    if (cfg.method == StepMethod::euler) {
      next = x + h * f1.velocity;
      acc += h * f1.divergence;
    } else {
      const MatrixXd xp = x + h * f1.velocity;
      const FieldValues f2 = oracle.evaluate(t + h, xp, kVelocity | kDivergence);
      next = x + (0.5 * h) * (f1.velocity + f2.velocity);
      acc += (0.5 * h) * (f1.divergence + f2.divergence);
    }
    check_finite(next, x, t);
    x = std::move(next);
  }
  std::vector<LikelihoodResult> out;
  out.reserve(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    out.push_back({standard_normal_log_density(x.col(j)) + acc(j), x.col(j)});
  return out;
}

} // namespace difstring
