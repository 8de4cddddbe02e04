#include "difstring/finite_temperature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace difstring {

WalkerEnsemble WalkerEnsemble::at_images(const MatrixXd& images, std::uint64_t seed) {
  WalkerEnsemble e;
  e.walkers = images;
  const auto n = static_cast<std::size_t>(images.cols());
  e.rngs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) e.rngs.emplace_back(stream_seed(seed, i));
  e.reject_counts.assign(n, 0);
  e.proposal_counts.assign(n, 0);
  return e;
}

int nearest_image(const MatrixXd& images, const VectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < images.cols(); ++j) {
    const double d = (images.col(j) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

WalkerEnsemble walker_step(const WalkerEnsemble& ensemble, const StringState& string, const FieldOracle& oracle,
                           double dt) {
  const RegimeConfig& rc = string.regime;
  if (!(rc.temperature > 0.0)) throw ConfigError("walkers need a positive temperature");
  if (ensemble.size() != string.n_images()) throw ConfigError("one walker per string image is required");
  const double g = rc.gamma(string.t);
  if (g > 0.0 && dt > rc.step_constant / (g * g) * (1.0 + 1e-9))
    throw ConfigError("walker time step exceeds c / gamma^2");

  WalkerEnsemble out = ensemble;
  const Eigen::Index last = string.images.cols() - 1;
  out.walkers.col(0) = string.images.col(0);
  out.walkers.col(last) = string.images.col(last);
  if (last < 2) return out;

  const MatrixXd x = ensemble.walkers.middleCols(1, last - 1);
  MatrixXd drift;
  if (g == 0.0) {
    drift = oracle.velocity(string.t, x);
  } else {
    FieldValues f = oracle.evaluate(string.t, x, kVelocity | kScore);
    drift = f.velocity + (g * g) * f.score;
  }
  const double amp = std::sqrt(2.0 * rc.temperature * dt) * g;
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 1; i < last; ++i) {
    VectorXd prop = x.col(i - 1) + dt * drift.col(i - 1);
    auto& rng = out.rngs[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < prop.size(); ++r) prop(r) += amp * normal(rng);
    if (escaped(prop)) throw DivergenceError("diverging walker", string.t, x.col(i - 1), static_cast<long>(i));
    ++out.proposal_counts[static_cast<std::size_t>(i)];
    if (nearest_image(string.images, prop) == i)
      out.walkers.col(i) = prop;
    else
      ++out.reject_counts[static_cast<std::size_t>(i)];
  }
  return out;
}

StringState ema_update(const StringState& string, const WalkerEnsemble& ensemble, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("ema rate eta must lie in (0, 1]");
  StringState out = string;
  const Eigen::Index last = string.images.cols() - 1;
  for (Eigen::Index i = 1; i < last; ++i)
    out.images.col(i) = (1.0 - eta) * string.images.col(i) + eta * ensemble.walkers.col(i);
  return out;
}

FiniteTemperatureRun run_finite_temperature_string(const StringState& state, const FieldOracle& oracle,
                                                   const StepperConfig& cfg, const RunOptions& options) {
  state.regime.validate();
  cfg.validate();
  if (state.regime.regime != Regime::principal_curve)
    throw ConfigError("finite-temperature strings need the principal_curve regime");
  if (cfg.t_start != state.t) throw ConfigError("stepper t_start must equal the string's current time");
  if (!(cfg.t_end > cfg.t_start)) throw ConfigError("strings evolve forward in time");
  if (state.n_images() < 2) throw ConfigError("a string needs at least two images");

  const RegimeConfig& rc = state.regime;
  FiniteTemperatureRun run;
  StringState cur = state;
  WalkerEnsemble ens = WalkerEnsemble::at_images(state.images, cfg.seed);

  auto record = [&](int step, double displacement) {
    DiagnosticRow row;
    row.step = step;
    row.t = cur.t;
    row.logp = image_log_likelihood(oracle, cur.t, cur.images, options.likelihood_steps, cfg.seed);
    row.arc_length = arc_length(cur.images);
    row.max_displacement = displacement;
    run.diagnostics.rows.push_back(std::move(row));
  };
  auto snapshot = [&](int step) {
    if (options.on_snapshot && options.snapshot_every > 0 &&
        (step % options.snapshot_every == 0 || step == cfg.n_steps))
      options.on_snapshot(cur, step);
  };

  snapshot(0);
  const Eigen::Index last = cur.images.cols() - 1;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = cfg.time(k);
    const double h = cfg.time(k + 1) - t;

    // Probability-flow carry of the whole string.
    const MatrixXd b1 = oracle.velocity(t, cur.images);
    MatrixXd carried = cur.images + h * b1;
    if (cfg.method == StepMethod::heun)
      carried = cur.images + (0.5 * h) * (b1 + oracle.velocity(t + h, carried));
    if (escaped(carried))
      for (Eigen::Index j = 0; j <= last; ++j)
        if (escaped(carried.col(j)))
          throw DivergenceError("diverging string image", t, cur.images.col(j), static_cast<long>(j));

    StringState snap{carried, t, rc};
    ens = walker_step(ens, snap, oracle, h);
    const StringState pulled = ema_update(snap, ens, rc.eta);
    const MatrixXd rep = reparametrize<double>(pulled.images, rc.spline);

    for (Eigen::Index i = 1; i < last; ++i) {
      const VectorXd shifted = ens.walkers.col(i) + (rep.col(i) - pulled.images.col(i));
      if (nearest_image(rep, shifted) == i) ens.walkers.col(i) = shifted;
    }
    ens.walkers.col(0) = rep.col(0);
    ens.walkers.col(last) = rep.col(last);

    const double disp = (rep - cur.images).colwise().norm().maxCoeff();
    cur.images = rep;
    cur.t = cfg.time(k + 1);
    const int step = k + 1;
    if (step == cfg.n_steps || (options.record_every > 0 && step % options.record_every == 0)) record(step, disp);
    snapshot(step);
  }
  run.final = std::move(cur);
  run.walkers = std::move(ens);
  return run;
}

double SelfConsistency::median_interior() const {
  std::vector<double> v;
  for (Eigen::Index i = 1; i + 1 < residual.size(); ++i)
    if (std::isfinite(residual(i))) v.push_back(residual(i));
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

SelfConsistency self_consistency_residual(const MatrixXd& images, const MatrixXd& samples) {
  if (images.rows() != samples.rows()) throw DomainError("samples and string differ in dimension");
  const Eigen::Index n = images.cols();
  MatrixXd sums = MatrixXd::Zero(images.rows(), n);
  SelfConsistency out;
  out.counts.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const int k = nearest_image(images, samples.col(j));
    sums.col(k) += samples.col(j);
    ++out.counts[static_cast<std::size_t>(k)];
  }
  out.residual.resize(n);
  out.low_occupancy.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const long c = out.counts[static_cast<std::size_t>(i)];
    out.low_occupancy[static_cast<std::size_t>(i)] = c < SelfConsistency::kMinOccupancy;
    out.residual(i) = c == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : (images.col(i) - sums.col(i) / static_cast<double>(c)).norm();
  }
  return out;
}

SelfConsistency self_consistency_residual(const MatrixXd& images, const GaussianMixture& target, double temperature,
                                          int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return self_consistency_residual(images, sample_tempered(target, temperature, n_samples, rng));
}

} // namespace difstring
