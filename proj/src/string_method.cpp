#include "difstring/string_method.hpp"

#include "difstring/finite_temperature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace difstring {

std::string to_string(Regime r) {
  switch (r) {
  case Regime::transport: return "transport";
  case Regime::mep: return "mep";
  case Regime::principal_curve: return "principal_curve";
  }
  return "unknown";
}

Regime parse_regime(const std::string& s) {
  if (s == "transport") return Regime::transport;
  if (s == "mep") return Regime::mep;
  if (s == "principal_curve" || s == "principal-curve") return Regime::principal_curve;
  throw ConfigError("unknown regime '" + s + "' (expected transport, mep or principal_curve)");
}

void RegimeConfig::validate() const {
  gamma.validate();
  if (!(temperature >= 0.0 && temperature <= 1.0)) throw ConfigError("temperature must lie in [0, 1]");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("ema rate eta must lie in (0, 1]");
  if (!(step_constant > 0.0)) throw ConfigError("step constant must be positive");
  switch (regime) {
  case Regime::transport:
    if (gamma.base != 0.0) throw ConfigError("transport regime requires gamma = 0");
    break;
  case Regime::mep:
    if (temperature != 0.0) throw ConfigError("mep regime requires temperature = 0");
    break;
  case Regime::principal_curve:
    if (!(temperature > 0.0)) throw ConfigError("principal_curve regime requires temperature > 0");
    break;
  }
}

double arc_length(const MatrixXd& images) { return segment_lengths<double>(images).sum(); }

MatrixXd geodesic_images(const VectorXd& z0, const VectorXd& z1, int n_segments) {
  if (z0.size() != z1.size()) throw ConfigError("endpoints must have the same dimension");
  if (n_segments < 1) throw ConfigError("a string needs at least two images");
  MatrixXd out(z0.size(), n_segments + 1);
  out.col(0) = z0;
  out.col(n_segments) = z1;
  for (int i = 1; i < n_segments; ++i) {
    const double a = 0.5 * std::numbers::pi * i / n_segments;
    out.col(i) = std::cos(a) * z0 + std::sin(a) * z1;
  }
  return out;
}

StringState init_string_geodesic(const VectorXd& z0, const VectorXd& z1, int n_segments,
                                 const RegimeConfig& regime) {
  StringState s;
  s.regime = regime;
  if (n_segments < 1) throw ConfigError("a string needs at least two images");
  if (z0.size() == z1.size() && z0 == z1) {
    warn("degenerate string: both endpoints coincide");
    s.images = z0.replicate(1, n_segments + 1);
    return s;
  }
  s.images = reparametrize<double>(geodesic_images(z0, z1, n_segments), regime.spline);
  return s;
}

std::pair<VectorXd, VectorXd> encode_endpoints(const FieldOracle& oracle, const VectorXd& xa, const VectorXd& xb,
                                               const StepperConfig& cfg) {
  if (!(cfg.t_start > cfg.t_end)) throw ConfigError("endpoint encoding integrates backward in time");
  MatrixXd x(xa.size(), 2);
  x.col(0) = xa;
  x.col(1) = xb;
  const MatrixXd z = integrate_ode_batch(oracle, x, cfg);
  return {z.col(0), z.col(1)};
}

namespace {

// Moves all images from t to t + h. Column 0 and the last column use b only.
MatrixXd move_images(const MatrixXd& x, const FieldOracle& oracle, const RegimeConfig& regime, double t, double h,
                     StepMethod method) {
  const Eigen::Index last = x.cols() - 1;
  auto drift = [&](double tt, const MatrixXd& pts) -> MatrixXd {
    const double g = regime.regime == Regime::mep ? regime.gamma(tt) : 0.0;
    if (g == 0.0) return oracle.velocity(tt, pts);
    FieldValues f = oracle.evaluate(tt, pts, kVelocity | kScore);
    if (last > 1) f.velocity.middleCols(1, last - 1) += (g * g) * f.score.middleCols(1, last - 1);
    return std::move(f.velocity);
  };
  const MatrixXd k1 = drift(t, x);
  if (method == StepMethod::euler) return x + h * k1;
  const MatrixXd k2 = drift(t + h, x + h * k1);
  return x + (0.5 * h) * (k1 + k2);
}

void check_step_contract(const RegimeConfig& regime, double t, double dt) {
  if (regime.regime != Regime::transport) {
    const double g = regime.gamma(t);
    if (g > 0.0 && dt > regime.step_constant / (g * g) * (1.0 + 1e-9))
      throw ConfigError("time step " + std::to_string(dt) + " exceeds c / gamma^2 = " +
                        std::to_string(regime.step_constant / (g * g)));
  }
}

void check_images(const MatrixXd& next, const MatrixXd& prev, double t) {
  if (!escaped(next)) return;
  for (Eigen::Index j = 0; j < next.cols(); ++j)
    if (escaped(next.col(j)))
      throw DivergenceError("diverging string image", t, prev.col(j), static_cast<long>(j));
}

StringState advance(const StringState& state, const FieldOracle& oracle, double t_next, StepMethod method) {
  const double dt = t_next - state.t;
  check_step_contract(state.regime, state.t, dt);
  MatrixXd moved = move_images(state.images, oracle, state.regime, state.t, dt, method);
  check_images(moved, state.images, state.t);
  StringState out;
  out.images = reparametrize<double>(moved, state.regime.spline);
  out.t = t_next;
  out.regime = state.regime;
  return out;
}

} // namespace

StringState string_step(const StringState& state, const FieldOracle& oracle, double dt, StepMethod method) {
  state.regime.validate();
  if (state.regime.regime == Regime::principal_curve)
    throw ConfigError("principal_curve strings are stepped with walkers (run_finite_temperature_string)");
  if (state.n_images() < 2) throw ConfigError("a string needs at least two images");
  if (!(dt > 0.0)) throw ConfigError("string time step must be positive");
  if (state.t + dt > 1.0 + 1e-12) throw ConfigError("string step would pass t = 1");
  return advance(state, oracle, std::min(1.0, state.t + dt), method);
}

double PathDiagnostics::peak_interior_logp() const {
  if (rows.empty()) throw Error("no diagnostics recorded");
  const VectorXd& lp = rows.back().logp;
  if (lp.size() < 3) throw Error("string has no interior images");
  return lp.segment(1, lp.size() - 2).maxCoeff();
}

int default_string_steps(const RegimeConfig& regime, double t0, int min_steps) {
  const double g = regime.regime == Regime::transport ? 0.0 : regime.gamma.max();
  const double needed = std::ceil((1.0 - t0) * g * g / regime.step_constant);
  return std::max(min_steps, static_cast<int>(needed));
}

VectorXd image_log_likelihood(const FieldOracle& oracle, double t, const MatrixXd& images, int steps,
                              std::uint64_t seed) {
  if (oracle.has_log_density()) return oracle.log_density(t, images);
  VectorXd out(images.cols());
  if (t == 0.0) {
    for (Eigen::Index j = 0; j < images.cols(); ++j) out(j) = standard_normal_log_density(images.col(j));
    return out;
  }
  StepperConfig cfg;
  cfg.n_steps = steps;
  cfg.t_start = t;
  cfg.t_end = 0.0;
  cfg.seed = seed;
  if (oracle.has_divergence()) {
    const auto res = log_likelihood_batch(oracle, images, cfg);
    for (Eigen::Index j = 0; j < images.cols(); ++j) out(j) = res[j].logp;
  } else {
    for (Eigen::Index j = 0; j < images.cols(); ++j) {
      cfg.seed = stream_seed(seed, static_cast<std::uint64_t>(j));
      out(j) = log_likelihood(oracle, images.col(j), cfg, DivergenceMode::hutchinson).logp;
    }
  }
  return out;
}

StringRun run_string(const StringState& state, const FieldOracle& oracle, const StepperConfig& cfg,
                     const RunOptions& options) {
  state.regime.validate();
  cfg.validate();
  if (cfg.t_start != state.t) throw ConfigError("stepper t_start must equal the string's current time");
  if (!(cfg.t_end > cfg.t_start)) throw ConfigError("strings evolve forward in time");
  if (state.n_images() < 2) throw ConfigError("a string needs at least two images");

  if (state.regime.regime == Regime::principal_curve) {
    FiniteTemperatureRun ft = run_finite_temperature_string(state, oracle, cfg, options);
    return {std::move(ft.final), std::move(ft.diagnostics)};
  }

  StringRun run;
  StringState cur = state;
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
  for (int k = 0; k < cfg.n_steps; ++k) {
    StringState next = advance(cur, oracle, cfg.time(k + 1), cfg.method);
    const double disp = (next.images - cur.images).colwise().norm().maxCoeff();
    cur = std::move(next);
    const int step = k + 1;
    if (step == cfg.n_steps || (options.record_every > 0 && step % options.record_every == 0)) record(step, disp);
    snapshot(step);
  }
  run.final = std::move(cur);
  return run;
}

VectorXd mep_residual(const StringState& state, const FieldOracle& oracle, double t) {
  const Eigen::Index n = state.images.cols() - 1;
  if (n < 2) return VectorXd();
  const MatrixXd interior = state.images.middleCols(1, n - 1);
  const MatrixXd s = oracle.score(t, interior);
  VectorXd out(n - 1);
  for (Eigen::Index i = 1; i < n; ++i) {
    const VectorXd tangent = state.images.col(i + 1) - state.images.col(i - 1);
    const double len = tangent.norm();
    if (!(len > 0.0)) throw DegenerateTangentError("zero-length tangent at a string image", static_cast<long>(i));
    const VectorXd tau = tangent / len;
    const VectorXd si = s.col(i - 1);
    out(i - 1) = (si - si.dot(tau) * tau).norm();
  }
  return out;
}

} // namespace difstring
