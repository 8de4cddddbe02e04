#include "commands.hpp"

#include "difstring/finite_temperature.hpp"
#include "difstring/io.hpp"
#include "difstring/oracles.hpp"
#include "difstring/score_net.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <set>

#ifndef DIFSTRING_VERSION
#define DIFSTRING_VERSION "0.1.0"
#endif

namespace difstring::cli {

namespace fs = std::filesystem;

std::string tool_version() { return std::string("difstring ") + DIFSTRING_VERSION; }

void RunConfig::validate() const {
  if (mixture.empty()) {
    if (preset != "appendix_c" && preset != "standard_normal")
      throw ConfigError("unknown preset '" + preset + "' (expected appendix_c or standard_normal)");
    if (dim < 1 || (preset == "appendix_c" && dim < 2)) throw ConfigError("preset dimension too small");
  }
  parse_schedule_name(schedule);
  make_regime(*this).validate();
  if (images < 2) throw ConfigError("a string needs at least two images");
  if (!(t0 >= 0.0 && t0 < 1.0)) throw ConfigError("t0 must lie in [0, 1)");
  if (!endpoints.empty() && endpoints.size() != 2) throw ConfigError("endpoints must list exactly two points");
  parse_step_method(encode_method);
  parse_step_method(method);
  if (encode_steps < 1 || n_steps < 0 || snapshot_every < 0 || record_every < 0 || likelihood_steps < 1 ||
      likelihood_n_steps < 1)
    throw ConfigError("step counts must be positive (n_steps, snapshot_every, record_every may be 0)");
  parse_divergence_mode(divergence);
  if (train_batch_size < 1 || train_iterations < 0 || eval_times < 1 || eval_samples < 1)
    throw ConfigError("training and evaluation sizes must be positive");
  if (!(learning_rate > 0.0) || !(final_learning_rate > 0.0)) throw ConfigError("learning rates must be positive");
  for (int w : hidden)
    if (w < 1) throw ConfigError("hidden widths must be positive");
  if (!(oracle_t >= 0.0 && oracle_t <= 1.0)) throw ConfigError("oracle_t must lie in [0, 1]");
  GridSpec{grid_lo, grid_hi, grid_n}.validate();
  if (oracle_iterations < 1 || !(oracle_step > 0.0) || oracle_samples < 1)
    throw ConfigError("oracle budgets must be positive");
}

nlohmann::json RunConfig::to_json() const {
  return {{"preset", preset},
          {"dim", dim},
          {"mixture", mixture},
          {"schedule", schedule},
          {"regime", regime},
          {"gamma", gamma},
          {"gamma_window", gamma_window},
          {"quench", quench},
          {"ramp_width", ramp_width},
          {"temperature", temperature},
          {"eta", eta},
          {"images", images},
          {"spline", spline},
          {"step_constant", step_constant},
          {"t0", t0},
          {"endpoints", endpoints},
          {"encode", encode},
          {"encode_method", encode_method},
          {"encode_steps", encode_steps},
          {"method", method},
          {"n_steps", n_steps},
          {"snapshot_every", snapshot_every},
          {"record_every", record_every},
          {"likelihood_steps", likelihood_steps},
          {"seed", seed},
          {"input", input},
          {"divergence", divergence},
          {"likelihood_n_steps", likelihood_n_steps},
          {"train_batch_size", train_batch_size},
          {"train_iterations", train_iterations},
          {"learning_rate", learning_rate},
          {"final_learning_rate", final_learning_rate},
          {"hidden", hidden},
          {"eval_times", eval_times},
          {"eval_samples", eval_samples},
          {"identity_model", identity_model},
          {"oracle_t", oracle_t},
          {"grid_lo", grid_lo},
          {"grid_hi", grid_hi},
          {"grid_n", grid_n},
          {"oracle_iterations", oracle_iterations},
          {"oracle_step", oracle_step},
          {"oracle_samples", oracle_samples},
          {"out", out}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig c;
  const nlohmann::json known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (key == "tool_version" || key == "command") continue;
    if (!known.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  };
  get("preset", c.preset);
  get("dim", c.dim);
  get("mixture", c.mixture);
  get("schedule", c.schedule);
  get("regime", c.regime);
  get("gamma", c.gamma);
  get("gamma_window", c.gamma_window);
  get("quench", c.quench);
  get("ramp_width", c.ramp_width);
  get("temperature", c.temperature);
  get("eta", c.eta);
  get("images", c.images);
  get("spline", c.spline);
  get("step_constant", c.step_constant);
  get("t0", c.t0);
  get("endpoints", c.endpoints);
  get("encode", c.encode);
  get("encode_method", c.encode_method);
  get("encode_steps", c.encode_steps);
  get("method", c.method);
  get("n_steps", c.n_steps);
  get("snapshot_every", c.snapshot_every);
  get("record_every", c.record_every);
  get("likelihood_steps", c.likelihood_steps);
  get("seed", c.seed);
  get("input", c.input);
  get("divergence", c.divergence);
  get("likelihood_n_steps", c.likelihood_n_steps);
  get("train_batch_size", c.train_batch_size);
  get("train_iterations", c.train_iterations);
  get("learning_rate", c.learning_rate);
  get("final_learning_rate", c.final_learning_rate);
  get("hidden", c.hidden);
  get("eval_times", c.eval_times);
  get("eval_samples", c.eval_samples);
  get("identity_model", c.identity_model);
  get("oracle_t", c.oracle_t);
  get("grid_lo", c.grid_lo);
  get("grid_hi", c.grid_hi);
  get("grid_n", c.grid_n);
  get("oracle_iterations", c.oracle_iterations);
  get("oracle_step", c.oracle_step);
  get("oracle_samples", c.oracle_samples);
  get("out", c.out);
  return c;
}

GaussianMixture make_target(const RunConfig& cfg) {
  if (!cfg.mixture.empty()) return load_mixture(cfg.mixture);
  if (cfg.preset == "appendix_c") return benchmark_mixture(cfg.dim);
  if (cfg.preset == "standard_normal") return standard_normal(cfg.dim);
  throw ConfigError("unknown preset '" + cfg.preset + "'");
}

RegimeConfig make_regime(const RunConfig& cfg) {
  RegimeConfig r;
  r.regime = parse_regime(cfg.regime);
  r.gamma.base = cfg.gamma;
  r.gamma.lo = cfg.gamma_window[0];
  r.gamma.hi = cfg.gamma_window[1];
  r.gamma.quench = parse_quench(cfg.quench);
  r.gamma.ramp_width = cfg.ramp_width;
  r.temperature = cfg.temperature;
  r.eta = cfg.eta;
  r.spline = parse_spline_kind(cfg.spline);
  r.step_constant = cfg.step_constant;
  return r;
}

std::array<VectorXd, 2> data_endpoints(const RunConfig& cfg, const GaussianMixture& target) {
  if (cfg.endpoints.empty()) {
    if (target.size() < 2) throw ConfigError("endpoints are required for single-component targets");
    return {target.means[0], target.means[1]};
  }
  std::array<VectorXd, 2> out;
  for (int k = 0; k < 2; ++k) {
    const auto& p = cfg.endpoints[static_cast<std::size_t>(k)];
    if (static_cast<int>(p.size()) != target.dim()) throw ConfigError("endpoint dimension does not match the target");
    out[k] = Eigen::Map<const VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  }
  return out;
}

namespace {

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  fs::create_directories(out);
  return out;
}

void write_manifest(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
  nlohmann::json m = cfg.to_json();
  m["tool_version"] = tool_version();
  m["command"] = command;
  write_json(dir / "manifest.json", m);
}

std::string padded(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", step);
  return buf;
}

} // namespace

int cmd_string_run(const RunConfig& cfg_in, std::ostream& log) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  const GaussianMixture target = make_target(cfg);
  const Schedule<double> sched(parse_schedule_name(cfg.schedule));
  const auto oracle = analytic_fields(sched, target);
  const RegimeConfig regime = make_regime(cfg);
  const auto [xa, xb] = data_endpoints(cfg, target);

  VectorXd z0 = xa, z1 = xb;
  if (cfg.encode) {
    StepperConfig enc;
    enc.method = parse_step_method(cfg.encode_method);
    enc.n_steps = cfg.encode_steps;
    enc.t_start = 1.0;
    enc.t_end = cfg.t0;
    std::tie(z0, z1) = encode_endpoints(*oracle, xa, xb, enc);
  }
  StringState state = init_string_geodesic(z0, z1, cfg.images - 1, regime);
  state.t = cfg.t0;

  if (cfg.n_steps == 0) cfg.n_steps = default_string_steps(regime, cfg.t0);
  StepperConfig step;
  step.method = parse_step_method(cfg.method);
  step.n_steps = cfg.n_steps;
  step.t_start = cfg.t0;
  step.t_end = 1.0;
  step.seed = cfg.seed;

  const fs::path dir = prepare_out(cfg);
  RunOptions opts;
  opts.record_every = cfg.record_every;
  opts.snapshot_every = cfg.snapshot_every;
  opts.likelihood_steps = cfg.likelihood_steps;
  opts.on_snapshot = [&](const StringState& s, int k) {
    write_atomic(dir / ("string_" + padded(k) + ".csv"), string_csv(s.images, s.t));
  };

  log << "running " << cfg.regime << " string: " << cfg.images << " images, " << cfg.n_steps << " steps\n";
  PathDiagnostics diag;
  StringState final_state;
  if (regime.regime == Regime::principal_curve) {
    FiniteTemperatureRun run = run_finite_temperature_string(state, *oracle, step, opts);
    write_atomic(dir / "walkers.csv", walkers_csv(run.walkers));
    diag = std::move(run.diagnostics);
    final_state = std::move(run.final);
  } else {
    StringRun run = run_string(state, *oracle, step, opts);
    diag = std::move(run.diagnostics);
    final_state = std::move(run.final);
  }
  write_atomic(dir / "string_final.csv", string_csv(final_state.images, final_state.t));
  write_atomic(dir / "diagnostics.csv", diagnostics_csv(diag));
  write_manifest(dir, cfg, "run");
  log << "peak interior log-likelihood " << format_double(diag.rows.back().logp.size() > 2 ? diag.peak_interior_logp()
                                                                                           : diag.rows.back().logp.maxCoeff())
      << '\n';
  return kExitOk;
}

int cmd_likelihood(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.input.empty()) throw ConfigError("likelihood needs an input CSV (--input or \"input\")");
  const GaussianMixture target = make_target(cfg);
  const auto oracle = analytic_fields(Schedule<double>(parse_schedule_name(cfg.schedule)), target);
  const MatrixXd x = read_points_csv(cfg.input, target.dim());
  StepperConfig lc;
  lc.method = StepMethod::heun;
  lc.n_steps = cfg.likelihood_n_steps;
  lc.t_start = 1.0;
  lc.t_end = 0.0;
  lc.seed = cfg.seed;
  const DivergenceMode mode = parse_divergence_mode(cfg.divergence);

  std::string csv = "id,logp\n";
  if (x.cols() > 0) {
    std::vector<double> logp(static_cast<std::size_t>(x.cols()));
    if (mode == DivergenceMode::exact) {
      const auto res = log_likelihood_batch(*oracle, x, lc);
      for (std::size_t j = 0; j < res.size(); ++j) logp[j] = res[j].logp;
    } else {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        StepperConfig cj = lc;
        cj.seed = stream_seed(cfg.seed, static_cast<std::uint64_t>(j));
        logp[static_cast<std::size_t>(j)] = log_likelihood(*oracle, x.col(j), cj, mode).logp;
      }
    }
    for (std::size_t j = 0; j < logp.size(); ++j) csv += std::to_string(j) + "," + format_double(logp[j]) + "\n";
  }
  const fs::path dir = prepare_out(cfg);
  write_atomic(dir / "likelihood.csv", csv);
  write_manifest(dir, cfg, "likelihood");
  log << "wrote " << x.cols() << " log-likelihoods\n";
  return kExitOk;
}

int cmd_score_benchmark(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const GaussianMixture target = make_target(cfg);
  const Schedule<double> sched(parse_schedule_name(cfg.schedule));
  const auto reference = analytic_fields(sched, target);
  const fs::path dir = prepare_out(cfg);

  std::shared_ptr<const FieldOracle> model;
  if (cfg.identity_model) {
    model = reference;
  } else {
    TrainConfig tc;
    tc.batch_size = cfg.train_batch_size;
    tc.iterations = cfg.train_iterations;
    tc.learning_rate = cfg.learning_rate;
    tc.final_learning_rate = cfg.final_learning_rate;
    tc.hidden = cfg.hidden;
    tc.seed = cfg.seed;
    log << "training score model: " << tc.iterations << " iterations\n";
    ScoreTraining trained = train_score_model(target, sched, tc);
    write_json(dir / "model.json", trained.model.to_json());
    model = std::make_shared<ScoreModelOracle>(std::make_shared<const MlpScoreModel>(std::move(trained.model)));
  }
  const std::vector<double> times = midpoint_grid(cfg.eval_times);
  const auto rows = relative_score_error_curve(*model, *reference, times, cfg.eval_samples, stream_seed(cfg.seed, 7));
  write_atomic(dir / "error_curve.csv", error_curve_csv(rows));
  write_manifest(dir, cfg, "score-benchmark");
  return kExitOk;
}

int cmd_oracle(const std::string& which, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const GaussianMixture target = make_target(cfg);
  const Schedule<double> sched(parse_schedule_name(cfg.schedule));
  const auto oracle = analytic_fields(sched, target);
  const fs::path dir = prepare_out(cfg);
  const GridSpec grid{cfg.grid_lo, cfg.grid_hi, cfg.grid_n};

  if (which == "saddle") {
    std::optional<std::array<VectorXd, 2>> seeds;
    if (target.size() >= 2 || !cfg.endpoints.empty()) {
      const auto ends = data_endpoints(cfg, target);
      seeds = std::array<VectorXd, 2>{sched.beta(cfg.oracle_t) * ends[0], sched.beta(cfg.oracle_t) * ends[1]};
    }
    const SaddleResult r = locate_saddle_2d(*oracle, cfg.oracle_t, grid, seeds);
    nlohmann::json j{{"has_barrier", r.has_barrier}, {"t", cfg.oracle_t}};
    if (r.has_barrier) {
      j["point"] = std::vector<double>(r.point.data(), r.point.data() + r.point.size());
      j["log_density"] = r.log_density;
      write_atomic(dir / "saddle.csv", string_csv(r.point, cfg.oracle_t));
    }
    write_json(dir / "saddle.json", j);
    log << (r.has_barrier ? "saddle found\n" : "no barrier\n");
  } else if (which == "mep") {
    const auto ends = data_endpoints(cfg, target);
    FrozenMepOptions o;
    o.max_iterations = cfg.oracle_iterations;
    o.step = cfg.oracle_step;
    const ReferenceCurve r = frozen_mep_string(*oracle, cfg.oracle_t, straight_string(ends[0], ends[1], cfg.images - 1), o);
    write_atomic(dir / "mep.csv", string_csv(r.images, cfg.oracle_t));
    log << "reference MEP converged in " << r.iterations << " iterations\n";
  } else if (which == "principal-curve") {
    const auto ends = data_endpoints(cfg, target);
    std::mt19937_64 rng(cfg.seed);
    const MatrixXd samples = sample_tempered(target, cfg.temperature > 0.0 ? cfg.temperature : 1.0,
                                             cfg.oracle_samples, rng);
    HastieOptions o;
    o.max_iterations = cfg.oracle_iterations;
    const ReferenceCurve r = hastie_principal_curve(samples, straight_string(ends[0], ends[1], cfg.images - 1), o);
    write_atomic(dir / "principal_curve.csv", string_csv(r.images, 1.0));
    log << "reference principal curve after " << r.iterations << " iterations\n";
  } else {
    throw ConfigError("unknown oracle '" + which + "' (expected saddle, mep or principal-curve)");
  }
  write_manifest(dir, cfg, "oracle " + which);
  return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& log) {
  CLI::App app{"String methods on the fields of a diffusion model", "difstring"};
  app.require_subcommand(1);

  std::string config_path, out, preset, regime;
  std::optional<std::uint64_t> seed;
  std::optional<int> dim, images;
  std::optional<double> gamma, temperature, eta;
  std::string input, oracle_kind;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration (a manifest works too)");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--preset", preset, "Target preset: appendix_c or standard_normal");
    sub->add_option("--dim", dim, "Target dimension");
    sub->add_option("--regime", regime, "transport, mep or principal_curve");
    sub->add_option("--gamma", gamma, "Base gamma");
    sub->add_option("--temperature", temperature, "Temperature T");
    sub->add_option("--images", images, "Number of string images");
    sub->add_option("--eta", eta, "EMA rate");
  };
  CLI::App* run = app.add_subcommand("run", "Evolve a string and write snapshots, diagnostics and a manifest");
  CLI::App* lik = app.add_subcommand("likelihood", "Log-likelihoods of points read from a CSV");
  CLI::App* bench = app.add_subcommand("score-benchmark", "Train a score model and write its relative error curve");
  CLI::App* orc = app.add_subcommand("oracle", "Brute-force references: saddle, mep, principal-curve");
  for (CLI::App* s : {run, lik, bench, orc}) add_common(s);
  lik->add_option("--input", input, "CSV of points, one per row");
  orc->add_option("kind", oracle_kind, "saddle, mep or principal-curve")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_json(read_json(config_path));
    if (!out.empty()) cfg.out = out;
    if (seed) cfg.seed = *seed;
    if (!preset.empty()) {
      cfg.preset = preset;
      cfg.mixture.clear();
    }
    if (dim) cfg.dim = *dim;
    if (!regime.empty()) cfg.regime = regime;
    if (gamma) cfg.gamma = *gamma;
    if (temperature) cfg.temperature = *temperature;
    if (images) cfg.images = *images;
    if (eta) cfg.eta = *eta;
    if (!input.empty()) cfg.input = input;

    if (*run) return cmd_string_run(cfg, log);
    if (*lik) return cmd_likelihood(cfg, log);
    if (*bench) return cmd_score_benchmark(cfg, log);
    return cmd_oracle(oracle_kind, cfg, log);
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CapabilityError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    log << "divergence: " << e.what() << " at t=" << format_double(e.time);
    if (e.index >= 0) log << " (index " << e.index << ")";
    log << '\n';
    return kExitRuntime;
  } catch (const TrainingDivergenceError& e) {
    log << "training diverged at iteration " << e.iteration << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

} // namespace difstring::cli
