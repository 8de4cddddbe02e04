#include <doctest.h>

#include "difstring/analytic_fields.hpp"
#include "difstring/gaussian_mixture.hpp"
#include "difstring/integrators.hpp"

#include "stats.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace difstring;

namespace {

// b(t, x) = -x: exact flow x(t) = x0 exp(-(t - t0)), divergence -d.
std::shared_ptr<FunctionOracle> decay_oracle(int dim) {
  return std::make_shared<FunctionOracle>(
      dim, [](double, const MatrixXd& x) { return MatrixXd(-x); }, [](double, const MatrixXd& x) { return MatrixXd(-x); },
      [dim](double, const MatrixXd& x) { return VectorXd(VectorXd::Constant(x.cols(), -dim)); });
}

StepperConfig cfg(StepMethod m, int n, double t0 = 0.0, double t1 = 1.0, std::uint64_t seed = 0) {
  StepperConfig c;
  c.method = m;
  c.n_steps = n;
  c.t_start = t0;
  c.t_end = t1;
  c.seed = seed;
  return c;
}

} // namespace

TEST_CASE("zero velocity leaves the state unchanged") {
  const auto zero = make_zero_oracle(3);
  VectorXd x0(3);
  x0 << 1.0, -2.0, 0.5;
  for (auto m : {StepMethod::euler, StepMethod::heun}) {
    const Trajectory tr = integrate_ode(*zero, x0, cfg(m, 37));
    CHECK(tr.points.cols() == 38);
    CHECK(tr.times(0) == 0.0);
    CHECK(tr.times(37) == 1.0);
    CHECK(tr.points.col(37) == x0);
  }
}

TEST_CASE("constant velocity is integrated exactly") {
  VectorXd v(2);
  v << 0.3, -1.7;
  FunctionOracle c(
      2, [v](double, const MatrixXd& x) { return MatrixXd(v.replicate(1, x.cols())); },
      [](double, const MatrixXd& x) { return MatrixXd::Zero(x.rows(), x.cols()); });
  VectorXd x0(2);
  x0 << 1.0, 1.0;
  for (auto m : {StepMethod::euler, StepMethod::heun}) {
    const Trajectory tr = integrate_ode(c, x0, cfg(m, 50, 0.2, 0.7));
    CHECK((tr.points.col(50) - (x0 + 0.5 * v)).norm() < 1e-14);
  }
}

TEST_CASE("stepper configuration validation") {
  const auto zero = make_zero_oracle(1);
  CHECK_THROWS_AS(integrate_ode(*zero, VectorXd::Zero(1), cfg(StepMethod::euler, 0)), ConfigError);
  CHECK_THROWS_AS(integrate_ode(*zero, VectorXd::Zero(1), cfg(StepMethod::euler, 10, 0.3, 0.3)), ConfigError);
  CHECK_THROWS_AS(integrate_ode(*zero, VectorXd::Zero(2), cfg(StepMethod::euler, 10)), ConfigError);
  CHECK_THROWS_AS(parse_step_method("rk4"), ConfigError);
  CHECK(parse_step_method("heun") == StepMethod::heun);
}

TEST_CASE("convergence orders: Euler first, Heun second") {
  const auto f = decay_oracle(1);
  VectorXd x0(1);
  x0 << 1.0;
  const double exact = std::exp(-1.0);
  for (auto [m, order] : {std::pair{StepMethod::euler, 1.0}, std::pair{StepMethod::heun, 2.0}}) {
    std::vector<double> errs;
    for (int n : {50, 100, 200, 400}) errs.push_back(std::abs(integrate_ode(*f, x0, cfg(m, n)).points(0, n) - exact));
    for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
      const double slope = std::log2(errs[i] / errs[i + 1]);
      CHECK(std::abs(slope - order) < 0.3);
    }
  }
}

TEST_CASE("forward then backward probability flow is a round trip") {
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), benchmark_mixture(2));
  std::mt19937_64 rng(7);
  const MatrixXd x1 = sample(benchmark_mixture(2), 20, rng);
  const MatrixXd z = integrate_ode_batch(*f, x1, cfg(StepMethod::heun, 1000, 1.0, 0.0));
  const MatrixXd back = integrate_ode_batch(*f, z, cfg(StepMethod::heun, 1000, 0.0, 1.0));
  CHECK((back - x1).cwiseAbs().maxCoeff() < 1e-4);

  // Batch agrees with single trajectories.
  const Trajectory one = integrate_ode(*f, x1.col(3), cfg(StepMethod::heun, 1000, 1.0, 0.0));
  CHECK((one.points.col(1000) - z.col(3)).norm() < 1e-12);
}

TEST_CASE("gamma schedule windows and quench") {
  GammaSchedule g{4.0, 0.1, 0.95, Quench::hard_window, 0.05};
  CHECK(g(0.05) == 0.0);
  CHECK(g(0.1) == 4.0);
  CHECK(g(0.5) == 4.0);
  CHECK(g(0.95) == 4.0);
  CHECK(g(0.96) == 0.0);
  g.quench = Quench::linear_ramp;
  CHECK(g(0.975) == doctest::Approx(2.0));
  CHECK(g(1.0) == 0.0);
  CHECK(g(0.075) == doctest::Approx(2.0));
  CHECK(GammaSchedule::zero()(0.5) == 0.0);
  CHECK(GammaSchedule::constant(3.0)(1.0) == 3.0);
  GammaSchedule bad{-1.0, 0.0, 1.0, Quench::hard_window, 0.05};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  GammaSchedule inverted{1.0, 0.8, 0.2, Quench::hard_window, 0.05};
  CHECK_THROWS_AS(inverted.validate(), ConfigError);
  CHECK_THROWS_AS(parse_quench("soft"), ConfigError);
}

TEST_CASE("SDE with gamma = 0 reproduces the Euler ODE bitwise") {
  const auto f = analytic_fields(make_schedule(ScheduleName::trigonometric), benchmark_mixture(2));
  VectorXd x0(2);
  x0 << 0.4, -1.1;
  const auto c = cfg(StepMethod::euler, 300, 0.0, 1.0, 99);
  const Trajectory ode = integrate_ode(*f, x0, c);
  const Trajectory sde = integrate_sde(*f, x0, GammaSchedule::zero(), 0.7, c);
  CHECK(ode.points == sde.points);
}

TEST_CASE("SDE is reproducible per seed and differs across seeds") {
  const auto f = decay_oracle(2);
  const VectorXd x0 = VectorXd::Zero(2);
  const auto a = integrate_sde(*f, x0, GammaSchedule::constant(1.0), 1.0, cfg(StepMethod::euler, 100, 0, 1, 5));
  const auto b = integrate_sde(*f, x0, GammaSchedule::constant(1.0), 1.0, cfg(StepMethod::euler, 100, 0, 1, 5));
  const auto c = integrate_sde(*f, x0, GammaSchedule::constant(1.0), 1.0, cfg(StepMethod::euler, 100, 0, 1, 6));
  CHECK(a.points == b.points);
  CHECK(a.points != c.points);
  CHECK_THROWS_AS(integrate_sde(*f, x0, GammaSchedule::constant(1.0), -0.1, cfg(StepMethod::euler, 10)), DomainError);
}

TEST_CASE("Langevin with b = 0, s = -x has stationary variance T") {
  // dx = -gamma^2 x dt + sqrt(2T) gamma dW is an OU process with variance T.
  const double temp = 0.5;
  FunctionOracle ou(
      1, [](double, const MatrixXd& x) { return MatrixXd::Zero(x.rows(), x.cols()); },
      [](double, const MatrixXd& x) { return MatrixXd(-x); });
  const MatrixXd x0 = MatrixXd::Zero(1, 20000);
  const std::vector<double> rec{1.0};
  const auto out = integrate_sde_batch(ou, x0, GammaSchedule::constant(2.0), temp,
                                       cfg(StepMethod::euler, 2000, 0.0, 1.0, 3), rec);
  std::vector<double> v(out[0].data(), out[0].data() + out[0].size());
  // Relax time 1/gamma^2 = 0.25, so after t = 1 the variance is T (1 - e^-8).
  CHECK(teststats::variance(v) == doctest::Approx(temp).epsilon(0.05));
  CHECK(std::abs(teststats::mean(v)) < 0.02);
}

TEST_CASE("batched SDE does not depend on batch composition within blocks") {
  const auto f = decay_oracle(1);
  const MatrixXd x0 = MatrixXd::Zero(1, 600);
  const std::vector<double> rec{0.5, 1.0};
  const auto c = cfg(StepMethod::euler, 100, 0.0, 1.0, 11);
  const auto full = integrate_sde_batch(*f, x0, GammaSchedule::constant(1.0), 1.0, c, rec);
  const auto again = integrate_sde_batch(*f, x0, GammaSchedule::constant(1.0), 1.0, c, rec);
  REQUIRE(full.size() == 2);
  CHECK(full[1] == again[1]);
  const auto first = integrate_sde_batch(*f, x0.leftCols(256), GammaSchedule::constant(1.0), 1.0, c, rec);
  CHECK(first[1] == full[1].leftCols(256));
}

TEST_CASE("likelihood of the base at t = 0 and of a Gaussian target") {
  const auto zero = make_zero_oracle(2);
  VectorXd x(2);
  x << 0.3, -0.8;
  const auto r0 = log_likelihood(*zero, x, cfg(StepMethod::heun, 10, 1.0, 0.0), DivergenceMode::exact);
  CHECK(r0.logp == doctest::Approx(standard_normal_log_density(x)).epsilon(1e-14));

  // N(mu, diag(4, 0.25)) target with the linear schedule.
  GaussianMixture g;
  g.weights = VectorXd::Ones(1);
  VectorXd mu(2);
  mu << 1.0, -1.0;
  g.means = {mu};
  MatrixXd cov = MatrixXd::Zero(2, 2);
  cov.diagonal() << 4.0, 0.25;
  g.covariances = {cov};
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), g);
  for (int i = 0; i < 5; ++i) {
    const VectorXd y = mu + VectorXd::Random(2);
    const double exact = log_density(g, y)(0);
    const auto r = log_likelihood(*f, y, cfg(StepMethod::heun, 400, 1.0, 0.0), DivergenceMode::exact);
    CHECK(std::abs(r.logp - exact) < 1e-3);
  }
  const auto batch = log_likelihood_batch(*f, mu.replicate(1, 3), cfg(StepMethod::heun, 400, 1.0, 0.0));
  CHECK(std::abs(batch[2].logp - log_density(g, mu)(0)) < 1e-3);
}

TEST_CASE("likelihood needs a divergence in exact mode") {
  FunctionOracle no_div(
      1, [](double, const MatrixXd& x) { return MatrixXd(-x); }, [](double, const MatrixXd& x) { return MatrixXd(-x); });
  CHECK_THROWS_AS(log_likelihood(no_div, VectorXd::Zero(1), cfg(StepMethod::heun, 10, 1.0, 0.0), DivergenceMode::exact),
                  CapabilityError);
  CHECK_NOTHROW(
      log_likelihood(no_div, VectorXd::Zero(1), cfg(StepMethod::heun, 10, 1.0, 0.0), DivergenceMode::hutchinson));
}

TEST_CASE("Hutchinson probes are unbiased for the divergence") {
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), benchmark_mixture(3));
  VectorXd x(3);
  x << 0.5, -1.0, 0.3;
  const double exact = f->divergence(0.6, x)(0);
  std::mt19937_64 rng(41);
  std::bernoulli_distribution coin(0.5);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    VectorXd p(3);
    for (int k = 0; k < 3; ++k) p(k) = coin(rng) ? 1.0 : -1.0;
    sum += hutchinson_divergence(*f, 0.6, x, p);
  }
  CHECK(std::abs(sum / n - exact) < 0.05 * std::max(1.0, std::abs(exact)));

  // A Hutchinson likelihood averages toward the exact one.
  const auto exact_l = log_likelihood(*f, x, cfg(StepMethod::heun, 200, 1.0, 0.0), DivergenceMode::exact);
  double acc = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s)
    acc += log_likelihood(*f, x, cfg(StepMethod::heun, 200, 1.0, 0.0, s), DivergenceMode::hutchinson).logp;
  CHECK(std::abs(acc / 50 - exact_l.logp) < 0.1);
}

TEST_CASE("divergence of the flow is reported at the last finite state") {
  FunctionOracle blowup(
      1, [](double, const MatrixXd& x) { return MatrixXd(x.array().square() * 1e3); },
      [](double, const MatrixXd& x) { return MatrixXd(-x); });
  VectorXd x0(1);
  x0 << 10.0;
  try {
    integrate_ode(blowup, x0, cfg(StepMethod::euler, 100));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.last_finite_state.allFinite());
    CHECK(e.time >= 0.0);
    CHECK(e.time < 1.0);
  }
}
