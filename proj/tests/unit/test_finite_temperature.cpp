#include <doctest.h>

#include "difstring/analytic_fields.hpp"
#include "difstring/finite_temperature.hpp"
#include "difstring/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace difstring;

namespace {

std::shared_ptr<FunctionOracle> bowl(int dim) {
  return std::make_shared<FunctionOracle>(
      dim, [](double, const MatrixXd& x) { return MatrixXd::Zero(x.rows(), x.cols()); },
      [](double, const MatrixXd& x) { return MatrixXd(-x); });
}

std::shared_ptr<FunctionOracle> constant_velocity(const VectorXd& v) {
  return std::make_shared<FunctionOracle>(
      static_cast<int>(v.size()), [v](double, const MatrixXd& x) { return MatrixXd(v.replicate(1, x.cols())); },
      [](double, const MatrixXd& x) { return MatrixXd::Zero(x.rows(), x.cols()); });
}

RegimeConfig pc(double gamma, double temperature, double eta = 0.2, double c = 0.1) {
  RegimeConfig r;
  r.regime = Regime::principal_curve;
  r.gamma = GammaSchedule::constant(gamma);
  r.temperature = temperature;
  r.eta = eta;
  r.step_constant = c;
  return r;
}

StepperConfig stepper(int n, std::uint64_t seed = 0, double t0 = 0.0, double t1 = 1.0) {
  StepperConfig c;
  c.method = StepMethod::euler;
  c.n_steps = n;
  c.t_start = t0;
  c.t_end = t1;
  c.seed = seed;
  return c;
}

VectorXd v2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

MatrixXd line_1d(std::initializer_list<double> xs) {
  MatrixXd m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return m;
}

} // namespace

TEST_CASE("nearest image breaks ties toward the lower index") {
  const MatrixXd im = line_1d({0.0, 1.0, 2.0});
  VectorXd x(1);
  x << 0.5;
  CHECK(nearest_image(im, x) == 0);
  x << 1.5;
  CHECK(nearest_image(im, x) == 1);
  x << 1.6;
  CHECK(nearest_image(im, x) == 2);
}

TEST_CASE("EMA update arithmetic") {
  StringState s;
  s.images = line_1d({0.0, 1.0, 2.0, 3.0});
  s.regime = pc(1.0, 0.5);
  WalkerEnsemble e = WalkerEnsemble::at_images(s.images, 0);
  e.walkers = line_1d({9.0, 2.0, 4.0, 9.0});
  const StringState out = ema_update(s, e, 0.25);
  CHECK(out.images(0, 0) == 0.0);
  CHECK(out.images(0, 1) == doctest::Approx(1.25));
  CHECK(out.images(0, 2) == doctest::Approx(2.5));
  CHECK(out.images(0, 3) == 3.0);
  CHECK_THROWS_AS(ema_update(s, e, 0.0), ConfigError);
  CHECK_THROWS_AS(ema_update(s, e, 1.5), ConfigError);
}

TEST_CASE("walker proposals leaving their cell are rejected") {
  StringState s;
  s.images = line_1d({0.0, 1.0, 2.0});
  s.regime = pc(0.0, 0.5);
  VectorXd v(1);
  v << 10.0;
  const auto f = constant_velocity(v);
  WalkerEnsemble e = WalkerEnsemble::at_images(s.images, 1);
  e.walkers(0, 0) = -5.0;
  const WalkerEnsemble far = walker_step(e, s, *f, 0.1); // lands on image 2
  CHECK(far.walkers(0, 1) == 1.0);
  CHECK(far.reject_counts[1] == 1);
  CHECK(far.proposal_counts[1] == 1);
  CHECK(far.walkers(0, 0) == 0.0); // endpoints clamped to the images
  const WalkerEnsemble near = walker_step(e, s, *f, 0.04);
  CHECK(near.walkers(0, 1) == doctest::Approx(1.4));
  CHECK(near.reject_counts[1] == 0);
  // Exactly on the bisector between images 1 and 2: the tie goes to 1, accepted.
  const WalkerEnsemble tie = walker_step(e, s, *f, 0.05);
  CHECK(tie.walkers(0, 1) == doctest::Approx(1.5));
  CHECK(tie.reject_counts[1] == 0);

  // Equidistant from its own image and a lower one: the tie goes to the lower image, rejected.
  StringState s4;
  s4.images = line_1d({0.0, 1.0, 2.0, 3.0});
  s4.regime = pc(0.0, 0.5);
  v << -10.0;
  const auto back = constant_velocity(v);
  const WalkerEnsemble e4 = WalkerEnsemble::at_images(s4.images, 1);
  const WalkerEnsemble lower = walker_step(e4, s4, *back, 0.05);
  CHECK(lower.walkers(0, 2) == 2.0);
  CHECK(lower.reject_counts[2] == 1);
}

TEST_CASE("walker step validation") {
  StringState s;
  s.images = line_1d({0.0, 1.0, 2.0});
  s.regime = pc(10.0, 0.5);
  const auto f = bowl(1);
  const WalkerEnsemble e = WalkerEnsemble::at_images(s.images, 0);
  CHECK_THROWS_AS(walker_step(e, s, *f, 0.01), ConfigError); // c / gamma^2 = 1e-3
  CHECK_NOTHROW(walker_step(e, s, *f, 0.001));
  s.regime.temperature = 0.0;
  CHECK_THROWS_AS(walker_step(e, s, *f, 0.001), ConfigError);
  s.regime.temperature = 0.5;
  const WalkerEnsemble wrong = WalkerEnsemble::at_images(line_1d({0.0, 1.0}), 0);
  CHECK_THROWS_AS(walker_step(wrong, s, *f, 0.001), ConfigError);
}

TEST_CASE("accepted walkers always lie in their own Voronoi cell") {
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), benchmark_mixture(2));
  StringState s = init_string_geodesic(v2(-3.0, 0.0), v2(3.0, 0.0), 20, pc(3.0, 0.7));
  s.t = 1.0;
  WalkerEnsemble e = WalkerEnsemble::at_images(s.images, 5);
  for (int k = 0; k < 500; ++k) {
    e = walker_step(e, s, *f, 0.01);
    for (int i = 1; i < 20; ++i) REQUIRE(nearest_image(s.images, e.walkers.col(i)) == i);
  }
  long rejects = 0, proposals = 0;
  for (int i = 1; i < 20; ++i) {
    rejects += e.reject_counts[static_cast<std::size_t>(i)];
    proposals += e.proposal_counts[static_cast<std::size_t>(i)];
  }
  CHECK(proposals == 19 * 500);
  CHECK(rejects > 0);
}

TEST_CASE("an unconstrained walker samples the tempered bowl") {
  // Far neighbours: the walker never reaches a bisector, so it is the
  // Euler-Maruyama OU process with stationary variance T (up to an O(dt)
  // discretization bias of 2% here).
  StringState s;
  s.images = line_1d({-100.0, 0.0, 100.0});
  s.regime = pc(2.0, 0.5);
  const auto f = bowl(1);
  WalkerEnsemble e = WalkerEnsemble::at_images(s.images, 21);
  const double dt = 0.01;
  for (int k = 0; k < 2000; ++k) e = walker_step(e, s, *f, dt);
  double sum = 0.0, sq = 0.0;
  const int n = 1000000;
  for (int k = 0; k < n; ++k) {
    e = walker_step(e, s, *f, dt);
    const double x = e.walkers(0, 1);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(var == doctest::Approx(0.5).epsilon(0.05));
  CHECK(std::abs(mean) < 0.02);
  CHECK(e.reject_counts[1] == 0);
}

TEST_CASE("with gamma = 0 the finite-temperature string is the transport string") {
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), benchmark_mixture(2));
  RegimeConfig r = pc(0.0, 0.5);
  const StringState s = init_string_geodesic(v2(-1.0, 0.5), v2(1.0, -0.2), 16, r);
  const FiniteTemperatureRun ft = run_finite_temperature_string(s, *f, stepper(200, 3));
  StringState t = s;
  t.regime = RegimeConfig{};
  const StringRun tr = run_string(t, *f, stepper(200, 3));
  CHECK((ft.final.images - tr.final.images).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("zero-temperature limit with eta = 1 reproduces the MEP regime") {
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), benchmark_mixture(2));
  RegimeConfig r = pc(2.0, 1e-12, 1.0);
  const StringState s = init_string_geodesic(v2(-1.0, 0.5), v2(1.0, -0.2), 16, r);
  const FiniteTemperatureRun ft = run_finite_temperature_string(s, *f, stepper(400, 9));
  StringState m = s;
  m.regime.regime = Regime::mep;
  m.regime.temperature = 0.0;
  const StringRun mr = run_string(m, *f, stepper(400, 9));
  CHECK((ft.final.images - mr.final.images).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("finite-temperature runs are reproducible per seed") {
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), benchmark_mixture(2));
  const StringState s = init_string_geodesic(v2(-1.0, 0.5), v2(1.0, -0.2), 12, pc(2.0, 0.5));
  const auto a = run_finite_temperature_string(s, *f, stepper(200, 4));
  const auto b = run_finite_temperature_string(s, *f, stepper(200, 4));
  const auto c = run_finite_temperature_string(s, *f, stepper(200, 5));
  CHECK(a.final.images == b.final.images);
  CHECK(a.walkers.walkers == b.walkers.walkers);
  CHECK(a.final.images != c.final.images);
  // run_string dispatches the principal_curve regime here.
  const StringRun viaRun = run_string(s, *f, stepper(200, 4));
  CHECK(viaRun.final.images == a.final.images);
  CHECK(a.diagnostics.rows.size() == 200);
}

TEST_CASE("rejection rate stays moderate on the benchmark") {
  const auto f = analytic_fields(make_schedule(ScheduleName::linear), benchmark_mixture(2));
  StringState s = init_string_geodesic(v2(-1.0, 0.3), v2(1.0, 0.3), 20, pc(3.0, 0.5));
  s.regime.gamma = GammaSchedule{3.0, 0.1, 0.95, Quench::hard_window, 0.05};
  const auto run = run_finite_temperature_string(s, *f, stepper(1000, 8));
  std::vector<double> rates;
  for (int i = 1; i < 20; ++i) {
    CHECK(run.walkers.proposal_counts[static_cast<std::size_t>(i)] == 1000);
    rates.push_back(static_cast<double>(run.walkers.reject_counts[static_cast<std::size_t>(i)]) / 1000.0);
  }
  std::nth_element(rates.begin(), rates.begin() + 9, rates.end());
  CHECK(rates[9] < 0.5);
}

TEST_CASE("finite-temperature runs need the principal_curve regime") {
  const auto f = bowl(2);
  StringState s = init_string_geodesic(v2(1, 0), v2(0, 1), 8);
  CHECK_THROWS_AS(run_finite_temperature_string(s, *f, stepper(10)), ConfigError);
}

TEST_CASE("self-consistency residual") {
  // Samples placed symmetrically around each image have their mean on it.
  const MatrixXd im = line_1d({0.0, 1.0, 2.0, 3.0});
  MatrixXd samples(1, 24);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 4; ++k) {
      samples(0, 8 * i + 2 * k) = i + 0.1 * (k + 1);
      samples(0, 8 * i + 2 * k + 1) = i - 0.1 * (k + 1);
    }
  const SelfConsistency sc = self_consistency_residual(im, samples);
  CHECK(sc.counts[0] == 8);
  CHECK(std::abs(sc.residual(1)) < 1e-12);
  CHECK(std::abs(sc.residual(2)) < 1e-12);
  CHECK(std::isnan(sc.residual(3)));
  CHECK(sc.low_occupancy[1]);
  CHECK(sc.median_interior() < 1e-12);
  CHECK_THROWS_AS(self_consistency_residual(im, MatrixXd::Zero(2, 3)), DomainError);

  // Straight string along the major axis of a Gaussian: each cell mean lies on
  // the axis, so residuals reflect only the spread along it.
  GaussianMixture g;
  g.weights = VectorXd::Ones(1);
  g.means = {VectorXd::Zero(2)};
  MatrixXd cov = MatrixXd::Zero(2, 2);
  cov.diagonal() << 4.0, 0.25;
  g.covariances = {cov};
  MatrixXd axis(2, 9);
  for (int i = 0; i < 9; ++i) axis.col(i) = v2(-2.0 + 0.5 * i, 0.0);
  const SelfConsistency gs = self_consistency_residual(axis, g, 1.0, 200000, 3);
  for (int i = 1; i < 8; ++i) CHECK(gs.residual(i) < 0.05);
}
