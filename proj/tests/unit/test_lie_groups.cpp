#include <doctest.h>

#include "difstring/lie_groups.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace difstring;
using Rot = Rotation<double>;
using Motion = RigidMotion<double>;
using V3 = Eigen::Vector3d;

namespace {

constexpr double kPi = std::numbers::pi;

V3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  V3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

Rot random_rotation(std::mt19937_64& rng, double max_angle = kPi - 0.01) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Rot::from_axis_angle(random_unit(rng) * u(rng));
}

double rot_distance(const Rot& a, const Rot& b) { return (b * a.inverse()).angle(); }

double motion_distance(const Motion& a, const Motion& b, double scale = 1.0) {
  const double r = scale * rot_distance(a.rotation, b.rotation);
  return std::sqrt((b.translation - a.translation).squaredNorm() + r * r);
}

// Smooth path with deliberately uneven steps; increments stay well below pi.
std::vector<Rot> uneven_path(std::mt19937_64& rng, int n) {
  std::vector<Rot> p{random_rotation(rng)};
  std::uniform_real_distribution<double> u(0.05, 0.6);
  for (int i = 1; i <= n; ++i) p.push_back(Rot::from_axis_angle(random_unit(rng) * u(rng)) * p.back());
  return p;
}

// Position of q along the piecewise-geodesic path, as a fraction of its
// total length: find the segment whose geodesic contains q and add the
// covered part of it. Returns -1 when q lies on no segment.
double arc_position(const std::vector<Motion>& path, const Motion& q, double scale = 1.0) {
  std::vector<double> len{0.0};
  for (std::size_t i = 1; i < path.size(); ++i) len.push_back(len.back() + motion_distance(path[i - 1], path[i], scale));
  for (std::size_t i = 1; i < path.size(); ++i) {
    const V3 s = (path[i].rotation * path[i - 1].rotation.inverse()).axis_angle();
    const V3 r = (q.rotation * path[i - 1].rotation.inverse()).axis_angle();
    const V3 dq = path[i].translation - path[i - 1].translation;
    const V3 rq = q.translation - path[i - 1].translation;
    const double denom = s.squaredNorm() + dq.squaredNorm();
    if (denom == 0.0) continue;
    const double f = (r.dot(s) + rq.dot(dq)) / denom;
    if (f < -1e-9 || f > 1.0 + 1e-9) continue;
    if ((r - f * s).norm() > 1e-8 || (rq - f * dq).norm() > 1e-8) continue;
    return (len[i - 1] + f * (len[i] - len[i - 1])) / len.back();
  }
  return -1.0;
}

std::vector<Motion> as_motions(const std::vector<Rot>& rots) {
  std::vector<Motion> out;
  for (const auto& r : rots) out.push_back({V3::Zero(), r});
  return out;
}

} // namespace

TEST_CASE("exponential map agrees with Eigen's angle-axis") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const V3 axis = random_unit(rng);
    const double angle = std::uniform_real_distribution<double>(0.0, kPi)(rng);
    const Eigen::Matrix3d ref = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    CHECK((Rot::from_axis_angle(axis * angle).matrix() - ref).norm() < 1e-12);
  }
  CHECK((Rot::from_axis_angle(V3(1e-10, 0, 0)).matrix() - Eigen::AngleAxisd(1e-10, V3::UnitX()).toRotationMatrix())
            .norm() < 1e-15);
}

TEST_CASE("axis-angle extraction inverts the exponential map") {
  std::mt19937_64 rng(2);
  for (double angle : {0.0, 1e-12, 1e-6, 0.3, 1.5, 3.0, kPi - 1e-3, kPi - 1e-6, kPi}) {
    for (int i = 0; i < 20; ++i) {
      const V3 v = random_unit(rng) * angle;
      const Rot r = Rot::from_axis_angle(v);
      const V3 w = r.axis_angle();
      CHECK(w.norm() == doctest::Approx(angle).epsilon(1e-6));
      CHECK((Rot::from_axis_angle(w).matrix() - r.matrix()).norm() < 1e-9);
      if (angle < kPi - 1e-3) CHECK((w - v).norm() < 1e-8);
    }
  }
}

TEST_CASE("group operations") {
  std::mt19937_64 rng(3);
  const Rot a = random_rotation(rng), b = random_rotation(rng);
  CHECK(((a * a.inverse()).matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-14);
  const Eigen::Quaterniond qa(a.matrix()), qb(b.matrix());
  CHECK(((a * b).matrix() - (qa * qb).toRotationMatrix()).norm() < 1e-12);
  const V3 x(1.0, -2.0, 0.5);
  CHECK(((a * x) - qa * x).norm() < 1e-12);
  CHECK(a.orthogonality_error() < 1e-14);

  const Motion m{V3(1, 2, 3), a}, n{V3(-1, 0, 2), b};
  const Motion mn = m * n;
  CHECK((mn.translation - (a * n.translation + m.translation)).norm() < 1e-14);
  const Motion id = m * m.inverse();
  CHECK(id.translation.norm() < 1e-14);
  CHECK(id.rotation.angle() < 1e-7);
  CHECK(Motion{V3(3, 4, 0), Rot()}.norm() == doctest::Approx(5.0));
  CHECK(Motion{V3(0, 0, 0), Rot::from_axis_angle(V3(0, 0, 0.5))}.norm(2.0) == doctest::Approx(1.0));
}

TEST_CASE("orthonormalization projects drifted matrices back onto SO(3)") {
  std::mt19937_64 rng(4);
  const Rot r = random_rotation(rng);
  Eigen::Matrix3d drift = r.matrix();
  drift(0, 1) += 1e-6;
  drift(2, 2) *= 1.0 + 1e-6;
  const Rot fixed = Rot(drift).orthonormalized();
  CHECK(fixed.orthogonality_error() < 1e-14);
  CHECK(fixed.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((fixed.matrix() - r.matrix()).norm() < 1e-5);
  CHECK(r.orthonormalized().matrix() == r.matrix());
}

TEST_CASE("SO(3) reparametrization of a single-axis path matches evenly spaced angles") {
  const V3 axis = V3(1, 2, -1).normalized();
  std::vector<Rot> path;
  for (double a : {0.0, 0.1, 0.15, 0.9, 1.0, 2.0}) path.push_back(Rot::from_axis_angle(axis * a));
  const auto out = reparametrize_so3(path, 8);
  REQUIRE(out.size() == 9);
  for (int j = 0; j <= 8; ++j) {
    const Eigen::Matrix3d ref = Eigen::AngleAxisd(2.0 * j / 8, axis).toRotationMatrix();
    CHECK((out[static_cast<std::size_t>(j)].matrix() - ref).norm() < 1e-12);
  }
  CHECK(out.front().matrix() == path.front().matrix());
  CHECK(out.back().matrix() == path.back().matrix());
}

TEST_CASE("SO(3) reparametrization agrees with quaternion slerp on one segment") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Rot a = random_rotation(rng), b = Rot::from_axis_angle(random_unit(rng) * 2.5) * a;
    const auto out = reparametrize_so3(std::vector<Rot>{a, b}, 5);
    const Eigen::Quaterniond qa(a.matrix()), qb(b.matrix());
    for (int j = 0; j <= 5; ++j) {
      const Eigen::Matrix3d ref = qa.slerp(j / 5.0, qb).toRotationMatrix();
      CHECK((out[static_cast<std::size_t>(j)].matrix() - ref).norm() < 1e-10);
    }
  }
}

TEST_CASE("SO(3) reparametrization invariants") {
  std::mt19937_64 rng(6);
  const auto path = uneven_path(rng, 12);
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += rot_distance(path[i - 1], path[i]);
  const int k = 30;
  const auto out = reparametrize_so3(path, k);
  CHECK(out.front().matrix() == path.front().matrix());
  CHECK(out.back().matrix() == path.back().matrix());
  for (const auto& r : out) CHECK(r.orthogonality_error() < 1e-12);
  // Outputs sit at equal arc positions along the input path; consecutive
  // outputs are one arc step apart, or less where a corner is cut.
  const auto as_path = as_motions(path);
  for (int j = 0; j <= k; ++j) {
    CHECK(arc_position(as_path, Motion{V3::Zero(), out[static_cast<std::size_t>(j)]}) ==
          doctest::Approx(static_cast<double>(j) / k).epsilon(1e-6));
    if (j > 0)
      CHECK(rot_distance(out[static_cast<std::size_t>(j - 1)], out[static_cast<std::size_t>(j)]) <= total / k + 1e-9);
  }

  // Equivariance under left and right multiplication.
  const Rot g = random_rotation(rng), h = random_rotation(rng);
  std::vector<Rot> left, right;
  for (const auto& r : path) {
    left.push_back(g * r);
    right.push_back(r * h);
  }
  const auto out_l = reparametrize_so3(left, k), out_r = reparametrize_so3(right, k);
  for (int j = 0; j <= k; ++j) {
    const auto& o = out[static_cast<std::size_t>(j)];
    CHECK(((g * o).matrix() - out_l[static_cast<std::size_t>(j)].matrix()).norm() < 1e-10);
    CHECK(((o * h).matrix() - out_r[static_cast<std::size_t>(j)].matrix()).norm() < 1e-10);
  }
}

TEST_CASE("SO(3) round trip: an evenly spaced geodesic path is a fixed point") {
  std::mt19937_64 rng(7);
  const Rot a = random_rotation(rng);
  const V3 step = random_unit(rng) * 0.2;
  std::vector<Rot> path{a};
  for (int i = 1; i <= 10; ++i) path.push_back(Rot::from_axis_angle(step) * path.back());
  const auto out = reparametrize(path, 10);
  for (int j = 0; j <= 10; ++j)
    CHECK((out[static_cast<std::size_t>(j)].matrix() - path[static_cast<std::size_t>(j)].matrix()).norm() < 1e-10);
}

TEST_CASE("SO(3) reparametrization edge cases") {
  const Rot a = Rot::from_axis_angle(V3(0.1, 0.2, 0.3));
  const auto same = reparametrize_so3(std::vector<Rot>{a, a, a}, 4);
  for (const auto& r : same) CHECK(r.matrix() == a.matrix());
  CHECK_THROWS_AS(reparametrize_so3(std::vector<Rot>{a}, 4), ConfigError);
  CHECK_THROWS_AS(reparametrize_so3(std::vector<Rot>{a, a}, 0), ConfigError);
  const std::vector<Rot> flip{Rot(), Rot::from_axis_angle(V3(0.5, 0, 0)),
                              Rot::from_axis_angle(V3(0, 0, kPi)) * Rot::from_axis_angle(V3(0.5, 0, 0))};
  try {
    reparametrize_so3(flip, 4);
    FAIL("expected a branch ambiguity");
  } catch (const BranchAmbiguityError& e) {
    CHECK(e.index == 2);
  }
}

TEST_CASE("SO(3) quarter turn midpoint") {
  const auto out = reparametrize_so3(std::vector<Rot>{Rot(), Rot::from_axis_angle(V3(0, 0, kPi / 2))}, 2);
  CHECK((out[1].matrix() - Eigen::AngleAxisd(kPi / 4, V3::UnitZ()).toRotationMatrix()).norm() < 1e-12);
}

TEST_CASE("SE(3) mixed norm matches a quaternion angle") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const Motion m{V3::Random(), random_rotation(rng)};
    const double theta = Eigen::AngleAxisd(Eigen::Quaterniond(m.rotation.matrix())).angle();
    CHECK(m.norm() == doctest::Approx(std::sqrt(m.translation.squaredNorm() + theta * theta)).epsilon(1e-9));
  }
  CHECK(Motion{}.norm() == 0.0);
}

TEST_CASE("SE(3) three-element mixed path, K = 4") {
  // Unequal pieces: 0.5 translation, then a rotation of 1.2 with 0.5 translation.
  const std::vector<Motion> path{{V3::Zero(), Rot()},
                                 {V3(0.3, 0.4, 0.0), Rot()},
                                 {V3(0.3, 0.4, 0.5), Rot::from_axis_angle(V3(0, 1.2, 0))}};
  const double total = 0.5 + std::sqrt(0.25 + 1.44);
  const auto out = reparametrize_se3(path, 4);
  for (int j = 0; j <= 4; ++j)
    CHECK(arc_position(path, out[static_cast<std::size_t>(j)]) == doctest::Approx(j / 4.0).epsilon(1e-6));
  // Outputs 2..4 share the second piece, so their mixed-norm spacing is one arc step.
  CHECK(motion_distance(out[2], out[3]) == doctest::Approx(total / 4).epsilon(1e-9));
  CHECK(motion_distance(out[3], out[4]) == doctest::Approx(total / 4).epsilon(1e-9));
  CHECK(motion_distance(out[0], out[1]) == doctest::Approx(total / 4).epsilon(1e-9));
}

TEST_CASE("SE(3) pure rotation path matches the SO(3) reparametrization") {
  std::mt19937_64 rng(10);
  const auto rots = uneven_path(rng, 7);
  const auto a = reparametrize_so3(rots, 9);
  const auto b = reparametrize_se3(as_motions(rots), 9);
  for (int j = 0; j <= 9; ++j) {
    CHECK((a[static_cast<std::size_t>(j)].matrix() - b[static_cast<std::size_t>(j)].rotation.matrix()).norm() < 1e-12);
    CHECK(b[static_cast<std::size_t>(j)].translation.norm() == 0.0);
  }
}

TEST_CASE("SE(3) pure translation reduces to Euclidean arc length") {
  std::vector<Motion> path;
  for (double x : {0.0, 0.5, 0.6, 2.0}) path.push_back({V3(x, 0, 0), Rot()});
  const auto out = reparametrize_se3(path, 4);
  for (int j = 0; j <= 4; ++j) {
    CHECK(out[static_cast<std::size_t>(j)].translation.x() == doctest::Approx(0.5 * j).epsilon(1e-12));
    CHECK(out[static_cast<std::size_t>(j)].rotation.angle() < 1e-7);
  }
}

TEST_CASE("SE(3) mixed-norm equal spacing and equivariance") {
  std::mt19937_64 rng(8);
  const auto rots = uneven_path(rng, 8);
  std::vector<Motion> path;
  V3 t = V3::Zero();
  std::normal_distribution<double> n;
  for (const auto& r : rots) {
    path.push_back({t, r});
    t += V3(n(rng), n(rng), n(rng)) * 0.3;
  }
  for (double scale : {0.5, 1.0, 3.0}) {
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) total += motion_distance(path[i - 1], path[i], scale);
    const int k = 24;
    const auto out = reparametrize_se3(path, k, scale);
    CHECK(out.front().translation == path.front().translation);
    CHECK(out.back().rotation.matrix() == path.back().rotation.matrix());
    for (int j = 0; j <= k; ++j) {
      CHECK(arc_position(path, out[static_cast<std::size_t>(j)], scale) ==
            doctest::Approx(static_cast<double>(j) / k).epsilon(1e-6));
      if (j > 0)
        CHECK(motion_distance(out[static_cast<std::size_t>(j - 1)], out[static_cast<std::size_t>(j)], scale) <=
              total / k + 1e-9);
    }
  }

  // Left multiplication by a rigid motion commutes with reparametrization.
  const Motion g{V3(1, -2, 0.5), random_rotation(rng)};
  std::vector<Motion> moved;
  for (const auto& m : path) moved.push_back(g * m);
  const auto a = reparametrize_se3(path, 10), b = reparametrize_se3(moved, 10);
  for (int j = 0; j <= 10; ++j) {
    const Motion ga = g * a[static_cast<std::size_t>(j)];
    CHECK((ga.translation - b[static_cast<std::size_t>(j)].translation).norm() < 1e-10);
    CHECK((ga.rotation.matrix() - b[static_cast<std::size_t>(j)].rotation.matrix()).norm() < 1e-10);
  }
  CHECK_THROWS_AS(reparametrize_se3(path, 10, 0.0), ConfigError);
  path[3].translation.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(reparametrize_se3(path, 10), DomainError);
}

TEST_CASE("single precision instantiation") {
  using RotF = Rotation<float>;
  std::vector<RotF> path{RotF(), RotF::from_axis_angle(Eigen::Vector3f(0, 0, 0.3f)),
                         RotF::from_axis_angle(Eigen::Vector3f(0, 0, 1.2f))};
  const auto out = reparametrize(path, 4);
  CHECK(out[2].angle() == doctest::Approx(0.6f).epsilon(1e-5));
}
