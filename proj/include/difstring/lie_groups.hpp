#pragma once

#include "difstring/core.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace difstring {

/// Element of SO(3) stored as a rotation matrix. Axis-angle vectors have
/// angle in [0, pi].
template <class Scalar>
class Rotation {
public:
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Rotation() : m_(Matrix3::Identity()) {}
  explicit Rotation(const Matrix3& m) : m_(m) {}

  /// Rodrigues' formula.
  static Rotation from_axis_angle(const Vector3& v) {
    using std::cos, std::sin, std::sqrt;
    const Scalar theta = v.norm();
    const Matrix3 k = hat(v);
    if (theta < Scalar(1e-8)) return Rotation(Matrix3::Identity() + k + Scalar(0.5) * k * k);
    const Scalar a = sin(theta) / theta;
    const Scalar b = (Scalar(1) - cos(theta)) / (theta * theta);
    return Rotation(Matrix3::Identity() + a * k + b * k * k);
  }

  const Matrix3& matrix() const { return m_; }

  /// Rotation angle as atan2(sin, cos), well conditioned near 0 and pi.
  Scalar angle() const {
    using std::atan2;
    const Vector3 w(m_(2, 1) - m_(1, 2), m_(0, 2) - m_(2, 0), m_(1, 0) - m_(0, 1));
    return atan2(w.norm() / Scalar(2), (m_.trace() - Scalar(1)) / Scalar(2));
  }

  Vector3 axis_angle() const {
    using std::sin, std::sqrt;
    const Scalar theta = angle();
    const Vector3 w(m_(2, 1) - m_(1, 2), m_(0, 2) - m_(2, 0), m_(1, 0) - m_(0, 1));
    if (theta < Scalar(1e-8)) return Scalar(0.5) * w;
    if (theta < Scalar(std::numbers::pi) - Scalar(1e-3)) return (theta / (Scalar(2) * sin(theta))) * w;
    // Near pi the skew part vanishes; recover the axis from R + R^T = 2 (cos I + (1 - cos) n n^T).
    const Scalar c = std::cos(theta);
    const Matrix3 sym = (m_ + m_.transpose()) / Scalar(2) - c * Matrix3::Identity();
    int k = 0;
    sym.diagonal().maxCoeff(&k);
    Vector3 n = sym.col(k) / sqrt(std::max(sym(k, k), Scalar(0)) * (Scalar(1) - c));
    n.normalize();
    if (n.dot(w) < Scalar(0)) n = -n;
    return theta * n;
  }

  Rotation inverse() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  Vector3 operator*(const Vector3& v) const { return m_ * v; }

  /// ||M M^T - I||_F.
  Scalar orthogonality_error() const { return (m_ * m_.transpose() - Matrix3::Identity()).norm(); }

  /// Nearest rotation matrix (polar factor) when drift exceeds 1e-12.
  Rotation orthonormalized() const {
    if (orthogonality_error() <= Scalar(1e-12)) return *this;
    Eigen::JacobiSVD<Matrix3> svd(m_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < Scalar(0)) {
      Matrix3 u = svd.matrixU();
      u.col(2) = -u.col(2);
      r = u * svd.matrixV().transpose();
    }
    return Rotation(r);
  }

  static Matrix3 hat(const Vector3& v) {
    Matrix3 k;
    k << Scalar(0), -v(2), v(1), v(2), Scalar(0), -v(0), -v(1), v(0), Scalar(0);
    return k;
  }

private:
  Matrix3 m_;
};

/// Element (t, R) of SE(3); acts as x -> R x + t.
template <class Scalar>
struct RigidMotion {
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Vector3 translation = Vector3::Zero();
  Rotation<Scalar> rotation;

  /// sqrt(|t|^2 + (scale |R_V|)^2); scale = 1 treats radians and length units alike.
  Scalar norm(Scalar rotation_scale = Scalar(1)) const {
    using std::sqrt;
    const Scalar a = rotation_scale * rotation.angle();
    return sqrt(translation.squaredNorm() + a * a);
  }

  RigidMotion operator*(const RigidMotion& o) const {
    return {rotation * o.translation + translation, rotation * o.rotation};
  }
  RigidMotion inverse() const {
    const Rotation<Scalar> ri = rotation.inverse();
    return {-(ri * translation), ri};
  }
};

namespace detail {

// Normalized abscissae and the preceding-index rule p(j) = max{i : alpha_i <= j/K}.
template <class Scalar>
struct IncrementGrid {
  std::vector<Scalar> alpha;

  std::size_t preceding(Scalar u) const {
    const auto it = std::upper_bound(alpha.begin(), alpha.end(), u);
    return static_cast<std::size_t>(it - alpha.begin()) - 1;
  }
  Scalar fraction(std::size_t p, Scalar u) const { return (u - alpha[p]) / (alpha[p + 1] - alpha[p]); }
};

template <class Scalar>
void check_branch(Scalar angle, std::size_t i) {
  if (angle >= Scalar(std::numbers::pi) - Scalar(1e-6))
    throw BranchAmbiguityError("incremental rotation too close to pi for a unique axis-angle",
                               static_cast<long>(i));
}

template <class Scalar>
Rotation<Scalar> closed(const Rotation<Scalar>& r) {
  return r.orthonormalized();
}

} // namespace detail

/// Equal arc-length resampling of a rotation path into K + 1 elements using
/// left increments s_i = phi_i phi_{i-1}^{-1} and fractional axis-angle
/// displacements; endpoints are copied exactly.
template <class Scalar>
std::vector<Rotation<Scalar>> reparametrize_so3(const std::vector<Rotation<Scalar>>& path, int k) {
  using Vector3 = typename Rotation<Scalar>::Vector3;
  if (path.size() < 2) throw ConfigError("a rotation path needs at least two elements");
  if (k < 1) throw ConfigError("K must be at least 1");
  const std::size_t n = path.size() - 1;

  std::vector<Vector3> inc(n + 1, Vector3::Zero());
  detail::IncrementGrid<Scalar> grid;
  grid.alpha.assign(n + 1, Scalar(0));
  for (std::size_t i = 1; i <= n; ++i) {
    const Rotation<Scalar> s = path[i] * path[i - 1].inverse();
    detail::check_branch(s.angle(), i);
    inc[i] = s.axis_angle();
    grid.alpha[i] = grid.alpha[i - 1] + inc[i].norm();
  }
  const Scalar total = grid.alpha[n];

  std::vector<Rotation<Scalar>> out(static_cast<std::size_t>(k) + 1, path.front());
  out.back() = path.back();
  if (!(total > Scalar(0))) return out;
  for (auto& a : grid.alpha) a /= total;
  grid.alpha[n] = Scalar(1);

  for (int j = 1; j < k; ++j) {
    const Scalar u = Scalar(j) / Scalar(k);
    const std::size_t p = grid.preceding(u);
    const Vector3 d = inc[p + 1] * grid.fraction(p, u);
    out[static_cast<std::size_t>(j)] = detail::closed(Rotation<Scalar>::from_axis_angle(d) * path[p]);
  }
  return out;
}

/// SE(3) analogue with the mixed norm sqrt(|q|^2 + (scale |s_V|)^2); the
/// translation and rotation increments share the same fractional abscissa.
template <class Scalar>
std::vector<RigidMotion<Scalar>> reparametrize_se3(const std::vector<RigidMotion<Scalar>>& path, int k,
                                                   Scalar rotation_scale = Scalar(1)) {
  using Vector3 = typename Rotation<Scalar>::Vector3;
  if (path.size() < 2) throw ConfigError("a rigid-motion path needs at least two elements");
  if (k < 1) throw ConfigError("K must be at least 1");
  if (!(rotation_scale > Scalar(0))) throw ConfigError("rotation scale must be positive");
  const std::size_t n = path.size() - 1;

  std::vector<Vector3> rot_inc(n + 1, Vector3::Zero()), trans_inc(n + 1, Vector3::Zero());
  detail::IncrementGrid<Scalar> grid;
  grid.alpha.assign(n + 1, Scalar(0));
  for (std::size_t i = 1; i <= n; ++i) {
    if (!path[i].translation.allFinite()) throw DomainError("non-finite translation in rigid-motion path");
    const Rotation<Scalar> s = path[i].rotation * path[i - 1].rotation.inverse();
    detail::check_branch(s.angle(), i);
    rot_inc[i] = s.axis_angle();
    trans_inc[i] = path[i].translation - path[i - 1].translation;
    const Scalar a = rotation_scale * rot_inc[i].norm();
    grid.alpha[i] = grid.alpha[i - 1] + std::sqrt(trans_inc[i].squaredNorm() + a * a);
  }
  const Scalar total = grid.alpha[n];

  std::vector<RigidMotion<Scalar>> out(static_cast<std::size_t>(k) + 1, path.front());
  out.back() = path.back();
  if (!(total > Scalar(0))) return out;
  for (auto& a : grid.alpha) a /= total;
  grid.alpha[n] = Scalar(1);

  for (int j = 1; j < k; ++j) {
    const Scalar u = Scalar(j) / Scalar(k);
    const std::size_t p = grid.preceding(u);
    const Scalar f = grid.fraction(p, u);
    RigidMotion<Scalar>& o = out[static_cast<std::size_t>(j)];
    o.translation = path[p].translation + f * trans_inc[p + 1];
    o.rotation = detail::closed(Rotation<Scalar>::from_axis_angle(f * rot_inc[p + 1]) * path[p].rotation);
  }
  return out;
}

/// Same entry point as the R^d reparametrization, for group-valued strings.
template <class Scalar>
std::vector<Rotation<Scalar>> reparametrize(const std::vector<Rotation<Scalar>>& path, int k) {
  return reparametrize_so3(path, k);
}

template <class Scalar>
std::vector<RigidMotion<Scalar>> reparametrize(const std::vector<RigidMotion<Scalar>>& path, int k) {
  return reparametrize_se3(path, k);
}

} // namespace difstring
