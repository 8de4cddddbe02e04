#pragma once

#include "difstring/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace difstring {

enum class SplineKind { linear, cubic };

inline std::string to_string(SplineKind s) { return s == SplineKind::linear ? "linear" : "cubic"; }

inline SplineKind parse_spline_kind(const std::string& s) {
  if (s == "linear") return SplineKind::linear;
  if (s == "cubic") return SplineKind::cubic;
  throw ConfigError("unknown spline '" + s + "' (expected linear or cubic)");
}

/// Euclidean lengths of the N segments of a polyline stored column-wise.
template <class Scalar>
Vector<Scalar> segment_lengths(const Points<Scalar>& images) {
  const Eigen::Index n = images.cols() - 1;
  Vector<Scalar> out(std::max<Eigen::Index>(n, 0));
  for (Eigen::Index i = 0; i < n; ++i) out(i) = (images.col(i + 1) - images.col(i)).norm();
  return out;
}

/// Normalized cumulative chord lengths alpha_i = L_i / L_N.
template <class Scalar>
Vector<Scalar> normalized_arc_abscissae(const Points<Scalar>& images) {
  const Vector<Scalar> seg = segment_lengths(images);
  Vector<Scalar> a(images.cols());
  a(0) = Scalar(0);
  for (Eigen::Index i = 0; i < seg.size(); ++i) a(i + 1) = a(i) + seg(i);
  if (a(a.size() - 1) > Scalar(0)) a /= a(a.size() - 1);
  return a;
}

/// max/min segment length (1 for perfectly equal spacing).
template <class Scalar>
Scalar spacing_ratio(const Points<Scalar>& images) {
  const Vector<Scalar> seg = segment_lengths(images);
  if (seg.size() == 0 || seg.minCoeff() <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return seg.maxCoeff() / seg.minCoeff();
}

namespace detail {

// Walks N-1 hops of chord length c along the polyline starting at its first
// vertex. Each hop lands on the first point of the polyline, beyond the
// current one, at distance c. Returns false if the polyline runs out.
template <class Scalar>
bool place_equal_chords(const Points<Scalar>& poly, Scalar c, Points<Scalar>& out) {
  const Eigen::Index segs = poly.cols() - 1;
  const Eigen::Index n = out.cols() - 1;
  Eigen::Index seg = 0;
  Scalar u0 = Scalar(0);
  out.col(0) = poly.col(0);
  for (Eigen::Index j = 1; j < n; ++j) {
    bool found = false;
    const auto q = out.col(j - 1);
    for (; seg < segs; ++seg, u0 = Scalar(0)) {
      const auto a = poly.col(seg);
      const auto b = poly.col(seg + 1);
      const Scalar dd = (b - a).squaredNorm();
      if (dd == Scalar(0)) continue;
      const Scalar half_b = (a - q).dot(b - a);
      const Scalar cc = (a - q).squaredNorm() - c * c;
      const Scalar disc = half_b * half_b - dd * cc;
      if (disc < Scalar(0)) continue;
      const Scalar u = (-half_b + std::sqrt(disc)) / dd;
      if (u >= u0 && u <= Scalar(1)) {
        out.col(j) = a + u * (b - a);
        u0 = u;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

// Second derivatives of the natural cubic spline through (x_i, y_i), one
// column of y per node. Thomas algorithm on the standard tridiagonal system.
template <class Scalar>
Points<Scalar> natural_spline_moments(const Vector<Scalar>& x, const Points<Scalar>& y) {
  const Eigen::Index n = x.size() - 1;
  Points<Scalar> m = Points<Scalar>::Zero(y.rows(), n + 1);
  if (n < 2) return m;
  std::vector<Scalar> diag(n + 1), upper(n + 1);
  Points<Scalar> rhs = Points<Scalar>::Zero(y.rows(), n + 1);
  for (Eigen::Index i = 1; i < n; ++i) {
    const Scalar h0 = x(i) - x(i - 1);
    const Scalar h1 = x(i + 1) - x(i);
    diag[i] = Scalar(2) * (h0 + h1);
    upper[i] = h1;
    rhs.col(i) = Scalar(6) * ((y.col(i + 1) - y.col(i)) / h1 - (y.col(i) - y.col(i - 1)) / h0);
  }
  // Forward elimination over interior rows 1..n-1 (m_0 = m_n = 0).
  for (Eigen::Index i = 2; i < n; ++i) {
    const Scalar lower = x(i) - x(i - 1);
    const Scalar w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs.col(i) -= w * rhs.col(i - 1);
  }
  m.col(n - 1) = rhs.col(n - 1) / diag[n - 1];
  for (Eigen::Index i = n - 2; i >= 1; --i) m.col(i) = (rhs.col(i) - upper[i] * m.col(i + 1)) / diag[i];
  return m;
}

// Piecewise-linear interpolation of a polyline at m + 1 equal normalized
// arc-length positions (endpoints kept).
template <class Scalar>
Points<Scalar> linear_arc_pass(const Points<Scalar>& poly, Eigen::Index m) {
  const Eigen::Index segs = poly.cols() - 1;
  const Vector<Scalar> a = normalized_arc_abscissae(poly);
  Points<Scalar> out(poly.rows(), m + 1);
  out.col(0) = poly.col(0);
  out.col(m) = poly.col(segs);
  Eigen::Index k = 0;
  for (Eigen::Index j = 1; j < m; ++j) {
    const Scalar u = Scalar(j) / Scalar(m);
    while (k + 1 < segs && a(k + 1) < u) ++k;
    const Scalar h = a(k + 1) - a(k);
    const Scalar f = h > Scalar(0) ? (u - a(k)) / h : Scalar(0);
    out.col(j) = (Scalar(1) - f) * poly.col(k) + f * poly.col(k + 1);
  }
  return out;
}

// m + 1 points with equal chords on the polyline (bisection on the chord).
template <class Scalar>
Points<Scalar> equal_chords(const Points<Scalar>& poly, Eigen::Index m) {
  const Scalar total = segment_lengths(poly).sum();
  Points<Scalar> out(poly.rows(), m + 1);
  out.col(0) = poly.col(0);
  out.col(m) = poly.col(poly.cols() - 1);
  if (!(total > Scalar(0)) || m == 1) return m == 1 || poly.cols() == m + 1 ? out : linear_arc_pass(poly, m);
  // Already equal chords: a fixed point, returned as is.
  if (poly.cols() == m + 1 && spacing_ratio(poly) <= Scalar(1) + Scalar(64) * std::numeric_limits<Scalar>::epsilon())
    return poly;
  Scalar lo = Scalar(0);
  Scalar hi = total / Scalar(m);
  Points<Scalar> trial = out;
  for (int it = 0; it < 200 && hi - lo > std::numeric_limits<Scalar>::epsilon() * hi; ++it) {
    const Scalar c = Scalar(0.5) * (lo + hi);
    const bool ok = place_equal_chords(poly, c, trial);
    if (ok && (trial.col(m) - trial.col(m - 1)).norm() >= c) {
      lo = c;
      out = trial;
    } else {
      hi = c;
    }
  }
  if (lo > Scalar(0) && (out.col(m) - out.col(m - 1)).norm() - lo <= Scalar(1e-9) * lo) return out;
  // The walk can jump when a hop switches to a later segment, leaving no
  // exact root (kinked inputs, closed loops). Repeated arc-length passes
  // then cut the corners until the chords agree.
  Points<Scalar> cur = linear_arc_pass(poly, m);
  for (int pass = 0; pass < 100000; ++pass) {
    Points<Scalar> next = linear_arc_pass(cur, m);
    const bool done = (next - cur).cwiseAbs().maxCoeff() <= std::numeric_limits<Scalar>::epsilon() * total;
    cur = std::move(next);
    if (done) break;
  }
  return cur;
}

// Natural cubic spline through (alpha_i, phi_i), evaluated at the normalized
// parameters u (endpoints of the result are the input endpoints).
template <class Scalar>
Points<Scalar> spline_at(const Points<Scalar>& images, const Vector<Scalar>& u) {
  const Eigen::Index n = images.cols() - 1;
  // Drop coincident nodes; the spline needs strictly increasing abscissae.
  const Vector<Scalar> a_full = normalized_arc_abscissae(images);
  std::vector<Eigen::Index> keep{0};
  for (Eigen::Index i = 1; i <= n; ++i)
    if (a_full(i) > a_full(keep.back())) keep.push_back(i);
  if (keep.back() != n) keep.back() = n;
  Vector<Scalar> x(keep.size());
  Points<Scalar> y(images.rows(), keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    x(i) = a_full(keep[i]);
    y.col(i) = images.col(keep[i]);
  }
  const Eigen::Index m = u.size() - 1;
  Points<Scalar> out(images.rows(), m + 1);
  out.col(0) = images.col(0);
  out.col(m) = images.col(n);
  if (x.size() < 2) {
    for (Eigen::Index j = 1; j < m; ++j) out.col(j) = images.col(0);
    return out;
  }
  const Points<Scalar> mom = natural_spline_moments(x, y);
  Eigen::Index k = 0;
  for (Eigen::Index j = 1; j < m; ++j) {
    while (k + 1 < x.size() - 1 && x(k + 1) < u(j)) ++k;
    const Scalar h = x(k + 1) - x(k);
    const Scalar l = (x(k + 1) - u(j)) / h;
    const Scalar r = (u(j) - x(k)) / h;
    out.col(j) = l * y.col(k) + r * y.col(k + 1) +
                 ((l * l * l - l) * mom.col(k) + (r * r * r - r) * mom.col(k + 1)) * (h * h / Scalar(6));
  }
  return out;
}

template <class Scalar>
Points<Scalar> cubic_pass(const Points<Scalar>& images) {
  const Eigen::Index n = images.cols() - 1;
  return spline_at(images, Vector<Scalar>(Vector<Scalar>::LinSpaced(n + 1, Scalar(0), Scalar(1))));
}

} // namespace detail

/// Redistributes the images of a string to equal spacing, keeping the two
/// endpoints bitwise.
///
/// linear: images are placed on the input polyline with exactly equal chords
/// (bisection on the common chord length), which makes the operation
/// idempotent.
/// cubic: natural cubic spline through (alpha_i, phi_i) evaluated at i/N,
/// repeated until the chord ratio settles below 1 + 1e-10 (at most 10
/// passes). A string that has not settled by then gets equal chords along a
/// dense sampling of its last spline.
template <class Scalar>
Points<Scalar> reparametrize(const Points<Scalar>& images, SplineKind kind) {
  const Eigen::Index n = images.cols() - 1;
  if (n < 1) return images;
  const Scalar total = segment_lengths(images).sum();
  if (!(total > Scalar(0)) || n == 1) return images;

  if (kind == SplineKind::linear) return detail::equal_chords(images, n);
  Points<Scalar> cur = images;
  for (int pass = 0; pass < 10; ++pass) {
    cur = detail::cubic_pass(cur);
    if (spacing_ratio(cur) <= Scalar(1) + Scalar(1e-10)) return cur;
  }
  constexpr int kDense = 64;
  const Points<Scalar> dense =
      detail::spline_at(cur, Vector<Scalar>(Vector<Scalar>::LinSpaced(kDense * n + 1, Scalar(0), Scalar(1))));
  return detail::equal_chords(dense, n);
}

} // namespace difstring
