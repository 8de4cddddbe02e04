#include "difstring/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace difstring {

void GridSpec::validate() const {
  for (int k = 0; k < 2; ++k) {
    if (n[k] < 16) throw ConfigError("grid resolution must be at least 16 per axis");
    if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(hi[k] > lo[k]))
      throw ConfigError("grid bounds must be finite with lo < hi");
  }
}

VectorXd GridSpec::point(int i, int j) const {
  return VectorXd{{lo[0] + (hi[0] - lo[0]) * i / (n[0] - 1), lo[1] + (hi[1] - lo[1]) * j / (n[1] - 1)}};
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

constexpr int kDi[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDj[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

} // namespace

SaddleResult locate_saddle_2d(const FieldOracle& oracle, double t, const GridSpec& grid,
                              std::optional<std::array<VectorXd, 2>> seeds) {
  grid.validate();
  if (oracle.dim() != 2) throw DomainError("grid saddle search needs a 2-d oracle");
  if (!oracle.has_log_density()) throw CapabilityError("grid saddle search needs an exact log-density");

  const int nx = grid.n[0], ny = grid.n[1];
  const int cells = nx * ny;
  auto id = [ny](int i, int j) { return i * ny + j; };
  MatrixXd pts(2, cells);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) pts.col(id(i, j)) = grid.point(i, j);
  const VectorXd logp = oracle.log_density(t, pts);

  auto uphill = [&](int c) {
    for (;;) {
      const int i = c / ny, j = c % ny;
      int best = c;
      for (int k = 0; k < 8; ++k) {
        const int a = i + kDi[k], b = j + kDj[k];
        if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
        if (logp(id(a, b)) > logp(best)) best = id(a, b);
      }
      if (best == c) return c;
      c = best;
    }
  };
  auto nearest_cell = [&](const VectorXd& x) {
    const int i = std::clamp(static_cast<int>(std::lround((x(0) - grid.lo[0]) / grid.cell(0))), 0, nx - 1);
    const int j = std::clamp(static_cast<int>(std::lround((x(1) - grid.lo[1]) / grid.cell(1))), 0, ny - 1);
    return id(i, j);
  };

  int ma = -1, mb = -1;
  if (seeds) {
    ma = uphill(nearest_cell((*seeds)[0]));
    mb = uphill(nearest_cell((*seeds)[1]));
  } else {
    std::vector<int> maxima;
    for (int c = 0; c < cells; ++c)
      if (uphill(c) == c) maxima.push_back(c);
    std::sort(maxima.begin(), maxima.end(), [&](int a, int b) { return logp(a) > logp(b); });
    if (maxima.size() >= 2) {
      ma = maxima[0];
      mb = maxima[1];
    }
  }

  SaddleResult out;
  if (ma < 0 || ma == mb) return out;
  out.basin_a = pts.col(ma);
  out.basin_b = pts.col(mb);

  std::vector<int> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return logp(a) > logp(b); });
  UnionFind uf(cells);
  std::vector<char> active(static_cast<std::size_t>(cells), 0);
  for (int c : order) {
    active[c] = 1;
    const int i = c / ny, j = c % ny;
    for (int k = 0; k < 8; ++k) {
      const int a = i + kDi[k], b = j + kDj[k];
      if (a < 0 || b < 0 || a >= nx || b >= ny || !active[id(a, b)]) continue;
      uf.unite(c, id(a, b));
    }
    if (active[ma] && active[mb] && uf.find(ma) == uf.find(mb)) {
      out.has_barrier = true;
      out.point = pts.col(c);
      out.log_density = logp(c);
      return out;
    }
  }
  return out;
}

namespace {

// Linear interpolation at equal arc length along the polyline (endpoints kept).
MatrixXd resample(const MatrixXd& p) {
  const Eigen::Index n = p.cols() - 1;
  std::vector<double> cum(static_cast<std::size_t>(n + 1), 0.0);
  for (Eigen::Index i = 1; i <= n; ++i) cum[i] = cum[i - 1] + (p.col(i) - p.col(i - 1)).norm();
  const double total = cum.back();
  if (!(total > 0.0)) return p;
  MatrixXd out = p;
  Eigen::Index seg = 0;
  for (Eigen::Index j = 1; j < n; ++j) {
    const double target = total * static_cast<double>(j) / static_cast<double>(n);
    while (seg + 1 < n && cum[seg + 1] < target) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? (target - cum[seg]) / len : 0.0;
    out.col(j) = (1.0 - f) * p.col(seg) + f * p.col(seg + 1);
  }
  return out;
}

} // namespace

MatrixXd straight_string(const VectorXd& a, const VectorXd& b, int n_segments) {
  if (n_segments < 1) throw ConfigError("a string needs at least two images");
  MatrixXd out(a.size(), n_segments + 1);
  for (int i = 0; i <= n_segments; ++i) {
    const double f = static_cast<double>(i) / n_segments;
    out.col(i) = (1.0 - f) * a + f * b;
  }
  out.col(n_segments) = b;
  return out;
}

ReferenceCurve frozen_mep_string(const FieldOracle& oracle, double t, const MatrixXd& init,
                                 const FrozenMepOptions& options) {
  if (init.cols() < 3) throw ConfigError("reference MEP needs at least one interior image");
  if (!(options.step > 0.0) || options.max_iterations < 1) throw ConfigError("invalid reference MEP options");
  ReferenceCurve out;
  out.images = init;
  const Eigen::Index n = init.cols() - 1;
  for (int it = 1; it <= options.max_iterations; ++it) {
    MatrixXd next = out.images;
    next.middleCols(1, n - 1) += options.step * oracle.score(t, out.images.middleCols(1, n - 1));
    next = resample(next);
    if (!next.allFinite()) throw DivergenceError("reference MEP became non-finite", t, out.images.col(0));
    out.last_displacement = (next - out.images).colwise().norm().maxCoeff();
    out.images = std::move(next);
    out.iterations = it;
    if (out.last_displacement < options.tolerance) {
      out.converged = true;
      return out;
    }
  }
  throw BudgetExceededError("reference MEP did not converge within the iteration budget", out.last_displacement);
}

ReferenceCurve hastie_principal_curve(const MatrixXd& samples, const MatrixXd& init, const HastieOptions& options) {
  if (init.cols() < 3) throw ConfigError("principal-curve reference needs at least three images");
  if (samples.rows() != init.rows()) throw DomainError("samples and curve differ in dimension");
  ReferenceCurve out;
  out.images = init;
  const Eigen::Index n = init.cols() - 1;
  out.empty_flag.assign(static_cast<std::size_t>(n + 1), false);
  std::vector<long> counts(static_cast<std::size_t>(n + 1));
  for (int it = 1; it <= options.max_iterations; ++it) {
    MatrixXd sums = MatrixXd::Zero(init.rows(), n + 1);
    std::fill(counts.begin(), counts.end(), 0);
    for (Eigen::Index k = 0; k < samples.cols(); ++k) {
      Eigen::Index best = 0;
      (out.images.colwise() - samples.col(k)).colwise().squaredNorm().minCoeff(&best);
      sums.col(best) += samples.col(k);
      ++counts[best];
    }
    MatrixXd next = out.images;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (counts[i] == 0) {
        out.empty_flag[i] = true;
        continue;
      }
      next.col(i) = sums.col(i) / static_cast<double>(counts[i]);
    }
    next = resample(next);
    out.last_displacement = (next - out.images).colwise().norm().maxCoeff();
    out.images = std::move(next);
    out.iterations = it;
    out.degenerate = std::count_if(counts.begin(), counts.end(), [](long c) { return c > 0; }) <= 1;
    if (out.last_displacement < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double distance_to_polyline(const MatrixXd& poly, const VectorXd& x) {
  double best = std::numeric_limits<double>::infinity();
  if (poly.cols() == 1) return (poly.col(0) - x).norm();
  for (Eigen::Index i = 0; i + 1 < poly.cols(); ++i) {
    const VectorXd a = poly.col(i);
    const VectorXd d = poly.col(i + 1) - a;
    const double dd = d.squaredNorm();
    const double u = dd > 0.0 ? std::clamp((x - a).dot(d) / dd, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + u * d - x).norm());
  }
  return best;
}

double hausdorff_distance(const MatrixXd& a, const MatrixXd& b) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) h = std::max(h, distance_to_polyline(b, a.col(i)));
  for (Eigen::Index i = 0; i < b.cols(); ++i) h = std::max(h, distance_to_polyline(a, b.col(i)));
  return h;
}

} // namespace difstring
