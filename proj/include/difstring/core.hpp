#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace difstring {

template <class Scalar, int Rows = Eigen::Dynamic>
using Vector = Eigen::Matrix<Scalar, Rows, 1>;

template <class Scalar, int Rows = Eigen::Dynamic, int Cols = Eigen::Dynamic>
using Matrix = Eigen::Matrix<Scalar, Rows, Cols>;

/// Point sets are stored column-wise: one column per point.
template <class Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Error hierarchy. Every failure the library reports derives from Error so
// callers (the CLI in particular) can map categories onto exit codes.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (unknown names, violated invariants).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// The field oracle does not provide a requested quantity.
class CapabilityError : public Error {
public:
  using Error::Error;
};

/// The velocity/score conversion is singular at the requested time.
class SingularTimeError : public Error {
public:
  SingularTimeError(const std::string& what, double t) : Error(what), time(t) {}
  double time;
};

/// States with a coordinate beyond this magnitude count as diverged. Explicit
/// steps with a huge gamma^2 dt can oscillate with growing amplitude for many
/// steps before anything overflows.
inline constexpr double kEscapeMagnitude = 1e100;

/// True when x has a non-finite coordinate or one beyond kEscapeMagnitude.
inline bool escaped(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  return x.size() > 0 && !(x.cwiseAbs().maxCoeff() <= kEscapeMagnitude);
}

/// A state became non-finite (or escaped, see kEscapeMagnitude) during time stepping.
///
/// Carries the time of the last finite state, that state, and (when the
/// failing object is one of many, e.g. a string image or a walker) its index.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, double t, Eigen::VectorXd last_state, long idx = -1)
      : Error(what), time(t), last_finite_state(std::move(last_state)), index(idx) {}
  double time;
  Eigen::VectorXd last_finite_state;
  long index;
};

/// The discrete tangent of a string vanished (coincident neighbours).
class DegenerateTangentError : public Error {
public:
  DegenerateTangentError(const std::string& what, long idx) : Error(what), index(idx) {}
  long index;
};

/// An incremental rotation is too close to pi for a unique axis-angle.
class BranchAmbiguityError : public Error {
public:
  BranchAmbiguityError(const std::string& what, long idx) : Error(what), index(idx) {}
  long index;
};

/// An iterative oracle ran out of its iteration budget.
class BudgetExceededError : public Error {
public:
  BudgetExceededError(const std::string& what, double res) : Error(what), residual(res) {}
  double residual;
};

/// Score-model training produced a non-finite loss.
class TrainingDivergenceError : public Error {
public:
  TrainingDivergenceError(const std::string& what, long iter) : Error(what), iteration(iter) {}
  long iteration;
};

/// Non-fatal conditions (degenerate inputs, untrained models) are reported
/// through a process-wide handler; the default writes to stderr.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

/// Mixes a user seed with a stream index into an independent 64-bit seed
/// (splitmix64 finalizer).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

} // namespace difstring
