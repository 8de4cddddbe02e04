#pragma once

#include "difstring/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

namespace difstring {

enum class ScheduleName { linear, trigonometric, ou };

inline std::string to_string(ScheduleName name) {
  switch (name) {
  case ScheduleName::linear: return "linear";
  case ScheduleName::trigonometric: return "trigonometric";
  case ScheduleName::ou: return "ou";
  }
  return "unknown";
}

inline ScheduleName parse_schedule_name(std::string_view s) {
  if (s == "linear") return ScheduleName::linear;
  if (s == "trigonometric" || s == "trig") return ScheduleName::trigonometric;
  if (s == "ou") return ScheduleName::ou;
  throw ConfigError("unknown schedule '" + std::string(s) + "' (expected linear, trigonometric or ou)");
}

/// Interpolant coefficients I_t = alpha(t) x0 + beta(t) x1 with x0 ~ N(0, I).
///
/// alpha_alpha_dot() is provided separately because for the ou schedule
/// alpha_dot diverges at t = 1 while the product alpha * alpha_dot = -t stays
/// finite; every consumer that needs the product should use it.
template <class Scalar = double>
class Schedule {
public:
  explicit Schedule(ScheduleName name = ScheduleName::linear) : name_(name) {}

  ScheduleName name() const { return name_; }

  Scalar alpha(Scalar t) const {
    using std::cos, std::sqrt;
    switch (name_) {
    case ScheduleName::linear: return Scalar(1) - t;
    case ScheduleName::trigonometric: return cos(half_pi() * t);
    case ScheduleName::ou: return sqrt(std::max(Scalar(0), Scalar(1) - t * t));
    }
    return Scalar(0);
  }

  Scalar beta(Scalar t) const {
    using std::sin;
    switch (name_) {
    case ScheduleName::linear: return t;
    case ScheduleName::trigonometric: return sin(half_pi() * t);
    case ScheduleName::ou: return t;
    }
    return Scalar(0);
  }

  Scalar alpha_dot(Scalar t) const {
    using std::sin, std::sqrt;
    switch (name_) {
    case ScheduleName::linear: return Scalar(-1);
    case ScheduleName::trigonometric: return -half_pi() * sin(half_pi() * t);
    case ScheduleName::ou: return -t / sqrt(Scalar(1) - t * t);
    }
    return Scalar(0);
  }

  Scalar beta_dot(Scalar t) const {
    using std::cos;
    switch (name_) {
    case ScheduleName::linear: return Scalar(1);
    case ScheduleName::trigonometric: return half_pi() * cos(half_pi() * t);
    case ScheduleName::ou: return Scalar(1);
    }
    return Scalar(0);
  }

  Scalar alpha_alpha_dot(Scalar t) const {
    using std::cos, std::sin;
    switch (name_) {
    case ScheduleName::linear: return t - Scalar(1);
    case ScheduleName::trigonometric: return -half_pi() * cos(half_pi() * t) * sin(half_pi() * t);
    case ScheduleName::ou: return -t;
    }
    return Scalar(0);
  }

  /// alpha * (alpha * beta_dot - alpha_dot * beta), the factor relating the
  /// score to the velocity. Vanishes wherever alpha does, except for ou.
  Scalar score_denominator(Scalar t) const {
    const Scalar a = alpha(t);
    return a * a * beta_dot(t) - alpha_alpha_dot(t) * beta(t);
  }

  bool variance_preserving() const { return name_ != ScheduleName::linear; }

private:
  static constexpr Scalar half_pi() { return Scalar(std::numbers::pi / 2); }
  ScheduleName name_;
};

template <class Scalar = double>
Schedule<Scalar> make_schedule(ScheduleName name) {
  return Schedule<Scalar>(name);
}

template <class Scalar = double>
Schedule<Scalar> make_schedule(std::string_view name) {
  return Schedule<Scalar>(parse_schedule_name(name));
}

} // namespace difstring
