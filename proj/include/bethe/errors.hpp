#pragma once
#include <stdexcept>
#include <string>

namespace bethe {

enum class ErrorKind {
  invalid_parameter,
  invalid_vertex,
  budget_exceeded,
  derivative_order_exceeded,
  degenerate_density,
  nonpositive_b,
  ill_conditioned_solve,
  quadrature_nonconvergence,
  insufficient_points,
  degenerate_shell,
  nonpositive_mean,
  grid_too_coarse,
  extrapolation_unstable,
  config_malformed,
  io_failure,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_vertex: return "invalid-vertex";
    case ErrorKind::budget_exceeded: return "budget-exceeded";
    case ErrorKind::derivative_order_exceeded: return "derivative-order-exceeded";
    case ErrorKind::degenerate_density: return "degenerate-density";
    case ErrorKind::nonpositive_b: return "nonpositive-b";
    case ErrorKind::ill_conditioned_solve: return "ill-conditioned-solve";
    case ErrorKind::quadrature_nonconvergence: return "quadrature-nonconvergence";
    case ErrorKind::insufficient_points: return "insufficient-points";
    case ErrorKind::degenerate_shell: return "degenerate-shell";
    case ErrorKind::nonpositive_mean: return "nonpositive-mean";
    case ErrorKind::grid_too_coarse: return "grid-too-coarse";
    case ErrorKind::extrapolation_unstable: return "extrapolation-unstable";
    case ErrorKind::config_malformed: return "config-malformed";
    case ErrorKind::io_failure: return "io-failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

}  // namespace bethe
