#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cutcluster {

enum class ErrorKind {
  invalid_argument,
  shape_mismatch,
  non_symmetric,
  non_binary,
  non_finite,
  empty_block,
  zero_volume,
  infinite_divergence,
  not_converged,
  out_of_range,
  parse_error,
  io_error,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::non_symmetric: return "non_symmetric";
    case ErrorKind::non_binary: return "non_binary";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::empty_block: return "empty_block";
    case ErrorKind::zero_volume: return "zero_volume";
    case ErrorKind::infinite_divergence: return "infinite_divergence";
    case ErrorKind::not_converged: return "not_converged";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::io_error: return "io_error";
  }
  return "unknown";
}

/// Every failure in the library is reported through this type. The message
/// is "<kind>: <detail>" so that CLI output stays greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// Sinkhorn failures carry the residual reached before giving up.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& detail, double residual, int iterations)
      : Error(ErrorKind::not_converged, detail),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace cutcluster
