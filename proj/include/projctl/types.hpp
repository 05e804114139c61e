#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace projctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised for malformed numerical inputs (dimension mismatch, non-finite data,
/// out-of-range parameters).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the operational-space map is inconsistent with the contact
/// constraints (rank(Lambda) < l).
class TaskInconsistentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the actuators cannot generate the requested generalized force.
class InfeasibleActuationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the simulator when constraint drift exceeds its hard limit or a
/// controller step fails irrecoverably.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

inline void require_dims(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                         const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InputError(std::string(what) + ": expected " + std::to_string(rows) +
                     "x" + std::to_string(cols) + ", got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline double skew_residual(const Matrix& m) { return (m + m.transpose()).norm(); }

}  // namespace detail
}  // namespace projctl
