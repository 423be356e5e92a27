#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lnn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bad shapes, bad configuration values, unknown names.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced a non-finite value. index() identifies the offending
// component (coordinate, grid point, batch element, or step, depending on caller).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::ptrdiff_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

// State outside the physical domain of a system (e.g. superluminal velocity).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace lnn
