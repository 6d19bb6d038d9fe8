#pragma once

#include <stdexcept>
#include <string>

namespace bsde {

// Raised when a numerical routine fails (fixed point, Newton, regression).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when K*dt >= 1 and the node map is not a contraction.
class ContractionError : public SolverError {
 public:
  explicit ContractionError(const std::string& msg) : SolverError(msg) {}
};

// Raised when a regression design matrix is rank deficient.
class RankError : public SolverError {
 public:
  explicit RankError(const std::string& msg) : SolverError(msg) {}
};

// Raised when a driver returns a non-finite value.
class GeneratorError : public SolverError {
 public:
  explicit GeneratorError(const std::string& msg) : SolverError(msg) {}
};

// Raised when the reference BVP solve does not converge.
class OracleError : public SolverError {
 public:
  explicit OracleError(const std::string& msg) : SolverError(msg) {}
};

}  // namespace bsde
