#pragma once

#include <stdexcept>
#include <string>

namespace mpt {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// density reached a singular value (rho >= 1, rho*H_B >= 1)
struct SingularityError : std::domain_error {
  using std::domain_error::domain_error;
};

struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SolverError : std::runtime_error {
  SolverError(const std::string& what, double res) : std::runtime_error(what), residual(res) {}
  double residual;
};

struct CollisionError : std::runtime_error {
  CollisionError(const std::string& what, double time) : std::runtime_error(what), t(time) {}
  double t;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mpt
