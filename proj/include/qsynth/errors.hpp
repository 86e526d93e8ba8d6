#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qsynth {

/* caller broke a documented precondition */
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/* inconsistent or incomplete configuration (bad L matrix, CC without normalizers, ...) */
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/* a trajectory produced a non-finite state */
class NumericalBlowup : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/* the safety fixed point has an empty domain */
class Unrealizable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/* a closed-loop simulation left the controller domain */
class SafetyViolation : public std::runtime_error {
public:
  SafetyViolation(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

inline void require(bool condition, const char* message) {
  if (!condition)
    throw ContractViolation(message);
}

}  // namespace qsynth
