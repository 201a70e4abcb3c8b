#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace refctl {

/// Argument outside the domain of a fitted property or model function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// One or more configuration invariants are violated. `violations()` lists
/// each of them so callers can report everything at once.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// The plant state left its valid region during time integration.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(std::string variable, double time_s, const std::string& detail);
  const std::string& variable() const noexcept { return variable_; }
  double time_s() const noexcept { return time_s_; }

 private:
  std::string variable_;
  double time_s_;
};

}  // namespace refctl
