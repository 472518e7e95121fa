#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace subspec {

enum class ErrorKind {
  invalid_warp,
  invalid_fiber,
  invalid_case,
  invalid_model,
  s_undefined,
  singular_potential,
  degenerate_range,
  assembly,
  unsupported,
  grid_mismatch,
  zero_function,
  solver,
  probe,
  invariant_violation,
  invalid_config,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type carrying a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace subspec
