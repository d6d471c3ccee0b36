#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bflow {

enum class ErrorCode {
  validation,
  schema,
  disconnected,
  asymmetric,
  negative_conductance,
  domain,
  branch_infeasible,
  unbalanced_injections,
  singular_reduced_system,
  enumeration_too_large,
  marginal_input,
  step_underflow,
  law_domain_exit,
  not_converged,
  infeasible_target,
  simulation_failed,
  length_mismatch,
  io,
};

std::string_view to_string(ErrorCode code);

// Process exit status used by the CLI: 2 validation, 3 non-convergence,
// 4 numerical failure.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bflow
