#include "bflow/error.hpp"

namespace bflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::schema: return "schema";
    case ErrorCode::disconnected: return "disconnected";
    case ErrorCode::asymmetric: return "asymmetric";
    case ErrorCode::negative_conductance: return "negative conductance";
    case ErrorCode::domain: return "domain";
    case ErrorCode::branch_infeasible: return "branch infeasible";
    case ErrorCode::unbalanced_injections: return "unbalanced injections";
    case ErrorCode::singular_reduced_system: return "singular reduced system";
    case ErrorCode::enumeration_too_large: return "enumeration too large";
    case ErrorCode::marginal_input: return "marginal input";
    case ErrorCode::step_underflow: return "stiff/failed";
    case ErrorCode::law_domain_exit: return "law domain exit";
    case ErrorCode::not_converged: return "trajectory not converged";
    case ErrorCode::infeasible_target: return "infeasible target";
    case ErrorCode::simulation_failed: return "simulation failed";
    case ErrorCode::length_mismatch: return "length mismatch";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_converged:
      return 3;
    case ErrorCode::singular_reduced_system:
    case ErrorCode::step_underflow:
    case ErrorCode::law_domain_exit:
    case ErrorCode::simulation_failed:
    case ErrorCode::marginal_input:
      return 4;
    default:
      return 2;
  }
}

namespace {
std::string compose(ErrorCode code, const std::string& message) {
  std::string out(to_string(code));
  if (!message.empty()) {
    out += ": ";
    out += message;
  }
  return out;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(compose(code, message)), code_(code) {}

}  // namespace bflow
