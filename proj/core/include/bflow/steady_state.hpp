#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bflow/dynamics.hpp"
#include "bflow/law.hpp"
#include "bflow/network.hpp"
#include "bflow/stability.hpp"

namespace bflow {

struct FluxInjection {
  int node = 0;
  double rate = 0.0;
};

// Particular solution W^+ q of W p = q. Every p + alpha*1 also solves it.
// Throws ErrorCode::unbalanced_injections unless 1^T q = 0 (tolerance relative
// to ||q||_1).
Eigen::VectorXd pressures_flux_bc(const Laplacian& w, const Eigen::VectorXd& q,
                                  double tol = 1e-10);

struct MixedBcSolution {
  Eigen::VectorXd p;
  std::vector<int> clamped;      // reservoir node indices, in input order
  Eigen::VectorXd q_clamped;     // flux each reservoir injects, same order
};

// Steady pressures with reservoirs at p_bc and prescribed injections q_bc
// elsewhere (other nodes unforced). Free pressures come from the Schur
// complement of the injected block; reservoir fluxes from the reservoir rows.
// Throws ErrorCode::singular_reduced_system when some free node has no path to
// a reservoir.
MixedBcSolution pressures_mixed_bc(const Laplacian& w, std::span<const PressureClamp> p_bc,
                                   std::span<const FluxInjection> q_bc = {});

struct VolumeReconstruction {
  Eigen::VectorXd v;
  std::vector<Binary> labels;
  // Nodes whose pressure sat within 1e-12 of a fold; resolved to the incumbent branch.
  std::vector<int> fold_ambiguous;
};

VolumeReconstruction volumes_from_pressures(const Eigen::VectorXd& p, const BistableLaw& law,
                                            std::span<const Binary> previous);

struct Equilibrium {
  Eigen::VectorXd p;
  Eigen::VectorXd v;
  std::vector<Branch> branches;  // reservoirs report the branch of their volume
  StabilityReport stability;
};

struct EquilibriumSet {
  std::vector<Equilibrium> equilibria;
  std::vector<int> clamped;
};

// Driven case: pressures are solved once and every free node takes each branch
// whose pressure range admits its pressure (Cartesian product).
EquilibriumSet enumerate_equilibria(const FlowNetwork& net, const BistableLaw& law,
                                    std::span<const PressureClamp> p_bc,
                                    std::span<const FluxInjection> q_bc = {});

// Closed case: total volume fixed, balanced injections q_ss (empty = none).
// Every branch assignment in {0, s, 1}^n is root-found for the uniform offset
// alpha with sum_i f_b^-1(alpha + p~_i) = total_volume. n is capped at 14.
EquilibriumSet enumerate_equilibria_closed(const FlowNetwork& net, const BistableLaw& law,
                                           double total_volume,
                                           std::span<const FluxInjection> q_ss = {});

inline constexpr int kClosedEnumerationCap = 14;

std::string to_json(const EquilibriumSet& set);

// Grid of (v1, v2, dv1/dt, dv2/dt) for the two free nodes of a driven network.
void write_phase_portrait_csv(std::ostream& os, const FlowNetwork& net, const BistableLaw& law,
                              std::span<const PressureClamp> p_bc, int node1, int node2,
                              double v_lo, double v_hi, int samples);

}  // namespace bflow
