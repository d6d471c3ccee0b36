#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bflow/dynamics.hpp"
#include "bflow/law.hpp"
#include "bflow/network.hpp"

namespace bflow {

struct OutputTarget {
  int node = 0;
  double pressure = 0.0;
  Binary state = Binary::zero;

  double volume(const BistableLaw& law) const { return law.inverse(pressure, to_branch(state)); }
};

struct LocalTask {
  std::vector<PressureClamp> inlets;
  std::vector<OutputTarget> outputs;

  // Throws ErrorCode::infeasible_target when a target pressure lies outside its
  // branch (state0 needs p <= p_max, state1 needs p >= p_min).
  void validate(int n, const BistableLaw& law) const;
};

struct LocalConfig {
  double eta = 0.25;
  double gamma = 0.01;
  double epsilon = 0.1;
  double alpha1 = 1.2;
  double alpha2 = 0.8;
  double c_min = 1e-6;
  double c_max = 1e6;
  int max_iterations = 500;
  bool fast_path = true;
  double phase_duration = 200.0;
  SimulationOptions sim;
};

struct ClampedTargets {
  std::vector<PressureClamp> clamps;  // one per output, in task order
  std::vector<Binary> labels;         // label each output takes once clamped
};

// Correct label: nudge p_c = p_f + eta (p_t - p_f). Stuck in state0 with target
// state1: p_c = alpha1 p_max. Stuck in state1 with target state0: p_c = alpha2 p_min
// (for p_min <= 0, p_min - |alpha2 - 1| (p_max - p_min)).
ClampedTargets clamped_target_pressures(const NetworkState& free, const LocalTask& task,
                                        const BistableLaw& law, const LocalConfig& config);

// dC_ij = gamma / (2 eta) [(p_i^f - p_j^f)^2 - (p_i^c - p_j^c)^2] for every pair.
Eigen::MatrixXd conductance_update(const Eigen::VectorXd& p_free, const Eigen::VectorXd& p_clamped,
                                   const LocalConfig& config);

struct ClampStats {
  long floor_hits = 0;
  long ceiling_hits = 0;
};

// C <- clamp(C + dC, c_min, c_max) on existing tubes only.
FlowNetwork apply_conductance_update(const FlowNetwork& net, const Eigen::MatrixXd& dc,
                                     const LocalConfig& config, ClampStats* stats = nullptr);

// Steady state with reservoirs `clamps`, by algebra alone: pressures from the
// mixed boundary solve, volumes and labels from the previous labels.
NetworkState fast_steady_update(const FlowNetwork& net, const BistableLaw& law,
                                std::span<const PressureClamp> clamps,
                                std::span<const Binary> previous);

NetworkState free_phase(const FlowNetwork& net, const BistableLaw& law, const LocalTask& task,
                        const NetworkState& memory, bool use_ode, const LocalConfig& config);
NetworkState clamped_phase(const FlowNetwork& net, const BistableLaw& law, const LocalTask& task,
                           const ClampedTargets& targets, const NetworkState& start, bool use_ode,
                           const LocalConfig& config);

// sum over outputs of (v_f - v_t)^2.
double task_error(const NetworkState& free, const LocalTask& task, const BistableLaw& law);

enum class LocalStatus { converged, not_converged };

std::string_view to_string(LocalStatus status);

struct LocalResult {
  FlowNetwork net;        // final network when converged, best-so-far otherwise
  FlowNetwork final_net;
  std::vector<double> error_history;
  std::vector<bool> snap_flags;  // an output changed label in this free phase
  LocalStatus status = LocalStatus::not_converged;
  int iterations = 0;
  double best_error = 0.0;
  ClampStats clamp_stats;
  std::vector<NetworkState> free_states;  // last free phase, one per task
};

// Called after every free phase with the iteration index and per-task states.
using LocalObserver = std::function<void(int, std::span<const NetworkState>)>;

LocalResult train_local(const FlowNetwork& net0, const BistableLaw& law,
                        std::span<const LocalTask> tasks, const LocalConfig& config,
                        const Eigen::VectorXd& v0, const LocalObserver& observer = {});

void write_error_csv(std::ostream& os, const LocalResult& result);

}  // namespace bflow
