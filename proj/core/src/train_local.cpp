#include "bflow/train_local.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "bflow/error.hpp"
#include "bflow/steady_state.hpp"

namespace bflow {

std::string_view to_string(LocalStatus status) {
  return status == LocalStatus::converged ? "converged" : "not_converged";
}

void LocalTask::validate(int n, const BistableLaw& law) const {
  DrivePhase phase;
  phase.clamps = inlets;
  phase.validate(n);
  if (inlets.empty()) throw Error(ErrorCode::validation, "a local task needs at least one inlet");
  for (const OutputTarget& out : outputs) {
    if (out.node < 0 || out.node >= n) throw Error(ErrorCode::validation, "output node out of range");
    for (const PressureClamp& c : inlets) {
      if (c.node == out.node) throw Error(ErrorCode::validation, "an output cannot be an inlet");
    }
    if (!law.admits(out.pressure, to_branch(out.state))) {
      throw Error(ErrorCode::infeasible_target,
                  "target " + std::to_string(out.pressure) + " Pa is not reachable in state " +
                      std::string(to_string(to_branch(out.state))));
    }
  }
}

ClampedTargets clamped_target_pressures(const NetworkState& free, const LocalTask& task,
                                        const BistableLaw& law, const LocalConfig& config) {
  ClampedTargets out;
  for (const OutputTarget& target : task.outputs) {
    if (!law.admits(target.pressure, to_branch(target.state))) {
      throw Error(ErrorCode::infeasible_target, "output " + std::to_string(target.node));
    }
    const int i = target.node;
    const Binary now = to_binary(free.branch[i]);
    const double pf = free.p[i];
    double pc = 0.0;
    if (now == target.state) {
      pc = pf + config.eta * (target.pressure - pf);
    } else if (target.state == Binary::one) {
      pc = config.alpha1 * law.p_max();
    } else if (law.p_min() > 0.0) {
      pc = config.alpha2 * law.p_min();
    } else {
      pc = law.p_min() - std::abs(config.alpha2 - 1.0) * (law.p_max() - law.p_min());
    }
    out.clamps.push_back({i, pc});
    out.labels.push_back(settle(law, pc, now).label);
  }
  return out;
}

Eigen::MatrixXd conductance_update(const Eigen::VectorXd& p_free, const Eigen::VectorXd& p_clamped,
                                   const LocalConfig& config) {
  if (p_free.size() != p_clamped.size()) {
    throw Error(ErrorCode::length_mismatch, "free and clamped pressures differ in length");
  }
  const Eigen::Index n = p_free.size();
  const double scale = config.gamma / (2.0 * config.eta);
  Eigen::MatrixXd dc(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double df = p_free[i] - p_free[j];
      const double dcl = p_clamped[i] - p_clamped[j];
      dc(i, j) = scale * (df * df - dcl * dcl);
    }
  }
  return dc;
}

FlowNetwork apply_conductance_update(const FlowNetwork& net, const Eigen::MatrixXd& dc,
                                     const LocalConfig& config, ClampStats* stats) {
  std::vector<double> c;
  c.reserve(net.tubes().size());
  for (const Tube& t : net.tubes()) {
    double next = t.conductance + dc(t.i, t.j);
    if (next < config.c_min) {
      next = config.c_min;
      if (stats) ++stats->floor_hits;
    } else if (next > config.c_max) {
      next = config.c_max;
      if (stats) ++stats->ceiling_hits;
    }
    c.push_back(next);
  }
  return net.with_conductances(c);
}

NetworkState fast_steady_update(const FlowNetwork& net, const BistableLaw& law,
                                std::span<const PressureClamp> clamps,
                                std::span<const Binary> previous) {
  const MixedBcSolution sol = pressures_mixed_bc(laplacian_from_conductance(net), clamps);
  const VolumeReconstruction rec = volumes_from_pressures(sol.p, law, previous);
  NetworkState s;
  s.v = rec.v;
  s.p = sol.p;
  s.branch.resize(rec.labels.size());
  for (std::size_t i = 0; i < rec.labels.size(); ++i) s.branch[i] = to_branch(rec.labels[i]);
  return s;
}

namespace {

NetworkState settle_by_ode(const FlowNetwork& net, const BistableLaw& law,
                           std::vector<PressureClamp> clamps, const NetworkState& start,
                           const LocalConfig& config) {
  DrivePhase phase;
  phase.duration = config.phase_duration;
  phase.clamps = std::move(clamps);
  phase.end_on_steady = true;
  SimulationOptions sim = config.sim;
  sim.record = false;
  const Trajectory traj = simulate(net, law, DriveSchedule::single(std::move(phase)), start.v, sim);
  if (!traj.steady()) {
    throw Error(ErrorCode::not_converged, "phase did not reach steady state within " +
                                              std::to_string(config.phase_duration));
  }
  return traj.final_state;
}

}  // namespace

NetworkState free_phase(const FlowNetwork& net, const BistableLaw& law, const LocalTask& task,
                        const NetworkState& memory, bool use_ode, const LocalConfig& config) {
  if (use_ode) return settle_by_ode(net, law, task.inlets, memory, config);
  return fast_steady_update(net, law, task.inlets, memory.labels());
}

NetworkState clamped_phase(const FlowNetwork& net, const BistableLaw& law, const LocalTask& task,
                           const ClampedTargets& targets, const NetworkState& start, bool use_ode,
                           const LocalConfig& config) {
  std::vector<PressureClamp> clamps = task.inlets;
  clamps.insert(clamps.end(), targets.clamps.begin(), targets.clamps.end());
  if (use_ode) return settle_by_ode(net, law, std::move(clamps), start, config);
  return fast_steady_update(net, law, clamps, start.labels());
}

double task_error(const NetworkState& free, const LocalTask& task, const BistableLaw& law) {
  double e = 0.0;
  for (const OutputTarget& out : task.outputs) {
    const double d = free.v[out.node] - out.volume(law);
    e += d * d;
  }
  return e;
}

LocalResult train_local(const FlowNetwork& net0, const BistableLaw& law,
                        std::span<const LocalTask> tasks, const LocalConfig& config,
                        const Eigen::VectorXd& v0, const LocalObserver& observer) {
  if (tasks.empty()) throw Error(ErrorCode::validation, "local training needs at least one task");
  for (const LocalTask& task : tasks) task.validate(net0.size(), law);
  if (v0.size() != net0.size()) throw Error(ErrorCode::length_mismatch, "v0 needs one entry per node");

  const std::size_t k = tasks.size();
  std::vector<NetworkState> memory;
  for (const LocalTask& task : tasks) memory.push_back(make_state(law, v0, task.inlets));

  LocalResult result;
  FlowNetwork net = net0;
  result.net = net0;
  result.best_error = std::numeric_limits<double>::infinity();
  for (int s = 0; s < config.max_iterations; ++s) {
    const bool use_ode = s == 0 || !config.fast_path;
    std::vector<NetworkState> free(k);
    double error = 0.0;
    bool snapped = false;
    for (std::size_t h = 0; h < k; ++h) {
      free[h] = free_phase(net, law, tasks[h], memory[h], use_ode, config);
      error += task_error(free[h], tasks[h], law);
      if (s > 0) {
        for (const OutputTarget& out : tasks[h].outputs) {
          if (to_binary(free[h].branch[out.node]) != to_binary(memory[h].branch[out.node])) {
            snapped = true;
          }
        }
      }
    }
    error /= static_cast<double>(k);
    result.error_history.push_back(error);
    result.snap_flags.push_back(snapped);
    result.iterations = s + 1;
    if (observer) observer(s, free);
    if (error < result.best_error) {
      result.best_error = error;
      result.net = net;
    }
    memory = free;
    result.free_states = free;
    result.final_net = net;
    if (error <= config.epsilon) {
      result.status = LocalStatus::converged;
      result.net = net;
      return result;
    }

    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(net.size(), net.size());
    for (std::size_t h = 0; h < k; ++h) {
      const ClampedTargets targets = clamped_target_pressures(free[h], tasks[h], law, config);
      const NetworkState clamped = clamped_phase(net, law, tasks[h], targets, free[h], use_ode, config);
      dc += conductance_update(free[h].p, clamped.p, config);
    }
    dc /= static_cast<double>(k);
    net = apply_conductance_update(net, dc, config, &result.clamp_stats);
  }
  result.final_net = net;
  result.status = LocalStatus::not_converged;
  return result;
}

void write_error_csv(std::ostream& os, const LocalResult& result) {
  os << "iteration,error,snap\n";
  os.precision(12);
  for (std::size_t s = 0; s < result.error_history.size(); ++s) {
    os << s << ',' << result.error_history[s] << ',' << (result.snap_flags[s] ? 1 : 0) << '\n';
  }
}

}  // namespace bflow
