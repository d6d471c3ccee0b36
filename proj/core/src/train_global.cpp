#include "bflow/train_global.hpp"

#include <cmath>
#include <ostream>
#include <thread>

#include "bflow/error.hpp"
#include "bflow/network_io.hpp"

namespace bflow {

std::string_view to_string(GlobalStatus status) {
  switch (status) {
    case GlobalStatus::converged: return "converged";
    case GlobalStatus::max_iterations: return "max_iterations";
    case GlobalStatus::diverged: return "diverged";
    case GlobalStatus::simulation_failed: return "simulation_failed";
  }
  return "unknown";
}

void GlobalTask::validate(int n) const {
  if (v0.size() != n || target.size() != n) {
    throw Error(ErrorCode::length_mismatch, "task v0 and target need one entry per node");
  }
  schedule().validate(n);
  double injected = 0.0;
  for (const FluxPulse& p : pulses) injected += p.volume();
  const double expected = v0.sum() + injected;
  if (std::abs(target.sum() - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
    throw Error(ErrorCode::validation, "target volumes sum to " + std::to_string(target.sum()) +
                                           " but the task delivers " + std::to_string(expected));
  }
}

DriveSchedule GlobalTask::schedule() const {
  DrivePhase phase;
  phase.duration = duration;
  phase.pulses = pulses;
  phase.end_on_steady = true;
  return DriveSchedule::single(std::move(phase));
}

double loss(std::span<const Eigen::VectorXd> v_ss, std::span<const Eigen::VectorXd> targets) {
  if (v_ss.empty() || v_ss.size() != targets.size()) {
    throw Error(ErrorCode::length_mismatch, "loss needs k >= 1 matching state/target pairs");
  }
  double total = 0.0;
  for (std::size_t h = 0; h < v_ss.size(); ++h) {
    if (v_ss[h].size() != targets[h].size()) {
      throw Error(ErrorCode::length_mismatch, "state and target lengths differ");
    }
    total += (v_ss[h] - targets[h]).squaredNorm();
  }
  return total / static_cast<double>(v_ss.size());
}

Eigen::VectorXd pressure_integral(const Trajectory& traj, double t_end) {
  if (traj.t.empty()) return {};
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(traj.p.front().size());
  for (std::size_t k = 1; k < traj.t.size() && traj.t[k] <= t_end; ++k) {
    acc += 0.5 * (traj.t[k] - traj.t[k - 1]) * (traj.p[k] + traj.p[k - 1]);
  }
  return acc;
}

Eigen::MatrixXd loss_gradient(std::span<const Eigen::VectorXd> v_ss,
                              std::span<const Eigen::VectorXd> targets,
                              std::span<const Trajectory> trajectories, double tail_time) {
  if (v_ss.empty() || v_ss.size() != targets.size() || v_ss.size() != trajectories.size()) {
    throw Error(ErrorCode::length_mismatch, "gradient needs matching states, targets and trajectories");
  }
  const Eigen::Index n = v_ss.front().size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t h = 0; h < v_ss.size(); ++h) {
    const auto t_ss = trajectories[h].steady_time();
    if (!t_ss) {
      throw Error(ErrorCode::not_converged, "task " + std::to_string(h) + " never reached steady state");
    }
    Eigen::VectorXd integral = pressure_integral(trajectories[h], *t_ss);
    if (tail_time > 0.0) integral += tail_time * trajectories[h].final_state.p;
    g += (targets[h] - v_ss[h]) * integral.transpose();
  }
  return g * (2.0 / static_cast<double>(v_ss.size()));
}

Laplacian pgd_step(const Laplacian& w, const Eigen::MatrixXd& grad, const GlobalConfig& config) {
  const Eigen::MatrixXd& m = w.matrix();
  return project_laplacian(m - config.eta * (grad + config.beta * m.transpose()));
}

std::vector<Trajectory> run_global_tasks(const Laplacian& w, const BistableLaw& law,
                                         std::span<const GlobalTask> tasks,
                                         const SimulationOptions& sim, int threads) {
  const FlowNetwork net = FlowNetwork::from_laplacian(w);
  std::vector<Trajectory> out(tasks.size());
  auto run = [&](std::size_t h) { out[h] = simulate(net, law, tasks[h].schedule(), tasks[h].v0, sim); };
  if (threads <= 1 || tasks.size() <= 1) {
    for (std::size_t h = 0; h < tasks.size(); ++h) run(h);
    return out;
  }
  std::vector<std::exception_ptr> errors(tasks.size());
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), tasks.size());
  for (std::size_t w_id = 0; w_id < workers; ++w_id) {
    pool.emplace_back([&, w_id] {
      for (std::size_t h = w_id; h < tasks.size(); h += workers) {
        try {
          run(h);
        } catch (...) {
          errors[h] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

GlobalResult train_global(const Laplacian& w0, const BistableLaw& law,
                          std::span<const GlobalTask> tasks, const GlobalConfig& config) {
  if (tasks.empty()) throw Error(ErrorCode::validation, "global training needs at least one task");
  for (const GlobalTask& task : tasks) task.validate(w0.size());
  std::vector<Eigen::VectorXd> targets;
  for (const GlobalTask& task : tasks) targets.push_back(task.target);

  GlobalResult result;
  Laplacian w = w0;
  int above_guard = 0;
  for (int s = 0; s < config.max_iterations; ++s) {
    std::vector<Trajectory> trajs;
    try {
      trajs = run_global_tasks(w, law, tasks, config.sim, config.threads);
    } catch (const Error& e) {
      result.w = w;
      result.status = GlobalStatus::simulation_failed;
      result.message = "simulation failed at iteration " + std::to_string(s) + ": " + e.what();
      return result;
    }
    std::vector<Eigen::VectorXd> v_ss;
    for (const Trajectory& t : trajs) v_ss.push_back(t.final_state.v);
    const double l = loss(v_ss, targets);
    result.loss_history.push_back(l);
    result.iterations = s + 1;
    result.w = w;
    result.steady_volumes = v_ss;

    if (config.checkpoint_every > 0 && s % config.checkpoint_every == 0 &&
        !config.checkpoint_dir.empty()) {
      save_network(config.checkpoint_dir / ("checkpoint_" + std::to_string(s) + ".json"),
                   FlowNetwork::from_laplacian(w), law);
    }
    if (l <= config.epsilon) {
      result.status = GlobalStatus::converged;
      return result;
    }
    above_guard = l > config.divergence_factor * result.loss_history.front() ? above_guard + 1 : 0;
    if (above_guard >= config.divergence_window) {
      result.status = GlobalStatus::diverged;
      result.message = "loss above guard for " + std::to_string(above_guard) + " iterations";
      return result;
    }
    Eigen::MatrixXd grad;
    try {
      grad = loss_gradient(v_ss, targets, trajs, config.tail_time);
    } catch (const Error& e) {
      result.status = GlobalStatus::simulation_failed;
      result.message = "simulation failed at iteration " + std::to_string(s) + ": " + e.what();
      return result;
    }
    w = pgd_step(w, grad, config);
    if (!is_connected(w)) {
      throw Error(ErrorCode::disconnected,
                  "projection disconnected the network at iteration " + std::to_string(s));
    }
  }
  result.status = GlobalStatus::max_iterations;
  return result;
}

void write_loss_csv(std::ostream& os, std::span<const double> history) {
  os << "iteration,loss\n";
  os.precision(12);
  for (std::size_t s = 0; s < history.size(); ++s) os << s << ',' << history[s] << '\n';
}

}  // namespace bflow
