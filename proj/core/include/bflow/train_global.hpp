#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bflow/dynamics.hpp"
#include "bflow/law.hpp"
#include "bflow/network.hpp"

namespace bflow {

// One input signal (pulse list on a closed network) and the volumes it should
// settle to.
struct GlobalTask {
  std::vector<FluxPulse> pulses;
  Eigen::VectorXd v0;
  Eigen::VectorXd target;
  double duration = 200.0;

  // sum(target) must equal sum(v0) plus the injected volume within 1e-9 relative.
  void validate(int n) const;
  DriveSchedule schedule() const;
};

struct GlobalConfig {
  double eta = 0.1;
  double beta = 1e-5;
  double epsilon = 1e-2;
  int max_iterations = 300;
  double divergence_factor = 10.0;
  int divergence_window = 10;
  // Extra time added to the pressure integral past the detected steady time,
  // using the steady pressures (0 = plain truncation at T_ss).
  double tail_time = 0.0;
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  int threads = 1;
  SimulationOptions sim;
};

enum class GlobalStatus { converged, max_iterations, diverged, simulation_failed };

std::string_view to_string(GlobalStatus status);

struct GlobalResult {
  Laplacian w;
  std::vector<double> loss_history;
  GlobalStatus status = GlobalStatus::max_iterations;
  int iterations = 0;
  std::string message;
  std::vector<Eigen::VectorXd> steady_volumes;
};

// (1/k) sum_h ||v_ss^h - v_t^h||^2.
double loss(std::span<const Eigen::VectorXd> v_ss, std::span<const Eigen::VectorXd> targets);

// Trapezoid integral of p over the accepted samples with t <= t_end.
Eigen::VectorXd pressure_integral(const Trajectory& traj, double t_end);

// (2/k) sum_h (v_t^h - v_ss^h) (int_0^{T_ss} p^h dt)^T. Throws
// ErrorCode::not_converged for a trajectory without a steady time.
Eigen::MatrixXd loss_gradient(std::span<const Eigen::VectorXd> v_ss,
                              std::span<const Eigen::VectorXd> targets,
                              std::span<const Trajectory> trajectories, double tail_time = 0.0);

// project_laplacian(W - eta (grad + beta W^T)).
Laplacian pgd_step(const Laplacian& w, const Eigen::MatrixXd& grad, const GlobalConfig& config);

// Simulates every task to its steady state on the network described by w.
std::vector<Trajectory> run_global_tasks(const Laplacian& w, const BistableLaw& law,
                                         std::span<const GlobalTask> tasks,
                                         const SimulationOptions& sim, int threads = 1);

GlobalResult train_global(const Laplacian& w0, const BistableLaw& law,
                          std::span<const GlobalTask> tasks, const GlobalConfig& config);

void write_loss_csv(std::ostream& os, std::span<const double> history);

}  // namespace bflow
