#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bflow/error.hpp"
#include "bflow/law.hpp"
#include "bflow/network.hpp"

namespace bflow {

struct PressureClamp {
  int node = 0;
  double pressure = 0.0;
};

// Constant injection `rate` into `node` over [t_start, t_end), times relative
// to the start of the enclosing phase.
struct FluxPulse {
  int node = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double rate = 0.0;

  double volume() const { return rate * (t_end - t_start); }
};

// One time window of boundary conditions. The phase lasts at most `duration`;
// with `end_on_steady` it ends as soon as a steady state is confirmed after the
// last pulse.
struct DrivePhase {
  double duration = 100.0;
  std::vector<PressureClamp> clamps;
  std::vector<FluxPulse> pulses;
  bool end_on_steady = true;

  // Phase-relative time after which no pulse is active.
  double quiet_from() const;
  double injected_volume() const;
  // Pulses may not overlap per node and a node cannot be both clamped and pulsed.
  void validate(int n) const;
};

struct DriveSchedule {
  std::vector<DrivePhase> phases;

  static DriveSchedule single(DrivePhase phase) { return {{std::move(phase)}}; }
  void validate(int n) const;
};

struct NetworkState {
  double t = 0.0;
  Eigen::VectorXd v;
  Eigen::VectorXd p;
  std::vector<Branch> branch;

  std::vector<Binary> labels() const;
};

// p = f(v) everywhere except clamped nodes, which take the prescribed pressure.
NetworkState make_state(const BistableLaw& law, const Eigen::VectorXd& v,
                        std::span<const PressureClamp> clamps = {}, double t = 0.0);

struct SimulationOptions {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  double tol_flux = 1e-6;
  // Negative means 5% of the phase duration.
  double dwell = -1.0;
  double initial_dt = 1e-3;
  double max_dt = std::numeric_limits<double>::infinity();
  double min_dt = 1e-13;
  long max_steps = 20'000'000;
  bool record = true;
};

struct PhaseOutcome {
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<double> steady_time;
};

// Accepted integrator samples. `external` is the cumulative volume delivered by
// pulses and pressure reservoirs, so total_volume[k] - initial_volume -
// external[k] should vanish.
struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> v;
  std::vector<Eigen::VectorXd> p;
  std::vector<double> total_volume;
  std::vector<double> external;
  std::vector<int> phase;
  std::vector<PhaseOutcome> phases;
  double initial_volume = 0.0;
  NetworkState final_state;
  long steps = 0;

  std::optional<double> steady_time() const;
  bool steady() const { return steady_time().has_value(); }
  double conservation_error() const;
};

// Thrown when integration cannot continue; carries the last accepted state.
class SimulationError : public Error {
 public:
  SimulationError(ErrorCode code, const std::string& message, NetworkState last)
      : Error(code, message), last_state_(std::move(last)) {}

  const NetworkState& last_state() const { return last_state_; }

 private:
  NetworkState last_state_;
};

// dv/dt_i = q_i + sum_j C_ij (p_j - p_i) for free nodes; zero on clamped nodes.
Eigen::VectorXd rhs_from_pressures(const FlowNetwork& net, const Eigen::VectorXd& p,
                                   std::span<const PressureClamp> clamps,
                                   const Eigen::VectorXd& q);
Eigen::VectorXd rhs(const FlowNetwork& net, const NetworkState& state, const DrivePhase& phase,
                    double t_phase);

// Q_ij = C_ij (p_j - p_i), one entry per tube in net.tubes() order.
std::vector<double> edge_fluxes(const FlowNetwork& net, const Eigen::VectorXd& p);

// Adaptive Dormand-Prince 5(4) integration of dv/dt = -Wp + q through every
// phase of the schedule. Clamped nodes leave the unknown set; their volume is
// the branch volume of the prescribed pressure.
Trajectory simulate(const FlowNetwork& net, const BistableLaw& law, const DriveSchedule& schedule,
                    const Eigen::VectorXd& v0, const SimulationOptions& opts = {});

// Offline version of the steady test used inside simulate: the first sample
// time after which the flux residual stays below tol_flux for `dwell`.
std::optional<double> detect_steady(const FlowNetwork& net, const DriveSchedule& schedule,
                                    const Trajectory& traj, double tol_flux, double dwell);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_edge_flux_csv(std::ostream& os, const FlowNetwork& net, const Trajectory& traj,
                         int stride = 1);

}  // namespace bflow
