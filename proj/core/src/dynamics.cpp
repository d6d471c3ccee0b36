#include "bflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include <boost/numeric/odeint.hpp>

namespace bflow {

namespace odeint = boost::numeric::odeint;

double DrivePhase::quiet_from() const {
  double t = 0.0;
  for (const FluxPulse& pulse : pulses) t = std::max(t, pulse.t_end);
  return t;
}

double DrivePhase::injected_volume() const {
  double total = 0.0;
  for (const FluxPulse& pulse : pulses) total += pulse.volume();
  return total;
}

void DrivePhase::validate(int n) const {
  if (!(duration > 0.0)) throw Error(ErrorCode::validation, "phase duration must be positive");
  std::vector<int> clamped(n, 0);
  for (const PressureClamp& c : clamps) {
    if (c.node < 0 || c.node >= n) throw Error(ErrorCode::validation, "clamp node out of range");
    if (!std::isfinite(c.pressure)) throw Error(ErrorCode::validation, "clamp pressure not finite");
    if (clamped[c.node]++) {
      throw Error(ErrorCode::validation, "node " + std::to_string(c.node) + " clamped twice");
    }
  }
  for (std::size_t a = 0; a < pulses.size(); ++a) {
    const FluxPulse& p = pulses[a];
    if (p.node < 0 || p.node >= n) throw Error(ErrorCode::validation, "pulse node out of range");
    if (!(p.t_end > p.t_start) || p.t_start < 0.0 || !std::isfinite(p.rate)) {
      throw Error(ErrorCode::validation, "pulse needs 0 <= t_start < t_end and a finite rate");
    }
    if (clamped[p.node]) {
      throw Error(ErrorCode::validation,
                  "node " + std::to_string(p.node) + " is both pressure-clamped and pulsed");
    }
    for (std::size_t b = 0; b < a; ++b) {
      const FluxPulse& o = pulses[b];
      if (o.node == p.node && p.t_start < o.t_end && o.t_start < p.t_end) {
        throw Error(ErrorCode::validation,
                    "overlapping pulses on node " + std::to_string(p.node));
      }
    }
  }
}

void DriveSchedule::validate(int n) const {
  if (phases.empty()) throw Error(ErrorCode::validation, "drive schedule has no phases");
  for (const DrivePhase& phase : phases) phase.validate(n);
}

std::vector<Binary> NetworkState::labels() const {
  std::vector<Binary> out(branch.size());
  std::transform(branch.begin(), branch.end(), out.begin(), to_binary);
  return out;
}

NetworkState make_state(const BistableLaw& law, const Eigen::VectorXd& v,
                        std::span<const PressureClamp> clamps, double t) {
  NetworkState s;
  s.t = t;
  s.v = v;
  s.p.resize(v.size());
  s.branch.resize(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s.p[i] = law.pressure_extended(v[i]);
    s.branch[i] = law.classify(v[i]);
  }
  for (const PressureClamp& c : clamps) s.p[c.node] = c.pressure;
  return s;
}

Eigen::VectorXd rhs_from_pressures(const FlowNetwork& net, const Eigen::VectorXd& p,
                                   std::span<const PressureClamp> clamps,
                                   const Eigen::VectorXd& q) {
  Eigen::VectorXd out = q;
  for (const Tube& t : net.tubes()) {
    const double flow = t.conductance * (p[t.j] - p[t.i]);
    out[t.i] += flow;
    out[t.j] -= flow;
  }
  for (const PressureClamp& c : clamps) out[c.node] = 0.0;
  return out;
}

Eigen::VectorXd rhs(const FlowNetwork& net, const NetworkState& state, const DrivePhase& phase,
                    double t_phase) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(net.size());
  for (const FluxPulse& pulse : phase.pulses) {
    if (t_phase >= pulse.t_start && t_phase < pulse.t_end) q[pulse.node] += pulse.rate;
  }
  return rhs_from_pressures(net, state.p, phase.clamps, q);
}

std::vector<double> edge_fluxes(const FlowNetwork& net, const Eigen::VectorXd& p) {
  std::vector<double> out;
  out.reserve(net.tubes().size());
  for (const Tube& t : net.tubes()) out.push_back(t.conductance * (p[t.j] - p[t.i]));
  return out;
}

std::optional<double> Trajectory::steady_time() const {
  if (phases.empty()) return std::nullopt;
  return phases.back().steady_time;
}

double Trajectory::conservation_error() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    worst = std::max(worst, std::abs(total_volume[k] - initial_volume - external[k]));
  }
  return worst;
}

namespace {

using State = std::vector<double>;

// Free-node volumes followed by one accumulator for reservoir inflow.
class PhaseSystem {
 public:
  PhaseSystem(const FlowNetwork& net, const BistableLaw& law, const DrivePhase& phase)
      : net_(net), law_(law), slot_(net.size(), -1), p_(Eigen::VectorXd::Zero(net.size())) {
    std::vector<bool> clamped(net.size(), false);
    for (const PressureClamp& c : phase.clamps) {
      clamped[c.node] = true;
      p_[c.node] = c.pressure;
    }
    for (int i = 0; i < net.size(); ++i) {
      if (!clamped[i]) {
        slot_[i] = static_cast<int>(free_.size());
        free_.push_back(i);
      }
    }
    q_.assign(free_.size(), 0.0);
    has_clamps_ = !phase.clamps.empty();
  }

  std::size_t unknowns() const { return free_.size(); }
  const std::vector<int>& free_nodes() const { return free_; }
  const Eigen::VectorXd& pressures() const { return p_; }

  void set_injection(const DrivePhase& phase, double t_mid) {
    std::fill(q_.begin(), q_.end(), 0.0);
    for (const FluxPulse& pulse : phase.pulses) {
      if (t_mid >= pulse.t_start && t_mid < pulse.t_end) q_[slot_[pulse.node]] += pulse.rate;
    }
  }

  void operator()(const State& x, State& dxdt, double /*t*/) {
    const std::size_t m = free_.size();
    for (std::size_t k = 0; k < m; ++k) p_[free_[k]] = law_.pressure_extended(x[k]);
    std::copy(q_.begin(), q_.end(), dxdt.begin());
    double inflow = 0.0;
    for (const Tube& t : net_.tubes()) {
      const double flow = t.conductance * (p_[t.j] - p_[t.i]);
      const int a = slot_[t.i];
      const int b = slot_[t.j];
      if (a >= 0) dxdt[a] += flow;
      if (b >= 0) dxdt[b] -= flow;
      if (a < 0 && b >= 0) inflow -= flow;
      if (b < 0 && a >= 0) inflow += flow;
    }
    dxdt[m] = inflow;
  }

  // Residual used by the steady test: free-node rates, plus every tube flux
  // when no reservoir can sustain a through-flow.
  double residual(const State& x) {
    State d(x.size());
    (*this)(x, d, 0.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < free_.size(); ++k) worst = std::max(worst, std::abs(d[k]));
    if (!has_clamps_) {
      for (const Tube& t : net_.tubes()) {
        worst = std::max(worst, std::abs(t.conductance * (p_[t.j] - p_[t.i])));
      }
    }
    return worst;
  }

 private:
  const FlowNetwork& net_;
  const BistableLaw& law_;
  std::vector<int> slot_;
  std::vector<int> free_;
  Eigen::VectorXd p_;
  std::vector<double> q_;
  bool has_clamps_ = false;
};

double pulse_volume_until(const DrivePhase& phase, double t_phase) {
  double total = 0.0;
  for (const FluxPulse& pulse : phase.pulses) {
    const double end = std::min(t_phase, pulse.t_end);
    if (end > pulse.t_start) total += pulse.rate * (end - pulse.t_start);
  }
  return total;
}

}  // namespace

Trajectory simulate(const FlowNetwork& net, const BistableLaw& law, const DriveSchedule& schedule,
                    const Eigen::VectorXd& v0, const SimulationOptions& opts) {
  const int n = net.size();
  if (v0.size() != n) throw Error(ErrorCode::length_mismatch, "v0 must have one entry per node");
  for (int i = 0; i < n; ++i) {
    if (!(v0[i] >= 0.0)) throw Error(ErrorCode::domain, "initial volumes must be non-negative");
  }
  schedule.validate(n);

  Trajectory traj;
  traj.initial_volume = v0.sum();
  Eigen::VectorXd v = v0;
  double t = 0.0;
  double external_base = 0.0;

  auto state_now = [&](const DrivePhase& phase) { return make_state(law, v, phase.clamps, t); };

  for (std::size_t ph = 0; ph < schedule.phases.size(); ++ph) {
    const DrivePhase& phase = schedule.phases[ph];
    PhaseSystem sys(net, law, phase);
    const std::size_t m = sys.unknowns();
    const double t0 = t;

    // Reservoirs impose their branch volume; the jump counts as delivered volume.
    for (const PressureClamp& c : phase.clamps) {
      const Settled s = settle(law, c.pressure, to_binary(law.classify(v[c.node])));
      external_base += s.volume - v[c.node];
      v[c.node] = s.volume;
    }

    State x(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) x[k] = v[sys.free_nodes()[k]];

    const double dwell = opts.dwell >= 0.0 ? opts.dwell : 0.05 * phase.duration;
    const double quiet_from = phase.quiet_from();
    PhaseOutcome outcome{t0, t0, std::nullopt};
    std::optional<double> since;
    bool done = false;

    auto sync_volumes = [&] {
      for (std::size_t k = 0; k < m; ++k) v[sys.free_nodes()[k]] = x[k];
    };
    auto record = [&] {
      sync_volumes();
      if (!opts.record) return;
      NetworkState s = state_now(phase);
      traj.t.push_back(t);
      traj.v.push_back(s.v);
      traj.p.push_back(s.p);
      traj.total_volume.push_back(v.sum());
      traj.external.push_back(external_base + pulse_volume_until(phase, t - t0) + x[m]);
      traj.phase.push_back(static_cast<int>(ph));
    };
    auto check_steady = [&] {
      if (t - t0 < quiet_from - 1e-12 * std::max(1.0, quiet_from)) {
        since.reset();
        return;
      }
      if (sys.residual(x) < opts.tol_flux) {
        if (!since) since = t;
        if (t - *since >= dwell * (1.0 - 1e-12)) {
          outcome.steady_time = *since;
          if (phase.end_on_steady) done = true;
        }
      } else {
        since.reset();
        outcome.steady_time.reset();
      }
    };

    record();
    check_steady();

    std::vector<double> breaks{0.0, phase.duration};
    for (const FluxPulse& pulse : phase.pulses) {
      breaks.push_back(std::min(pulse.t_start, phase.duration));
      breaks.push_back(std::min(pulse.t_end, phase.duration));
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    // Step cap 1.5 / lambda_max, with lambda_max from a Gershgorin bound.
    double rate_bound = 0.0;
    {
      std::vector<double> row(n, 0.0);
      for (const Tube& tb : net.tubes()) {
        row[tb.i] += 2.0 * tb.conductance;
        row[tb.j] += 2.0 * tb.conductance;
      }
      for (int node : sys.free_nodes()) rate_bound = std::max(rate_bound, row[node]);
      rate_bound *= law.max_abs_stiffness();
    }
    const double max_dt = rate_bound > 0.0 ? std::min(opts.max_dt, 1.5 / rate_bound) : opts.max_dt;

    double dt = opts.initial_dt;
    for (std::size_t b = 0; b + 1 < breaks.size() && !done; ++b) {
      const double seg_end = t0 + breaks[b + 1];
      sys.set_injection(phase, 0.5 * (breaks[b] + breaks[b + 1]));
      auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol,
                                             odeint::runge_kutta_dopri5<State>());
      while (!done && seg_end - t > 1e-12 * std::max(1.0, std::abs(seg_end))) {
        if (++traj.steps > opts.max_steps) {
          throw SimulationError(ErrorCode::step_underflow, "step budget exhausted at t = " +
                                                               std::to_string(t),
                                state_now(phase));
        }
        dt = std::min({dt, seg_end - t, max_dt});
        const State x_prev = x;
        const double t_prev = t;
        if (stepper.try_step(sys, x, t, dt) == odeint::fail) {
          if (dt < opts.min_dt * std::max(1.0, std::abs(t))) {
            throw SimulationError(ErrorCode::step_underflow,
                                  "step size underflow at t = " + std::to_string(t),
                                  state_now(phase));
          }
          continue;
        }
        for (std::size_t k = 0; k < m; ++k) {
          if (x[k] < -opts.abs_tol) {
            const int node = sys.free_nodes()[k];
            x = x_prev;
            t = t_prev;
            sync_volumes();
            throw SimulationError(ErrorCode::law_domain_exit,
                                  "node " + std::to_string(node) + " volume went negative at t = " +
                                      std::to_string(t),
                                  state_now(phase));
          }
        }
        if (seg_end - t <= 1e-12 * std::max(1.0, std::abs(seg_end))) t = seg_end;
        record();
        check_steady();
      }
    }
    sync_volumes();
    external_base += pulse_volume_until(phase, t - t0) + x[m];
    outcome.t_end = t;
    traj.phases.push_back(outcome);
    traj.final_state = state_now(phase);
  }
  return traj;
}

std::optional<double> detect_steady(const FlowNetwork& net, const DriveSchedule& schedule,
                                    const Trajectory& traj, double tol_flux, double dwell) {
  std::optional<double> since;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(net.size());
  for (std::size_t k = 0; k < traj.t.size(); ++k) {
    const int ph = traj.phase[k];
    const DrivePhase& phase = schedule.phases.at(ph);
    const double quiet_from = phase.quiet_from();
    const double t_rel = traj.t[k] - traj.phases.at(ph).t_start;
    bool quiet = t_rel >= quiet_from - 1e-12 * std::max(1.0, quiet_from);
    if (quiet) {
      const Eigen::VectorXd d = rhs_from_pressures(net, traj.p[k], phase.clamps, zero);
      double worst = d.cwiseAbs().maxCoeff();
      if (phase.clamps.empty()) {
        for (double q : edge_fluxes(net, traj.p[k])) worst = std::max(worst, std::abs(q));
      }
      quiet = worst < tol_flux;
    }
    if (!quiet) {
      since.reset();
      continue;
    }
    if (!since) since = traj.t[k];
    if (traj.t[k] - *since >= dwell * (1.0 - 1e-12)) return since;
  }
  return std::nullopt;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index n = traj.v.empty() ? 0 : traj.v.front().size();
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",v_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) os << ",p_" << i;
  os << ",V_total\n";
  os.precision(12);
  for (std::size_t k = 0; k < traj.t.size(); ++k) {
    os << traj.t[k];
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.v[k][i];
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.p[k][i];
    os << ',' << traj.total_volume[k] << '\n';
  }
}

void write_edge_flux_csv(std::ostream& os, const FlowNetwork& net, const Trajectory& traj,
                         int stride) {
  os << "t,i,j,Q\n";
  os.precision(12);
  stride = std::max(1, stride);
  for (std::size_t k = 0; k < traj.t.size(); k += static_cast<std::size_t>(stride)) {
    const auto q = edge_fluxes(net, traj.p[k]);
    for (std::size_t e = 0; e < q.size(); ++e) {
      os << traj.t[k] << ',' << net.tubes()[e].i + 1 << ',' << net.tubes()[e].j + 1 << ',' << q[e]
         << '\n';
    }
  }
}

}  // namespace bflow
