#include "bflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bflow/dynamics.hpp"
#include "bflow/error.hpp"
#include "bflow/network_io.hpp"
#include "bflow/rng.hpp"
#include "bflow/stability.hpp"
#include "bflow/steady_state.hpp"
#include "json_io.hpp"

namespace bflow {

using detail::field;
using detail::field_or;
using detail::json;

namespace {

const std::map<std::string, std::string>& catalog() {
  static const std::map<std::string, std::string> entries{
      {"four_node_equal_ratios", R"({
  "name": "four_node_equal_ratios",
  "kind": "four_node",
  "seed": 7,
  "generator": {"type": "four_node", "r": [1.0, 1.0, 1.0, 1.0]},
  "four_node": {"p_bc": 8.0, "initial_conditions": 20, "v_range": [0.0, 20.0], "portrait_samples": 41}
})"},
      {"four_node_ratio_lt", R"({
  "name": "four_node_ratio_lt",
  "kind": "four_node",
  "seed": 11,
  "generator": {"type": "four_node", "r": [1.0, 4.0, 4.0, 1.0]},
  "four_node": {"p_bc": 8.0, "initial_conditions": 20, "v_range": [0.0, 20.0], "portrait_samples": 41}
})"},
      {"four_node_ratio_gt", R"({
  "name": "four_node_ratio_gt",
  "kind": "four_node",
  "seed": 13,
  "generator": {"type": "four_node", "r": [4.0, 1.0, 1.0, 4.0]},
  "four_node": {"p_bc": 8.0, "initial_conditions": 20, "v_range": [0.0, 20.0], "portrait_samples": 41}
})"},
      {"memory_demo", R"({
  "name": "memory_demo",
  "kind": "memory",
  "seed": 1,
  "generator": {"type": "memory6"},
  "memory": {"v0": 1.0, "first_volume": 15.0, "second_volume": 10.0, "pulse_time": 0.25,
             "relax_time": 200.0, "first_nodes": [0, 1], "second_node": 0}
})"},
      {"global_lattice_3x3", R"({
  "name": "global_lattice_3x3",
  "kind": "global",
  "seed": 2024,
  "generator": {"type": "lattice", "rows": 3, "cols": 3, "full_connect": true, "conductance": 1.0},
  "global": {"inlet": {"node": 4}, "designated": [{"node": 0}], "v0": 1.0, "pulse_volume": 49.0,
             "pulse_time": 1.0, "duration": 200.0, "seeds": 5, "perturbation": 0.2,
             "config": {"eta": 1e-3, "beta": 1e-5, "epsilon": 0.1, "max_iterations": 300}}
})"},
      {"local_fig4a", R"({
  "name": "local_fig4a",
  "kind": "local",
  "seed": 4,
  "generator": {"type": "disordered", "n": 150, "r_min": 0.04, "r_connect": 0.15, "k_max": 5,
                "resistance_scale": 10.0},
  "local": {
    "v0": 1.0,
    "tasks": [{"inlets": [{"at": [0.0, 0.5], "pressure": 8.0}, {"at": [1.0, 0.5], "pressure": 0.0}],
               "outputs": [{"at": [0.4, 0.8], "pressure": 5.0, "state": 1},
                           {"at": [0.75, 0.2], "pressure": 1.0, "state": 0}]}],
    "config": {"eta": 0.25, "gamma": 0.01, "epsilon": 0.1, "max_iterations": 500,
               "phase_duration": 1500.0}
  }
})"},
      {"local_fig4b", R"({
  "name": "local_fig4b",
  "kind": "local",
  "seed": 4,
  "generator": {"type": "disordered", "n": 150, "r_min": 0.04, "r_connect": 0.15, "k_max": 5,
                "resistance_scale": 10.0},
  "local": {
    "v0": 1.0,
    "tasks": [{"inlets": [{"at": [0.0, 0.5], "pressure": 8.0}, {"at": [1.0, 0.5], "pressure": 0.0}],
               "outputs": [{"at": [0.4, 0.8], "pressure": 3.0, "state": 1},
                           {"at": [0.75, 0.2], "pressure": 3.0, "state": 0}]}],
    "config": {"eta": 0.25, "gamma": 0.01, "epsilon": 0.01, "max_iterations": 2000,
               "phase_duration": 1500.0}
  }
})"},
      {"local_fig5_multitask", R"({
  "name": "local_fig5_multitask",
  "kind": "local",
  "seed": 5,
  "generator": {"type": "disordered", "n": 30, "r_min": 0.08, "r_connect": 0.35, "k_max": 5,
                "resistance_scale": 10.0},
  "local": {
    "v0": 1.0,
    "tasks": [
      {"inlets": [{"at": [0.0, 0.0], "pressure": 8.0}, {"at": [1.0, 0.0], "pressure": 0.0},
                  {"at": [0.0, 1.0], "pressure": 2.0}, {"at": [1.0, 1.0], "pressure": 2.0}],
       "outputs": [{"at": [0.5, 0.6], "pressure": 2.0, "state": 0}]},
      {"inlets": [{"at": [0.0, 0.0], "pressure": 8.0}, {"at": [1.0, 0.0], "pressure": 0.0},
                  {"at": [0.0, 1.0], "pressure": 3.0}, {"at": [1.0, 1.0], "pressure": 3.0}],
       "outputs": [{"at": [0.5, 0.6], "pressure": 3.0, "state": 0}]},
      {"inlets": [{"at": [0.0, 0.0], "pressure": 8.0}, {"at": [1.0, 0.0], "pressure": 0.0},
                  {"at": [0.0, 1.0], "pressure": 4.0}, {"at": [1.0, 1.0], "pressure": 4.0}],
       "outputs": [{"at": [0.5, 0.6], "pressure": 4.0, "state": 0}]},
      {"inlets": [{"at": [0.0, 0.0], "pressure": 8.0}, {"at": [1.0, 0.0], "pressure": 0.0},
                  {"at": [0.0, 1.0], "pressure": 6.0}, {"at": [1.0, 1.0], "pressure": 6.0}],
       "outputs": [{"at": [0.5, 0.6], "pressure": 5.0, "state": 1}]}
    ],
    "config": {"eta": 0.25, "gamma": 0.01, "epsilon": 0.5, "max_iterations": 2000,
               "phase_duration": 1500.0}
  }
})"},
  };
  return entries;
}

NodeRef parse_node_ref(const json& j) {
  NodeRef ref;
  if (j.is_number_integer()) {
    ref.id = j.get<int>();
  } else if (j.contains("node")) {
    ref.id = field<int>(j, "node");
  } else {
    const auto at = field<std::vector<double>>(j, "at");
    if (at.size() != 2) throw Error(ErrorCode::schema, "'at' must be [x, y]");
    ref.at = {at[0], at[1]};
  }
  return ref;
}

Binary parse_state(const json& j) {
  const int s = field<int>(j, "state");
  if (s != 0 && s != 1) throw Error(ErrorCode::schema, "target state must be 0 or 1");
  return s == 1 ? Binary::one : Binary::zero;
}

SimulationOptions parse_sim(const json& j, SimulationOptions s) {
  if (!j.is_object()) return s;
  s.abs_tol = field_or(j, "abs_tol", s.abs_tol);
  s.rel_tol = field_or(j, "rel_tol", s.rel_tol);
  s.tol_flux = field_or(j, "tol_flux", s.tol_flux);
  s.dwell = field_or(j, "dwell", s.dwell);
  s.max_dt = field_or(j, "max_dt", s.max_dt);
  return s;
}

GlobalConfig global_config_from(const json& j) {
  GlobalConfig c;
  if (!j.is_object()) return c;
  c.eta = field_or(j, "eta", c.eta);
  c.beta = field_or(j, "beta", c.beta);
  c.epsilon = field_or(j, "epsilon", c.epsilon);
  c.max_iterations = field_or(j, "max_iterations", c.max_iterations);
  c.divergence_factor = field_or(j, "divergence_factor", c.divergence_factor);
  c.divergence_window = field_or(j, "divergence_window", c.divergence_window);
  c.tail_time = field_or(j, "tail_time", c.tail_time);
  c.checkpoint_every = field_or(j, "checkpoint_every", c.checkpoint_every);
  if (j.contains("sim")) c.sim = parse_sim(j.at("sim"), c.sim);
  return c;
}

LocalConfig local_config_from(const json& j) {
  LocalConfig c;
  if (!j.is_object()) return c;
  c.eta = field_or(j, "eta", c.eta);
  c.gamma = field_or(j, "gamma", c.gamma);
  c.epsilon = field_or(j, "epsilon", c.epsilon);
  c.alpha1 = field_or(j, "alpha1", c.alpha1);
  c.alpha2 = field_or(j, "alpha2", c.alpha2);
  c.c_min = field_or(j, "c_min", c.c_min);
  c.c_max = field_or(j, "c_max", c.c_max);
  c.max_iterations = field_or(j, "max_iterations", c.max_iterations);
  c.fast_path = field_or(j, "fast_path", c.fast_path);
  c.phase_duration = field_or(j, "phase_duration", c.phase_duration);
  if (j.contains("sim")) c.sim = parse_sim(j.at("sim"), c.sim);
  return c;
}

LocalTaskSpec local_task_spec_from(const json& t) {
  LocalTaskSpec task;
  for (const json& in : t.at("inlets")) task.inlets.emplace_back(parse_node_ref(in), field<double>(in, "pressure"));
  for (const json& o : t.at("outputs")) {
    task.outputs.push_back({parse_node_ref(o), {field<double>(o, "pressure"), parse_state(o)}});
  }
  return task;
}

FluxPulse pulse_from(const json& j) {
  return {field<int>(j, "node"), field<double>(j, "t_start"), field<double>(j, "t_end"), field<double>(j, "rate")};
}

const json& array_at(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorCode::schema, std::string("missing array '") + key + "'");
  }
  return j.at(key);
}

std::string binary_string(const NetworkState& s) {
  std::string out;
  for (Binary b : s.labels()) out += b == Binary::one ? '1' : '0';
  return out;
}

struct Output {
  std::filesystem::path dir;
  ScenarioResult* result;

  void text(const std::string& name, const std::string& body) const {
    if (dir.empty()) return;
    write_text_file(dir / name, body);
    result->artifacts.push_back(dir / name);
  }
};

void run_four_node(const Scenario& sc, const FlowNetwork& net, const Output& out, ScenarioResult& res,
                   std::ostringstream& sum) {
  const FourNodeSpec& spec = sc.four_node;
  const std::vector<PressureClamp> clamps{{0, spec.p_bc}, {3, 0.0}};
  const EquilibriumSet set = enumerate_equilibria(net, sc.law, clamps);
  out.text("equilibria.json", to_json(set));
  int stable = 0;
  for (const Equilibrium& eq : set.equilibria) stable += eq.stability.label == StabilityLabel::stable;
  const Eigen::VectorXd p = set.equilibria.empty()
                                ? pressures_mixed_bc(laplacian_from_conductance(net), clamps).p
                                : set.equilibria.front().p;
  res.metrics["equilibria"] = static_cast<double>(set.equilibria.size());
  res.metrics["stable"] = stable;
  res.metrics["p1"] = p[1];
  res.metrics["p2"] = p[2];
  sum << "steady pressures p1 = " << p[1] << ", p2 = " << p[2] << "\n";
  sum << set.equilibria.size() << " equilibria (" << stable << " stable):\n";
  for (const Equilibrium& eq : set.equilibria) {
    sum << "  (" << to_string(eq.branches[1]) << "," << to_string(eq.branches[2]) << ")  v = ("
        << eq.v[1] << ", " << eq.v[2] << ")  " << to_string(eq.stability.label) << "\n";
  }

  if (!out.dir.empty()) {
    std::ostringstream portrait;
    write_phase_portrait_csv(portrait, net, sc.law, clamps, 1, 2, spec.v_lo, spec.v_hi,
                             spec.portrait_samples);
    out.text("phase_portrait.csv", portrait.str());
  }

  SplitMix64 rng(sc.seed);
  DrivePhase phase;
  phase.duration = 500.0;
  phase.clamps = clamps;
  const DriveSchedule schedule = DriveSchedule::single(phase);
  std::map<std::string, int> outcomes;
  std::ostringstream ics;
  ics << "ic,v1_0,v2_0,v1,v2,config\n";
  for (int k = 0; k < spec.initial_conditions; ++k) {
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(4);
    v0[1] = rng.uniform(spec.v_lo, spec.v_hi);
    v0[2] = rng.uniform(spec.v_lo, spec.v_hi);
    const Trajectory traj = simulate(net, sc.law, schedule, v0);
    std::string config = traj.steady() ? "(" + std::string(to_string(traj.final_state.branch[1])) + "," +
                                             std::string(to_string(traj.final_state.branch[2])) + ")"
                                       : "not_steady";
    ++outcomes[config];
    ics << k << ',' << v0[1] << ',' << v0[2] << ',' << traj.final_state.v[1] << ','
        << traj.final_state.v[2] << ',' << config << '\n';
    if (k < 3 && !out.dir.empty()) {
      std::ostringstream csv;
      write_trajectory_csv(csv, traj);
      out.text("trajectory_ic" + std::to_string(k) + ".csv", csv.str());
    }
  }
  out.text("initial_conditions.csv", ics.str());
  sum << spec.initial_conditions << " random initial conditions ended in:\n";
  for (const auto& [config, count] : outcomes) {
    sum << "  " << config << ": " << count << "\n";
    res.metrics["ic " + config] = count;
  }
}

void run_memory(const Scenario& sc, const FlowNetwork& net, const Output& out, ScenarioResult& res,
                std::ostringstream& sum) {
  const MemorySpec& m = sc.memory;
  std::vector<std::string> finals;
  bool all_stable = true;
  for (std::size_t c = 0; c < m.first_nodes.size(); ++c) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(net.size(), m.v0);
    const int first = m.first_nodes[c];
    std::string line = "copy " + std::to_string(c) + ": pulse into " + std::to_string(first) +
                       ", then " + std::to_string(m.second_node);
    for (int stage = 0; stage < 2; ++stage) {
      DrivePhase phase;
      phase.duration = m.relax_time;
      const int node = stage == 0 ? first : m.second_node;
      const double volume = stage == 0 ? m.first_volume : m.second_volume;
      phase.pulses.push_back({node, 0.0, m.pulse_time, volume / m.pulse_time});
      const Trajectory traj = simulate(net, sc.law, DriveSchedule::single(phase), v);
      if (!traj.steady()) throw Error(ErrorCode::not_converged, "memory stage did not settle");
      v = traj.final_state.v;
      const StabilityReport rep = minors_criterion(v, sc.law);
      all_stable = all_stable && rep.label == StabilityLabel::stable;
      line += "\n    after pulse " + std::to_string(stage + 1) + ": " + binary_string(traj.final_state) +
              " (" + std::string(to_string(rep.label)) + ")";
      if (!out.dir.empty()) {
        std::ostringstream csv;
        write_trajectory_csv(csv, traj);
        out.text("copy" + std::to_string(c) + "_pulse" + std::to_string(stage + 1) + ".csv", csv.str());
      }
      if (stage == 1) finals.push_back(binary_string(traj.final_state));
    }
    sum << line << "\n";
  }
  const bool differ = std::adjacent_find(finals.begin(), finals.end(), std::not_equal_to<>()) != finals.end();
  res.metrics["configs_differ"] = differ;
  res.metrics["all_stable"] = all_stable;
  sum << "final configurations " << (differ ? "differ" : "coincide") << "; intermediate states "
      << (all_stable ? "all stable" : "not all stable") << "\n";
}

void run_global(const Scenario& sc, const FlowNetwork& net, const Output& out, ScenarioResult& res,
                std::ostringstream& sum, int threads) {
  const std::vector<GlobalTask> tasks = global_tasks(net, sc.law, sc.global);
  int converged = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < sc.global.seeds; ++k) {
    const std::uint64_t seed = sc.seed + static_cast<std::uint64_t>(k);
    GlobalConfig config = sc.global.config;
    config.threads = threads;
    if (config.checkpoint_every > 0 && !out.dir.empty()) {
      config.checkpoint_dir = out.dir / ("checkpoints_seed" + std::to_string(seed));
    }
    const Laplacian w0 = perturbed_laplacian(net, sc.global.perturbation, seed);
    GlobalResult r;
    std::string note;
    try {
      r = train_global(w0, sc.law, tasks, config);
    } catch (const Error& e) {
      note = e.what();
    }
    std::ostringstream csv;
    write_loss_csv(csv, r.loss_history);
    out.text("loss_seed" + std::to_string(seed) + ".csv", csv.str());
    if (!r.loss_history.empty()) {
      best = std::min(best, *std::min_element(r.loss_history.begin(), r.loss_history.end()));
    }
    if (r.status == GlobalStatus::converged && note.empty()) {
      ++converged;
      if (!out.dir.empty()) {
        save_network(out.dir / ("trained_seed" + std::to_string(seed) + ".json"),
                     FlowNetwork::from_laplacian(r.w), sc.law);
      }
    }
    sum << "seed " << seed << ": " << (note.empty() ? std::string(to_string(r.status)) : note)
        << " after " << r.iterations << " iterations, final loss "
        << (r.loss_history.empty() ? std::nan("") : r.loss_history.back()) << "\n";
  }
  res.metrics["converged_seeds"] = converged;
  res.metrics["best_loss"] = best;
}

void run_local(const Scenario& sc, const FlowNetwork& net, const Output& out, ScenarioResult& res,
               std::ostringstream& sum) {
  const std::vector<LocalTask> tasks = local_tasks(net, sc.local);
  const Eigen::VectorXd v0 = Eigen::VectorXd::Constant(net.size(), sc.local.v0);
  const LocalResult r = train_local(net, sc.law, tasks, sc.local.config, v0);
  std::ostringstream csv;
  write_error_csv(csv, r);
  out.text("error_history.csv", csv.str());
  if (!out.dir.empty()) save_network(out.dir / "trained_network.json", r.net, sc.law);
  int drops = 0;
  for (std::size_t s = 1; s < r.error_history.size(); ++s) {
    drops += r.snap_flags[s] && r.error_history[s] < 0.5 * r.error_history[s - 1];
  }
  res.metrics["converged"] = r.status == LocalStatus::converged;
  res.metrics["iterations"] = r.iterations;
  res.metrics["final_error"] = r.error_history.back();
  res.metrics["best_error"] = r.best_error;
  res.metrics["snap_drops"] = drops;
  res.metrics["floor_hits"] = static_cast<double>(r.clamp_stats.floor_hits);
  res.metrics["ceiling_hits"] = static_cast<double>(r.clamp_stats.ceiling_hits);
  sum << to_string(r.status) << " after " << r.iterations << " iterations; final error "
      << r.error_history.back() << ", best " << r.best_error << "\n";
  sum << "snap-driven error drops: " << drops << "; conductance clamp events: "
      << r.clamp_stats.floor_hits << " at floor, " << r.clamp_stats.ceiling_hits << " at ceiling\n";
  for (std::size_t h = 0; h < tasks.size(); ++h) {
    for (const OutputTarget& o : tasks[h].outputs) {
      const NetworkState& s = r.free_states[h];
      sum << "  task " << h << " output " << o.node << ": p = " << s.p[o.node] << " state "
          << to_string(s.branch[o.node]) << " (target " << o.pressure << " state "
          << (o.state == Binary::one ? 1 : 0) << ")\n";
    }
  }
  if (r.status != LocalStatus::converged) res.exit_code = 3;
}

}  // namespace

int NodeRef::resolve(const FlowNetwork& net) const {
  if (id) {
    if (*id < 0 || *id >= net.size()) throw Error(ErrorCode::validation, "node reference out of range");
    return *id;
  }
  if (!net.has_positions()) throw Error(ErrorCode::validation, "network has no layout for 'at' references");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < net.size(); ++i) {
    const double d = std::hypot(net.positions()[i].x - at.x, net.positions()[i].y - at.y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

SimulationOptions parse_simulation_options(std::string_view text) {
  return parse_sim(detail::parse_json(text, "simulation options"), {});
}

GlobalConfig parse_global_config(std::string_view text) {
  return global_config_from(detail::parse_json(text, "global config"));
}

LocalConfig parse_local_config(std::string_view text) {
  return local_config_from(detail::parse_json(text, "local config"));
}

DriveSchedule parse_schedule(std::string_view text) {
  const json j = detail::parse_json(text, "schedule");
  DriveSchedule schedule;
  for (const json& ph : array_at(j, "phases")) {
    DrivePhase phase;
    phase.duration = field_or(ph, "duration", phase.duration);
    phase.end_on_steady = field_or(ph, "end_on_steady", phase.end_on_steady);
    if (ph.contains("clamps")) {
      for (const json& c : ph.at("clamps")) phase.clamps.push_back({field<int>(c, "node"), field<double>(c, "pressure")});
    }
    if (ph.contains("pulses")) {
      for (const json& p : ph.at("pulses")) phase.pulses.push_back(pulse_from(p));
    }
    schedule.phases.push_back(std::move(phase));
  }
  return schedule;
}

std::vector<GlobalTask> parse_global_tasks(std::string_view text) {
  const json j = detail::parse_json(text, "global tasks");
  std::vector<GlobalTask> tasks;
  for (const json& t : array_at(j, "tasks")) {
    GlobalTask task;
    const auto v0 = field<std::vector<double>>(t, "v0");
    const auto target = field<std::vector<double>>(t, "target");
    task.v0 = Eigen::Map<const Eigen::VectorXd>(v0.data(), static_cast<Eigen::Index>(v0.size()));
    task.target = Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size()));
    task.duration = field_or(t, "duration", task.duration);
    if (t.contains("pulses")) {
      for (const json& p : array_at(t, "pulses")) task.pulses.push_back(pulse_from(p));
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<LocalTask> parse_local_tasks(std::string_view text, const FlowNetwork& net) {
  const json j = detail::parse_json(text, "local tasks");
  LocalSpec spec;
  for (const json& t : array_at(j, "tasks")) spec.tasks.push_back(local_task_spec_from(t));
  return local_tasks(net, spec);
}

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  const json j = detail::parse_json(text, "scenario");
  Scenario sc;
  sc.name = field<std::string>(j, "name");
  sc.kind = field<std::string>(j, "kind");
  sc.seed = field_or<std::uint64_t>(j, "seed", sc.seed);
  if (j.contains("law")) {
    const json& law = j.at("law");
    if (law.is_string()) {
      sc.law = load_law(base_dir / law.get<std::string>());
    } else {
      sc.law = detail::law_from_json(law);
    }
  }
  const json& g = j.contains("generator") ? j.at("generator") : json::object();
  GeneratorSpec& gen = sc.generator;
  gen.type = field_or<std::string>(g, "type", gen.type);
  gen.rows = field_or(g, "rows", gen.rows);
  gen.cols = field_or(g, "cols", gen.cols);
  gen.full_connect = field_or(g, "full_connect", gen.full_connect);
  gen.conductance = field_or(g, "conductance", gen.conductance);
  gen.disordered.n = field_or(g, "n", gen.disordered.n);
  gen.disordered.r_min = field_or(g, "r_min", gen.disordered.r_min);
  gen.disordered.r_connect = field_or(g, "r_connect", gen.disordered.r_connect);
  gen.disordered.k_max = field_or(g, "k_max", gen.disordered.k_max);
  gen.disordered.resistance_scale = field_or(g, "resistance_scale", gen.disordered.resistance_scale);
  if (g.contains("r")) {
    const auto r = field<std::vector<double>>(g, "r");
    if (r.size() != 4) throw Error(ErrorCode::schema, "'r' needs four resistances");
    std::copy(r.begin(), r.end(), gen.r);
  }
  if (g.contains("path")) gen.path = base_dir / field<std::string>(g, "path");

  if (j.contains("four_node")) {
    const json& f = j.at("four_node");
    sc.four_node.p_bc = field_or(f, "p_bc", sc.four_node.p_bc);
    sc.four_node.initial_conditions = field_or(f, "initial_conditions", sc.four_node.initial_conditions);
    sc.four_node.portrait_samples = field_or(f, "portrait_samples", sc.four_node.portrait_samples);
    if (f.contains("v_range")) {
      const auto r = field<std::vector<double>>(f, "v_range");
      if (r.size() != 2) throw Error(ErrorCode::schema, "'v_range' needs two values");
      sc.four_node.v_lo = r[0];
      sc.four_node.v_hi = r[1];
    }
  }
  if (j.contains("memory")) {
    const json& m = j.at("memory");
    MemorySpec& ms = sc.memory;
    ms.v0 = field_or(m, "v0", ms.v0);
    ms.first_volume = field_or(m, "first_volume", ms.first_volume);
    ms.second_volume = field_or(m, "second_volume", ms.second_volume);
    ms.pulse_time = field_or(m, "pulse_time", ms.pulse_time);
    ms.relax_time = field_or(m, "relax_time", ms.relax_time);
    ms.first_nodes = field_or(m, "first_nodes", ms.first_nodes);
    ms.second_node = field_or(m, "second_node", ms.second_node);
  }
  if (j.contains("global")) {
    const json& gl = j.at("global");
    GlobalSpec& gs = sc.global;
    gs.inlet = parse_node_ref(gl.at("inlet"));
    for (const json& d : gl.at("designated")) gs.designated.push_back(parse_node_ref(d));
    gs.v0 = field_or(gl, "v0", gs.v0);
    gs.pulse_volume = field_or(gl, "pulse_volume", gs.pulse_volume);
    gs.pulse_time = field_or(gl, "pulse_time", gs.pulse_time);
    gs.duration = field_or(gl, "duration", gs.duration);
    gs.seeds = field_or(gl, "seeds", gs.seeds);
    gs.perturbation = field_or(gl, "perturbation", gs.perturbation);
    if (gl.contains("config")) gs.config = global_config_from(gl.at("config"));
  }
  if (j.contains("local")) {
    const json& lo = j.at("local");
    LocalSpec& ls = sc.local;
    ls.v0 = field_or(lo, "v0", ls.v0);
    for (const json& t : array_at(lo, "tasks")) ls.tasks.push_back(local_task_spec_from(t));
    if (lo.contains("config")) ls.config = local_config_from(lo.at("config"));
  }
  if (sc.kind != "four_node" && sc.kind != "memory" && sc.kind != "global" && sc.kind != "local") {
    throw Error(ErrorCode::schema, "unknown scenario kind '" + sc.kind + "'");
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text_file(path), path.parent_path());
}

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names;
  for (const auto& [name, body] : catalog()) names.push_back(name);
  return names;
}

std::string builtin_scenario_json(const std::string& name) {
  const auto it = catalog().find(name);
  if (it == catalog().end()) throw Error(ErrorCode::validation, "unknown scenario '" + name + "'");
  return it->second + "\n";
}

Scenario builtin_scenario(const std::string& name) { return parse_scenario(builtin_scenario_json(name)); }

FlowNetwork memory_fixture() {
  std::vector<Tube> tubes{{0, 2, 0.5}, {0, 3, 0.5}, {1, 4, 0.5}, {1, 5, 0.5}, {2, 3, 1.0},
                          {3, 4, 1.0}, {4, 5, 1.0}, {5, 2, 1.0}, {2, 4, 1.0}, {3, 5, 1.0}};
  std::vector<Point2> pos{{0.0, 0.5}, {1.0, 0.5}, {0.33, 0.8}, {0.33, 0.2}, {0.67, 0.2}, {0.67, 0.8}};
  std::vector<NodeRole> roles{NodeRole::boundary_flux, NodeRole::boundary_flux, NodeRole::hidden,
                              NodeRole::hidden,        NodeRole::hidden,        NodeRole::hidden};
  return FlowNetwork(6, std::move(tubes), std::move(roles), std::move(pos));
}

FlowNetwork build_network(const GeneratorSpec& spec, std::uint64_t seed) {
  if (spec.type == "lattice") return gen_lattice(spec.rows, spec.cols, spec.full_connect, spec.conductance);
  if (spec.type == "disordered") {
    DisorderedParams p = spec.disordered;
    p.seed = seed;
    return gen_disordered(p);
  }
  if (spec.type == "four_node") return four_node(spec.r[0], spec.r[1], spec.r[2], spec.r[3]);
  if (spec.type == "memory6") return memory_fixture();
  if (spec.type == "file") return load_network(spec.path).network;
  throw Error(ErrorCode::schema, "unknown generator type '" + spec.type + "'");
}

std::vector<GlobalTask> global_tasks(const FlowNetwork& net, const BistableLaw& law,
                                     const GlobalSpec& spec) {
  const int n = net.size();
  std::vector<bool> up(n, false);
  const int inlet = spec.inlet.resolve(net);
  up[inlet] = true;
  for (const NodeRef& d : spec.designated) up[d.resolve(net)] = true;
  const int m = static_cast<int>(std::count(up.begin(), up.end(), true));
  const double total = n * spec.v0 + spec.pulse_volume;

  // Uniform final pressure p* with (n - m) f0^-1(p*) + m f1^-1(p*) = total.
  auto excess = [&](double p) {
    return (n - m) * law.inverse(p, Branch::state0) + m * law.inverse(p, Branch::state1) - total;
  };
  double lo = std::max(law.p_min(), law.pressure_range(Branch::state0).first);
  double hi = law.p_max();
  if (!(excess(lo) <= 0.0 && excess(hi) >= 0.0)) {
    throw Error(ErrorCode::infeasible_target, "no uniform pressure realizes the target pattern");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  const double p_star = 0.5 * (lo + hi);
  GlobalTask task;
  task.v0 = Eigen::VectorXd::Constant(n, spec.v0);
  task.target.resize(n);
  for (int i = 0; i < n; ++i) {
    task.target[i] = law.inverse(p_star, up[i] ? Branch::state1 : Branch::state0);
  }
  // Absorb the bisection residue so the volume constraint holds to rounding.
  task.target[inlet] += total - task.target.sum();
  task.pulses.push_back({inlet, 0.0, spec.pulse_time, spec.pulse_volume / spec.pulse_time});
  task.duration = spec.duration;
  return {task};
}

Laplacian perturbed_laplacian(const FlowNetwork& net, double perturbation, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> c;
  for (const Tube& t : net.tubes()) c.push_back(t.conductance * (1.0 + perturbation * (rng.uniform() - 0.5)));
  return laplacian_from_conductance(net.with_conductances(c));
}

std::vector<LocalTask> local_tasks(const FlowNetwork& net, const LocalSpec& spec) {
  std::vector<LocalTask> tasks;
  for (const LocalTaskSpec& ts : spec.tasks) {
    LocalTask t;
    for (const auto& [ref, p] : ts.inlets) t.inlets.push_back({ref.resolve(net), p});
    for (const auto& [ref, target] : ts.outputs) {
      t.outputs.push_back({ref.resolve(net), target.first, target.second});
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

ScenarioResult run_scenario(const Scenario& sc, const std::filesystem::path& out_dir, int threads) {
  ScenarioResult res;
  const Output out{out_dir, &res};
  std::ostringstream sum;
  sum.precision(6);
  try {
    const FlowNetwork net = build_network(sc.generator, sc.seed);
    sum << "scenario " << sc.name << " (" << sc.kind << "), seed " << sc.seed << ", " << net.size()
        << " nodes, " << net.tubes().size() << " tubes\n";
    out.text("network.json", serialize_network(net, sc.law));
    if (sc.kind == "four_node") run_four_node(sc, net, out, res, sum);
    if (sc.kind == "memory") run_memory(sc, net, out, res, sum);
    if (sc.kind == "global") run_global(sc, net, out, res, sum, threads);
    if (sc.kind == "local") run_local(sc, net, out, res, sum);
  } catch (const Error& e) {
    throw Error(e.code(), "scenario " + sc.name + ": " + e.what());
  }
  res.summary = sum.str();
  out.text("summary.txt", res.summary);
  return res;
}

}  // namespace bflow
