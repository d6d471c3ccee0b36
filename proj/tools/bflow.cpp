// bflow: command-line front end for the bistable flow-network library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bflow/dynamics.hpp"
#include "bflow/error.hpp"
#include "bflow/generators.hpp"
#include "bflow/network_io.hpp"
#include "bflow/scenario.hpp"
#include "bflow/stability.hpp"
#include "bflow/steady_state.hpp"
#include "bflow/train_global.hpp"
#include "bflow/train_local.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace bflow;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  std::string out_dir;
  int threads = 1;
  std::string format = "csv";
};

Globals g;

// Section of the --config document, or "{}" when absent.
std::string config_section(const std::string& key) {
  if (g.config.empty()) return "{}";
  const json doc = json::parse(read_text_file(g.config), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::schema, "config: invalid JSON");
  return doc.contains(key) ? doc.at(key).dump() : "{}";
}

SimulationOptions sim_options() { return parse_simulation_options(config_section("sim")); }

// Writes to --out-dir/name when set, stdout otherwise.
void emit(const std::string& name, const std::string& body) {
  if (g.out_dir.empty()) {
    std::cout << body;
    if (!body.empty() && body.back() != '\n') std::cout << '\n';
    return;
  }
  const fs::path path = fs::path(g.out_dir) / name;
  write_text_file(path, body);
  std::cerr << "wrote " << path.string() << '\n';
}

bool as_json() { return g.format == "json"; }

std::vector<PressureClamp> parse_clamps(const std::vector<std::string>& items) {
  std::vector<PressureClamp> out;
  for (const std::string& s : items) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::validation, "expected node:value, got '" + s + "'");
    out.push_back({std::stoi(s.substr(0, colon)), std::stod(s.substr(colon + 1))});
  }
  return out;
}

std::vector<FluxInjection> parse_injections(const std::vector<std::string>& items) {
  std::vector<FluxInjection> out;
  for (const PressureClamp& c : parse_clamps(items)) out.push_back({c.node, c.pressure});
  return out;
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Eigen::VectorXd initial_volumes(const std::string& text, double uniform, int n) {
  if (text.empty()) return Eigen::VectorXd::Constant(n, uniform);
  Eigen::VectorXd v = parse_vector(text);
  if (v.size() != n) throw Error(ErrorCode::length_mismatch, "initial volumes need one value per node");
  return v;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string state_json(const NetworkState& s) {
  json j;
  j["t"] = s.t;
  j["v"] = vec_json(s.v);
  j["p"] = vec_json(s.p);
  std::vector<std::string> b;
  for (Branch x : s.branch) b.emplace_back(to_string(x));
  j["branch"] = b;
  return j.dump(2) + "\n";
}

struct DocArgs {
  std::string network;
  std::string law;

  NetworkDocument load() const {
    NetworkDocument doc = load_network(network);
    if (!law.empty()) doc.law = load_law(law);
    return doc;
  }
};

void add_doc_args(CLI::App* cmd, DocArgs& a) {
  cmd->add_option("--network", a.network, "Network JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--law", a.law, "Law JSON overriding the one stored with the network")
      ->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bistable flow networks: simulation, steady states, stability and training"};
  app.require_subcommand(1);
  app.add_option("--config", g.config, "JSON with optional sim/global/local sections")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out-dir", g.out_dir, "Write artifacts here instead of stdout");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}));

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a network");
  std::string gen_type;
  int rows = 3, cols = 3;
  bool full = false;
  double unit_c = 1.0;
  DisorderedParams dis;
  std::vector<double> resist{1, 1, 1, 1};
  std::string gen_law;
  gen->add_option("type", gen_type, "lattice | disordered | four-node | memory")
      ->required()
      ->check(CLI::IsMember({"lattice", "disordered", "four-node", "memory"}));
  gen->add_option("--rows", rows);
  gen->add_option("--cols", cols);
  gen->add_flag("--full", full, "Connect every pair of lattice nodes");
  gen->add_option("--conductance", unit_c);
  gen->add_option("--n", dis.n);
  gen->add_option("--r-min", dis.r_min);
  gen->add_option("--r-connect", dis.r_connect);
  gen->add_option("--k-max", dis.k_max);
  gen->add_option("--resistance-scale", dis.resistance_scale);
  gen->add_option("--r", resist, "Four resistances R1 R2 R3 R4")->expected(4);
  gen->add_option("--law", gen_law, "Law JSON stored with the network")->check(CLI::ExistingFile);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Integrate the volume dynamics");
  DocArgs sim_doc;
  std::string schedule_file, v0_text;
  double v0_uniform = 1.0;
  int flux_stride = 0;
  add_doc_args(sim, sim_doc);
  sim->add_option("--schedule", schedule_file, "Drive schedule JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--v0", v0_text, "Comma-separated initial volumes");
  sim->add_option("--v0-uniform", v0_uniform, "Initial volume of every node");
  sim->add_option("--edge-flux-stride", flux_stride, "Also write edge fluxes every k samples");

  // steady
  auto* steady = app.add_subcommand("steady", "Steady-state pressures");
  DocArgs steady_doc;
  std::vector<std::string> clamps_s, inject_s;
  add_doc_args(steady, steady_doc);
  steady->add_option("--clamp", clamps_s, "Reservoir node:pressure");
  steady->add_option("--inject", inject_s, "Injection node:rate");

  // stability
  auto* stab = app.add_subcommand("stability", "Classify an equilibrium");
  DocArgs stab_doc;
  std::string vol_text;
  std::vector<int> free_nodes;
  add_doc_args(stab, stab_doc);
  stab->add_option("--volumes", vol_text, "Comma-separated volumes")->required();
  stab->add_option("--free", free_nodes, "Free nodes of a driven network (others are reservoirs)");

  // enumerate
  auto* en = app.add_subcommand("enumerate", "List all equilibria");
  DocArgs en_doc;
  std::vector<std::string> en_clamps, en_inject;
  std::optional<double> total_volume;
  add_doc_args(en, en_doc);
  en->add_option("--clamp", en_clamps, "Reservoir node:pressure");
  en->add_option("--inject", en_inject, "Injection node:rate");
  en->add_option("--total-volume", total_volume, "Closed network with this total volume");

  // train-global
  auto* tg = app.add_subcommand("train-global", "Projected gradient training of W");
  DocArgs tg_doc;
  std::string tg_tasks;
  add_doc_args(tg, tg_doc);
  tg->add_option("--tasks", tg_tasks, "Global task JSON")->required()->check(CLI::ExistingFile);

  // train-local
  auto* tl = app.add_subcommand("train-local", "Coupled-learning training of conductances");
  DocArgs tl_doc;
  std::string tl_tasks;
  double tl_v0 = 1.0;
  add_doc_args(tl, tl_doc);
  tl->add_option("--tasks", tl_tasks, "Local task JSON")->required()->check(CLI::ExistingFile);
  tl->add_option("--v0-uniform", tl_v0, "Initial volume of every node");

  // scenario
  auto* sc = app.add_subcommand("scenario", "Run a catalog scenario or scenario file");
  std::string sc_name, sc_export;
  bool sc_list = false;
  sc->add_option("name", sc_name, "Catalog name or path to a scenario JSON");
  sc->add_flag("--list", sc_list, "List catalog names");
  sc->add_option("--export", sc_export, "Write every catalog entry as JSON into this directory");

  // inspect
  auto* ins = app.add_subcommand("inspect", "Validate and summarize a network or scenario file");
  std::string ins_file;
  ins->add_option("file", ins_file)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      FlowNetwork net;
      if (gen_type == "lattice") net = gen_lattice(rows, cols, full, unit_c);
      if (gen_type == "disordered") {
        dis.seed = g.seed;
        net = gen_disordered(dis);
      }
      if (gen_type == "four-node") net = four_node(resist[0], resist[1], resist[2], resist[3]);
      if (gen_type == "memory") net = memory_fixture();
      const BistableLaw law = gen_law.empty() ? BistableLaw{} : load_law(gen_law);
      emit("network.json", serialize_network(net, law));
      return 0;
    }

    if (*sim) {
      const NetworkDocument doc = sim_doc.load();
      const DriveSchedule schedule = parse_schedule(read_text_file(schedule_file));
      const Eigen::VectorXd v0 = initial_volumes(v0_text, v0_uniform, doc.network.size());
      const Trajectory traj = simulate(doc.network, doc.law, schedule, v0, sim_options());
      if (as_json()) {
        json j = json::parse(state_json(traj.final_state));
        j["steps"] = traj.steps;
        j["steady_time"] = traj.steady_time() ? json(*traj.steady_time()) : json(nullptr);
        j["conservation_error"] = traj.conservation_error();
        emit("final_state.json", j.dump(2));
      } else {
        std::ostringstream os;
        write_trajectory_csv(os, traj);
        emit("trajectory.csv", os.str());
      }
      if (flux_stride > 0) {
        std::ostringstream os;
        write_edge_flux_csv(os, doc.network, traj, flux_stride);
        emit("edge_flux.csv", os.str());
      }
      std::cerr << (traj.steady() ? "steady" : "not steady") << " after " << traj.steps << " steps\n";
      return traj.steady() ? 0 : 3;
    }

    if (*steady) {
      const NetworkDocument doc = steady_doc.load();
      const Laplacian w = laplacian_from_conductance(doc.network);
      const auto clamps = parse_clamps(clamps_s);
      const auto inject = parse_injections(inject_s);
      Eigen::VectorXd p;
      Eigen::VectorXd q_res;
      if (clamps.empty()) {
        Eigen::VectorXd q = Eigen::VectorXd::Zero(w.size());
        for (const FluxInjection& f : inject) q[f.node] += f.rate;
        p = pressures_flux_bc(w, q);
      } else {
        const MixedBcSolution s = pressures_mixed_bc(w, clamps, inject);
        p = s.p;
        q_res = s.q_clamped;
      }
      if (as_json()) {
        json j;
        j["p"] = vec_json(p);
        if (q_res.size() > 0) j["reservoir_flux"] = vec_json(q_res);
        emit("steady.json", j.dump(2));
      } else {
        std::ostringstream os;
        os << "node,p\n";
        os.precision(17);
        for (Eigen::Index i = 0; i < p.size(); ++i) os << i << ',' << p[i] << '\n';
        emit("steady.csv", os.str());
      }
      return 0;
    }

    if (*stab) {
      const NetworkDocument doc = stab_doc.load();
      const Eigen::VectorXd v = parse_vector(vol_text);
      if (v.size() != doc.network.size()) {
        throw Error(ErrorCode::length_mismatch, "--volumes needs one value per node");
      }
      const StabilityReport r =
          free_nodes.empty() ? minors_criterion(v, doc.law) : driven_stability(v, doc.law, free_nodes);
      if (as_json()) {
        emit("stability.json", to_json(r));
      } else {
        emit("stability.csv", "label,spinodal_count\n" + std::string(to_string(r.label)) + "," +
                                  std::to_string(r.spinodal_count) + "\n");
      }
      return 0;
    }

    if (*en) {
      const NetworkDocument doc = en_doc.load();
      const auto inject = parse_injections(en_inject);
      const EquilibriumSet set =
          total_volume ? enumerate_equilibria_closed(doc.network, doc.law, *total_volume, inject)
                       : enumerate_equilibria(doc.network, doc.law, parse_clamps(en_clamps), inject);
      if (as_json()) {
        emit("equilibria.json", to_json(set));
      } else {
        std::ostringstream os;
        os.precision(12);
        os << "index,branches,stability";
        for (int i = 0; i < doc.network.size(); ++i) os << ",v_" << i;
        os << '\n';
        for (std::size_t k = 0; k < set.equilibria.size(); ++k) {
          const Equilibrium& eq = set.equilibria[k];
          os << k << ',';
          for (Branch b : eq.branches) os << to_string(b);
          os << ',' << to_string(eq.stability.label);
          for (Eigen::Index i = 0; i < eq.v.size(); ++i) os << ',' << eq.v[i];
          os << '\n';
        }
        emit("equilibria.csv", os.str());
      }
      return 0;
    }

    if (*tg) {
      const NetworkDocument doc = tg_doc.load();
      const auto tasks = parse_global_tasks(read_text_file(tg_tasks));
      GlobalConfig config = parse_global_config(config_section("global"));
      config.sim = sim_options();
      config.threads = g.threads;
      if (config.checkpoint_every > 0 && !g.out_dir.empty()) config.checkpoint_dir = fs::path(g.out_dir) / "checkpoints";
      const GlobalResult r = train_global(laplacian_from_conductance(doc.network), doc.law, tasks, config);
      std::ostringstream os;
      write_loss_csv(os, r.loss_history);
      emit("loss.csv", os.str());
      if (!g.out_dir.empty()) {
        save_network(fs::path(g.out_dir) / "trained_network.json", FlowNetwork::from_laplacian(r.w), doc.law);
      }
      std::cerr << to_string(r.status) << " after " << r.iterations << " iterations\n";
      return r.status == GlobalStatus::converged ? 0 : (r.status == GlobalStatus::simulation_failed ? 4 : 3);
    }

    if (*tl) {
      const NetworkDocument doc = tl_doc.load();
      const auto tasks = parse_local_tasks(read_text_file(tl_tasks), doc.network);
      LocalConfig config = parse_local_config(config_section("local"));
      config.sim = sim_options();
      const LocalResult r = train_local(doc.network, doc.law, tasks, config,
                                        Eigen::VectorXd::Constant(doc.network.size(), tl_v0));
      std::ostringstream os;
      write_error_csv(os, r);
      emit("error_history.csv", os.str());
      if (!g.out_dir.empty()) save_network(fs::path(g.out_dir) / "trained_network.json", r.net, doc.law);
      std::cerr << to_string(r.status) << " after " << r.iterations << " iterations, best error "
                << r.best_error << '\n';
      return r.status == LocalStatus::converged ? 0 : 3;
    }

    if (*sc) {
      if (sc_list) {
        for (const std::string& name : builtin_scenario_names()) std::cout << name << '\n';
        return 0;
      }
      if (!sc_export.empty()) {
        for (const std::string& name : builtin_scenario_names()) {
          write_text_file(fs::path(sc_export) / (name + ".json"), builtin_scenario_json(name));
        }
        return 0;
      }
      if (sc_name.empty()) throw Error(ErrorCode::validation, "scenario needs a name, --list or --export");
      Scenario s = fs::exists(sc_name) ? load_scenario(sc_name) : builtin_scenario(sc_name);
      if (app.get_option("--seed")->count() > 0) s.seed = g.seed;
      const ScenarioResult r = run_scenario(s, g.out_dir, g.threads);
      std::cout << r.summary;
      return r.exit_code;
    }

    if (*ins) {
      const std::string text = read_text_file(ins_file);
      const json j = json::parse(text, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::schema, "not a JSON document");
      if (j.contains("kind")) {
        const Scenario s = parse_scenario(text, fs::path(ins_file).parent_path());
        const FlowNetwork net = build_network(s.generator, s.seed);
        std::cout << "scenario " << s.name << " (" << s.kind << "): " << net.size() << " nodes, "
                  << net.tubes().size() << " tubes\n";
        return 0;
      }
      const NetworkDocument doc = deserialize_network(text);
      const FlowNetwork& net = doc.network;
      double c_lo = std::numeric_limits<double>::infinity(), c_hi = 0.0;
      for (const Tube& t : net.tubes()) {
        c_lo = std::min(c_lo, t.conductance);
        c_hi = std::max(c_hi, t.conductance);
      }
      std::cout << "network: " << net.size() << " nodes, " << net.tubes().size() << " tubes, mean degree "
                << 2.0 * static_cast<double>(net.tubes().size()) / net.size() << '\n'
                << "conductance range [" << c_lo << ", " << c_hi << "]\n"
                << "roles: " << net.count(NodeRole::hidden) << " hidden, "
                << net.count(NodeRole::boundary_pressure) << " pressure, "
                << net.count(NodeRole::boundary_flux) << " flux, " << net.count(NodeRole::output)
                << " output\n"
                << "law: fold (" << doc.law.v_max() << ", " << doc.law.p_max() << ") and ("
                << doc.law.v_min() << ", " << doc.law.p_min() << ")\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
