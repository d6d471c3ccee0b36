#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bflow/dynamics.hpp"
#include "bflow/generators.hpp"
#include "bflow/law.hpp"
#include "bflow/network.hpp"
#include "bflow/train_global.hpp"
#include "bflow/train_local.hpp"

namespace bflow {

struct GeneratorSpec {
  std::string type = "lattice";  // lattice | disordered | four_node | memory6 | file
  int rows = 3;
  int cols = 3;
  bool full_connect = true;
  double conductance = 1.0;
  DisorderedParams disordered;
  double r[4] = {1.0, 1.0, 1.0, 1.0};
  std::filesystem::path path;
};

// Node reference: explicit id, or the node closest to a point of the layout.
struct NodeRef {
  std::optional<int> id;
  Point2 at;

  int resolve(const FlowNetwork& net) const;
};

struct FourNodeSpec {
  double p_bc = 8.0;
  int initial_conditions = 20;
  double v_lo = 0.0;
  double v_hi = 20.0;
  int portrait_samples = 41;
};

struct MemorySpec {
  double v0 = 1.0;
  double first_volume = 15.0;
  double second_volume = 10.0;
  double pulse_time = 0.25;
  double relax_time = 200.0;
  std::vector<int> first_nodes{0, 1};
  int second_node = 0;
};

struct GlobalSpec {
  NodeRef inlet;
  std::vector<NodeRef> designated;
  double v0 = 1.0;
  double pulse_volume = 49.0;
  double pulse_time = 1.0;
  double duration = 200.0;
  int seeds = 5;
  double perturbation = 0.2;
  GlobalConfig config;
};

struct LocalTaskSpec {
  std::vector<std::pair<NodeRef, double>> inlets;
  std::vector<std::pair<NodeRef, std::pair<double, Binary>>> outputs;
};

struct LocalSpec {
  double v0 = 1.0;
  std::vector<LocalTaskSpec> tasks;
  LocalConfig config;
};

struct Scenario {
  std::string name;
  std::string kind;  // four_node | memory | global | local
  std::uint64_t seed = 1;
  BistableLaw law;
  GeneratorSpec generator;
  FourNodeSpec four_node;
  MemorySpec memory;
  GlobalSpec global;
  LocalSpec local;
};

struct ScenarioResult {
  std::string summary;
  std::map<std::string, double> metrics;
  std::vector<std::filesystem::path> artifacts;
  int exit_code = 0;
};

// Standalone documents accepted by the command-line tools. Each parser takes
// the JSON text and throws ErrorCode::schema on malformed input.
SimulationOptions parse_simulation_options(std::string_view json_text);
GlobalConfig parse_global_config(std::string_view json_text);
LocalConfig parse_local_config(std::string_view json_text);
// {"phases": [{"duration", "end_on_steady", "clamps": [{"node", "pressure"}],
//              "pulses": [{"node", "t_start", "t_end", "rate"}]}]}
DriveSchedule parse_schedule(std::string_view json_text);
// {"tasks": [{"v0": [...], "target": [...], "duration", "pulses": [...]}]}
std::vector<GlobalTask> parse_global_tasks(std::string_view json_text);
// {"tasks": [{"inlets": [{"node"|"at", "pressure"}], "outputs": [{"node"|"at", "pressure", "state"}]}]}
std::vector<LocalTask> parse_local_tasks(std::string_view json_text, const FlowNetwork& net);

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

std::vector<std::string> builtin_scenario_names();
// JSON text of a catalog entry; throws ErrorCode::validation for unknown names.
std::string builtin_scenario_json(const std::string& name);
Scenario builtin_scenario(const std::string& name);

FlowNetwork build_network(const GeneratorSpec& spec, std::uint64_t seed);

// The hand-built six-chamber fixture used by the memory protocol: chambers 0
// and 1 are the two pulse targets, 2..5 form a well-connected core.
FlowNetwork memory_fixture();

// Builds the global tasks for one seed: inlet pulse, target state1 at the
// inlet and designated nodes, state0 elsewhere, uniform final pressure.
std::vector<GlobalTask> global_tasks(const FlowNetwork& net, const BistableLaw& law,
                                     const GlobalSpec& spec);
Laplacian perturbed_laplacian(const FlowNetwork& net, double perturbation, std::uint64_t seed);

std::vector<LocalTask> local_tasks(const FlowNetwork& net, const LocalSpec& spec);

ScenarioResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir,
                            int threads = 1);

}  // namespace bflow
