#include <doctest.h>

#include <filesystem>

#include "bflow/error.hpp"
#include "bflow/scenario.hpp"
#include "bflow/stability.hpp"

using namespace bflow;

TEST_SUITE("scenario") {
  TEST_CASE("catalog entries parse and build") {
    const std::vector<std::string> names = builtin_scenario_names();
    CHECK(names.size() == 8);
    for (const std::string& name : names) {
      const Scenario sc = builtin_scenario(name);
      CHECK(sc.name == name);
      const FlowNetwork net = build_network(sc.generator, sc.seed);
      CHECK(net.size() > 0);
      CHECK(parse_scenario(builtin_scenario_json(name)).kind == sc.kind);
    }
    CHECK_THROWS_AS(builtin_scenario("nope"), Error);
  }

  TEST_CASE("node references") {
    const FlowNetwork net = gen_lattice(3, 3, false);
    NodeRef by_id;
    by_id.id = 7;
    CHECK(by_id.resolve(net) == 7);
    NodeRef by_point;
    by_point.at = {1.9, 0.1};
    CHECK(by_point.resolve(net) == 2);
    NodeRef bad;
    bad.id = 12;
    CHECK_THROWS_AS(bad.resolve(net), Error);
  }

  TEST_CASE("schedule and task documents") {
    const DriveSchedule s = parse_schedule(
        R"({"phases": [{"duration": 5, "clamps": [{"node": 0, "pressure": 8}]},
                       {"duration": 2, "end_on_steady": true,
                        "pulses": [{"node": 1, "t_start": 0, "t_end": 1, "rate": 3}]}]})");
    REQUIRE(s.phases.size() == 2);
    CHECK(s.phases[0].clamps[0].pressure == 8.0);
    CHECK(s.phases[1].end_on_steady);
    CHECK(s.phases[1].pulses[0].rate == 3.0);
    CHECK_THROWS_AS(parse_schedule(R"({"phases": 3})"), Error);

    const auto g = parse_global_tasks(R"({"tasks": [{"v0": [1, 1], "target": [1, 1], "duration": 9}]})");
    REQUIRE(g.size() == 1);
    CHECK(g[0].duration == 9.0);

    const FlowNetwork net = gen_lattice(2, 2, false);
    const auto l = parse_local_tasks(
        R"({"tasks": [{"inlets": [{"node": 0, "pressure": 8}, {"at": [1, 1], "pressure": 0}],
                       "outputs": [{"node": 1, "pressure": 5, "state": 1}]}]})",
        net);
    REQUIRE(l.size() == 1);
    CHECK(l[0].inlets[1].node == 3);
    CHECK(l[0].outputs[0].state == Binary::one);
  }

  TEST_CASE("memory fixture") {
    const FlowNetwork net = memory_fixture();
    CHECK(net.size() == 6);
    CHECK(net.tubes().size() == 10);
    CHECK(net.role(0) == NodeRole::boundary_flux);
  }

  TEST_CASE("four node scenario runs") {
    const ScenarioResult r = run_scenario(builtin_scenario("four_node_equal_ratios"), {});
    CHECK(r.exit_code == 0);
    CHECK(r.metrics.at("equilibria") == 9.0);
  }

  TEST_CASE("memory scenario writes artifacts") {
    const auto dir = std::filesystem::temp_directory_path() / "bflow_scenario_test";
    std::filesystem::remove_all(dir);
    const ScenarioResult r = run_scenario(builtin_scenario("memory_demo"), dir);
    CHECK(r.metrics.at("configs_differ") == 1.0);
    CHECK(r.metrics.at("all_stable") == 1.0);
    CHECK(std::filesystem::exists(dir / "summary.txt"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("kind is validated") {
    CHECK_THROWS_AS(parse_scenario(R"({"name": "x", "kind": "other"})"), Error);
  }
}
