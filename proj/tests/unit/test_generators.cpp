#include <doctest.h>

#include <cmath>

#include "bflow/error.hpp"
#include "bflow/generators.hpp"

using namespace bflow;

namespace {

std::vector<int> degrees(const FlowNetwork& net) {
  std::vector<int> d(net.size(), 0);
  for (const Tube& t : net.tubes()) {
    ++d[t.i];
    ++d[t.j];
  }
  return d;
}

}  // namespace

TEST_SUITE("generators") {
  TEST_CASE("lattice edge counts") {
    CHECK(gen_lattice(2, 2, false).tubes().size() == 4);
    CHECK(gen_lattice(2, 2, true).tubes().size() == 6);
    CHECK(gen_lattice(5, 5, true).tubes().size() == 300);
    CHECK(gen_lattice(3, 4, false).tubes().size() == 17);
    const FlowNetwork net = gen_lattice(2, 3, false, 2.5);
    CHECK(net.conductance(0, 1) == 2.5);
    CHECK(net.positions()[4].x == 1.0);
    CHECK(net.positions()[4].y == 1.0);
  }

  TEST_CASE("disordered networks") {
    DisorderedParams prm;
    prm.n = 150;
    prm.seed = 4;
    prm.r_connect = 0.15;
    const FlowNetwork a = gen_disordered(prm);
    const FlowNetwork b = gen_disordered(prm);
    CHECK(a == b);
    CHECK(a.size() == 150);
    double total = 0.0;
    for (int d : degrees(a)) {
      CHECK(d >= 1);
      CHECK(d <= 5);
      total += d;
    }
    const double mean = total / 150.0;
    CHECK(mean >= 3.0);
    CHECK(mean <= 5.0);
    const auto& pos = a.positions();
    for (int i = 0; i < 150; ++i) {
      for (int j = i + 1; j < 150; ++j) CHECK(std::hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y) >= prm.r_min);
    }
    for (const Tube& t : a.tubes()) {
      const double dist = std::hypot(pos[t.i].x - pos[t.j].x, pos[t.i].y - pos[t.j].y);
      CHECK(dist <= prm.r_connect);
      CHECK(t.conductance == doctest::Approx(1.0 / dist));
    }
    prm.seed = 5;
    CHECK_FALSE(gen_disordered(prm) == a);
  }

  TEST_CASE("impossible draws fail") {
    DisorderedParams prm;
    prm.n = 50;
    prm.r_min = 0.5;
    prm.max_retries = 3;
    CHECK_THROWS_AS(gen_disordered(prm), Error);
  }

  TEST_CASE("four node layout") {
    const FlowNetwork net = four_node(1, 2, 4, 8);
    CHECK(net.tubes().size() == 4);
    CHECK(net.conductance(0, 1) == 1.0);
    CHECK(net.conductance(0, 2) == 0.5);
    CHECK(net.conductance(1, 3) == 0.25);
    CHECK(net.conductance(2, 3) == 0.125);
  }
}
