#pragma once

#include <cstdint>

#include "bflow/network.hpp"

namespace bflow {

// rows x cols grid on unit spacing, node id r * cols + c. Edges join 4-neighbours,
// or every pair when full_connect is set.
FlowNetwork gen_lattice(int rows, int cols, bool full_connect, double conductance = 1.0);

struct DisorderedParams {
  int n = 150;
  std::uint64_t seed = 1;
  double r_min = 0.04;
  double r_connect = 0.2;
  int k_max = 5;
  double resistance_scale = 1.0;
  int max_retries = 200;
};

// Points drawn uniformly in the unit square with pairwise distance >= r_min.
// Candidate pairs within r_connect are added shortest first while both ends
// have fewer than k_max tubes. C = 1 / (resistance_scale * distance). A
// disconnected draw is redrawn from the next stream of the same seed.
FlowNetwork gen_disordered(const DisorderedParams& params);

// Inlet 0, nodes 1 and 2, ground 3. Tubes inlet-1 (R1), inlet-2 (R2),
// 1-ground (R3), 2-ground (R4).
FlowNetwork four_node(double r1, double r2, double r3, double r4);

}  // namespace bflow
