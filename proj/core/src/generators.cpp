#include "bflow/generators.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "bflow/error.hpp"
#include "bflow/rng.hpp"

namespace bflow {

FlowNetwork gen_lattice(int rows, int cols, bool full_connect, double conductance) {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::validation, "lattice needs rows, cols >= 1");
  const int n = rows * cols;
  std::vector<Point2> pos(n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) pos[r * cols + c] = {static_cast<double>(c), static_cast<double>(r)};
  }
  std::vector<Tube> tubes;
  if (full_connect) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) tubes.push_back({i, j, conductance});
    }
  } else {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int i = r * cols + c;
        if (c + 1 < cols) tubes.push_back({i, i + 1, conductance});
        if (r + 1 < rows) tubes.push_back({i, i + cols, conductance});
      }
    }
  }
  return FlowNetwork(n, std::move(tubes), {}, std::move(pos));
}

namespace {

bool sample_points(SplitMix64& rng, const DisorderedParams& prm, std::vector<Point2>& pts) {
  pts.clear();
  const long budget = 2000L * prm.n;
  for (long attempt = 0; attempt < budget && static_cast<int>(pts.size()) < prm.n; ++attempt) {
    const Point2 cand{rng.uniform(), rng.uniform()};
    const bool ok = std::all_of(pts.begin(), pts.end(), [&](const Point2& q) {
      return std::hypot(q.x - cand.x, q.y - cand.y) >= prm.r_min;
    });
    if (ok) pts.push_back(cand);
  }
  return static_cast<int>(pts.size()) == prm.n;
}

}  // namespace

FlowNetwork gen_disordered(const DisorderedParams& prm) {
  if (prm.n < 2 || prm.k_max < 1 || !(prm.r_connect > 0.0) || !(prm.resistance_scale > 0.0) ||
      prm.r_min < 0.0) {
    throw Error(ErrorCode::validation, "invalid disordered network parameters");
  }
  const SplitMix64 root(prm.seed);
  std::vector<Point2> pts;
  for (int attempt = 0; attempt < prm.max_retries; ++attempt) {
    SplitMix64 rng = root.fork(static_cast<std::uint64_t>(attempt));
    if (!sample_points(rng, prm, pts)) continue;

    std::vector<std::tuple<double, int, int>> pairs;
    for (int i = 0; i < prm.n; ++i) {
      for (int j = i + 1; j < prm.n; ++j) {
        const double d = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
        if (d <= prm.r_connect) pairs.emplace_back(d, i, j);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<int> degree(prm.n, 0);
    std::vector<Tube> tubes;
    for (const auto& [d, i, j] : pairs) {
      if (degree[i] >= prm.k_max || degree[j] >= prm.k_max) continue;
      ++degree[i];
      ++degree[j];
      tubes.push_back({i, j, 1.0 / (prm.resistance_scale * std::max(d, 1e-12))});
    }
    if (!is_connected(prm.n, tubes)) continue;
    return FlowNetwork(prm.n, std::move(tubes), {}, pts);
  }
  throw Error(ErrorCode::validation, "no connected packing found after " +
                                         std::to_string(prm.max_retries) + " draws");
}

FlowNetwork four_node(double r1, double r2, double r3, double r4) {
  for (double r : {r1, r2, r3, r4}) {
    if (!(r > 0.0)) throw Error(ErrorCode::validation, "resistances must be positive");
  }
  std::vector<Tube> tubes{{0, 1, 1.0 / r1}, {0, 2, 1.0 / r2}, {1, 3, 1.0 / r3}, {2, 3, 1.0 / r4}};
  std::vector<NodeRole> roles{NodeRole::boundary_pressure, NodeRole::output, NodeRole::output,
                              NodeRole::boundary_pressure};
  std::vector<Point2> pos{{0.0, 0.5}, {0.5, 1.0}, {0.5, 0.0}, {1.0, 0.5}};
  return FlowNetwork(4, std::move(tubes), std::move(roles), std::move(pos));
}

}  // namespace bflow
