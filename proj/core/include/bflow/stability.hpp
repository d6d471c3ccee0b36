#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bflow/law.hpp"

namespace bflow {

enum class StabilityLabel { stable, unstable, marginal };

std::string_view to_string(StabilityLabel label);

struct StabilityReport {
  StabilityLabel label = StabilityLabel::stable;
  int spinodal_count = 0;
  std::vector<double> minors;
  // Smallest eigenvalue of the reduced Hessian; empty for a single chamber.
  std::optional<double> min_eigenvalue;
  // sum_i 1/f'_i, filled when exactly one node is spinodal.
  std::optional<double> inverse_stiffness_sum;
  bool at_fold = false;
};

// Hessian of the total elastic energy restricted to sum(v) = const, written in
// the coordinates of every node except `pivot`:
//   H = diag(f'_i, i != pivot) + f'_pivot * 1 1^T.
// Throws ErrorCode::marginal_input when some volume sits on a fold.
Eigen::MatrixXd reduced_hessian(const Eigen::VectorXd& v, const BistableLaw& law, int pivot);

// Leading principal minors M_y = prod_{i<=y} f'_i * (1 + f'_N sum_{i<=y} 1/f'_i)
// with the last node as pivot N. Stable iff every M_y > 0.
StabilityReport minors_criterion(const Eigen::VectorXd& v, const BistableLaw& law);

// 0 spinodal nodes: stable. 2 or more: unstable. Exactly one: stable iff
// sum_i 1/f'_i < 0.
StabilityReport spinodal_rule(const Eigen::VectorXd& v, const BistableLaw& law);

// Equilibria under pressure reservoirs. A reservoir absorbs volume at fixed
// pressure, i.e. it acts as a zero-stiffness pivot, so the minors reduce to
// prod f'_i over the free nodes: stable iff no free node is spinodal.
StabilityReport driven_stability(const Eigen::VectorXd& v, const BistableLaw& law,
                                 std::span<const int> free_nodes);

std::string to_json(const StabilityReport& report);

}  // namespace bflow
