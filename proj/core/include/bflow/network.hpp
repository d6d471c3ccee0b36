#pragma once

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace bflow {

enum class NodeRole { hidden, boundary_pressure, boundary_flux, output };

std::string_view to_string(NodeRole role);
NodeRole node_role_from_string(std::string_view name);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// One tube between two distinct chambers. Stored with i < j.
struct Tube {
  int i = 0;
  int j = 0;
  double conductance = 0.0;

  double resistance() const { return 1.0 / conductance; }
};

// Hagen–Poiseuille tube: C = pi a^4 / (8 mu l).
struct TubeGeometry {
  double length = 1.0;
  double radius = 1.0;
  double viscosity = 1.0;

  double conductance() const;
};

// Weighted graph Laplacian: W_ij = -C_ij off the diagonal, zero row sums.
class Laplacian {
 public:
  Laplacian() = default;

  // Throws ErrorCode::validation unless `w` is symmetric with non-positive
  // off-diagonals and zero row sums (relative tolerance `tol`).
  explicit Laplacian(Eigen::MatrixXd w, double tol = 1e-9);

  const Eigen::MatrixXd& matrix() const { return w_; }
  int size() const { return static_cast<int>(w_.rows()); }
  double conductance(int i, int j) const { return -w_(i, j); }

 private:
  struct Unchecked {};
  Laplacian(Eigen::MatrixXd w, Unchecked) : w_(std::move(w)) {}
  friend Laplacian project_laplacian(const Eigen::MatrixXd& w);

  Eigen::MatrixXd w_;
};

// Chambers (nodes) joined by tubes. Immutable once built; every mutating
// operation returns a new network.
//
// Invariants checked on construction: endpoints in range, no self-loops, no
// parallel tubes, finite non-negative conductances, and a connected graph over
// the tubes with positive conductance.
class FlowNetwork {
 public:
  FlowNetwork() = default;
  FlowNetwork(int n, std::vector<Tube> tubes, std::vector<NodeRole> roles = {},
              std::vector<Point2> positions = {});

  // Builds the tube list from the strictly negative off-diagonal entries of W.
  static FlowNetwork from_laplacian(const Laplacian& w,
                                    std::vector<NodeRole> roles = {},
                                    std::vector<Point2> positions = {});

  int size() const { return n_; }
  std::span<const Tube> tubes() const { return tubes_; }
  std::span<const NodeRole> roles() const { return roles_; }
  NodeRole role(int node) const { return roles_[node]; }
  const std::vector<Point2>& positions() const { return positions_; }
  bool has_positions() const { return !positions_.empty(); }

  std::vector<int> nodes_with_role(NodeRole role) const;
  int count(NodeRole role) const;

  // Conductance of the tube joining i and j, zero when absent.
  double conductance(int i, int j) const;
  Eigen::MatrixXd conductance_matrix() const;

  // Same topology, new conductances (one per tube, in tubes() order).
  FlowNetwork with_conductances(std::span<const double> conductances) const;
  FlowNetwork with_roles(std::vector<NodeRole> roles) const;

  friend bool operator==(const FlowNetwork& a, const FlowNetwork& b);

 private:
  int n_ = 0;
  std::vector<Tube> tubes_;
  std::vector<NodeRole> roles_;
  std::vector<Point2> positions_;
};

// Throws ErrorCode::disconnected when the tubes with C > 0 do not span all
// nodes.
Laplacian laplacian_from_conductance(const FlowNetwork& net);

// Clamp off-diagonals to min(0, w_ij), symmetrize, then set each diagonal to
// minus its off-diagonal row sum. Total on square matrices.
Laplacian project_laplacian(const Eigen::MatrixXd& w);

bool is_connected(int n, std::span<const Tube> tubes);
bool is_connected(const Laplacian& w);

// Principal submatrix of W with row/column `drop` removed.
Eigen::MatrixXd reduced_laplacian(const Laplacian& w, int drop);

}  // namespace bflow
