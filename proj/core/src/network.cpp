#include "bflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "bflow/error.hpp"

namespace bflow {

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::hidden: return "hidden";
    case NodeRole::boundary_pressure: return "boundary_pressure";
    case NodeRole::boundary_flux: return "boundary_flux";
    case NodeRole::output: return "output";
  }
  return "hidden";
}

NodeRole node_role_from_string(std::string_view name) {
  if (name == "hidden") return NodeRole::hidden;
  if (name == "boundary_pressure") return NodeRole::boundary_pressure;
  if (name == "boundary_flux") return NodeRole::boundary_flux;
  if (name == "output") return NodeRole::output;
  throw Error(ErrorCode::schema, "unknown node role '" + std::string(name) + "'");
}

double TubeGeometry::conductance() const {
  if (!(length > 0.0) || !(radius > 0.0) || !(viscosity > 0.0)) {
    throw Error(ErrorCode::validation,
                "tube length, radius and viscosity must be strictly positive");
  }
  return std::numbers::pi * std::pow(radius, 4) / (8.0 * viscosity * length);
}

namespace {

double max_abs(const Eigen::MatrixXd& w) {
  return w.size() == 0 ? 0.0 : w.cwiseAbs().maxCoeff();
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

Laplacian::Laplacian(Eigen::MatrixXd w, double tol) : w_(std::move(w)) {
  if (w_.rows() != w_.cols()) {
    throw Error(ErrorCode::validation, "Laplacian must be square");
  }
  const double scale = std::max(1.0, max_abs(w_));
  const int n = size();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(w_(i, j))) {
        throw Error(ErrorCode::validation, "Laplacian entry is not finite");
      }
      if (std::abs(w_(i, j) - w_(j, i)) > tol * scale) {
        throw Error(ErrorCode::asymmetric, "Laplacian is not symmetric");
      }
      if (i != j && w_(i, j) > tol * scale) {
        throw Error(ErrorCode::negative_conductance,
                    "Laplacian has a positive off-diagonal entry");
      }
    }
    if (std::abs(w_.row(i).sum()) > tol * scale * n) {
      throw Error(ErrorCode::validation, "Laplacian row sum is not zero");
    }
  }
}

Laplacian project_laplacian(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols()) {
    throw Error(ErrorCode::validation, "project_laplacian needs a square matrix");
  }
  const Eigen::Index n = w.rows();
  Eigen::MatrixXd clamped = w;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) clamped(i, j) = std::min(0.0, w(i, j));
    }
  }
  Eigen::MatrixXd out = 0.5 * (clamped + clamped.transpose());
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = 0.0;
    out(i, i) = -out.row(i).sum();
  }
  return Laplacian(std::move(out), Laplacian::Unchecked{});
}

bool is_connected(int n, std::span<const Tube> tubes) {
  if (n <= 1) return true;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  int components = n;
  for (const Tube& t : tubes) {
    if (!(t.conductance > 0.0)) continue;
    const int a = find_root(parent, t.i);
    const int b = find_root(parent, t.j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

bool is_connected(const Laplacian& w) {
  const int n = w.size();
  std::vector<Tube> tubes;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (w.conductance(i, j) > 0.0) tubes.push_back({i, j, w.conductance(i, j)});
    }
  }
  return is_connected(n, tubes);
}

Eigen::MatrixXd reduced_laplacian(const Laplacian& w, int drop) {
  const int n = w.size();
  Eigen::MatrixXd out(n - 1, n - 1);
  for (int i = 0, r = 0; i < n; ++i) {
    if (i == drop) continue;
    for (int j = 0, c = 0; j < n; ++j) {
      if (j == drop) continue;
      out(r, c++) = w.matrix()(i, j);
    }
    ++r;
  }
  return out;
}

FlowNetwork::FlowNetwork(int n, std::vector<Tube> tubes, std::vector<NodeRole> roles,
                         std::vector<Point2> positions)
    : n_(n), tubes_(std::move(tubes)), roles_(std::move(roles)), positions_(std::move(positions)) {
  if (n_ < 1) throw Error(ErrorCode::validation, "network needs at least one node");
  if (roles_.empty()) roles_.assign(n_, NodeRole::hidden);
  if (static_cast<int>(roles_.size()) != n_) {
    throw Error(ErrorCode::length_mismatch, "one role per node is required");
  }
  if (!positions_.empty() && static_cast<int>(positions_.size()) != n_) {
    throw Error(ErrorCode::length_mismatch, "positions must be empty or one per node");
  }
  for (Tube& t : tubes_) {
    if (t.i < 0 || t.j < 0 || t.i >= n_ || t.j >= n_) {
      throw Error(ErrorCode::validation, "tube endpoint out of range");
    }
    if (t.i == t.j) throw Error(ErrorCode::validation, "self-loop tubes are not allowed");
    if (!std::isfinite(t.conductance)) {
      throw Error(ErrorCode::validation, "tube conductance is not finite");
    }
    if (t.conductance < 0.0) {
      throw Error(ErrorCode::negative_conductance,
                  "tube " + std::to_string(t.i) + "-" + std::to_string(t.j));
    }
    if (t.i > t.j) std::swap(t.i, t.j);
  }
  std::sort(tubes_.begin(), tubes_.end(), [](const Tube& a, const Tube& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  for (std::size_t k = 1; k < tubes_.size(); ++k) {
    if (tubes_[k].i == tubes_[k - 1].i && tubes_[k].j == tubes_[k - 1].j) {
      throw Error(ErrorCode::validation, "parallel tubes between " + std::to_string(tubes_[k].i) +
                                             " and " + std::to_string(tubes_[k].j));
    }
  }
  if (!is_connected(n_, tubes_)) throw Error(ErrorCode::disconnected, "network is not connected");
}

FlowNetwork FlowNetwork::from_laplacian(const Laplacian& w, std::vector<NodeRole> roles,
                                        std::vector<Point2> positions) {
  const int n = w.size();
  std::vector<Tube> tubes;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double c = w.conductance(i, j);
      if (c > 0.0) tubes.push_back({i, j, c});
    }
  }
  return FlowNetwork(n, std::move(tubes), std::move(roles), std::move(positions));
}

std::vector<int> FlowNetwork::nodes_with_role(NodeRole role) const {
  std::vector<int> out;
  for (int i = 0; i < n_; ++i) {
    if (roles_[i] == role) out.push_back(i);
  }
  return out;
}

int FlowNetwork::count(NodeRole role) const {
  return static_cast<int>(std::count(roles_.begin(), roles_.end(), role));
}

double FlowNetwork::conductance(int i, int j) const {
  if (i > j) std::swap(i, j);
  auto it = std::lower_bound(tubes_.begin(), tubes_.end(), std::pair{i, j},
                             [](const Tube& t, const std::pair<int, int>& key) {
                               return t.i != key.first ? t.i < key.first : t.j < key.second;
                             });
  if (it != tubes_.end() && it->i == i && it->j == j) return it->conductance;
  return 0.0;
}

Eigen::MatrixXd FlowNetwork::conductance_matrix() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n_, n_);
  for (const Tube& t : tubes_) {
    c(t.i, t.j) = t.conductance;
    c(t.j, t.i) = t.conductance;
  }
  return c;
}

FlowNetwork FlowNetwork::with_conductances(std::span<const double> conductances) const {
  if (conductances.size() != tubes_.size()) {
    throw Error(ErrorCode::length_mismatch, "one conductance per tube is required");
  }
  std::vector<Tube> tubes = tubes_;
  for (std::size_t k = 0; k < tubes.size(); ++k) tubes[k].conductance = conductances[k];
  return FlowNetwork(n_, std::move(tubes), roles_, positions_);
}

FlowNetwork FlowNetwork::with_roles(std::vector<NodeRole> roles) const {
  return FlowNetwork(n_, tubes_, std::move(roles), positions_);
}

bool operator==(const FlowNetwork& a, const FlowNetwork& b) {
  if (a.n_ != b.n_ || a.roles_ != b.roles_ || a.tubes_.size() != b.tubes_.size()) return false;
  for (std::size_t k = 0; k < a.tubes_.size(); ++k) {
    const Tube& x = a.tubes_[k];
    const Tube& y = b.tubes_[k];
    if (x.i != y.i || x.j != y.j || x.conductance != y.conductance) return false;
  }
  if (a.positions_.size() != b.positions_.size()) return false;
  for (std::size_t k = 0; k < a.positions_.size(); ++k) {
    if (a.positions_[k].x != b.positions_[k].x || a.positions_[k].y != b.positions_[k].y) {
      return false;
    }
  }
  return true;
}

Laplacian laplacian_from_conductance(const FlowNetwork& net) {
  if (!is_connected(net.size(), net.tubes())) {
    throw Error(ErrorCode::disconnected, "network is not connected");
  }
  const int n = net.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const Tube& t : net.tubes()) {
    w(t.i, t.j) -= t.conductance;
    w(t.j, t.i) -= t.conductance;
    w(t.i, t.i) += t.conductance;
    w(t.j, t.j) += t.conductance;
  }
  return project_laplacian(w);
}

}  // namespace bflow
