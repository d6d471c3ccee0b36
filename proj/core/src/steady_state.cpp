#include "bflow/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "bflow/error.hpp"
#include "json_io.hpp"

namespace bflow {

namespace {

constexpr double kFoldTol = 1e-12;
constexpr double kRootTol = 1e-12;

Eigen::MatrixXd block(const Eigen::MatrixXd& w, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = w(rows[r], cols[c]);
  }
  return out;
}

Eigen::LDLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LDLT<Eigen::MatrixXd> f(m);
  if (f.info() != Eigen::Success || !f.isPositive() || f.vectorD().minCoeff() <= 0.0 ||
      f.rcond() < 1e-13) {
    throw Error(ErrorCode::singular_reduced_system,
                std::string(what) + " block is singular; a free node has no path to a reservoir");
  }
  return f;
}

// Branch inverse extended continuously to the closed range, so the spinodal
// can be evaluated at its end points during root bracketing.
double closed_inverse(const BistableLaw& law, double p, Branch b) {
  const auto [lo, hi] = law.pressure_range(b);
  if (b == Branch::spinodal) {
    if (p >= hi) return law.v_max();
    if (p <= lo) return law.v_min();
  }
  return law.inverse(std::clamp(p, lo, hi), b);
}

}  // namespace

Eigen::VectorXd pressures_flux_bc(const Laplacian& w, const Eigen::VectorXd& q, double tol) {
  if (q.size() != w.size()) throw Error(ErrorCode::length_mismatch, "q must have one entry per node");
  const double imbalance = q.sum();
  if (std::abs(imbalance) > tol * std::max(1.0, q.cwiseAbs().sum())) {
    throw Error(ErrorCode::unbalanced_injections,
                "sum of injections is " + std::to_string(imbalance));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w.matrix());
  const Eigen::VectorXd& lambda = es.eigenvalues();
  const double cut = 1e-10 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(q.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda[k] <= cut) continue;
    const auto u = es.eigenvectors().col(k);
    p += u * (u.dot(q) / lambda[k]);
  }
  return p;
}

MixedBcSolution pressures_mixed_bc(const Laplacian& w, std::span<const PressureClamp> p_bc,
                                   std::span<const FluxInjection> q_bc) {
  const int n = w.size();
  if (p_bc.empty()) {
    throw Error(ErrorCode::validation, "mixed boundary problem needs a pressure-clamped node");
  }
  std::vector<int> kind(n, 3);
  std::vector<int> c1;
  std::vector<int> c2;
  std::vector<int> c3;
  Eigen::VectorXd p1(p_bc.size());
  for (std::size_t k = 0; k < p_bc.size(); ++k) {
    const int i = p_bc[k].node;
    if (i < 0 || i >= n || kind[i] != 3) throw Error(ErrorCode::validation, "bad clamp node");
    kind[i] = 1;
    c1.push_back(i);
    p1[static_cast<Eigen::Index>(k)] = p_bc[k].pressure;
  }
  Eigen::VectorXd q2(q_bc.size());
  for (std::size_t k = 0; k < q_bc.size(); ++k) {
    const int i = q_bc[k].node;
    if (i < 0 || i >= n || kind[i] != 3) throw Error(ErrorCode::validation, "bad injection node");
    kind[i] = 2;
    c2.push_back(i);
    q2[static_cast<Eigen::Index>(k)] = q_bc[k].rate;
  }
  for (int i = 0; i < n; ++i) {
    if (kind[i] == 3) c3.push_back(i);
  }

  const Eigen::MatrixXd& m = w.matrix();
  Eigen::VectorXd p2(c2.size());
  Eigen::VectorXd p3(c3.size());
  const Eigen::MatrixXd w21 = block(m, c2, c1);
  const Eigen::MatrixXd w23 = block(m, c2, c3);
  const Eigen::MatrixXd w31 = block(m, c3, c1);
  const Eigen::MatrixXd w33 = block(m, c3, c3);
  if (c2.empty()) {
    if (!c3.empty()) p3 = factor_spd(w33, "unforced").solve(-w31 * p1);
  } else {
    const auto f22 = factor_spd(block(m, c2, c2), "injected");
    const Eigen::MatrixXd w32 = block(m, c3, c2);
    if (!c3.empty()) {
      // (W32 W22^-1 W23 - W33) p3 = (W31 - W32 W22^-1 W21) p1 + W32 W22^-1 q2
      const Eigen::MatrixXd schur = w33 - w32 * f22.solve(w23);
      const Eigen::VectorXd rhs = (w31 - w32 * f22.solve(w21)) * p1 + w32 * f22.solve(q2);
      p3 = -factor_spd(schur, "reduced").solve(rhs);
    }
    p2 = f22.solve(q2 - w21 * p1 - w23 * p3);
  }

  MixedBcSolution out;
  out.p.resize(n);
  for (std::size_t k = 0; k < c1.size(); ++k) out.p[c1[k]] = p1[static_cast<Eigen::Index>(k)];
  for (std::size_t k = 0; k < c2.size(); ++k) out.p[c2[k]] = p2[static_cast<Eigen::Index>(k)];
  for (std::size_t k = 0; k < c3.size(); ++k) out.p[c3[k]] = p3[static_cast<Eigen::Index>(k)];
  out.clamped = c1;
  out.q_clamped.resize(c1.size());
  for (std::size_t k = 0; k < c1.size(); ++k) out.q_clamped[k] = m.row(c1[k]).dot(out.p);
  return out;
}

VolumeReconstruction volumes_from_pressures(const Eigen::VectorXd& p, const BistableLaw& law,
                                            std::span<const Binary> previous) {
  if (static_cast<Eigen::Index>(previous.size()) != p.size()) {
    throw Error(ErrorCode::length_mismatch, "one previous label per node is required");
  }
  VolumeReconstruction out;
  out.v.resize(p.size());
  out.labels.resize(previous.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Binary prev = previous[i];
    const bool near_max = std::abs(p[i] - law.p_max()) <= kFoldTol * std::max(1.0, law.p_max());
    const bool near_min = std::abs(p[i] - law.p_min()) <= kFoldTol * std::max(1.0, law.p_min());
    if ((near_max && prev == Binary::zero) || (near_min && prev == Binary::one)) {
      out.fold_ambiguous.push_back(static_cast<int>(i));
      const Branch b = to_branch(prev);
      out.v[i] = closed_inverse(law, p[i], b);
      out.labels[i] = prev;
      continue;
    }
    const Settled s = settle(law, p[i], prev);
    out.v[i] = s.volume;
    out.labels[i] = s.label;
  }
  return out;
}

EquilibriumSet enumerate_equilibria(const FlowNetwork& net, const BistableLaw& law,
                                    std::span<const PressureClamp> p_bc,
                                    std::span<const FluxInjection> q_bc) {
  const MixedBcSolution sol = pressures_mixed_bc(laplacian_from_conductance(net), p_bc, q_bc);
  const int n = net.size();
  std::vector<bool> clamped(n, false);
  for (int c : sol.clamped) clamped[c] = true;

  std::vector<int> free_nodes;
  std::vector<std::vector<Branch>> options;
  double combos = 1.0;
  for (int i = 0; i < n; ++i) {
    if (clamped[i]) continue;
    free_nodes.push_back(i);
    std::vector<Branch> admissible;
    for (Branch b : {Branch::state0, Branch::spinodal, Branch::state1}) {
      if (law.admits(sol.p[i], b)) admissible.push_back(b);
    }
    combos *= static_cast<double>(admissible.size());
    options.push_back(std::move(admissible));
  }
  if (combos > std::pow(3.0, kClosedEnumerationCap)) {
    throw Error(ErrorCode::enumeration_too_large, "too many branch combinations");
  }

  EquilibriumSet set;
  set.clamped = sol.clamped;
  if (combos == 0.0) return set;

  Eigen::VectorXd base_v(n);
  std::vector<Branch> base_b(n, Branch::state0);
  for (int c : sol.clamped) {
    base_v[c] = settle(law, sol.p[c], Binary::zero).volume;
    base_b[c] = law.classify(base_v[c]);
  }

  std::vector<std::size_t> pick(free_nodes.size(), 0);
  while (true) {
    Equilibrium eq;
    eq.p = sol.p;
    eq.v = base_v;
    eq.branches = base_b;
    for (std::size_t k = 0; k < free_nodes.size(); ++k) {
      const int i = free_nodes[k];
      const Branch b = options[k][pick[k]];
      eq.branches[i] = b;
      eq.v[i] = law.inverse(sol.p[i], b);
    }
    eq.stability = driven_stability(eq.v, law, free_nodes);
    set.equilibria.push_back(std::move(eq));

    std::size_t k = free_nodes.size();
    while (k > 0) {
      --k;
      if (++pick[k] < options[k].size()) break;
      pick[k] = 0;
      if (k == 0) return set;
    }
    if (free_nodes.empty()) return set;
  }
}

EquilibriumSet enumerate_equilibria_closed(const FlowNetwork& net, const BistableLaw& law,
                                           double total_volume,
                                           std::span<const FluxInjection> q_ss) {
  const int n = net.size();
  if (n > kClosedEnumerationCap) {
    throw Error(ErrorCode::enumeration_too_large,
                std::to_string(n) + " nodes exceeds the cap of " +
                    std::to_string(kClosedEnumerationCap));
  }
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  for (const FluxInjection& f : q_ss) q[f.node] += f.rate;
  const Eigen::VectorXd base = pressures_flux_bc(laplacian_from_conductance(net), q);

  static constexpr Branch kBranches[] = {Branch::state0, Branch::spinodal, Branch::state1};
  EquilibriumSet set;
  std::vector<int> digit(n, 0);
  std::vector<Branch> assign(n);

  auto g = [&](double alpha) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += closed_inverse(law, alpha + base[i], assign[i]);
    return s - total_volume;
  };

  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = n - 1; i >= 0; --i) {
      assign[i] = kBranches[c % 3];
      c /= 3;
    }
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const auto [a, b] = law.pressure_range(assign[i]);
      lo = std::max(lo, a - base[i]);
      hi = std::min(hi, b - base[i]);
    }
    if (!(lo < hi) && !(lo == hi)) continue;
    if (std::isinf(hi)) {
      double step = 1.0;
      hi = lo + step;
      while (g(hi) <= 0.0 && step < 1e12) {
        step *= 2.0;
        hi = lo + step;
      }
    }
    std::vector<double> cuts{lo, hi};
    for (int i = 0; i < n; ++i) {
      for (double kp : law.knot_pressures(assign[i])) {
        const double a = kp - base[i];
        if (a > lo && a < hi) cuts.push_back(a);
      }
    }
    std::sort(cuts.begin(), cuts.end());

    std::vector<double> roots;
    auto accept = [&](double alpha) {
      for (int i = 0; i < n; ++i) {
        if (assign[i] != Branch::spinodal) continue;
        const double p = alpha + base[i];
        const double tol = 1e-9 * std::max(1.0, law.p_max());
        if (!(p > law.p_min() + tol && p < law.p_max() - tol)) return;
      }
      for (double r : roots) {
        if (std::abs(r - alpha) <= 1e-9 * std::max(1.0, std::abs(alpha))) return;
      }
      roots.push_back(alpha);
    };
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      double a = cuts[k];
      double b = cuts[k + 1];
      double ga = g(a);
      double gb = g(b);
      if (ga == 0.0) accept(a);
      if (gb == 0.0) accept(b);
      if ((ga < 0.0) == (gb < 0.0) || ga == 0.0 || gb == 0.0) continue;
      while (b - a > kRootTol) {
        const double mid = 0.5 * (a + b);
        const double gm = g(mid);
        if ((gm < 0.0) == (ga < 0.0)) {
          a = mid;
          ga = gm;
        } else {
          b = mid;
        }
      }
      accept(0.5 * (a + b));
    }
    if (cuts.size() == 2 && cuts[0] == cuts[1] && g(cuts[0]) == 0.0) accept(cuts[0]);

    for (double alpha : roots) {
      Equilibrium eq;
      eq.p = base.array() + alpha;
      eq.v.resize(n);
      for (int i = 0; i < n; ++i) eq.v[i] = closed_inverse(law, eq.p[i], assign[i]);
      eq.branches = assign;
      eq.stability = minors_criterion(eq.v, law);
      set.equilibria.push_back(std::move(eq));
    }
  }
  return set;
}

std::string to_json(const EquilibriumSet& set) {
  detail::json arr = detail::json::array();
  for (const Equilibrium& eq : set.equilibria) {
    detail::json e;
    e["p"] = std::vector<double>(eq.p.data(), eq.p.data() + eq.p.size());
    e["v"] = std::vector<double>(eq.v.data(), eq.v.data() + eq.v.size());
    std::vector<std::string> branches;
    for (Branch b : eq.branches) branches.emplace_back(to_string(b));
    e["branches"] = branches;
    e["stability"] = detail::json::parse(to_json(eq.stability));
    arr.push_back(std::move(e));
  }
  return arr.dump(2) + "\n";
}

void write_phase_portrait_csv(std::ostream& os, const FlowNetwork& net, const BistableLaw& law,
                              std::span<const PressureClamp> p_bc, int node1, int node2,
                              double v_lo, double v_hi, int samples) {
  const int n = net.size();
  std::vector<bool> clamped(n, false);
  for (const PressureClamp& c : p_bc) clamped[c.node] = true;
  for (int i = 0; i < n; ++i) {
    if (!clamped[i] && i != node1 && i != node2) {
      throw Error(ErrorCode::validation, "phase portrait needs exactly two free nodes");
    }
  }
  samples = std::max(samples, 2);
  os << "v1,v2,dv1dt,dv2dt\n";
  os.precision(12);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  for (const PressureClamp& c : p_bc) p[c.node] = c.pressure;
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < samples; ++a) {
    const double v1 = v_lo + (v_hi - v_lo) * a / (samples - 1);
    for (int b = 0; b < samples; ++b) {
      const double v2 = v_lo + (v_hi - v_lo) * b / (samples - 1);
      p[node1] = law.pressure(v1);
      p[node2] = law.pressure(v2);
      const Eigen::VectorXd d = rhs_from_pressures(net, p, p_bc, q);
      os << v1 << ',' << v2 << ',' << d[node1] << ',' << d[node2] << '\n';
    }
  }
}

}  // namespace bflow
