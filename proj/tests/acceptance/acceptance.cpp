// Acceptance runner: `bflow_acceptance <id>` checks one criterion, no argument
// checks all twelve. Prints one PASS/FAIL line per criterion.
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bflow/dynamics.hpp"
#include "bflow/error.hpp"
#include "bflow/generators.hpp"
#include "bflow/rng.hpp"
#include "bflow/scenario.hpp"
#include "bflow/stability.hpp"
#include "bflow/steady_state.hpp"
#include "bflow/train_global.hpp"
#include "bflow/train_local.hpp"

using namespace bflow;

namespace {

// Tolerances.
constexpr double kConservationRel = 1e-6;
constexpr double kSolverRel = 1e-4;
constexpr double kMarginalBand = 1e-8;
constexpr double kSimilarityTol = 1e-8;
constexpr double kGradientRel = 5e-2;
constexpr double kGradientFloor = 1e-8;
constexpr double kFastPathTol = 1e-6;
constexpr double kFig4bPressureTol = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

FlowNetwork random_network(SplitMix64& rng, int max_n) {
  if (rng.uniform() < 0.5) {
    const int rows = 2 + static_cast<int>(rng.next() % 4);
    const int cols = 2 + static_cast<int>(rng.next() % std::max(1, max_n / rows - 1));
    return gen_lattice(rows, std::min(cols, max_n / rows), rng.uniform() < 0.3, rng.uniform(0.5, 2.0));
  }
  DisorderedParams prm;
  prm.n = 5 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_n - 4));
  prm.seed = rng.next();
  prm.r_min = 0.02;
  prm.r_connect = 0.6;
  prm.resistance_scale = rng.uniform(0.3, 1.0);
  return gen_disordered(prm);
}

int pick(SplitMix64& rng, int n) { return static_cast<int>(rng.next() % static_cast<std::uint64_t>(n)); }

// 1. Total volume bookkeeping on random driven runs.
Outcome conservation() {
  const BistableLaw law;
  SplitMix64 rng(101);
  double worst = 0.0;
  int steps = 0;
  for (int run = 0; run < 50; ++run) {
    const FlowNetwork net = random_network(rng, 30);
    const int n = net.size();
    DriveSchedule s;
    const int phases = 1 + pick(rng, 3);
    for (int k = 0; k < phases; ++k) {
      DrivePhase ph;
      ph.duration = rng.uniform(5.0, 40.0);
      ph.end_on_steady = false;
      const int a = pick(rng, n);
      int b = pick(rng, n);
      if (b == a) b = (a + 1) % n;
      if (rng.uniform() < 0.5) {
        ph.clamps = {{a, rng.uniform(0.5, 8.0)}};
        ph.pulses = {{b, 0.0, rng.uniform(0.5, 3.0), rng.uniform(1.0, 10.0)}};
      } else {
        ph.pulses = {{a, 0.0, rng.uniform(0.5, 3.0), rng.uniform(1.0, 10.0)},
                     {b, rng.uniform(0.0, 2.0), rng.uniform(2.5, 4.0), rng.uniform(0.5, 5.0)}};
      }
      s.phases.push_back(ph);
    }
    Eigen::VectorXd v0(n);
    for (int i = 0; i < n; ++i) v0[i] = rng.uniform(0.5, 16.0);
    const Trajectory traj = simulate(net, law, s, v0);
    const double vmax = *std::max_element(traj.total_volume.begin(), traj.total_volume.end());
    worst = std::max(worst, traj.conservation_error() / vmax);
    steps += static_cast<int>(traj.t.size());
  }
  return {worst <= kConservationRel,
          fmt("50 runs, %d accepted steps, worst |V - V0 - int q| / max V = %.2e (limit %.0e)", steps,
              worst, kConservationRel)};
}

// 2. Long-time simulation against the mixed boundary solve.
Outcome solver_cross_validation() {
  const BistableLaw law;
  SplitMix64 rng(202);
  SimulationOptions opts;
  opts.tol_flux = 1e-10;
  opts.record = false;
  double worst = 0.0;
  for (int inst = 0; inst < 25; ++inst) {
    const FlowNetwork net = random_network(rng, 30);
    const int n = net.size();
    DrivePhase ph;
    ph.duration = 20000.0;
    const int a = pick(rng, n);
    int b = pick(rng, n);
    if (b == a) b = (a + 1) % n;
    ph.clamps = {{a, rng.uniform(4.0, 10.0)}, {b, rng.uniform(0.0, 2.0)}};
    Eigen::VectorXd v0(n);
    for (int i = 0; i < n; ++i) v0[i] = rng.uniform(0.5, 16.0);
    const Trajectory traj = simulate(net, law, DriveSchedule::single(ph), v0, opts);
    if (!traj.steady()) return {false, fmt("instance %d never reached steady state", inst)};
    const MixedBcSolution ss = pressures_mixed_bc(laplacian_from_conductance(net), ph.clamps);
    const double err = (traj.final_state.p - ss.p).cwiseAbs().maxCoeff() / ss.p.cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
  }
  return {worst < kSolverRel, fmt("25 instances, worst relative |p_sim - p_solve| = %.2e (limit %.0e)", worst,
                                  kSolverRel)};
}

// Stability of a driven equilibrium from the eigenvalues of the free-node block
// of the ODE Jacobian, -W_ff diag(f'(v_f)).
StabilityLabel jacobian_label(const FlowNetwork& net, const BistableLaw& law, const Eigen::VectorXd& v,
                              const std::vector<int>& free) {
  const Eigen::MatrixXd& w = laplacian_from_conductance(net).matrix();
  const auto m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd j(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) j(a, b) = -w(free[a], free[b]) * law.stiffness(v[free[b]]);
  }
  const double top = Eigen::EigenSolver<Eigen::MatrixXd>(j).eigenvalues().real().maxCoeff();
  if (std::abs(top) < kMarginalBand) return StabilityLabel::marginal;
  return top < 0.0 ? StabilityLabel::stable : StabilityLabel::unstable;
}

// 3. Equal ratios: nine fixed points.
Outcome nine_equilibria() {
  const BistableLaw law;
  const FlowNetwork net = four_node(1, 1, 1, 1);
  const std::vector<PressureClamp> clamps{{0, 8.0}, {3, 0.0}};
  const EquilibriumSet set = enumerate_equilibria(net, law, clamps);
  int agree = 0, stable = 0;
  bool halves = true;
  for (const Equilibrium& eq : set.equilibria) {
    agree += jacobian_label(net, law, eq.v, {1, 2}) == eq.stability.label;
    stable += eq.stability.label == StabilityLabel::stable;
    halves = halves && eq.p[1] == 4.0 && eq.p[2] == 4.0;
  }
  const int count = static_cast<int>(set.equilibria.size());
  return {count == 9 && agree == count && halves,
          fmt("%d equilibria (%d stable), %d/%d labels match the Jacobian eigenvalues, p1 = p2 = p_BC/2 %s",
              count, stable, agree, count, halves ? "exactly" : "violated")};
}

// 4. Unequal ratios: every initial condition ends with the high-pressure
// outlet in state1 and the other in state0.
Outcome ratio_regimes() {
  std::string detail;
  bool pass = true;
  for (const char* name : {"four_node_ratio_lt", "four_node_ratio_gt"}) {
    const Scenario sc = builtin_scenario(name);
    const ScenarioResult r = run_scenario(sc, {});
    const double p1 = r.metrics.at("p1");
    const double p2 = r.metrics.at("p2");
    const std::string expect = p1 > p2 ? "ic (1,0)" : "ic (0,1)";
    const auto it = r.metrics.find(expect);
    const int hits = it == r.metrics.end() ? 0 : static_cast<int>(it->second);
    const double* rr = sc.generator.r;
    const bool regime = std::max(p1, p2) > sc.law.p_max() && std::min(p1, p2) < sc.law.p_min();
    pass = pass && regime && hits == sc.four_node.initial_conditions;
    detail += fmt("R1/R3 = %.2f, R2/R4 = %.2f, p = (%.2f, %.2f): %d/%d end in %s; ", rr[0] / rr[2],
                  rr[1] / rr[3], p1, p2, hits, sc.four_node.initial_conditions, expect.c_str() + 3);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

// 5. Minors, spinodal rule and eigenvalues agree; the reduced dynamics
// Jacobian is similar to a symmetric congruence of the Hessian.
Outcome stability_agreement() {
  const BistableLaw law;
  SplitMix64 rng(505);
  int compared = 0, skipped = 0, agree = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 2 + pick(rng, 7);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(0.0, 20.0);
    bool near_fold = false;
    for (int i = 0; i < n; ++i) near_fold = near_fold || law.at_fold(v[i], kMarginalBand);
    const Eigen::VectorXd eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(reduced_hessian(v, law, n - 1)).eigenvalues();
    if (near_fold || std::abs(eig.minCoeff()) < kMarginalBand) {
      ++skipped;
      continue;
    }
    ++compared;
    const StabilityLabel by_eig = eig.minCoeff() > 0.0 ? StabilityLabel::stable : StabilityLabel::unstable;
    agree += minors_criterion(v, law).label == by_eig && spinodal_rule(v, law).label == by_eig;
  }

  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    DisorderedParams prm;
    prm.n = 2 + pick(rng, 7);
    prm.seed = rng.next();
    prm.r_min = 0.0;
    prm.r_connect = 2.0;
    prm.k_max = 3 + pick(rng, 6);
    const FlowNetwork net = gen_disordered(prm);
    const int n = net.size();
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(0.0, 20.0);
    const Eigen::MatrixXd h = reduced_hessian(v, law, n - 1);
    const Laplacian w = laplacian_from_conductance(net);
    const Eigen::MatrixXd wr = reduced_laplacian(w, n - 1);
    const Eigen::MatrixXd l = wr.llt().matrixL();
    Eigen::VectorXd sym = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(l.transpose() * h * l).eigenvalues();
    Eigen::VectorXd red = Eigen::EigenSolver<Eigen::MatrixXd>(wr * h).eigenvalues().real();
    Eigen::MatrixXd jac = w.matrix();
    for (int i = 0; i < n; ++i) jac.col(i) *= law.stiffness(v[i]);
    Eigen::VectorXd full = Eigen::EigenSolver<Eigen::MatrixXd>(jac).eigenvalues().real();
    Eigen::VectorXd raw = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues();
    Eigen::VectorXd moved = Eigen::EigenSolver<Eigen::MatrixXd>(l.triangularView<Eigen::Lower>().solve(h * l))
                                .eigenvalues()
                                .real();
    std::sort(moved.begin(), moved.end());
    for (int k = 0; k < n - 1; ++k) worst = std::max(worst, std::abs(raw[k] - moved[k]) / std::max(1.0, std::abs(raw[k])));
    std::sort(red.begin(), red.end());
    std::sort(full.begin(), full.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    Eigen::VectorXd rest = full.tail(n - 1);
    std::sort(rest.begin(), rest.end());
    for (int k = 0; k < n - 1; ++k) {
      const double scale = std::max(1.0, std::abs(sym[k]));
      worst = std::max({worst, std::abs(sym[k] - red[k]) / scale, std::abs(sym[k] - rest[k]) / scale});
    }
  }
  return {agree == compared && worst < kSimilarityTol,
          fmt("%d/%d label triples agree (%d inside the marginal band); 200 networks, worst eigenvalue gap "
              "%.2e (limit %.0e)",
              agree, compared, skipped, worst, kSimilarityTol)};
}

// 6. Loss gradient against central finite differences on a 4-node fixture.
Outcome gradient_check() {
  const BistableLaw law;
  SplitMix64 rng(606);
  std::vector<Tube> tubes;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) tubes.push_back({i, j, rng.uniform(0.5, 1.5)});
  }
  const FlowNetwork net(4, tubes);
  GlobalTask task;
  task.v0 = Eigen::Vector4d::Constant(1.0);
  task.pulses = {{0, 0.0, 1.0, 10.0}};
  task.target = Eigen::Vector4d(6.0, 2.0, 3.0, 3.0);
  task.duration = 200.0;
  const std::vector<GlobalTask> tasks{task};
  SimulationOptions sim;
  sim.abs_tol = 1e-12;
  sim.rel_tol = 1e-10;
  sim.tol_flux = 1e-10;

  const Laplacian w0 = laplacian_from_conductance(net);
  const std::vector<Trajectory> base = run_global_tasks(w0, law, tasks, sim);
  const std::vector<Eigen::VectorXd> v_ss{base[0].final_state.v};
  const std::vector<Eigen::VectorXd> targets{task.target};
  const Eigen::MatrixXd g = loss_gradient(v_ss, targets, base);
  auto loss_at = [&](int i, int j, double d) {
    Eigen::MatrixXd m = w0.matrix();
    m(i, j) -= d;
    m(j, i) -= d;
    m(i, i) += d;
    m(j, j) += d;
    const std::vector<Trajectory> t = run_global_tasks(Laplacian(m), law, tasks, sim);
    const std::vector<Eigen::VectorXd> v{t[0].final_state.v};
    return loss(v, targets);
  };

  constexpr double delta = 1e-4;
  int checked = 0, ok = 0;
  double worst = 0.0, worst_a = 0.0, worst_fd = 0.0;
  for (const Tube& t : net.tubes()) {
    const double analytic = g(t.i, t.i) + g(t.j, t.j) - g(t.i, t.j) - g(t.j, t.i);
    const double fd = (loss_at(t.i, t.j, delta) - loss_at(t.i, t.j, -delta)) / (2.0 * delta);
    const double mag = std::max(std::abs(analytic), std::abs(fd));
    if (mag <= kGradientFloor) continue;
    ++checked;
    const double rel = std::abs(analytic - fd) / mag;
    ok += rel < kGradientRel;
    if (rel >= worst) {
      worst = rel;
      worst_a = analytic;
      worst_fd = fd;
    }
  }
  return {checked > 0 && ok == checked,
          fmt("loss %.3f; %d/%d tube directions within %.0e; worst relative error %.2e (formula %.4g, "
              "finite difference %.4g)",
              loss(v_ss, targets), ok, checked, kGradientRel, worst, worst_a, worst_fd)};
}

// 7. Global training on the 3x3 full lattice.
Outcome global_training() {
  const auto dir = std::filesystem::temp_directory_path() / "bflow_acceptance_global";
  std::filesystem::remove_all(dir);
  const Scenario sc = builtin_scenario("global_lattice_3x3");
  const ScenarioResult r = run_scenario(sc, dir);
  int logged = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    logged += entry.path().filename().string().rfind("loss_seed", 0) == 0;
  }
  std::filesystem::remove_all(dir);
  const int converged = static_cast<int>(r.metrics.at("converged_seeds"));
  return {converged >= 1 && logged == sc.global.seeds,
          fmt("%d/%d seeds reached loss <= %.2g within %d iterations (best %.3g); %d loss histories logged",
              converged, sc.global.seeds, sc.global.config.epsilon, sc.global.config.max_iterations,
              r.metrics.at("best_loss"), logged)};
}

// 8. Local training, two targets on opposite branches.
Outcome local_fig4a() {
  const Scenario sc = builtin_scenario("local_fig4a");
  const ScenarioResult r = run_scenario(sc, {});
  const bool converged = r.metrics.at("converged") == 1.0;
  const int iterations = static_cast<int>(r.metrics.at("iterations"));
  const double err = r.metrics.at("final_error");
  const int drops = static_cast<int>(r.metrics.at("snap_drops"));
  return {converged && iterations <= 500 && err <= 0.1 && drops >= 1,
          fmt("%s after %d iterations (limit 500), final error %.3g (limit 0.1), %d discontinuous drop(s) at "
              "snap iterations",
              converged ? "converged" : "not converged", iterations, err, drops)};
}

// 9. Local training, both targets at 3 Pa on opposite branches.
Outcome local_fig4b() {
  const Scenario sc = builtin_scenario("local_fig4b");
  const FlowNetwork net = build_network(sc.generator, sc.seed);
  const std::vector<LocalTask> tasks = local_tasks(net, sc.local);
  const LocalResult r =
      train_local(net, sc.law, tasks, sc.local.config, Eigen::VectorXd::Constant(net.size(), sc.local.v0));
  bool states = true;
  std::string outs;
  for (const OutputTarget& out : tasks[0].outputs) {
    const NetworkState& s = r.free_states[0];
    const bool hit = to_binary(s.branch[out.node]) == out.state &&
                     std::abs(s.p[out.node] - out.pressure) <= kFig4bPressureTol;
    states = states && hit;
    outs += fmt(" node %d state %s p = %.3f;", out.node, std::string(to_string(s.branch[out.node])).c_str(),
                s.p[out.node]);
  }
  const bool converged = r.status == LocalStatus::converged;
  return {converged && r.iterations <= 2000 && states,
          fmt("%s after %d iterations (limit 2000);", converged ? "converged" : "not converged", r.iterations) +
              outs + fmt(" tolerance %.1f Pa", kFig4bPressureTol)};
}

// 10. Fast algebraic path against the full ODE pipeline.
Outcome fast_path() {
  const BistableLaw law;
  DisorderedParams prm;
  prm.n = 20;
  prm.seed = 10;
  prm.r_min = 0.08;
  prm.r_connect = 0.4;
  const FlowNetwork net = gen_disordered(prm);
  LocalConfig cfg;
  cfg.max_iterations = 50;
  cfg.epsilon = 0.0;
  cfg.phase_duration = 5000.0;
  cfg.sim.abs_tol = 1e-11;
  cfg.sim.rel_tol = 1e-10;
  cfg.sim.tol_flux = 1e-11;
  LocalTask task;
  task.inlets = {{0, 8.0}, {19, 0.0}};
  task.outputs = {{10, 4.0, Binary::one}, {5, 1.5, Binary::zero}};
  const std::vector<LocalTask> tasks{task};
  const Eigen::VectorXd v0 = Eigen::VectorXd::Constant(20, 1.0);
  std::vector<NetworkState> fast, ode;
  cfg.fast_path = true;
  train_local(net, law, tasks, cfg, v0, [&](int, std::span<const NetworkState> s) { fast.push_back(s[0]); });
  cfg.fast_path = false;
  train_local(net, law, tasks, cfg, v0, [&](int, std::span<const NetworkState> s) { ode.push_back(s[0]); });
  if (fast.size() != ode.size()) return {false, "pipelines ran different iteration counts"};
  int same_labels = 0;
  double worst = 0.0;
  std::string diffs;
  for (std::size_t s = 0; s < fast.size(); ++s) {
    const bool same = fast[s].labels() == ode[s].labels();
    same_labels += same;
    worst = std::max(worst, (fast[s].p - ode[s].p).cwiseAbs().maxCoeff());
    for (int i = 0; !same && i < net.size(); ++i) {
      if (to_binary(fast[s].branch[i]) == to_binary(ode[s].branch[i])) continue;
      diffs += fmt("; iteration %d node %d: fast %s, ODE %s at p = %.4f", static_cast<int>(s), i,
                   std::string(to_string(fast[s].branch[i])).c_str(),
                   std::string(to_string(ode[s].branch[i])).c_str(), ode[s].p[i]);
    }
  }
  const int iters = static_cast<int>(fast.size());
  return {iters == 50 && same_labels == iters && worst < kFastPathTol,
          fmt("%d iterations, labels identical at %d, worst pressure gap %.2e (limit %.0e)", iters, same_labels,
              worst, kFastPathTol) +
              diffs};
}

// 11. Two pulse histories, same second pulse, different final configurations.
Outcome memory() {
  const ScenarioResult r = run_scenario(builtin_scenario("memory_demo"), {});
  const bool differ = r.metrics.at("configs_differ") == 1.0;
  const bool stable = r.metrics.at("all_stable") == 1.0;
  std::string finals;
  std::istringstream lines(r.summary);
  for (std::string line; std::getline(lines, line);) {
    if (line.find("after pulse 2") != std::string::npos) finals += " " + line.substr(line.find_first_not_of(' '));
  }
  return {differ && stable, fmt("final configurations %s, intermediate states %s;", differ ? "differ" : "agree",
                                stable ? "all stable" : "not all stable") +
                                finals};
}

// 12. Multi-task epochs on a 30-node net.
Outcome multitask() {
  const ScenarioResult r = run_scenario(builtin_scenario("local_fig5_multitask"), {});
  const bool converged = r.metrics.at("converged") == 1.0;
  const int iterations = static_cast<int>(r.metrics.at("iterations"));
  const double err = r.metrics.at("final_error");
  return {converged && iterations <= 2000 && err <= 0.5,
          fmt("%s after %d epochs (limit 2000), mean error %.3g (limit 0.5), clamp events floor %d ceiling %d",
              converged ? "converged" : "not converged", iterations, err,
              static_cast<int>(r.metrics.at("floor_hits")), static_cast<int>(r.metrics.at("ceiling_hits")))};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "conservation", conservation},
      {2, "solver cross-validation", solver_cross_validation},
      {3, "equal-ratio equilibria", nine_equilibria},
      {4, "unequal-ratio regimes", ratio_regimes},
      {5, "stability criteria agreement", stability_agreement},
      {6, "global gradient check", gradient_check},
      {7, "global training", global_training},
      {8, "local training, opposite targets", local_fig4a},
      {9, "local training, equal pressures", local_fig4b},
      {10, "fast path vs ODE", fast_path},
      {11, "memory", memory},
      {12, "multi-task epochs", multitask},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  if (only < 0 || only > 12) {
    std::fprintf(stderr, "usage: %s [1-12]\n", argv[0]);
    return 2;
  }
  int failed = 0;
  for (const Criterion& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s [%s, %.1fs]: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
