#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "bflow/error.hpp"
#include "bflow/generators.hpp"
#include "bflow/rng.hpp"
#include "bflow/stability.hpp"

using namespace bflow;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

// Volumes away from the folds, drawn per branch.
Eigen::VectorXd random_volumes(SplitMix64& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u < 0.4) {
      v[i] = rng.uniform(0.1, 4.9);
    } else if (u < 0.7) {
      v[i] = rng.uniform(5.1, 8.9);
    } else {
      v[i] = rng.uniform(9.1, 20.0);
    }
  }
  return v;
}

}  // namespace

TEST_SUITE("stability") {
  TEST_CASE("reduced hessian formula") {
    const BistableLaw law;
    const Eigen::MatrixXd h2 = reduced_hessian(vec({3, 3}), law, 1);
    CHECK(h2.rows() == 1);
    CHECK(h2(0, 0) == 2.0);
    const Eigen::MatrixXd h3 = reduced_hessian(vec({3, 3, 7}), law, 2);
    CHECK(h3(0, 0) == 0.25);
    CHECK(h3(0, 1) == -0.75);
    CHECK(h3(1, 0) == -0.75);
    CHECK(h3(1, 1) == 0.25);
    CHECK_THROWS_AS(reduced_hessian(vec({5, 3}), law, 1), Error);
  }

  TEST_CASE("minors criterion cases") {
    const BistableLaw law;
    CHECK(minors_criterion(vec({3, 12, 2}), law).label == StabilityLabel::stable);
    CHECK(minors_criterion(vec({7, 7, 3}), law).label == StabilityLabel::unstable);
    const StabilityReport one = minors_criterion(vec({7, 3}), law);
    CHECK(one.label == StabilityLabel::stable);
    REQUIRE(one.inverse_stiffness_sum);
    CHECK(*one.inverse_stiffness_sum < 0.0);
    CHECK(minors_criterion(vec({4}), law).label == StabilityLabel::stable);
    CHECK(minors_criterion(vec({5, 3}), law).label == StabilityLabel::marginal);
  }

  TEST_CASE("spinodal rule against the eigenvalue oracle") {
    const BistableLaw law;
    CHECK(spinodal_rule(vec({3, 3}), law).label == StabilityLabel::stable);
    CHECK(spinodal_rule(vec({7, 7}), law).label == StabilityLabel::unstable);
    const StabilityReport big = spinodal_rule(vec({7, 3, 3, 3, 3, 3}), law);
    CHECK(big.label == StabilityLabel::unstable);
    const StabilityReport small = spinodal_rule(vec({7, 3}), law);
    CHECK(small.label == StabilityLabel::stable);
    // Oracle minimum eigenvalues of the reduced Hessians.
    const StabilityReport m6 = minors_criterion(vec({7, 3, 3, 3, 3, 3}), law);
    REQUIRE(m6.min_eigenvalue);
    CHECK(*m6.min_eigenvalue == doctest::Approx(-0.4799355870935551).epsilon(1e-12));
    const StabilityReport m2 = minors_criterion(vec({7, 3}), law);
    CHECK(*m2.min_eigenvalue == doctest::Approx(0.25).epsilon(1e-12));
    const StabilityReport m3 = minors_criterion(vec({7, 12, 3}), law);
    CHECK(*m3.min_eigenvalue == doctest::Approx(-0.3042476415070755).epsilon(1e-12));
    CHECK(m3.label == StabilityLabel::unstable);
  }

  TEST_CASE("criteria agree and do not depend on the pivot") {
    const BistableLaw law;
    SplitMix64 rng(11);
    int compared = 0;
    for (int rep = 0; rep < 300; ++rep) {
      const int n = 2 + static_cast<int>(rng.next() % 7);
      const Eigen::VectorXd v = random_volumes(rng, n);
      const StabilityReport m = minors_criterion(v, law);
      const StabilityReport s = spinodal_rule(v, law);
      if (m.label == StabilityLabel::marginal || s.label == StabilityLabel::marginal) continue;
      REQUIRE(m.min_eigenvalue);
      if (std::abs(*m.min_eigenvalue) < 1e-8) continue;
      ++compared;
      CHECK(m.label == s.label);
      CHECK((*m.min_eigenvalue > 0.0) == (m.label == StabilityLabel::stable));
      for (int pivot = 0; pivot < n; ++pivot) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced_hessian(v, law, pivot));
        CHECK((es.eigenvalues().minCoeff() > 0.0) == (m.label == StabilityLabel::stable));
      }
    }
    CHECK(compared > 200);
  }

  TEST_CASE("reduced dynamics Jacobian is similar to a congruent Hessian") {
    const BistableLaw law;
    SplitMix64 rng(23);
    for (int rep = 0; rep < 30; ++rep) {
      const int n = 3 + static_cast<int>(rng.next() % 5);
      DisorderedParams prm;
      prm.n = n;
      prm.seed = rng.next();
      prm.r_min = 0.0;
      prm.r_connect = 2.0;
      const FlowNetwork net = gen_disordered(prm);
      const Eigen::VectorXd v = random_volumes(rng, n);
      const Eigen::MatrixXd h = reduced_hessian(v, law, n - 1);
      const Eigen::MatrixXd wr = reduced_laplacian(laplacian_from_conductance(net), n - 1);
      const Eigen::MatrixXd l = wr.llt().matrixL();
      const Eigen::MatrixXd sym = l.transpose() * h * l;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
      Eigen::EigenSolver<Eigen::MatrixXd> ej(wr * h);
      std::vector<double> a(es.eigenvalues().data(), es.eigenvalues().data() + n - 1);
      std::vector<double> b;
      for (Eigen::Index k = 0; k < ej.eigenvalues().size(); ++k) {
        CHECK(std::abs(ej.eigenvalues()[k].imag()) < 1e-8);
        b.push_back(ej.eigenvalues()[k].real());
      }
      std::sort(b.begin(), b.end());
      for (int k = 0; k < n - 1; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-8).scale(1.0));
      // Inertia is preserved by the congruence.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eh(h);
      const auto negatives = [](const Eigen::VectorXd& e) { return (e.array() < 0.0).count(); };
      CHECK(negatives(eh.eigenvalues()) == negatives(es.eigenvalues()));
    }
  }

  TEST_CASE("driven stability") {
    const BistableLaw law;
    const std::vector<int> free{1, 2};
    CHECK(driven_stability(vec({21, 4, 13, 0}), law, free).label == StabilityLabel::stable);
    CHECK(driven_stability(vec({21, 6.3, 13, 0}), law, free).label == StabilityLabel::unstable);
    CHECK(driven_stability(vec({21, 5, 13, 0}), law, free).label == StabilityLabel::marginal);
  }

  TEST_CASE("report json") {
    const std::string j = to_json(minors_criterion(vec({7, 3}), BistableLaw{}));
    CHECK(j.find("\"label\": \"stable\"") != std::string::npos);
  }
}
