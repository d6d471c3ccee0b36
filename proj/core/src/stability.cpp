#include "bflow/stability.hpp"

#include <cmath>

#include "bflow/error.hpp"
#include "json_io.hpp"

namespace bflow {

std::string_view to_string(StabilityLabel label) {
  switch (label) {
    case StabilityLabel::stable: return "stable";
    case StabilityLabel::unstable: return "unstable";
    case StabilityLabel::marginal: return "marginal";
  }
  return "marginal";
}

namespace {

constexpr double kMarginal = 1e-10;

bool any_fold(const Eigen::VectorXd& v, const BistableLaw& law) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (law.at_fold(v[i])) return true;
  }
  return false;
}

int count_spinodal(const Eigen::VectorXd& v, const BistableLaw& law) {
  int count = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) count += law.classify(v[i]) == Branch::spinodal;
  return count;
}

}  // namespace

Eigen::MatrixXd reduced_hessian(const Eigen::VectorXd& v, const BistableLaw& law, int pivot) {
  const int n = static_cast<int>(v.size());
  if (pivot < 0 || pivot >= n) throw Error(ErrorCode::validation, "pivot out of range");
  for (int i = 0; i < n; ++i) {
    if (law.at_fold(v[i])) {
      throw Error(ErrorCode::marginal_input, "node " + std::to_string(i) + " sits on a fold");
    }
  }
  const double fp = law.stiffness(v[pivot]);
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(n - 1, n - 1, fp);
  for (int i = 0, r = 0; i < n; ++i) {
    if (i == pivot) continue;
    h(r, r) += law.stiffness(v[i]);
    ++r;
  }
  return h;
}

StabilityReport minors_criterion(const Eigen::VectorXd& v, const BistableLaw& law) {
  StabilityReport r;
  const Eigen::Index n = v.size();
  r.spinodal_count = count_spinodal(v, law);
  if (any_fold(v, law)) {
    r.label = StabilityLabel::marginal;
    r.at_fold = true;
    return r;
  }
  if (n <= 1) return r;

  const double fn = law.stiffness(v[n - 1]);
  double product = 1.0;
  double inv_sum = 0.0;
  double inv_abs = 0.0;
  bool marginal = false;
  bool negative = false;
  for (Eigen::Index y = 0; y + 1 < n; ++y) {
    const double f = law.stiffness(v[y]);
    product *= f;
    inv_sum += 1.0 / f;
    inv_abs += std::abs(1.0 / f);
    const double bracket = 1.0 + fn * inv_sum;
    r.minors.push_back(product * bracket);
    if (std::abs(bracket) < kMarginal * (1.0 + std::abs(fn) * inv_abs)) {
      marginal = true;
    } else if (product * bracket < 0.0) {
      negative = true;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      reduced_hessian(v, law, static_cast<int>(n - 1)), Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  if (r.spinodal_count == 1) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += 1.0 / law.stiffness(v[i]);
    r.inverse_stiffness_sum = s;
  }
  r.label = negative ? StabilityLabel::unstable
                     : (marginal ? StabilityLabel::marginal : StabilityLabel::stable);
  return r;
}

StabilityReport spinodal_rule(const Eigen::VectorXd& v, const BistableLaw& law) {
  StabilityReport r;
  r.spinodal_count = count_spinodal(v, law);
  if (any_fold(v, law)) {
    r.label = StabilityLabel::marginal;
    r.at_fold = true;
    return r;
  }
  if (r.spinodal_count == 0) {
    r.label = StabilityLabel::stable;
  } else if (r.spinodal_count >= 2) {
    r.label = StabilityLabel::unstable;
  } else {
    double s = 0.0;
    double scale = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      s += 1.0 / law.stiffness(v[i]);
      scale += std::abs(1.0 / law.stiffness(v[i]));
    }
    r.inverse_stiffness_sum = s;
    if (std::abs(s) < kMarginal * scale) {
      r.label = StabilityLabel::marginal;
    } else {
      r.label = s < 0.0 ? StabilityLabel::stable : StabilityLabel::unstable;
    }
  }
  return r;
}

StabilityReport driven_stability(const Eigen::VectorXd& v, const BistableLaw& law,
                                 std::span<const int> free_nodes) {
  StabilityReport r;
  double product = 1.0;
  double smallest = std::numeric_limits<double>::infinity();
  for (int i : free_nodes) {
    if (law.at_fold(v[i])) r.at_fold = true;
    if (law.classify(v[i]) == Branch::spinodal) ++r.spinodal_count;
    const double f = law.stiffness(v[i]);
    product *= f;
    smallest = std::min(smallest, f);
    r.minors.push_back(product);
  }
  if (!free_nodes.empty()) r.min_eigenvalue = smallest;
  if (r.at_fold) {
    r.label = StabilityLabel::marginal;
  } else {
    r.label = r.spinodal_count == 0 ? StabilityLabel::stable : StabilityLabel::unstable;
  }
  return r;
}

std::string to_json(const StabilityReport& report) {
  detail::json j;
  j["label"] = std::string(to_string(report.label));
  j["spinodal_count"] = report.spinodal_count;
  j["minors"] = report.minors;
  j["min_eigenvalue"] = report.min_eigenvalue ? detail::json(*report.min_eigenvalue) : detail::json();
  j["inverse_stiffness_sum"] =
      report.inverse_stiffness_sum ? detail::json(*report.inverse_stiffness_sum) : detail::json();
  j["at_fold"] = report.at_fold;
  return j.dump(2) + "\n";
}

}  // namespace bflow
