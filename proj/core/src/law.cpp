#include "bflow/law.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bflow/error.hpp"

namespace bflow {

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::state0: return "0";
    case Branch::spinodal: return "s";
    case Branch::state1: return "1";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::validation, what);
}

}  // namespace

BistableLaw BistableLaw::trilinear(const TrilinearParams& q) {
  require(q.v_max > 0.0, "trilinear law needs v_max > 0");
  require(q.v_max < q.v_min, "trilinear law needs v_max < v_min");
  require(q.p_max > q.p_min, "trilinear law needs p_max > p_min");
  require(q.slope0 > 0.0 && q.slope1 > 0.0, "branch slopes must be positive");
  std::vector<double> v{0.0, q.v_max, q.v_min, q.v_min + 1.0};
  std::vector<double> p{q.p_max - q.slope0 * q.v_max, q.p_max, q.p_min, q.p_min + q.slope1};
  return BistableLaw(q, std::move(v), std::move(p), 1, 2);
}

BistableLaw BistableLaw::tabulated(LawTable t) {
  require(t.branch0.size() >= 2 && t.spinodal.size() >= 2 && t.branch1.size() >= 2,
          "each law table segment needs at least two samples");
  require(t.branch0.front()[0] == 0.0, "law table branch0 must start at v = 0");
  require(t.branch0.back() == t.spinodal.front(),
          "law table branch0 must end where the spinodal starts");
  require(t.spinodal.back() == t.branch1.front(),
          "law table spinodal must end where branch1 starts");
  auto check = [](const std::vector<std::array<double, 2>>& s, bool increasing, const char* name) {
    for (std::size_t k = 1; k < s.size(); ++k) {
      require(s[k][0] > s[k - 1][0], std::string(name) + " volumes must increase");
      const bool ok = increasing ? s[k][1] > s[k - 1][1] : s[k][1] < s[k - 1][1];
      require(ok, std::string(name) + (increasing ? " pressure must increase"
                                                  : " pressure must decrease"));
    }
  };
  check(t.branch0, true, "branch0");
  check(t.spinodal, false, "spinodal");
  check(t.branch1, true, "branch1");

  std::vector<double> v;
  std::vector<double> p;
  for (const auto& s : t.branch0) {
    v.push_back(s[0]);
    p.push_back(s[1]);
  }
  const std::size_t i_max = v.size() - 1;
  for (std::size_t k = 1; k < t.spinodal.size(); ++k) {
    v.push_back(t.spinodal[k][0]);
    p.push_back(t.spinodal[k][1]);
  }
  const std::size_t i_min = v.size() - 1;
  for (std::size_t k = 1; k < t.branch1.size(); ++k) {
    v.push_back(t.branch1[k][0]);
    p.push_back(t.branch1[k][1]);
  }
  return BistableLaw(std::move(t), std::move(v), std::move(p), i_max, i_min);
}

BistableLaw::BistableLaw(std::variant<TrilinearParams, LawTable> spec, std::vector<double> v,
                         std::vector<double> p, std::size_t i_max, std::size_t i_min)
    : spec_(std::move(spec)), knots_v_(std::move(v)), knots_p_(std::move(p)), i_max_(i_max),
      i_min_(i_min) {
  energy_at_knot_.assign(knots_v_.size(), 0.0);
  for (std::size_t k = 1; k < knots_v_.size(); ++k) {
    energy_at_knot_[k] = energy_at_knot_[k - 1] +
                         0.5 * (knots_p_[k] + knots_p_[k - 1]) * (knots_v_[k] - knots_v_[k - 1]);
  }
}

std::size_t BistableLaw::segment_of(double volume) const {
  // Segment k spans [v_k, v_{k+1}); the last one extends to infinity.
  auto it = std::upper_bound(knots_v_.begin(), knots_v_.end(), volume);
  std::size_t k = it == knots_v_.begin() ? 0 : static_cast<std::size_t>(it - knots_v_.begin()) - 1;
  return std::min(k, knots_v_.size() - 2);
}

double BistableLaw::pressure_extended(double volume) const {
  const std::size_t k = segment_of(volume);
  const double slope = (knots_p_[k + 1] - knots_p_[k]) / (knots_v_[k + 1] - knots_v_[k]);
  return knots_p_[k] + slope * (volume - knots_v_[k]);
}

double BistableLaw::pressure(double volume) const {
  if (!(volume >= 0.0)) {
    throw Error(ErrorCode::domain, "volume must be non-negative, got " + std::to_string(volume));
  }
  return pressure_extended(volume);
}

Branch BistableLaw::classify(double volume) const {
  if (volume <= v_max()) return Branch::state0;
  if (volume < v_min()) return Branch::spinodal;
  return Branch::state1;
}

double BistableLaw::stiffness(double volume) const {
  std::size_t k = segment_of(volume);
  // At v_max the segment lookup lands on the spinodal; step back to branch 0.
  if (k == i_max_ && volume <= v_max()) k = i_max_ - 1;
  return (knots_p_[k + 1] - knots_p_[k]) / (knots_v_[k + 1] - knots_v_[k]);
}

double BistableLaw::max_abs_stiffness() const {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < knots_v_.size(); ++k) {
    worst = std::max(worst, std::abs((knots_p_[k + 1] - knots_p_[k]) / (knots_v_[k + 1] - knots_v_[k])));
  }
  return worst;
}

double BistableLaw::energy(double volume) const {
  if (!(volume >= 0.0)) throw Error(ErrorCode::domain, "volume must be non-negative");
  const std::size_t k = segment_of(volume);
  return energy_at_knot_[k] + 0.5 * (knots_p_[k] + pressure(volume)) * (volume - knots_v_[k]);
}

std::pair<double, double> BistableLaw::pressure_range(Branch b) const {
  switch (b) {
    case Branch::state0: return {knots_p_.front(), p_max()};
    case Branch::spinodal: return {p_min(), p_max()};
    case Branch::state1: return {p_min(), kInf};
  }
  return {0.0, 0.0};
}

bool BistableLaw::admits(double p, Branch b) const {
  const auto [lo, hi] = pressure_range(b);
  if (b == Branch::spinodal) return p > lo && p < hi;
  return p >= lo && p <= hi;
}

bool BistableLaw::at_fold(double volume, double tol) const {
  const double scale = std::max(1.0, v_min());
  return std::abs(volume - v_max()) <= tol * scale || std::abs(volume - v_min()) <= tol * scale;
}

std::vector<double> BistableLaw::knot_pressures(Branch b) const {
  std::size_t first = 0;
  std::size_t last = i_max_;
  if (b == Branch::spinodal) {
    first = i_max_;
    last = i_min_;
  } else if (b == Branch::state1) {
    first = i_min_;
    last = knots_p_.size() - 1;
  }
  return {knots_p_.begin() + static_cast<std::ptrdiff_t>(first),
          knots_p_.begin() + static_cast<std::ptrdiff_t>(last) + 1};
}

double BistableLaw::inverse_on(double p, std::size_t first, std::size_t last, bool extend) const {
  const bool increasing = knots_p_[last] > knots_p_[first];
  std::size_t k = first;
  // Find the segment [k, k+1] bracketing p; knots are monotone on the branch.
  for (std::size_t m = first; m < last; ++m) {
    const double a = knots_p_[m];
    const double b = knots_p_[m + 1];
    const bool inside = increasing ? (p >= a && p <= b) : (p <= a && p >= b);
    k = m;
    if (inside) break;
  }
  if (extend && p > knots_p_[last]) k = last - 1;
  const double dp = knots_p_[k + 1] - knots_p_[k];
  const double dv = knots_v_[k + 1] - knots_v_[k];
  return knots_v_[k] + (p - knots_p_[k]) * dv / dp;
}

double BistableLaw::inverse(double p, Branch b) const {
  if (!std::isfinite(p) || !admits(p, b)) {
    const auto [lo, hi] = pressure_range(b);
    throw Error(ErrorCode::branch_infeasible,
                "pressure " + std::to_string(p) + " outside branch " + std::string(to_string(b)) +
                    " range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  switch (b) {
    case Branch::state0: return inverse_on(p, 0, i_max_, false);
    case Branch::spinodal: return inverse_on(p, i_max_, i_min_, false);
    case Branch::state1: return inverse_on(p, i_min_, knots_p_.size() - 1, true);
  }
  return 0.0;
}

Settled settle(const BistableLaw& law, double p, Binary previous) {
  if (previous == Binary::one && p >= law.p_min()) return {law.inverse(p, Branch::state1), Binary::one};
  if (p > law.p_max()) return {law.inverse(p, Branch::state1), Binary::one};
  if (p < law.pressure_range(Branch::state0).first) return {0.0, Binary::zero};
  return {law.inverse(p, Branch::state0), Binary::zero};
}

}  // namespace bflow
