#pragma once

#include <array>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace bflow {

// Segment of the pressure-volume curve a volume sits on.
enum class Branch { state0, spinodal, state1 };

std::string_view to_string(Branch b);

// Binary label carried as memory between solves. The spinodal is never a
// remembered state: anything short of state1 is recorded as zero.
enum class Binary { zero = 0, one = 1 };

inline Binary to_binary(Branch b) { return b == Branch::state1 ? Binary::one : Binary::zero; }
inline Branch to_branch(Binary b) { return b == Binary::one ? Branch::state1 : Branch::state0; }

// Default parameters: branch 0 is p = v on [0, 5], the spinodal falls to
// (9, 2), branch 1 rises with slope 0.5.
struct TrilinearParams {
  double v_max = 5.0;
  double p_max = 5.0;
  double v_min = 9.0;
  double p_min = 2.0;
  double slope0 = 1.0;
  double slope1 = 0.5;
};

// Sample points (v, p) per segment. branch0 starts at v = 0, consecutive
// segments share their fold point, and branch1 is extrapolated linearly past
// its last sample.
struct LawTable {
  std::vector<std::array<double, 2>> branch0;
  std::vector<std::array<double, 2>> spinodal;
  std::vector<std::array<double, 2>> branch1;
};

struct FoldPoint {
  double volume = 0.0;
  double pressure = 0.0;
};

// Non-monotonic pressure-volume relation p = f(v) shared by every chamber.
//
// Both variants are piecewise linear: stable branch 0 on [0, v_max], spinodal on
// (v_max, v_min), stable branch 1 on [v_min, inf). Local maximum (v_max, p_max)
// sits at the smaller volume.
class BistableLaw {
 public:
  BistableLaw() : BistableLaw(trilinear(TrilinearParams{})) {}

  static BistableLaw trilinear(const TrilinearParams& params);
  static BistableLaw tabulated(LawTable table);

  double pressure(double volume) const;
  // Same curve, continued linearly below v = 0. Used for integrator stages only.
  double pressure_extended(double volume) const;

  // Volume on branch `b` whose pressure is `p`. Throws ErrorCode::branch_infeasible
  // when p lies outside the branch's pressure range (the spinodal range is open).
  double inverse(double p, Branch b) const;

  Branch classify(double volume) const;

  // df/dv. At a fold the stable-branch side is used.
  double stiffness(double volume) const;

  // Largest |df/dv| over all segments.
  double max_abs_stiffness() const;

  // psi(v) = integral of f from 0 to v.
  double energy(double volume) const;

  FoldPoint upper_fold() const { return {knots_v_[i_max_], knots_p_[i_max_]}; }
  FoldPoint lower_fold() const { return {knots_v_[i_min_], knots_p_[i_min_]}; }
  double v_max() const { return knots_v_[i_max_]; }
  double p_max() const { return knots_p_[i_max_]; }
  double v_min() const { return knots_v_[i_min_]; }
  double p_min() const { return knots_p_[i_min_]; }

  // Closed pressure range of a branch; the state1 upper bound is +inf and the
  // spinodal bounds are exclusive.
  std::pair<double, double> pressure_range(Branch b) const;
  bool admits(double p, Branch b) const;

  // Distance to the nearest fold volume is within `tol`.
  bool at_fold(double volume, double tol = 1e-12) const;

  // Knot pressures of branch b (breakpoints of its inverse).
  std::vector<double> knot_pressures(Branch b) const;

  const std::variant<TrilinearParams, LawTable>& spec() const { return spec_; }

 private:
  BistableLaw(std::variant<TrilinearParams, LawTable> spec, std::vector<double> v,
              std::vector<double> p, std::size_t i_max, std::size_t i_min);

  std::size_t segment_of(double volume) const;
  double inverse_on(double p, std::size_t first, std::size_t last, bool extend) const;

  std::variant<TrilinearParams, LawTable> spec_;
  std::vector<double> knots_v_;
  std::vector<double> knots_p_;
  std::vector<double> energy_at_knot_;
  std::size_t i_max_ = 0;
  std::size_t i_min_ = 0;
};

// Volume a chamber settles to at pressure p given its previous binary label:
// state0 stays on branch 0 while p <= p_max and snaps up above it; state1
// stays on branch 1 while p >= p_min and snaps down below it. Pressures below
// the start of branch 0 map to zero volume.
struct Settled {
  double volume = 0.0;
  Binary label = Binary::zero;
};
Settled settle(const BistableLaw& law, double p, Binary previous);

}  // namespace bflow
