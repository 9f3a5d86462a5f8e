#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bosegap/decomposition.hpp"
#include "bosegap/linalg.hpp"
#include "bosegap/model.hpp"
#include "bosegap/operators.hpp"

namespace bosegap {

// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1]; C2 at both ends.
double smoothstep5(double t);

// Products J_b(x) = prod_p chi_{b_p}(x_p) of one-particle cutoffs. Region r
// is either the ball of radius 2 R C_j around z_j or the far region; the
// one-particle cutoffs satisfy sum_r chi_r^2 = 1 on every node, so the
// products do too.
struct CutoffFamily {
  Grid grid;
  int particles = 0;
  int stencil_order = 2;
  double scale = 0.0;  // R
  double width = 0.0;  // transition width
  std::vector<int> region_cluster;   // cluster index, or -1 for the far region
  std::vector<double> ball_radius;   // 2 R C_j per region (0 for far)
  std::vector<Vector> chi;           // one-particle cutoffs per region
  // Discrete |chi_r'|^2 built from the same difference weights as the
  // kinetic stencil: (1/2h^2) sum_d w_d (chi(x) - chi(x + d h))^2.
  std::vector<Vector> chi_gradient;
  std::vector<std::vector<int>> assignments;  // b: region per electron
  double max_gradient_squared = 0.0;  // max_r max_x chi_gradient
  double d = 0.0;                     // R * max_gradient_squared

  int size() const { return static_cast<int>(assignments.size()); }
  Vector cutoff(int b) const;
  // |grad J_b|^2 on the tensor grid.
  Vector gradient_squared(int b) const;
  // max_x |sum_b J_b(x)^2 - 1| over the tensor grid.
  double partition_defect() const;
};

struct CutoffOptions {
  // Transition width w = width_factor * sqrt(R) * min_j C_j, so that
  // max |grad J|^2 scales like 1/R.
  double width_factor = 0.5;
};

// Throws ValidationError when 2 R (C_i + C_j) > r_ij / 2 for some pair or
// when the transition is wider than a ball.
CutoffFamily build_cutoffs(const NuclearPartition& partition, const Grid& grid, int particles, double scale,
                           int stencil_order = 2, const CutoffOptions& options = {});

// Largest R that satisfies the scale condition; +inf for one cluster.
double max_cutoff_scale(const NuclearPartition& partition);

struct ImsDefect {
  double max_defect = 0.0;   // max over samples, grid L2 norm
  double mean_defect = 0.0;
  int samples = 0;
};

// max over random smooth unit vectors v (sums of Gaussian products, unit in
// the grid L2 norm) of |Hv - sum_b (J_b H J_b v - c |grad J_b|^2 v)|.
ImsDefect ims_defect(const ManyBodyOperator& h, const CutoffFamily& family, int samples = 50,
                     std::uint64_t seed = 20240611, int workers = 1);

// max |S_{j,b}(J_b v) - J_b S_{j,b} v| over random vectors, all b and all
// regions holding two or more electrons.
double cutoff_symmetry_defect(const CutoffFamily& family, int samples = 10, std::uint64_t seed = 20240611);

struct LocalizedBound {
  double scale = 0.0;
  double bottom = 0.0;   // min of sum_b J_b H J_b on the restricted range
  double penalty = 0.0;  // c max_x sum_b |grad J_b|^2
  double bound = 0.0;    // bottom - penalty
  std::string method;
};

// Lowest eigenvalue of sum_b J_b H J_b inside Ran(projector) minus the
// gradient penalty. A measured curve, not a certified bound.
LocalizedBound localized_lower_bound(const ManyBodyOperator& h, const CutoffFamily& family,
                                     const VectorProjector* projector = nullptr, std::uint64_t seed = 20240611);

nlohmann::json to_json(const CutoffFamily& f);
nlohmann::json to_json(const ImsDefect& d);
nlohmann::json to_json(const LocalizedBound& b);
// x, chi_r and chi_gradient_r per region.
std::string cutoff_csv(const CutoffFamily& f);

}  // namespace bosegap
