#pragma once

#include <span>
#include <vector>

#include "bosegap/linalg.hpp"
#include "bosegap/model.hpp"

namespace bosegap {

// A permutation of {0..N-1}; image[p] is pi(p).
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> image);

  static Permutation identity(int n);
  static Permutation transposition(int n, int a, int b);

  int size() const { return static_cast<int>(image_.size()); }
  int operator()(int p) const { return image_[p]; }
  const std::vector<int>& image() const { return image_; }
  Permutation inverse() const;
  // +1 for even, -1 for odd permutations.
  int sign() const;

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<int> image_;
};

// All N! permutations in lexicographic order.
std::vector<Permutation> all_permutations(int n);

// The permutation whose action is T_pi T_sigma. With
// (T_pi v)(x_1..x_N) = v(x_{pi^-1(1)}, .., x_{pi^-1(N)}) this is sigma o pi.
Permutation compose(const Permutation& pi, const Permutation& sigma);

struct TensorShape {
  int points = 0;
  int particles = 0;
  std::size_t size() const;
};

// out = T_pi v. Throws std::invalid_argument on shape mismatch.
void permute(std::span<const double> v, const Permutation& pi, const TensorShape& shape, std::span<double> out);
Vector permute(std::span<const double> v, const Permutation& pi, const TensorShape& shape);

enum class ProjectorKind { symmetric, antisymmetric, cluster, cluster_factor };

// Group average (1/|G|) sum_{g in G} chi(g) T_g over a subgroup of S_N,
// applied by index gathers. S and A use the full group with trivial and
// sign characters; cluster uses the permutations that map every electron
// group onto itself (S_E); cluster_factor permutes only one group (S_{j,b}).
class StatisticsProjector final : public VectorProjector {
 public:
  static StatisticsProjector symmetric(TensorShape shape);
  static StatisticsProjector antisymmetric(TensorShape shape);
  static StatisticsProjector cluster(TensorShape shape, const std::vector<std::vector<int>>& groups);
  static StatisticsProjector cluster_factor(TensorShape shape, const std::vector<int>& group);

  void project(std::span<double> v) const override;
  bool orbit_structure() const override { return true; }
  Vector apply(std::span<const double> v) const;

  ProjectorKind kind() const { return kind_; }
  const TensorShape& shape() const { return shape_; }
  const std::vector<Permutation>& elements() const { return elements_; }

 private:
  StatisticsProjector(ProjectorKind kind, TensorShape shape, std::vector<Permutation> elements, bool signed_character);

  ProjectorKind kind_;
  TensorShape shape_;
  std::vector<Permutation> elements_;
  std::vector<int> characters_;
};

// Sv, Av, S_E v or S_{j,b} v as a new vector.
Vector project_statistics(std::span<const double> v, const StatisticsProjector& p);

// Sv / |Sv|. Throws SolverError("annihilated by symmetrizer") when |Sv| is
// below tolerance * |v|.
Vector normalized_symmetrize(std::span<const double> v, const TensorShape& shape, double tolerance = 1e-10);

// The projector matching a statistics choice; none for distinguishable
// particles (and for N <= 1, where every choice is the identity).
std::unique_ptr<StatisticsProjector> projector_for(Statistics s, TensorShape shape);

}  // namespace bosegap
