#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bosegap/decomposition.hpp"
#include "bosegap/linalg.hpp"
#include "bosegap/model.hpp"

namespace bosegap {

// q1 q2 / sqrt(r^2 + a^2)
double soft_coulomb(double q1, double q2, double a, double r);

struct TermSet {
  bool kinetic = true;
  bool electron_electron = true;
  bool electron_nuclear = true;
  bool nuclear_repulsion = false;
};

// Finite-difference Hamiltonian on the tensor grid of `particles` axes:
// a diagonal potential plus a central-difference -c d^2/dx^2 on every axis
// flagged in kinetic_axes. Axis 0 varies slowest in the flattened index.
class ManyBodyOperator final : public LinearOperator {
 public:
  ManyBodyOperator(Grid grid, int particles, int stencil_order, double kinetic_coefficient,
                   std::vector<bool> kinetic_axes, Vector potential, double constant, std::string label,
                   std::vector<Vector> axis_potentials = {});

  std::size_t dimension() const override { return potential_.size(); }
  void apply(std::span<const double> x, std::span<double> y) const override;

  const Grid& grid() const { return grid_; }
  int particles() const { return particles_; }
  int stencil_order() const { return order_; }
  double kinetic_coefficient() const { return coefficient_; }
  const std::vector<bool>& kinetic_axes() const { return kinetic_axes_; }
  // Multiplicative part, constant included.
  const Vector& potential() const { return potential_; }
  double constant() const { return constant_; }
  const std::string& label() const { return label_; }
  // One-body parts u_p(x_p) of the potential, one per axis; empty when the
  // assembler did not record them. The remainder is the pair repulsion.
  const std::vector<Vector>& axis_potentials() const { return axis_potentials_; }

  // Dense matrix; only for dimension <= kDenseLimit.
  Eigen::MatrixXd dense() const;
  static constexpr std::size_t kDenseLimit = 4096;

  void write_potential_csv(const std::string& path) const;

 private:
  Grid grid_;
  int particles_;
  int order_;
  double coefficient_;
  std::vector<bool> kinetic_axes_;
  Vector potential_;
  double constant_;
  std::string label_;
  std::vector<Vector> axis_potentials_;
  Vector diagonal_;  // potential plus kinetic diagonal
  double off1_ = 0.0;
  double off2_ = 0.0;
};

std::size_t tensor_dimension(int points, int particles);

// Full molecular Hamiltonian for N electrons in the field of `nuclei`.
// V_n is added when terms.nuclear_repulsion is set.
ManyBodyOperator assemble_molecule(const ModelParams& model, const NuclearConfiguration& nuclei, int electrons,
                                   const TermSet& terms = {});

// assemble_molecule with the configured electron count, nuclear-repulsion
// flag and dimension budget.
ManyBodyOperator assemble_full(const ExperimentConfig& cfg, const NuclearConfiguration& y);

// H_{E_j} on the factor space of the electrons assigned to cluster j, with
// the nuclei of block j at their positions in `nuclei` (shifted so z_j = 0
// when centered is set). A cluster without electrons gives the
// one-dimensional zero operator.
ManyBodyOperator assemble_cluster(const ModelParams& model, const NuclearConfiguration& nuclei,
                                  const ClusterDecomposition& decomp, int j, bool centered = false);

// Cluster Hamiltonian for a given electron count (no labeling needed).
ManyBodyOperator assemble_cluster_count(const ModelParams& model, const NuclearConfiguration& nuclei,
                                        const NuclearPartition& partition, int j, int electrons, bool centered = false);

// H_E = sum_j H_{E_j} acting on the full N-electron space.
ManyBodyOperator assemble_decomposed(const ModelParams& model, const NuclearConfiguration& nuclei,
                                     const ClusterDecomposition& decomp, const TermSet& terms = {});

// I_E: every electron-electron, electron-nucleus and nucleus-nucleus pair
// that crosses clusters. Purely multiplicative. Requires k >= 2.
ManyBodyOperator assemble_interaction(const ModelParams& model, const NuclearConfiguration& nuclei,
                                      const ClusterDecomposition& decomp, const TermSet& terms = {});

// M = (H_0 - sigma)^{-1} for the separable part H_0 = sum_p (T_p + u_p) of
// a ManyBodyOperator, applied exactly by diagonalizing each one-body
// operator. sigma sits `margin` below the bottom of H_0, so M is symmetric
// positive definite. Requires recorded axis potentials.
class SeparablePreconditioner final : public LinearOperator {
 public:
  explicit SeparablePreconditioner(const ManyBodyOperator& op, double margin = 0.25);
  std::size_t dimension() const override { return dim_; }
  void apply(std::span<const double> x, std::span<double> y) const override;
  double shift() const { return shift_; }

 private:
  std::size_t dim_;
  int points_;
  int particles_;
  std::vector<Eigen::MatrixXd> basis_;  // per axis
  std::vector<Eigen::VectorXd> levels_; // per axis
  double shift_;
  Vector denominator_;
};

}  // namespace bosegap
