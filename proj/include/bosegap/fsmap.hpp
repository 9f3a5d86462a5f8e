#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bosegap/clusters.hpp"
#include "bosegap/linalg.hpp"
#include "bosegap/symmetry.hpp"

namespace bosegap {

struct FamilyMember {
  std::string label;
  enum class Kind { ground, excited, ionic } kind = Kind::ground;
  std::vector<int> occupation;
  int excited_cluster = -1;
  int excited_index = -1;       // p within the excited multiplet
  double energy = 0.0;          // eigenvalue of H_E for the product
  double symmetrizer_norm = 1.0;  // |S(product)| before normalization
  Vector vector;
};

struct CandidateFamily {
  TensorShape shape;
  Statistics statistics = Statistics::bosonic;
  std::vector<FamilyMember> members;
  std::vector<std::string> rejected;  // duplicates and annihilated products

  int size() const { return static_cast<int>(members.size()); }
  std::vector<Vector> vectors() const;
  std::vector<double> energies() const;
};

struct FamilyOptions {
  double symmetrize_tolerance = 1e-10;
  // Members whose overlap with an earlier one exceeds 1 - tolerance are dropped.
  double duplicate_tolerance = 1e-8;
  bool include_ionic = true;
};

// Products of cluster eigenvectors from the table: the neutral ground
// product, every single excitation in every multiplet, and the ground
// product of each ionic minimizer. Electrons are labeled canonically (the
// first n_1 go to cluster 0 and so on), so a product is the Kronecker
// product of its cluster factors. Products are then projected onto the
// statistics subspace and normalized.
CandidateFamily build_candidate_family(const ThresholdTable& table, int grid_points,
                                       const FamilyOptions& options = {});

struct FsProjection {
  std::vector<Vector> members;
  Eigen::MatrixXd gram;
  Eigen::MatrixXd gram_inverse;
  Eigen::MatrixXd gram_inverse_sqrt;  // g^{-1/2}
  double min_eigenvalue = 0.0;
  double condition = 1.0;
  int rank = 0;
  // Symmetrically orthonormalized members, B = Phi g^{-1/2}; P = B B^T.
  std::vector<Vector> basis;

  double max_offdiagonal() const;
  void apply(std::span<const double> v, std::span<double> out) const;
};

// Throws SolverError when the smallest Gram eigenvalue is below `floor`.
FsProjection gram_and_inverse(const std::vector<Vector>& members, double floor = 1e-8);
FsProjection gram_and_inverse(const CandidateFamily& family, double floor = 1e-8);

struct FsOptions {
  double inner_tolerance = 1e-10;  // CG relative residual
  int inner_max_iterations = 50000;
  double complement_tolerance = 1e-9;
  double fixed_point_tolerance = 1e-12;  // relative, on lambda
  int max_bracket_expansions = 40;
  std::uint64_t seed = 20240611;
  bool dense = false;  // dense complement solve whenever dimension allows
};

struct ComplementSpectrum {
  double bottom = 0.0;  // +inf when Ran P^perp (within the space) is empty
  double residual = 0.0;
  std::string method;
  long matvecs = 0;
};

struct FsOperator {
  double lambda = 0.0;
  Eigen::MatrixXd matrix;  // F_P(lambda) in the basis B, symmetrized
  Eigen::MatrixXd php;     // B^T H B
  Eigen::MatrixXd schur;   // the subtracted correction, symmetrized
  double asymmetry = 0.0;  // max |S - S^T| before symmetrizing
  std::vector<double> nu;  // eigenvalues of matrix, ascending
  Eigen::MatrixXd eigenvectors;
  double complement_gap = 0.0;
  std::vector<Vector> corrections;  // (H^perp - lambda)^{-1} P^perp H b_j
  int cg_iterations = 0;            // summed over the inner solves
  double worst_cg_residual = 0.0;
};

struct FixedPointTrace {
  std::vector<double> lambdas;
  std::vector<double> values;  // g(lambda) = nu_i(lambda) - lambda
};

struct FixedPoint {
  int index = 0;
  double lambda = 0.0;
  double lower = 0.0;  // final bracket
  double upper = 0.0;
  Eigen::VectorXd coefficients;  // eigenvector of F_P(lambda) in the basis B
  Vector eigenvector;            // Q_P(lambda) phi, normalized
  double reconstruction_residual = 0.0;  // |H psi - lambda psi| / |psi|
  double projection_error = 0.0;         // |P psi - phi| before normalization
  FixedPointTrace trace;
};

// F_P(lambda) machinery for a symmetric operator H and a projection P onto
// span(members). `space` restricts everything to an invariant subspace of H
// that contains Ran P (the bosonic subspace, say); `preconditioner` is
// passed to the complement eigensolve.
class FsProblem {
 public:
  FsProblem(const LinearOperator& h, FsProjection projection, const VectorProjector* space = nullptr,
            const LinearOperator* preconditioner = nullptr, FsOptions options = {});

  const LinearOperator& hamiltonian() const { return *h_; }
  const FsProjection& projection() const { return projection_; }
  const FsOptions& options() const { return options_; }
  int rank() const { return projection_.rank; }

  // Bottom of P^perp H P^perp on Ran P^perp within the space; cached.
  const ComplementSpectrum& complement() const;
  // Smallest eigenvalue of P^perp H P^perp - lambda there.
  double complement_gap(double lambda) const;
  // Throws SolverError("FS map not defined at lambda") when the
  // complement gap is not positive.
  FsOperator evaluate(double lambda) const;
  // Q_P(lambda) phi for phi = B c.
  Vector q_map(const FsOperator& f, const Eigen::VectorXd& coefficients) const;
  // Root of nu_i(lambda) = lambda inside [lo, hi]; the bracket is widened
  // downward, and upward up to the complement bottom, until g changes sign.
  FixedPoint solve_fixed_point(int i, double lo, double hi) const;

  const std::vector<Vector>& h_basis() const { return hb_; }
  const ProjectorChain& complement_projector() const { return chain_; }

 private:
  const LinearOperator* h_;
  FsProjection projection_;
  const VectorProjector* space_;
  const LinearOperator* preconditioner_;
  FsOptions options_;
  OrthogonalComplement perp_;
  ProjectorChain chain_;
  std::vector<Vector> hb_;   // H b_j
  std::vector<Vector> rhs_;  // P^perp H b_j
  Eigen::MatrixXd php_;
  mutable std::optional<ComplementSpectrum> complement_;
  mutable std::vector<Vector> warm_;  // last corrections, reused as CG start
};

double complement_gap(const FsProblem& p, double lambda);
FsOperator fs_operator(const FsProblem& p, double lambda);
Vector q_map(const FsProblem& p, const FsOperator& f, const Eigen::VectorXd& coefficients);
FixedPoint solve_fixed_point(const FsProblem& p, int i, double lo, double hi);

struct FsDiagnostics {
  double gram_offdiagonal = 0.0;     // max_{i != j} |<phi_i, phi_j>|
  double hamiltonian_deviation = 0.0;  // max |<phi_i, H phi_j> - lambda_i delta_ij|
  double schur_magnitude = 0.0;      // max |<phi_i, H P^perp (H^perp - lambda)^{-1} P^perp H phi_j>|
  double lambda = 0.0;
};

// `energies` are the member eigenvalues lambda_i; `lambda` is the spectral
// parameter of the Schur term.
FsDiagnostics fs_diagnostics(const FsProblem& p, const std::vector<double>& energies, double lambda);
FsDiagnostics fs_diagnostics(const FsProblem& p, const std::vector<double>& energies, const FsOperator& at);

// min over phi in the family (other than the first member) of the larger
// Rayleigh-Ritz value on span{first member, phi}; an upper bound for E_1.
double two_dimensional_bound(const FsProblem& p);

nlohmann::json to_json(const CandidateFamily& f);
nlohmann::json to_json(const FsProjection& p);
nlohmann::json to_json(const FsOperator& f);
nlohmann::json to_json(const FixedPoint& f);
nlohmann::json to_json(const FsDiagnostics& d);
// One row per iterate: index,lambda,g.
std::string trace_csv(const std::vector<FixedPoint>& points);

}  // namespace bosegap
