#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bosegap {

using Vector = std::vector<double>;

// A real symmetric operator applied matrix-free.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t dimension() const = 0;
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;

  Vector operator()(std::span<const double> x) const {
    Vector y(dimension());
    apply(x, y);
    return y;
  }
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Eigen::MatrixXd m) : m_(std::move(m)) {}
  std::size_t dimension() const override { return static_cast<std::size_t>(m_.rows()); }
  void apply(std::span<const double> x, std::span<double> y) const override;
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

// Materializes any operator by applying it to unit vectors.
Eigen::MatrixXd to_dense(const LinearOperator& op);

// Orthogonal projection applied in place.
class VectorProjector {
 public:
  virtual ~VectorProjector() = default;
  virtual void project(std::span<double> v) const = 0;
  // True when P e_i is supported on a set of indices that is shared by every
  // e_j in it and disjoint from all others (group averages over index
  // permutations). Lets dense solves build a range basis in O(dim).
  virtual bool orbit_structure() const { return false; }
};

// Applies its members in order. Members must commute for the product to be
// an orthogonal projection; callers guarantee that.
class ProjectorChain final : public VectorProjector {
 public:
  ProjectorChain() = default;
  explicit ProjectorChain(std::vector<const VectorProjector*> members) : members_(std::move(members)) {}
  void add(const VectorProjector* p) {
    if (p != nullptr) members_.push_back(p);
  }
  void project(std::span<double> v) const override {
    for (const auto* p : members_) p->project(v);
  }
  bool empty() const { return members_.empty(); }

 private:
  std::vector<const VectorProjector*> members_;
};

// Removes the components along an orthonormal set: v <- v - Q Q^T v.
class OrthogonalComplement final : public VectorProjector {
 public:
  explicit OrthogonalComplement(std::vector<Vector> orthonormal) : basis_(std::move(orthonormal)) {}
  void project(std::span<double> v) const override;
  const std::vector<Vector>& basis() const { return basis_; }

 private:
  std::vector<Vector> basis_;
};

struct EigenOptions {
  int count = 4;
  int block_size = 0;      // 0: count + 2
  int max_basis = 0;       // 0: chosen from block size and dimension
  int max_restarts = 400;
  double tolerance = 1e-8; // absolute residual ||H psi - E psi|| for unit psi
  std::uint64_t seed = 20240611;
  const VectorProjector* projector = nullptr;
  // Symmetric positive definite approximate inverse used by lobpcg.
  const LinearOperator* preconditioner = nullptr;
  int max_iterations = 1000;
};

struct EigenResult {
  std::vector<double> values;
  std::vector<Vector> vectors;
  std::vector<double> residuals;
  bool converged = false;
  int restarts = 0;
  long matvecs = 0;
};

// Restarted block Lanczos with full reorthogonalization. Every new block is
// passed through options.projector, so the iteration stays inside its range.
EigenResult block_lanczos(const LinearOperator& op, const EigenOptions& options);

// Locally optimal block preconditioned conjugate gradient on the same
// contract as block_lanczos; block size defaults to count + 2.
EigenResult lobpcg(const LinearOperator& op, const EigenOptions& options);

// Dense reference solve restricted to the range of an optional projector.
EigenResult dense_eigen(const Eigen::MatrixXd& h, int count, const VectorProjector* projector = nullptr);

struct CgResult {
  Vector solution;
  double relative_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Solves (Q H Q - shift) x = b on Ran Q for Q = projector (identity when
// null). b must lie in Ran Q; the operator must be positive definite there.
// The reported residual is recomputed from the returned solution.
CgResult projected_cg(const LinearOperator& op, double shift, std::span<const double> rhs,
                      const VectorProjector* projector, double rel_tol, int max_iter,
                      std::span<const double> initial = {});

}  // namespace bosegap
