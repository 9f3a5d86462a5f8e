#include "bosegap/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "bosegap/error.hpp"
#include "bosegap/kernels.hpp"

namespace bosegap {

double soft_coulomb(double q1, double q2, double a, double r) { return q1 * q2 / std::sqrt(r * r + a * a); }

std::size_t tensor_dimension(int points, int particles) {
  std::size_t d = 1;
  for (int p = 0; p < particles; ++p) d *= static_cast<std::size_t>(points);
  return d;
}

ManyBodyOperator::ManyBodyOperator(Grid grid, int particles, int stencil_order, double kinetic_coefficient,
                                   std::vector<bool> kinetic_axes, Vector potential, double constant,
                                   std::string label, std::vector<Vector> axis_potentials)
    : grid_(grid),
      particles_(particles),
      order_(stencil_order),
      coefficient_(kinetic_coefficient),
      kinetic_axes_(std::move(kinetic_axes)),
      potential_(std::move(potential)),
      constant_(constant),
      label_(std::move(label)),
      axis_potentials_(std::move(axis_potentials)) {
  if (order_ != 2 && order_ != 4) throw ValidationError("stencil_order must be 2 or 4");
  if (static_cast<int>(kinetic_axes_.size()) != particles_) throw ValidationError("kinetic axis mask size mismatch");
  if (potential_.size() != tensor_dimension(grid_.points, particles_))
    throw ValidationError("potential size does not match n^N");
  const double h2 = grid_.spacing * grid_.spacing;
  double d0 = 0.0;
  if (order_ == 2) {
    d0 = 2.0 * coefficient_ / h2;
    off1_ = -coefficient_ / h2;
  } else {
    d0 = 2.5 * coefficient_ / h2;
    off1_ = -4.0 * coefficient_ / (3.0 * h2);
    off2_ = coefficient_ / (12.0 * h2);
  }
  const int active_axes = static_cast<int>(std::count(kinetic_axes_.begin(), kinetic_axes_.end(), true));
  diagonal_ = potential_;
  for (double& v : diagonal_) v += active_axes * d0;
}

void ManyBodyOperator::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t dim = dimension();
  if (x.size() != dim || y.size() != dim) throw std::invalid_argument("ManyBodyOperator::apply: size mismatch");
  const auto& k = kernels::active();
  k.diag_mul(diagonal_.data(), x.data(), y.data(), dim);
  const std::size_t n = static_cast<std::size_t>(grid_.points);
  for (int p = 0; p < particles_; ++p) {
    if (!kinetic_axes_[p]) continue;
    const std::size_t s = tensor_dimension(grid_.points, particles_ - 1 - p);
    const std::size_t block = n * s;
    for (std::size_t b = 0; b < dim; b += block) {
      const double* xb = x.data() + b;
      double* yb = y.data() + b;
      k.add_pair(off1_, xb, xb + 2 * s, yb + s, (n - 2) * s);
      k.axpy(off1_, xb + s, yb, s);
      k.axpy(off1_, xb + (n - 2) * s, yb + (n - 1) * s, s);
      if (order_ == 4) {
        k.add_pair(off2_, xb, xb + 4 * s, yb + 2 * s, (n - 4) * s);
        k.axpy(off2_, xb + 2 * s, yb, s);
        k.axpy(off2_, xb + 3 * s, yb + s, s);
        k.axpy(off2_, xb + (n - 4) * s, yb + (n - 2) * s, s);
        k.axpy(off2_, xb + (n - 3) * s, yb + (n - 1) * s, s);
      }
    }
  }
}

Eigen::MatrixXd ManyBodyOperator::dense() const {
  const std::size_t dim = dimension();
  if (dim > kDenseLimit) throw ValidationError("dense materialization limited to n^N <= 4096");
  const auto idim = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(idim, idim);
  const int n = grid_.points;
  for (std::size_t i = 0; i < dim; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diagonal_[i];
  for (int p = 0; p < particles_; ++p) {
    if (!kinetic_axes_[p]) continue;
    const std::size_t s = tensor_dimension(n, particles_ - 1 - p);
    for (std::size_t i = 0; i < dim; ++i) {
      const int digit = static_cast<int>((i / s) % n);
      for (int off = 1; off <= (order_ == 4 ? 2 : 1); ++off) {
        const double c = off == 1 ? off1_ : off2_;
        if (digit + off < n) {
          const auto j = static_cast<Eigen::Index>(i + off * s);
          m(static_cast<Eigen::Index>(i), j) = c;
          m(j, static_cast<Eigen::Index>(i)) = c;
        }
      }
    }
  }
  return m;
}

void ManyBodyOperator::write_potential_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  const int n = grid_.points;
  for (int p = 0; p < particles_; ++p) out << "x" << p << ",";
  out << "potential\n";
  for (std::size_t i = 0; i < potential_.size(); ++i) {
    std::size_t rest = i;
    std::vector<int> digits(particles_);
    for (int p = particles_ - 1; p >= 0; --p) {
      digits[p] = static_cast<int>(rest % n);
      rest /= n;
    }
    for (int p = 0; p < particles_; ++p) out << grid_.coordinate(digits[p]) << ",";
    out << potential_[i] << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

namespace {

struct PotentialSpec {
  int particles = 0;
  // Per electron: which nuclei it interacts with (empty: none).
  std::vector<std::vector<int>> nuclei_of;
  // Pairs (p, q) with p < q that repel.
  std::vector<std::pair<int, int>> pairs;
  double constant = 0.0;
};

Vector build_potential(const ModelParams& model, const NuclearConfiguration& nuclei, const PotentialSpec& spec,
                       double shift = 0.0, std::vector<Vector>* one_body = nullptr) {
  const Grid grid = Grid::from(model);
  const int n = grid.points;
  const double a = model.softening;
  const double e = model.charge_unit;

  std::vector<Vector> en(spec.particles, Vector(n, 0.0));
  for (int p = 0; p < spec.particles; ++p) {
    for (int nuc : spec.nuclei_of[p]) {
      const double q = nuclei.charges[nuc] * e;
      const double y = nuclei.positions[nuc] - shift;
      for (int i = 0; i < n; ++i) en[p][i] += soft_coulomb(-e, q, a, grid.coordinate(i) - y);
    }
  }
  Vector ee(n);
  for (int d = 0; d < n; ++d) ee[d] = soft_coulomb(-e, -e, a, d * grid.spacing);

  const std::size_t dim = tensor_dimension(n, spec.particles);
  Vector v(dim, spec.constant);
  std::vector<int> digit(spec.particles, 0);
  for (std::size_t i = 0; i < dim; ++i) {
    double s = spec.constant;
    for (int p = 0; p < spec.particles; ++p) s += en[p][digit[p]];
    for (const auto& [p, q] : spec.pairs) s += ee[std::abs(digit[p] - digit[q])];
    v[i] = s;
    for (int p = spec.particles - 1; p >= 0; --p) {
      if (++digit[p] < n) break;
      digit[p] = 0;
    }
  }
  if (one_body != nullptr) *one_body = std::move(en);
  return v;
}

void check_budget(std::size_t dim, std::size_t budget) {
  if (dim > budget) {
    throw ValidationError("tensor dimension " + std::to_string(dim) + " exceeds budget " + std::to_string(budget));
  }
}

bool repulsion_on(const NuclearConfiguration& nuclei, const TermSet& terms) {
  return terms.nuclear_repulsion || nuclei.include_nuclear_repulsion;
}

// Softened V_n restricted to nucleus pairs selected by `keep`.
template <class Pred>
double nuclear_pairs(const ModelParams& model, const NuclearConfiguration& nuclei, Pred keep) {
  double v = 0.0;
  const double e = model.charge_unit;
  for (std::size_t i = 0; i < nuclei.size(); ++i)
    for (std::size_t j = i + 1; j < nuclei.size(); ++j)
      if (keep(static_cast<int>(i), static_cast<int>(j)))
        v += soft_coulomb(nuclei.charges[i] * e, nuclei.charges[j] * e, model.softening,
                          nuclei.positions[i] - nuclei.positions[j]);
  return v;
}

std::vector<int> all_nuclei(const NuclearConfiguration& nuclei) {
  std::vector<int> v(nuclei.size());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

void check_decomposition(const NuclearConfiguration& nuclei, const ClusterDecomposition& decomp) {
  const int k = decomp.partition.size();
  std::vector<int> seen(nuclei.size(), 0);
  for (const auto& b : decomp.partition.blocks)
    for (int i : b) {
      if (i < 0 || i >= static_cast<int>(nuclei.size())) throw ValidationError("partition references unknown nucleus");
      ++seen[i];
    }
  for (int c : seen)
    if (c != 1) throw ValidationError("partition blocks must be disjoint and cover every nucleus");
  for (int c : decomp.electron_cluster)
    if (c < 0 || c >= k) throw ValidationError("electron assigned to a cluster outside 0..k-1");
}

}  // namespace

ManyBodyOperator assemble_molecule(const ModelParams& model, const NuclearConfiguration& nuclei, int electrons,
                                   const TermSet& terms) {
  if (nuclei.size() < 1) throw ValidationError("at least one nucleus required");
  if (electrons < 0) throw ValidationError("electron count must be nonnegative");
  const Grid grid = Grid::from(model);
  PotentialSpec spec;
  spec.particles = electrons;
  spec.nuclei_of.assign(electrons, terms.electron_nuclear ? all_nuclei(nuclei) : std::vector<int>{});
  if (terms.electron_electron)
    for (int p = 0; p < electrons; ++p)
      for (int q = p + 1; q < electrons; ++q) spec.pairs.emplace_back(p, q);
  if (repulsion_on(nuclei, terms)) spec.constant = nuclei.nuclear_repulsion(model);
  std::vector<Vector> one_body;
  Vector v = build_potential(model, nuclei, spec, 0.0, &one_body);
  return ManyBodyOperator(grid, electrons, model.stencil_order, model.kinetic_coefficient(),
                          std::vector<bool>(electrons, terms.kinetic), std::move(v), spec.constant, "full",
                          std::move(one_body));
}

ManyBodyOperator assemble_full(const ExperimentConfig& cfg, const NuclearConfiguration& y) {
  if (y.size() < 1) throw ValidationError("at least one nucleus required");
  check_budget(tensor_dimension(cfg.model.grid_points, cfg.particles.electron_count), cfg.solver.max_dimension);
  TermSet terms;
  terms.nuclear_repulsion = y.include_nuclear_repulsion;
  return assemble_molecule(cfg.model, y, cfg.particles.electron_count, terms);
}

ManyBodyOperator assemble_cluster_count(const ModelParams& model, const NuclearConfiguration& nuclei,
                                        const NuclearPartition& partition, int j, int electrons, bool centered) {
  if (j < 0 || j >= partition.size()) throw ValidationError("cluster index out of range");
  if (partition.blocks[j].empty()) throw ValidationError("cluster without nuclei");
  const Grid grid = Grid::from(model);
  const auto& block = partition.blocks[j];
  PotentialSpec spec;
  if (nuclei.include_nuclear_repulsion) {
    spec.constant = nuclear_pairs(model, nuclei, [&](int a, int b) {
      return partition.block_of(a) == j && partition.block_of(b) == j;
    });
  }
  if (electrons == 0) {
    return ManyBodyOperator(grid, 0, model.stencil_order, model.kinetic_coefficient(), {},
                            Vector(1, spec.constant), spec.constant, "cluster" + std::to_string(j));
  }
  spec.particles = electrons;
  spec.nuclei_of.assign(electrons, block);
  for (int p = 0; p < electrons; ++p)
    for (int q = p + 1; q < electrons; ++q) spec.pairs.emplace_back(p, q);
  const double shift = centered ? partition.centers[j] : 0.0;
  std::vector<Vector> one_body;
  Vector v = build_potential(model, nuclei, spec, shift, &one_body);
  return ManyBodyOperator(grid, electrons, model.stencil_order, model.kinetic_coefficient(),
                          std::vector<bool>(electrons, true), std::move(v), spec.constant,
                          "cluster" + std::to_string(j), std::move(one_body));
}

ManyBodyOperator assemble_cluster(const ModelParams& model, const NuclearConfiguration& nuclei,
                                  const ClusterDecomposition& decomp, int j, bool centered) {
  check_decomposition(nuclei, decomp);
  const int count = static_cast<int>(decomp.electrons_of(j).size());
  if (count > decomp.electron_count()) throw ValidationError("cluster occupation exceeds N");
  return assemble_cluster_count(model, nuclei, decomp.partition, j, count, centered);
}

ManyBodyOperator assemble_decomposed(const ModelParams& model, const NuclearConfiguration& nuclei,
                                     const ClusterDecomposition& decomp, const TermSet& terms) {
  check_decomposition(nuclei, decomp);
  const int electrons = decomp.electron_count();
  const auto& part = decomp.partition;
  PotentialSpec spec;
  spec.particles = electrons;
  spec.nuclei_of.resize(electrons);
  if (terms.electron_nuclear)
    for (int p = 0; p < electrons; ++p) spec.nuclei_of[p] = part.blocks[decomp.electron_cluster[p]];
  if (terms.electron_electron)
    for (int p = 0; p < electrons; ++p)
      for (int q = p + 1; q < electrons; ++q)
        if (decomp.electron_cluster[p] == decomp.electron_cluster[q]) spec.pairs.emplace_back(p, q);
  if (repulsion_on(nuclei, terms))
    spec.constant = nuclear_pairs(model, nuclei, [&](int a, int b) { return part.block_of(a) == part.block_of(b); });
  std::vector<Vector> one_body;
  Vector v = build_potential(model, nuclei, spec, 0.0, &one_body);
  return ManyBodyOperator(Grid::from(model), electrons, model.stencil_order, model.kinetic_coefficient(),
                          std::vector<bool>(electrons, terms.kinetic), std::move(v), spec.constant, "H_E",
                          std::move(one_body));
}

ManyBodyOperator assemble_interaction(const ModelParams& model, const NuclearConfiguration& nuclei,
                                      const ClusterDecomposition& decomp, const TermSet& terms) {
  check_decomposition(nuclei, decomp);
  if (decomp.partition.size() < 2) throw ValidationError("interaction requires k >= 2 clusters");
  const int electrons = decomp.electron_count();
  const auto& part = decomp.partition;
  PotentialSpec spec;
  spec.particles = electrons;
  spec.nuclei_of.resize(electrons);
  if (terms.electron_nuclear) {
    for (int p = 0; p < electrons; ++p)
      for (int j = 0; j < part.size(); ++j)
        if (j != decomp.electron_cluster[p])
          spec.nuclei_of[p].insert(spec.nuclei_of[p].end(), part.blocks[j].begin(), part.blocks[j].end());
  }
  // Each unordered crossing pair enters once, so H_E + I_E reproduces the
  // full sum over p < q.
  if (terms.electron_electron)
    for (int p = 0; p < electrons; ++p)
      for (int q = p + 1; q < electrons; ++q)
        if (decomp.electron_cluster[p] != decomp.electron_cluster[q]) spec.pairs.emplace_back(p, q);
  if (repulsion_on(nuclei, terms))
    spec.constant = nuclear_pairs(model, nuclei, [&](int a, int b) { return part.block_of(a) != part.block_of(b); });
  Vector v = build_potential(model, nuclei, spec);
  return ManyBodyOperator(Grid::from(model), electrons, model.stencil_order, model.kinetic_coefficient(),
                          std::vector<bool>(electrons, false), std::move(v), spec.constant, "I_E");
}

SeparablePreconditioner::SeparablePreconditioner(const ManyBodyOperator& op, double margin)
    : dim_(op.dimension()), points_(op.grid().points), particles_(op.particles()) {
  const auto& u = op.axis_potentials();
  if (static_cast<int>(u.size()) != particles_) throw ValidationError("operator has no recorded one-body parts");
  const int n = points_;
  const double h2 = op.grid().spacing * op.grid().spacing;
  const double c = op.kinetic_coefficient();
  double bottom = 0.0;
  for (int p = 0; p < particles_; ++p) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    const bool kin = op.kinetic_axes()[p];
    for (int i = 0; i < n; ++i) {
      h(i, i) = u[p][i];
      if (!kin) continue;
      if (op.stencil_order() == 2) {
        h(i, i) += 2.0 * c / h2;
        if (i + 1 < n) h(i, i + 1) = h(i + 1, i) = -c / h2;
      } else {
        h(i, i) += 2.5 * c / h2;
        if (i + 1 < n) h(i, i + 1) = h(i + 1, i) = -4.0 * c / (3.0 * h2);
        if (i + 2 < n) h(i, i + 2) = h(i + 2, i) = c / (12.0 * h2);
      }
    }
    // Axes with identical one-body operators share one decomposition.
    int same = -1;
    for (int q = 0; q < p; ++q)
      if (u[q] == u[p] && op.kinetic_axes()[q] == kin) same = q;
    if (same >= 0) {
      basis_.push_back(basis_[same]);
      levels_.push_back(levels_[same]);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
      basis_.push_back(es.eigenvectors());
      levels_.push_back(es.eigenvalues());
    }
    bottom += levels_.back()(0);
  }
  shift_ = bottom - margin;
  denominator_.assign(dim_, 0.0);
  std::vector<int> digit(particles_, 0);
  for (std::size_t i = 0; i < dim_; ++i) {
    double s = -shift_;
    for (int p = 0; p < particles_; ++p) s += levels_[p](digit[p]);
    denominator_[i] = 1.0 / s;
    for (int p = particles_ - 1; p >= 0; --p) {
      if (++digit[p] < n) break;
      digit[p] = 0;
    }
  }
}

namespace {

// Applies m (n x n) to axis p of the tensor stored in data: for every index
// of the other axes, the fibre f along p becomes m^T f.
void transform_axis(double* data, std::size_t dim, int n, int particles, int p, const Eigen::MatrixXd& m) {
  using Eigen::Map;
  using Eigen::MatrixXd;
  const std::size_t s = tensor_dimension(n, particles - 1 - p);
  if (s == 1) {
    Map<MatrixXd> x(data, n, static_cast<Eigen::Index>(dim / n));
    x = m.transpose() * x;
    return;
  }
  const std::size_t block = s * n;
  for (std::size_t b = 0; b < dim; b += block) {
    Map<MatrixXd> x(data + b, static_cast<Eigen::Index>(s), n);
    x = x * m;
  }
}

}  // namespace

void SeparablePreconditioner::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != dim_ || y.size() != dim_) throw std::invalid_argument("preconditioner: size mismatch");
  std::copy(x.begin(), x.end(), y.begin());
  for (int p = 0; p < particles_; ++p) transform_axis(y.data(), dim_, points_, particles_, p, basis_[p]);
  for (std::size_t i = 0; i < dim_; ++i) y[i] *= denominator_[i];
  for (int p = 0; p < particles_; ++p)
    transform_axis(y.data(), dim_, points_, particles_, p, basis_[p].transpose());
}

}  // namespace bosegap
