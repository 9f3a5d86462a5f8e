#include "bosegap/fsmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "bosegap/error.hpp"
#include "bosegap/kernels.hpp"

namespace bosegap {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = a[i] * b[j];
  return out;
}

std::string occupation_label(const std::vector<int>& occ) {
  std::string s = "(";
  for (std::size_t i = 0; i < occ.size(); ++i) s += (i ? "," : "") + std::to_string(occ[i]);
  return s + ")";
}

nlohmann::json matrix_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

std::vector<Vector> CandidateFamily::vectors() const {
  std::vector<Vector> v;
  for (const auto& m : members) v.push_back(m.vector);
  return v;
}

std::vector<double> CandidateFamily::energies() const {
  std::vector<double> e;
  for (const auto& m : members) e.push_back(m.energy);
  return e;
}

CandidateFamily build_candidate_family(const ThresholdTable& table, int grid_points, const FamilyOptions& options) {
  const int k = static_cast<int>(table.levels.size());
  CandidateFamily fam;
  fam.shape = TensorShape{grid_points, table.electrons};
  fam.statistics = table.statistics;
  const auto& neutral = table.cluster_charges;

  auto ground_factor = [&](int j, int n) -> Vector {
    if (n == 0) return Vector{1.0};
    const auto& l = table.at(j, n);
    if (!l.solved || l.ground.empty())
      throw ValidationError("no eigenvector for cluster " + std::to_string(j) + " with " + std::to_string(n) +
                            " electrons");
    return l.ground.front();
  };
  auto product = [&](const std::vector<int>& occ, int excited_cluster, int p) {
    Vector v{1.0};
    for (int j = 0; j < k; ++j) {
      if (j == excited_cluster) {
        v = kron(v, table.at(j, occ[j]).excited.at(p));
      } else {
        v = kron(v, ground_factor(j, occ[j]));
      }
    }
    return v;
  };
  auto proj = projector_for(table.statistics, fam.shape);
  auto add = [&](FamilyMember m, Vector raw) {
    double nrm = 1.0;
    if (proj) {
      proj->project(raw);
      nrm = kernels::norm2(raw);
    } else {
      nrm = kernels::norm2(raw);
    }
    if (!(nrm > options.symmetrize_tolerance)) {
      fam.rejected.push_back(m.label + ": annihilated by the statistics projector");
      return;
    }
    kernels::scale(1.0 / nrm, raw);
    for (const auto& other : fam.members) {
      if (std::abs(kernels::dot(other.vector, raw)) > 1.0 - options.duplicate_tolerance) {
        fam.rejected.push_back(m.label + ": duplicate of " + other.label);
        return;
      }
    }
    m.symmetrizer_norm = nrm;
    m.vector = std::move(raw);
    fam.members.push_back(std::move(m));
  };

  {
    FamilyMember m;
    m.kind = FamilyMember::Kind::ground;
    m.occupation = neutral;
    m.energy = table.e_inf0;
    m.label = "ground " + occupation_label(neutral);
    add(m, product(neutral, -1, 0));
  }
  for (int l = 0; l < k; ++l) {
    const auto& lv = table.at(l, neutral[l]);
    for (int p = 0; p < static_cast<int>(lv.excited.size()); ++p) {
      FamilyMember m;
      m.kind = FamilyMember::Kind::excited;
      m.occupation = neutral;
      m.excited_cluster = l;
      m.excited_index = p;
      m.energy = table.excited_thresholds[l];
      m.label = "excited cluster " + std::to_string(l) + " level " + std::to_string(p);
      add(m, product(neutral, l, p));
    }
  }
  if (options.include_ionic) {
    for (int idx : table.ionic_minimizers) {
      const auto& c = table.candidates[idx];
      FamilyMember m;
      m.kind = FamilyMember::Kind::ionic;
      m.occupation = c.occupation;
      m.energy = c.energy;
      m.label = "ionic " + occupation_label(c.occupation);
      add(m, product(c.occupation, -1, 0));
    }
  }
  return fam;
}

double FsProjection::max_offdiagonal() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = 0; j < gram.cols(); ++j)
      if (i != j) m = std::max(m, std::abs(gram(i, j)));
  return m;
}

void FsProjection::apply(std::span<const double> v, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& b : basis) kernels::axpy(kernels::dot(b, v), b, out);
}

FsProjection gram_and_inverse(const std::vector<Vector>& members, double floor) {
  FsProjection p;
  p.members = members;
  const int r = static_cast<int>(members.size());
  p.rank = r;
  p.gram = MatrixXd::Zero(r, r);
  if (r == 0) return p;
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) p.gram(i, j) = p.gram(j, i) = kernels::dot(members[i], members[j]);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(p.gram);
  p.min_eigenvalue = es.eigenvalues().minCoeff();
  if (!(p.min_eigenvalue >= floor)) {
    std::ostringstream os;
    os << "family degenerate at this separation; increase R or deduplicate (smallest Gram eigenvalue "
       << p.min_eigenvalue << ")";
    throw SolverError(os.str());
  }
  p.condition = es.eigenvalues().maxCoeff() / p.min_eigenvalue;
  p.gram_inverse = p.gram.llt().solve(MatrixXd::Identity(r, r));
  p.gram_inverse_sqrt = es.operatorInverseSqrt();
  const std::size_t dim = members.front().size();
  for (int i = 0; i < r; ++i) {
    Vector b(dim, 0.0);
    for (int j = 0; j < r; ++j) kernels::axpy(p.gram_inverse_sqrt(j, i), members[j], b);
    p.basis.push_back(std::move(b));
  }
  return p;
}

FsProjection gram_and_inverse(const CandidateFamily& family, double floor) {
  return gram_and_inverse(family.vectors(), floor);
}

FsProblem::FsProblem(const LinearOperator& h, FsProjection projection, const VectorProjector* space,
                     const LinearOperator* preconditioner, FsOptions options)
    : h_(&h),
      projection_(std::move(projection)),
      space_(space),
      preconditioner_(preconditioner),
      options_(options),
      perp_(projection_.basis) {
  const std::size_t dim = h.dimension();
  for (const auto& b : projection_.basis)
    if (b.size() != dim) throw ValidationError("family vectors do not match the operator dimension");
  chain_.add(space_);
  if (projection_.rank > 0) chain_.add(&perp_);
  const int r = projection_.rank;
  php_ = MatrixXd::Zero(r, r);
  for (int j = 0; j < r; ++j) {
    Vector hb(dim);
    h.apply(projection_.basis[j], hb);
    Vector rhs = hb;
    chain_.project(rhs);
    hb_.push_back(std::move(hb));
    rhs_.push_back(std::move(rhs));
  }
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) php_(i, j) = kernels::dot(projection_.basis[i], hb_[j]);
  php_ = 0.5 * (php_ + php_.transpose()).eval();
}

const ComplementSpectrum& FsProblem::complement() const {
  if (complement_) return *complement_;
  ComplementSpectrum c;
  const std::size_t dim = h_->dimension();
  const VectorProjector* proj = chain_.empty() ? nullptr : &chain_;
  if (options_.dense || dim <= 600) {
    if (dim > 6000) throw ValidationError("dense complement solve requested for a large operator");
    const auto r = dense_eigen(to_dense(*h_), 1, proj);
    c.method = "dense";
    c.bottom = r.values.empty() ? std::numeric_limits<double>::infinity() : r.values.front();
    c.residual = r.residuals.empty() ? 0.0 : r.residuals.front();
  } else {
    EigenOptions eo;
    eo.count = 1;
    eo.tolerance = options_.complement_tolerance;
    eo.seed = options_.seed;
    eo.projector = proj;
    eo.preconditioner = preconditioner_;
    const auto r = preconditioner_ != nullptr ? lobpcg(*h_, eo) : block_lanczos(*h_, eo);
    c.method = preconditioner_ != nullptr ? "lobpcg" : "lanczos";
    if (!r.converged || r.values.empty()) throw SolverError("complement eigensolve did not converge");
    c.bottom = r.values.front();
    c.residual = r.residuals.front();
    c.matvecs = r.matvecs;
  }
  complement_ = c;
  return *complement_;
}

double FsProblem::complement_gap(double lambda) const { return complement().bottom - lambda; }

FsOperator FsProblem::evaluate(double lambda) const {
  FsOperator f;
  f.lambda = lambda;
  f.complement_gap = complement_gap(lambda);
  if (!(f.complement_gap > 0.0)) {
    std::ostringstream os;
    os.precision(12);
    os << "FS map not defined at lambda = " << lambda << " (complement bottom " << complement().bottom << ")";
    throw SolverError(os.str());
  }
  const int r = projection_.rank;
  const std::size_t dim = h_->dimension();
  f.php = php_;
  MatrixXd s = MatrixXd::Zero(r, r);
  const bool empty_complement = !std::isfinite(complement().bottom);
  for (int j = 0; j < r; ++j) {
    if (empty_complement) {
      f.corrections.emplace_back(dim, 0.0);
      continue;
    }
    const auto cg = projected_cg(*h_, lambda, rhs_[j], &chain_, options_.inner_tolerance,
                                 options_.inner_max_iterations,
                                 warm_.size() == static_cast<std::size_t>(r) ? std::span<const double>(warm_[j])
                                                                             : std::span<const double>());
    f.cg_iterations += cg.iterations;
    f.worst_cg_residual = std::max(f.worst_cg_residual, cg.relative_residual);
    if (!cg.converged) {
      std::ostringstream os;
      os << "inner solve did not converge: relative residual " << cg.relative_residual << " after "
         << cg.iterations << " iterations (tolerance " << options_.inner_tolerance << ")";
      throw SolverError(os.str());
    }
    f.corrections.push_back(cg.solution);
  }
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) s(i, j) = kernels::dot(rhs_[i], f.corrections[j]);
  f.asymmetry = max_abs(s - s.transpose());
  f.schur = 0.5 * (s + s.transpose());
  f.matrix = php_ - f.schur;
  if (r > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(f.matrix);
    f.nu.assign(es.eigenvalues().data(), es.eigenvalues().data() + r);
    f.eigenvectors = es.eigenvectors();
  }
  warm_ = f.corrections;
  return f;
}

Vector FsProblem::q_map(const FsOperator& f, const VectorXd& c) const {
  const std::size_t dim = h_->dimension();
  Vector psi(dim, 0.0);
  for (int j = 0; j < projection_.rank; ++j) {
    kernels::axpy(c(j), projection_.basis[j], psi);
    kernels::axpy(-c(j), f.corrections[j], psi);
  }
  return psi;
}

FixedPoint FsProblem::solve_fixed_point(int i, double lo, double hi) const {
  if (i < 0 || i >= projection_.rank) throw ValidationError("fixed-point index outside the family rank");
  if (!(lo < hi)) throw ValidationError("fixed-point bracket must satisfy lo < hi");
  FixedPoint out;
  out.index = i;
  const double bottom = complement().bottom;
  // Close to the complement bottom the inner solves lose accuracy; start
  // well below it and only creep toward cap when the root lies beyond.
  const double scale = std::max(1.0, std::abs(bottom));
  const double cap = std::isfinite(bottom) ? bottom - 1e-7 * scale : hi;
  hi = std::min(hi, std::isfinite(bottom) ? bottom - 1e-3 * scale : hi);
  if (!(lo < hi)) lo = hi - std::max(1.0, std::abs(hi));

  auto g = [&](double lambda) {
    const double v = evaluate(lambda).nu[static_cast<std::size_t>(i)] - lambda;
    out.trace.lambdas.push_back(lambda);
    out.trace.values.push_back(v);
    return v;
  };
  double ga = g(lo), gb = g(hi);
  double width = hi - lo;
  for (int e = 0; ga < 0.0 && e < options_.max_bracket_expansions; ++e) {
    hi = lo;
    gb = ga;
    width *= 2.0;
    lo -= width;
    ga = g(lo);
  }
  for (int e = 0; gb > 0.0 && e < options_.max_bracket_expansions && hi < cap; ++e) {
    lo = hi;
    ga = gb;
    hi = std::isfinite(bottom) ? hi + 0.5 * (cap - hi) : hi + 2.0 * width;
    gb = g(hi);
  }
  if (ga < 0.0 || gb > 0.0) {
    std::ostringstream os;
    os << "no sign change of nu_" << i << "(lambda) - lambda in [" << lo << ", " << hi << "]";
    throw SolverError(os.str());
  }
  double lambda = lo;
  if (ga == 0.0) {
    lambda = lo;
  } else if (gb == 0.0) {
    lambda = hi;
  } else {
    const double rel = options_.fixed_point_tolerance;
    auto tol = [rel](double a, double b) { return std::abs(b - a) <= rel * std::max({std::abs(a), std::abs(b), 1e-3}); };
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(g, lo, hi, ga, gb, tol, iters);
    out.lower = r.first;
    out.upper = r.second;
    lambda = 0.5 * (r.first + r.second);
  }
  if (out.upper == 0.0 && out.lower == 0.0) out.lower = out.upper = lambda;

  const FsOperator f = evaluate(lambda);
  out.lambda = lambda;
  out.coefficients = f.eigenvectors.col(i);
  Vector psi = q_map(f, out.coefficients);
  // P psi should reproduce phi = B c.
  Vector ppsi(psi.size()), phi(psi.size(), 0.0);
  projection_.apply(psi, ppsi);
  for (int j = 0; j < projection_.rank; ++j) kernels::axpy(out.coefficients(j), projection_.basis[j], phi);
  double perr = 0.0;
  for (std::size_t q = 0; q < psi.size(); ++q) perr = std::max(perr, std::abs(ppsi[q] - phi[q]));
  out.projection_error = perr;
  const double n = kernels::norm2(psi);
  kernels::scale(1.0 / n, psi);
  Vector hpsi(psi.size());
  h_->apply(psi, hpsi);
  kernels::axpy(-lambda, psi, hpsi);
  out.reconstruction_residual = kernels::norm2(hpsi);
  double sum = 0.0;
  for (double x : psi) sum += x;
  if (sum < 0.0) kernels::scale(-1.0, psi);
  out.eigenvector = std::move(psi);
  return out;
}

double complement_gap(const FsProblem& p, double lambda) { return p.complement_gap(lambda); }
FsOperator fs_operator(const FsProblem& p, double lambda) { return p.evaluate(lambda); }
Vector q_map(const FsProblem& p, const FsOperator& f, const VectorXd& c) { return p.q_map(f, c); }
FixedPoint solve_fixed_point(const FsProblem& p, int i, double lo, double hi) { return p.solve_fixed_point(i, lo, hi); }

FsDiagnostics fs_diagnostics(const FsProblem& p, const std::vector<double>& energies, const FsOperator& at) {
  const auto& proj = p.projection();
  if (static_cast<int>(energies.size()) != proj.rank) throw ValidationError("one energy per family member expected");
  FsDiagnostics d;
  d.lambda = at.lambda;
  d.gram_offdiagonal = proj.max_offdiagonal();
  if (proj.rank == 0) return d;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(proj.gram);
  const MatrixXd root = es.operatorSqrt();
  // Members are Phi = B g^{1/2}.
  MatrixXd hm = root * at.php * root;
  for (int i = 0; i < proj.rank; ++i) hm(i, i) -= energies[i];
  d.hamiltonian_deviation = max_abs(hm);
  d.schur_magnitude = max_abs(root * at.schur * root);
  return d;
}

FsDiagnostics fs_diagnostics(const FsProblem& p, const std::vector<double>& energies, double lambda) {
  return fs_diagnostics(p, energies, p.evaluate(lambda));
}

double two_dimensional_bound(const FsProblem& p) {
  const auto& proj = p.projection();
  if (proj.rank < 2) throw ValidationError("the two-dimensional bound needs at least two family members");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(proj.gram);
  const MatrixXd root = es.operatorSqrt();
  MatrixXd hb = MatrixXd::Zero(proj.rank, proj.rank);
  for (int i = 0; i < proj.rank; ++i)
    for (int j = 0; j < proj.rank; ++j) hb(i, j) = kernels::dot(proj.basis[i], p.h_basis()[j]);
  const MatrixXd hm = root * (0.5 * (hb + hb.transpose())) * root;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 1; j < proj.rank; ++j) {
    Eigen::Matrix2d a, b;
    a << hm(0, 0), hm(0, j), hm(j, 0), hm(j, j);
    b << proj.gram(0, 0), proj.gram(0, j), proj.gram(j, 0), proj.gram(j, j);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> ge(a, b);
    best = std::min(best, ge.eigenvalues()(1));
  }
  return best;
}

nlohmann::json to_json(const CandidateFamily& f) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : f.members) {
    const char* kind = m.kind == FamilyMember::Kind::ground    ? "ground"
                       : m.kind == FamilyMember::Kind::excited ? "excited"
                                                               : "ionic";
    members.push_back({{"label", m.label},
                       {"kind", kind},
                       {"occupation", m.occupation},
                       {"excited_cluster", m.excited_cluster},
                       {"excited_index", m.excited_index},
                       {"energy", m.energy},
                       {"symmetrizer_norm", m.symmetrizer_norm}});
  }
  return {{"statistics", std::string(to_string(f.statistics))}, {"members", members}, {"rejected", f.rejected}};
}

nlohmann::json to_json(const FsProjection& p) {
  return {{"rank", p.rank},
          {"gram", matrix_json(p.gram)},
          {"min_eigenvalue", p.min_eigenvalue},
          {"condition", p.condition},
          {"max_offdiagonal", p.max_offdiagonal()}};
}

nlohmann::json to_json(const FsOperator& f) {
  return {{"lambda", f.lambda},
          {"matrix", matrix_json(f.matrix)},
          {"nu", f.nu},
          {"complement_gap", finite_or_null(f.complement_gap)},
          {"asymmetry", f.asymmetry},
          {"cg_iterations", f.cg_iterations},
          {"worst_cg_residual", f.worst_cg_residual}};
}

nlohmann::json to_json(const FixedPoint& f) {
  std::vector<double> c(f.coefficients.data(), f.coefficients.data() + f.coefficients.size());
  return {{"index", f.index},
          {"lambda", f.lambda},
          {"bracket", {f.lower, f.upper}},
          {"coefficients", c},
          {"reconstruction_residual", f.reconstruction_residual},
          {"projection_error", f.projection_error},
          {"evaluations", f.trace.lambdas.size()}};
}

nlohmann::json to_json(const FsDiagnostics& d) {
  return {{"lambda", d.lambda},
          {"gram_offdiagonal", d.gram_offdiagonal},
          {"hamiltonian_deviation", d.hamiltonian_deviation},
          {"schur_magnitude", d.schur_magnitude}};
}

std::string trace_csv(const std::vector<FixedPoint>& points) {
  std::ostringstream os;
  os.precision(17);
  os << "index,lambda,g\n";
  for (const auto& p : points)
    for (std::size_t k = 0; k < p.trace.lambdas.size(); ++k)
      os << p.index << "," << p.trace.lambdas[k] << "," << p.trace.values[k] << "\n";
  return os.str();
}

}  // namespace bosegap
