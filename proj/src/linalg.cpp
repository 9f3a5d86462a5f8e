#include "bosegap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bosegap/error.hpp"
#include "bosegap/kernels.hpp"

namespace bosegap {

void DenseOperator::apply(std::span<const double> x, std::span<double> y) const {
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  yv.noalias() = m_ * xv;
}

Eigen::MatrixXd to_dense(const LinearOperator& op) {
  const std::size_t n = op.dimension();
  Eigen::MatrixXd m(n, n);
  Vector e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    e[j] = 0.0;
  }
  return m;
}

void OrthogonalComplement::project(std::span<double> v) const {
  // Two passes of classical Gram-Schmidt keep the result orthogonal to
  // working precision even when v starts nearly inside the span.
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vector& q : basis_) {
      const double c = kernels::dot(q, v);
      kernels::axpy(-c, q, v);
    }
  }
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

std::span<double> column(MatrixXd& m, Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

void project_columns(MatrixXd& w, const VectorProjector* p) {
  if (p == nullptr) return;
  for (Index j = 0; j < w.cols(); ++j) p->project(column(w, j));
}

void fill_random(MatrixXd& w, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < w.cols(); ++j)
    for (Index i = 0; i < w.rows(); ++i) w(i, j) = normal(rng);
}

// Removes span(q[:, :used]) from w with two block Gram-Schmidt passes.
void block_orthogonalize(const MatrixXd& q, Index used, MatrixXd& w) {
  if (used == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const MatrixXd c = q.leftCols(used).transpose() * w;
    w.noalias() -= q.leftCols(used) * c;
  }
}

// B with w * B orthonormal, spanning the directions of w whose pivoted QR
// diagonal exceeds drop * reference. A Gram pass removes the residual
// non-orthogonality left by the triangular solve.
MatrixXd range_coefficients(const MatrixXd& w, double reference, double drop) {
  if (w.cols() == 0) return MatrixXd(0, 0);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(w);
  const MatrixXd& r = qr.matrixR();
  const Index diag = std::min(w.rows(), w.cols());
  Index rank = 0;
  while (rank < diag && std::abs(r(rank, rank)) > drop * reference) ++rank;
  if (rank == 0) return MatrixXd(w.cols(), 0);
  const MatrixXd rinv = r.topLeftCorner(rank, rank).triangularView<Eigen::Upper>().solve(
      MatrixXd::Identity(rank, rank));
  const MatrixXd perm = MatrixXd(qr.colsPermutation()).leftCols(rank);
  MatrixXd b = perm * rinv;
  const MatrixXd wb = w * b;
  const MatrixXd g = wb.transpose() * wb;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (g + g.transpose()));
  b = b * es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  return b;
}

MatrixXd orthonormal_range(const MatrixXd& w, double reference, double drop) {
  return w * range_coefficients(w, reference, drop);
}

void apply_block(const LinearOperator& op, const VectorProjector* p, const MatrixXd& x, MatrixXd& y, long& matvecs) {
  const std::size_t dim = static_cast<std::size_t>(x.rows());
  y.resize(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    op.apply({x.col(j).data(), dim}, column(y, j));
    if (p != nullptr) p->project(column(y, j));
    ++matvecs;
  }
}

// Appends the part of w orthogonal to the basis; returns the number of
// columns added (bounded by the remaining capacity).
Index extend_basis(MatrixXd& q, Index used, MatrixXd w, const VectorProjector* p, double drop) {
  const double reference = std::max(w.colwise().norm().maxCoeff(), 1e-300);
  block_orthogonalize(q, used, w);
  project_columns(w, p);
  block_orthogonalize(q, used, w);
  MatrixXd add = orthonormal_range(w, reference, drop);
  if (add.cols() == 0) return 0;
  // One more pass keeps the new columns orthogonal to working precision.
  block_orthogonalize(q, used, add);
  add = orthonormal_range(add, 1.0, 1e-8);
  const Index room = q.cols() - used;
  const Index take = std::min(room, add.cols());
  q.middleCols(used, take) = add.leftCols(take);
  return take;
}

}  // namespace

EigenResult block_lanczos(const LinearOperator& op, const EigenOptions& options) {
  const std::size_t dim = op.dimension();
  if (options.count < 1) throw ValidationError("block_lanczos: count must be >= 1");
  const int count = options.count;
  const auto idim = static_cast<Index>(dim);
  Index block = options.block_size > 0 ? options.block_size : count + 2;
  block = std::min<Index>(block, idim);

  Index capacity = options.max_basis;
  if (capacity <= 0) {
    // Keep the Krylov basis under roughly 400 MB.
    const Index by_memory = static_cast<Index>((400ull << 20) / (8 * dim + 1));
    capacity = std::min<Index>(std::max<Index>(20 * block, 120), std::max<Index>(by_memory, 4 * block));
  }
  capacity = std::min<Index>(std::max<Index>(capacity, 3 * block), idim);
  // Thick restart keeps the lowest Ritz vectors.
  const Index keep = std::min<Index>(std::max<Index>(2 * block, count + block), capacity / 2);

  std::mt19937_64 rng(options.seed);
  MatrixXd q(idim, capacity);
  EigenResult result;

  MatrixXd start(idim, block);
  fill_random(start, rng);
  project_columns(start, options.projector);

  MatrixXd hq, ritz;
  Vector w(dim), hy(dim);
  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    Index used = extend_basis(q, 0, start, options.projector, 1e-10);
    if (used == 0) {
      // Fresh random start; fails only when the projector's range is trivial.
      MatrixXd r(idim, block);
      fill_random(r, rng);
      project_columns(r, options.projector);
      used = extend_basis(q, 0, r, options.projector, 1e-8);
      if (used == 0) throw SolverError("block_lanczos: projector annihilates every start vector");
    }

    MatrixXd t = MatrixXd::Zero(capacity, capacity);
    bool exhausted = false;
    Index next = 0;
    while (next < used) {
      const Index b0 = next;
      const Index nb = std::min<Index>(block, used - next);
      hq.resize(idim, nb);
      for (Index j = 0; j < nb; ++j) {
        op.apply({q.col(b0 + j).data(), dim}, column(hq, j));
        if (options.projector != nullptr) options.projector->project(column(hq, j));
        ++result.matvecs;
      }
      const MatrixXd c = q.leftCols(used).transpose() * hq;
      t.block(0, b0, used, nb) = c;
      t.block(b0, 0, nb, used) = c.transpose();
      next = b0 + nb;
      if (used < capacity && !exhausted) {
        Index added = extend_basis(q, used, hq, options.projector, 1e-10);
        if (added == 0 && next == used) {
          // Invariant subspace reached; continue from a random direction
          // unless the projector's range is used up.
          MatrixXd r(idim, 1);
          fill_random(r, rng);
          project_columns(r, options.projector);
          added = extend_basis(q, used, r, options.projector, 1e-8);
          if (added == 0) exhausted = true;
        }
        used += added;
      }
    }

    MatrixXd tm = t.topLeftCorner(used, used);
    tm = 0.5 * (tm + tm.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(tm);
    const Index want = std::min<Index>(std::max<Index>(count, keep), used);
    ritz.noalias() = q.leftCols(used) * es.eigenvectors().leftCols(want);

    const int report = static_cast<int>(std::min<Index>(count, want));
    result.values.assign(report, 0.0);
    result.vectors.assign(report, Vector(dim));
    result.residuals.assign(report, 0.0);
    bool all_ok = true;
    for (int i = 0; i < report; ++i) {
      Vector& y = result.vectors[i];
      std::copy(ritz.col(i).data(), ritz.col(i).data() + dim, y.begin());
      kernels::scale(1.0 / kernels::norm2(y), y);
      op.apply(y, hy);
      ++result.matvecs;
      const double theta = es.eigenvalues()(i);
      std::copy(hy.begin(), hy.end(), w.begin());
      kernels::axpy(-theta, y, w);
      if (options.projector != nullptr) options.projector->project(w);
      result.values[i] = theta;
      result.residuals[i] = kernels::norm2(w);
      if (result.residuals[i] > options.tolerance) all_ok = false;
    }
    result.restarts = restart;
    if (all_ok || exhausted || used == idim) {
      result.converged = true;
      return result;
    }
    start = ritz;
  }
  result.converged = false;
  return result;
}

EigenResult lobpcg(const LinearOperator& op, const EigenOptions& options) {
  const std::size_t dim = op.dimension();
  if (options.count < 1) throw ValidationError("lobpcg: count must be >= 1");
  const auto idim = static_cast<Index>(dim);
  const VectorProjector* proj = options.projector;
  Index block = options.block_size > 0 ? options.block_size : options.count + 2;
  block = std::min<Index>(block, idim);
  const int count = options.count;

  std::mt19937_64 rng(options.seed);
  EigenResult result;
  MatrixXd x(idim, block);
  fill_random(x, rng);
  project_columns(x, proj);
  {
    const MatrixXd b = range_coefficients(x, x.colwise().norm().maxCoeff(), 1e-8);
    if (b.cols() == 0) throw SolverError("lobpcg: projector annihilates every start vector");
    x = x * b;
  }
  block = x.cols();
  MatrixXd ax, p, ap, w, aw, r;
  apply_block(op, proj, x, ax, result.matvecs);
  Eigen::VectorXd theta;
  {
    const MatrixXd g = x.transpose() * ax;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (g + g.transpose()));
    x = x * es.eigenvectors();
    ax = ax * es.eigenvectors();
    theta = es.eigenvalues();
  }

  Vector hy(dim), tmp(dim);
  const int report = static_cast<int>(std::min<Index>(count, block));
  for (int it = 0; it < options.max_iterations; ++it) {
    r = ax - x * theta.asDiagonal();
    project_columns(r, proj);
    const Eigen::VectorXd rn = r.colwise().norm();
    bool done = true;
    for (int i = 0; i < report; ++i) done = done && rn(i) <= options.tolerance;
    if (done) {
      // Confirm with explicit products; the tracked images drift slowly.
      result.values.assign(report, 0.0);
      result.vectors.assign(report, Vector(dim));
      result.residuals.assign(report, 0.0);
      bool ok = true;
      for (int i = 0; i < report; ++i) {
        Vector& y = result.vectors[i];
        std::copy(x.col(i).data(), x.col(i).data() + dim, y.begin());
        kernels::scale(1.0 / kernels::norm2(y), y);
        op.apply(y, hy);
        ++result.matvecs;
        const double rq = kernels::dot(y, hy);
        std::copy(hy.begin(), hy.end(), tmp.begin());
        kernels::axpy(-rq, y, tmp);
        if (proj != nullptr) proj->project(tmp);
        result.values[i] = rq;
        result.residuals[i] = kernels::norm2(tmp);
        ok = ok && result.residuals[i] <= options.tolerance;
      }
      result.restarts = it;
      if (ok) {
        result.converged = true;
        return result;
      }
      apply_block(op, proj, x, ax, result.matvecs);
      continue;
    }

    // Preconditioned residuals of the unconverged columns.
    std::vector<Index> active;
    for (Index i = 0; i < block; ++i)
      if (rn(i) > 0.1 * options.tolerance) active.push_back(i);
    w.resize(idim, static_cast<Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      auto col = column(w, static_cast<Index>(k));
      if (options.preconditioner != nullptr) {
        options.preconditioner->apply({r.col(active[k]).data(), dim}, col);
      } else {
        std::copy(r.col(active[k]).data(), r.col(active[k]).data() + dim, col.begin());
      }
    }
    project_columns(w, proj);
    for (Index j = 0; j < w.cols(); ++j) {
      const double nw = w.col(j).norm();
      if (nw > 0.0) w.col(j) /= nw;
    }
    for (int pass = 0; pass < 2; ++pass) {
      w -= x * (x.transpose() * w);
      if (p.cols() > 0) w -= p * (p.transpose() * w);
    }
    w = w * range_coefficients(w, 1.0, 1e-8);
    apply_block(op, proj, w, aw, result.matvecs);

    const Index np = p.cols(), nw = w.cols();
    const Index ns = block + np + nw;
    MatrixXd s(idim, ns), as(idim, ns);
    s << x, p, w;
    as << ax, ap, aw;
    MatrixXd g = s.transpose() * as;
    g = 0.5 * (g + g.transpose());
    MatrixXd m = s.transpose() * s;
    m = 0.5 * (m + m.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(g, m);
    if (es.info() != Eigen::Success) throw SolverError("lobpcg: Rayleigh-Ritz step failed");
    const MatrixXd c = es.eigenvectors().leftCols(block);
    theta = es.eigenvalues().head(block);

    MatrixXd xn = s * c, axn = as * c;
    if (np + nw > 0) {
      p = s.rightCols(np + nw) * c.bottomRows(np + nw);
      ap = as.rightCols(np + nw) * c.bottomRows(np + nw);
      const MatrixXd k = xn.transpose() * p;
      p -= xn * k;
      ap -= axn * k;
      const MatrixXd b = range_coefficients(p, 1.0, 1e-10);
      p = p * b;
      ap = ap * b;
    }
    x = std::move(xn);
    ax = std::move(axn);
  }
  // Out of iterations: report current estimates.
  result.values.assign(report, 0.0);
  result.vectors.assign(report, Vector(dim));
  result.residuals.assign(report, 0.0);
  for (int i = 0; i < report; ++i) {
    Vector& y = result.vectors[i];
    std::copy(x.col(i).data(), x.col(i).data() + dim, y.begin());
    kernels::scale(1.0 / kernels::norm2(y), y);
    op.apply(y, hy);
    const double rq = kernels::dot(y, hy);
    kernels::axpy(-rq, y, hy);
    if (proj != nullptr) proj->project(hy);
    result.values[i] = rq;
    result.residuals[i] = kernels::norm2(hy);
  }
  result.restarts = options.max_iterations;
  result.converged = false;
  return result;
}

EigenResult dense_eigen(const Eigen::MatrixXd& h, int count, const VectorProjector* projector) {
  const Index n = h.rows();
  MatrixXd basis;
  if (projector == nullptr) {
    basis = MatrixXd::Identity(n, n);
  } else if (projector->orbit_structure()) {
    std::vector<Vector> cols;
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    Vector e(n);
    for (Index j = 0; j < n; ++j) {
      if (seen[j]) continue;
      std::fill(e.begin(), e.end(), 0.0);
      e[j] = 1.0;
      projector->project(e);
      seen[j] = true;
      for (Index i = 0; i < n; ++i)
        if (e[i] != 0.0) seen[i] = true;
      const double ne = kernels::norm2(e);
      if (ne > 1e-12) {
        kernels::scale(1.0 / ne, e);
        cols.push_back(e);
      }
    }
    basis.resize(n, static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
      basis.col(static_cast<Index>(k)) = Eigen::Map<const Eigen::VectorXd>(cols[k].data(), n);
  } else {
    MatrixXd p(n, n);
    Vector e(n);
    for (Index j = 0; j < n; ++j) {
      std::fill(e.begin(), e.end(), 0.0);
      e[j] = 1.0;
      projector->project(e);
      for (Index i = 0; i < n; ++i) p(i, j) = e[i];
    }
    p = 0.5 * (p + p.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> ps(p);
    std::vector<Index> keep;
    for (Index i = 0; i < n; ++i)
      if (ps.eigenvalues()(i) > 0.5) keep.push_back(i);
    basis.resize(n, static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) basis.col(static_cast<Index>(k)) = ps.eigenvectors().col(keep[k]);
  }
  if (basis.cols() == 0) {
    EigenResult empty;
    empty.converged = true;
    return empty;
  }
  const MatrixXd hs = basis.transpose() * h * basis;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (hs + hs.transpose()));
  const int k = static_cast<int>(std::min<Index>(count, hs.rows()));
  EigenResult r;
  r.converged = true;
  for (int i = 0; i < k; ++i) {
    r.values.push_back(es.eigenvalues()(i));
    const Eigen::VectorXd v = basis * es.eigenvectors().col(i);
    r.vectors.emplace_back(v.data(), v.data() + n);
    const Eigen::VectorXd res = h * v - es.eigenvalues()(i) * v;
    r.residuals.push_back(res.norm());
  }
  return r;
}

CgResult projected_cg(const LinearOperator& op, double shift, std::span<const double> rhs,
                      const VectorProjector* projector, double rel_tol, int max_iter,
                      std::span<const double> initial) {
  const std::size_t n = op.dimension();
  CgResult out;
  Vector b(rhs.begin(), rhs.end());
  if (projector != nullptr) projector->project(b);
  const double bnorm = kernels::norm2(b);
  out.solution.assign(n, 0.0);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  if (initial.size() == n) {
    out.solution.assign(initial.begin(), initial.end());
    if (projector != nullptr) projector->project(out.solution);
  }
  Vector r(n), p(n), ap(n);
  auto true_residual = [&] {
    op.apply(out.solution, ap);
    kernels::axpy(-shift, out.solution, ap);
    if (projector != nullptr) projector->project(ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    return kernels::norm2(r) / bnorm;
  };
  out.relative_residual = true_residual();
  // The recurrence residual drifts from the true one; restart from the
  // current iterate until the true residual meets the tolerance.
  for (int cycle = 0; cycle < 4 && out.relative_residual > rel_tol && out.iterations < max_iter; ++cycle) {
    p = r;
    double rr = kernels::dot(r, r);
    while (out.iterations < max_iter) {
      op.apply(p, ap);
      kernels::axpy(-shift, p, ap);
      if (projector != nullptr) projector->project(ap);
      const double pap = kernels::dot(p, ap);
      if (!(pap > 0.0)) throw SolverError("projected_cg: shifted complement block is not positive definite");
      const double alpha = rr / pap;
      kernels::axpy(alpha, p, out.solution);
      kernels::axpy(-alpha, ap, r);
      const double rr_new = kernels::dot(r, r);
      ++out.iterations;
      if (std::sqrt(rr_new) / bnorm <= 0.5 * rel_tol) break;
      kernels::xpby(r, rr_new / rr, p);
      rr = rr_new;
    }
    if (projector != nullptr) projector->project(out.solution);
    out.relative_residual = true_residual();
  }
  out.converged = out.relative_residual <= rel_tol;
  return out;
}

}  // namespace bosegap
