#include "bosegap/spectra.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>

#include <lapacke.h>
#include <json.hpp>

#include "bosegap/error.hpp"
#include "bosegap/kernels.hpp"
#include "bosegap/symmetry.hpp"

namespace bosegap {

SolveOptions SolveOptions::from(const ExperimentConfig& cfg) {
  SolveOptions o;
  o.count = cfg.solver.eigen_count;
  o.tolerance = cfg.tolerances.eigen_residual;
  o.degeneracy = cfg.tolerances.degeneracy;
  o.seed = cfg.solver.seed;
  o.max_restarts = cfg.solver.max_restarts;
  o.dense_oracle = cfg.solver.dense_oracle;
  return o;
}

double degeneracy_tolerance(double e0, double relative) {
  return std::max(relative * std::abs(e0), 1e-14);
}

std::vector<std::vector<int>> degeneracy_groups(const std::vector<double>& values, double tolerance) {
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(values.size()); ++i) {
    if (!groups.empty() && values[i] - values[groups.back().back()] <= tolerance) {
      groups.back().push_back(i);
    } else {
      groups.push_back({i});
    }
  }
  return groups;
}

namespace {

void fix_sign(Vector& v) {
  double sum = 0.0, l1 = 0.0, big = 0.0;
  for (double x : v) {
    sum += x;
    l1 += std::abs(x);
    if (std::abs(x) > std::abs(big)) big = x;
  }
  const bool flip = std::abs(sum) > 1e-10 * l1 ? sum < 0.0 : big < 0.0;
  if (flip)
    for (double& x : v) x = -x;
}

EigenResult one_particle_solve(const ManyBodyOperator& op, int count) {
  // One particle: H is banded with constant off-diagonals (bandwidth order / 2).
  const int n = static_cast<int>(op.dimension());
  const int kd = std::min(op.stencil_order() / 2, n - 1);
  // Read the stencil from the operator itself, away from the walls.
  const int mid = n / 2;
  Vector unit(n, 0.0), col(n);
  unit[mid] = 1.0;
  op.apply(unit, col);
  const double kin_diag = col[mid] - op.potential()[mid];
  std::vector<double> off(kd + 1, 0.0);
  for (int b = 1; b <= kd; ++b) off[b] = mid + b < n ? col[mid + b] : col[mid - b];

  const int k = std::min(count, n);
  lapack_int m = 0;
  std::vector<double> w(n), z(static_cast<std::size_t>(n) * k);
  lapack_int info = 0;
  if (kd == 1) {
    std::vector<double> d(n), e(std::max(n - 1, 1));
    for (int i = 0; i < n; ++i) d[i] = op.potential()[i] + kin_diag;
    for (int i = 0; i + 1 < n; ++i) e[i] = off[1];
    std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(k));
    info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, d.data(), e.data(), 0.0, 0.0, 1, k, 0.0, &m, w.data(),
                          z.data(), n, isuppz.data());
  } else {
    // Upper band storage: ab(kd + i - j, j) = H(i, j) for j - kd <= i <= j.
    const int ldab = kd + 1;
    std::vector<double> ab(static_cast<std::size_t>(ldab) * n, 0.0);
    for (int j = 0; j < n; ++j) {
      ab[static_cast<std::size_t>(j) * ldab + kd] = op.potential()[j] + kin_diag;
      for (int b = 1; b <= kd && j - b >= 0; ++b) ab[static_cast<std::size_t>(j) * ldab + kd - b] = off[b];
    }
    std::vector<double> q(static_cast<std::size_t>(n) * n);
    std::vector<lapack_int> ifail(n);
    info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, kd, ab.data(), ldab, q.data(), n, 0.0, 0.0, 1, k,
                          0.0, &m, w.data(), z.data(), n, ifail.data());
  }
  if (info != 0) throw SolverError("banded eigensolver failed (info " + std::to_string(info) + ")");
  EigenResult r;
  r.converged = true;
  for (int i = 0; i < m; ++i) {
    r.values.push_back(w[i]);
    r.vectors.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(i) * n,
                           z.begin() + static_cast<std::ptrdiff_t>(i + 1) * n);
    Vector hv(n);
    op.apply(r.vectors.back(), hv);
    kernels::axpy(-w[i], r.vectors.back(), hv);
    r.residuals.push_back(kernels::norm2(hv));
  }
  return r;
}

}  // namespace

SpectralReport lowest_eigenpairs(const ManyBodyOperator& op, const SolveOptions& options,
                                 const StatisticsProjector* projector, Statistics subspace) {
  if (options.count < 1) throw ValidationError("eigenvalue count must be >= 1");
  SpectralReport rep;
  rep.subspace = subspace;
  rep.spacing = op.grid().spacing;
  rep.stencil_order = op.stencil_order();
  const std::size_t dim = op.dimension();

  // Projectors are the identity on one particle except A, which is also
  // the identity there.
  const VectorProjector* proj = op.particles() <= 1 ? nullptr : projector;

  EigenResult res;
  if (dim == 1) {
    res.values = {op.potential()[0]};
    res.vectors = {Vector{1.0}};
    res.residuals = {0.0};
    res.converged = true;
    rep.method = "trivial";
  } else if (op.particles() == 1 && op.kinetic_axes()[0]) {
    res = one_particle_solve(op, options.count);
    rep.method = op.stencil_order() == 2 ? "tridiagonal" : "banded";
  } else if (dim <= 600 || (options.dense_oracle && dim <= ManyBodyOperator::kDenseLimit)) {
    res = dense_eigen(op.dense(), options.count, proj);
    rep.method = "dense";
  } else {
    EigenOptions eo;
    eo.count = options.count;
    eo.tolerance = options.tolerance;
    eo.seed = options.seed;
    eo.max_restarts = options.max_restarts;
    eo.projector = proj;
    std::unique_ptr<SeparablePreconditioner> pre;
    if (static_cast<int>(op.axis_potentials().size()) == op.particles() && op.kinetic_axes()[0]) {
      pre = std::make_unique<SeparablePreconditioner>(op);
      eo.preconditioner = pre.get();
      res = lobpcg(op, eo);
      rep.method = "lobpcg";
    } else {
      res = block_lanczos(op, eo);
      rep.method = "lanczos";
    }
    rep.matvecs = res.matvecs;
    if (!res.converged) {
      double worst = 0.0;
      for (double r : res.residuals) worst = std::max(worst, r);
      throw SolverError(rep.method + " did not converge: worst residual " + std::to_string(worst) + " after " +
                        std::to_string(res.restarts) + " restarts");
    }
  }
  for (auto& v : res.vectors) fix_sign(v);
  rep.eigenvalues = std::move(res.values);
  rep.eigenvectors = std::move(res.vectors);
  rep.residuals = std::move(res.residuals);
  rep.converged = res.converged;
  if (!rep.eigenvalues.empty()) {
    rep.degeneracy_groups =
        degeneracy_groups(rep.eigenvalues, degeneracy_tolerance(rep.eigenvalues.front(), options.degeneracy));
  }
  return rep;
}

GapResult gap(const std::vector<double>& values, double tol) {
  if (values.size() < 2) throw SolverError("gap needs at least two eigenvalues");
  GapResult g;
  g.degeneracy_tolerance = tol;
  g.e0 = values.front();
  g.ground_degenerate = values[1] - values[0] <= tol;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] - values[0] > tol) {
      g.e1 = values[i];
      g.gap = values[i] - values[0];
      return g;
    }
  }
  throw SolverError("every computed level lies in the ground degeneracy group; increase the eigenvalue count");
}

GapResult gap(const SpectralReport& report, double tol) { return gap(report.eigenvalues, tol); }

double ionization_threshold(const ExperimentConfig& cfg, const NuclearConfiguration& y) {
  const int n = cfg.particles.electron_count;
  if (n < 1) throw ValidationError("ionization threshold needs N >= 1");
  const double vn = y.include_nuclear_repulsion ? y.nuclear_repulsion(cfg.model) : 0.0;
  if (n == 1) return vn;
  ExperimentConfig c = cfg;
  c.particles.electron_count = n - 1;
  const ManyBodyOperator op = assemble_full(c, y);
  auto proj = projector_for(c.particles.statistics, TensorShape{c.model.grid_points, n - 1});
  SolveOptions o = SolveOptions::from(c);
  o.count = 1;
  return lowest_eigenpairs(op, o, proj.get(), c.particles.statistics).eigenvalues.front();
}

LocalizationFit localization_rate(std::span<const double> psi, const Grid& grid, int particles,
                                  const std::vector<double>& centers, double shell_width) {
  LocalizationFit fit;
  if (centers.empty()) throw ValidationError("localization needs at least one center");
  if (psi.size() != tensor_dimension(grid.points, particles)) throw ValidationError("eigenvector size mismatch");
  const double width = shell_width > 0.0 ? shell_width : std::max(2.0 * grid.spacing, 0.1);
  const double limit = 0.8 * grid.extent;
  const int n = grid.points;

  std::vector<double> dist1(n);
  std::vector<bool> inside(n);
  for (int i = 0; i < n; ++i) {
    const double x = grid.coordinate(i);
    double m = std::numeric_limits<double>::infinity();
    for (double z : centers) m = std::min(m, std::abs(x - z));
    dist1[i] = m;
    inside[i] = std::abs(x) <= limit;
  }
  std::map<long, double> shells;
  std::vector<int> digit(particles, 0);
  for (std::size_t idx = 0; idx < psi.size(); ++idx) {
    bool ok = true;
    double d = 0.0;
    for (int p = 0; p < particles; ++p) {
      ok = ok && inside[digit[p]];
      d = std::max(d, dist1[digit[p]]);
    }
    if (ok) shells[static_cast<long>(std::floor(d / width))] += psi[idx] * psi[idx];
    for (int p = particles - 1; p >= 0; --p) {
      if (++digit[p] < n) break;
      digit[p] = 0;
    }
  }
  std::vector<double> xs, ys;
  double peak = 0.0;
  long peak_bin = 0;
  for (const auto& [b, s] : shells) {
    if (s > peak) {
      peak = s;
      peak_bin = b;
    }
  }
  if (!(peak > 0.0)) {
    fit.note = "eigenvector vanishes on the interior";
    return fit;
  }
  const double floor_norm = 1e-7 * std::sqrt(peak);
  for (const auto& [b, s] : shells) {
    if (b <= peak_bin) continue;
    const double norm = std::sqrt(s);
    if (norm < floor_norm) break;
    xs.push_back((static_cast<double>(b) + 0.5) * width);
    ys.push_back(-std::log(norm));
  }
  fit.points = static_cast<int>(xs.size());
  if (fit.points < 5) {
    fit.note = "too few shells above the dynamic-range floor";
    return fit;
  }
  const double nx = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nx;
  my /= nx;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.alpha = sxy / sxx;
  fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 0.0;
  fit.window_start = xs.front();
  fit.window_end = xs.back();
  const double decay = ys.back() - ys.front();
  if (decay < 3.0) {
    fit.note = "insufficient decay across the interior window";
  } else {
    fit.accepted = fit.alpha > 0.0;
    if (!fit.accepted) fit.note = "nonpositive decay rate";
  }
  return fit;
}

nlohmann::json to_json(const SpectralReport& r, bool include_vectors) {
  nlohmann::json j;
  j["eigenvalues"] = r.eigenvalues;
  j["residuals"] = r.residuals;
  j["degeneracy_groups"] = r.degeneracy_groups;
  j["subspace"] = std::string(to_string(r.subspace));
  j["discretization"] = {{"spacing", r.spacing}, {"stencil_order", r.stencil_order}};
  j["method"] = r.method;
  j["converged"] = r.converged;
  j["matvecs"] = r.matvecs;
  if (include_vectors) j["eigenvectors"] = r.eigenvectors;
  return j;
}

nlohmann::json to_json(const GapResult& g) {
  return {{"gap", g.gap},
          {"ground_degenerate", g.ground_degenerate},
          {"degeneracy_tolerance", g.degeneracy_tolerance},
          {"e0", g.e0},
          {"e1", g.e1}};
}

nlohmann::json to_json(const LocalizationFit& f) {
  return {{"alpha", f.alpha},           {"r_squared", f.r_squared},   {"points", f.points},
          {"window_start", f.window_start}, {"window_end", f.window_end}, {"accepted", f.accepted},
          {"note", f.note}};
}

static_assert(std::endian::native == std::endian::little, "eigenvector dumps assume a little-endian host");

void write_eigenvector(const std::string& path, std::span<const double> v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::uint64_t n = v.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) throw Error("write failed: " + path);
}

Vector read_eigenvector(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error("truncated eigenvector file: " + path);
  return v;
}

}  // namespace bosegap
