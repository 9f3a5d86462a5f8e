#include "bosegap/ims.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "bosegap/error.hpp"
#include "bosegap/kernels.hpp"
#include "bosegap/parallel.hpp"
#include "bosegap/symmetry.hpp"

namespace bosegap {

namespace {

// Offsets and weights of the second-difference stencil, relative to 1/h^2.
std::vector<std::pair<int, double>> stencil_weights(int order) {
  if (order == 2) return {{1, 1.0}};
  if (order == 4) return {{1, 4.0 / 3.0}, {2, -1.0 / 12.0}};
  throw ValidationError("stencil order must be 2 or 4");
}

std::vector<int> digits(std::size_t idx, int n, int particles) {
  std::vector<int> d(static_cast<std::size_t>(particles));
  for (int p = particles - 1; p >= 0; --p) {
    d[p] = static_cast<int>(idx % static_cast<std::size_t>(n));
    idx /= static_cast<std::size_t>(n);
  }
  return d;
}

class LocalizedSum final : public LinearOperator {
 public:
  LocalizedSum(const ManyBodyOperator& h, std::vector<Vector> cutoffs) : h_(h), j_(std::move(cutoffs)) {}
  std::size_t dimension() const override { return h_.dimension(); }
  void apply(std::span<const double> x, std::span<double> y) const override {
    const std::size_t n = dimension();
    std::fill(y.begin(), y.end(), 0.0);
    Vector jx(n), hjx(n);
    for (const auto& j : j_) {
      for (std::size_t i = 0; i < n; ++i) jx[i] = j[i] * x[i];
      h_.apply(jx, hjx);
      for (std::size_t i = 0; i < n; ++i) y[i] += j[i] * hjx[i];
    }
  }

 private:
  const ManyBodyOperator& h_;
  std::vector<Vector> j_;
};

}  // namespace

double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return std::clamp(t * t * t * (10.0 + t * (-15.0 + 6.0 * t)), 0.0, 1.0);
}

Vector CutoffFamily::cutoff(int b) const {
  const auto& a = assignments.at(static_cast<std::size_t>(b));
  const std::size_t dim = tensor_dimension(grid.points, particles);
  Vector j(dim);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const auto d = digits(idx, grid.points, particles);
    double v = 1.0;
    for (int p = 0; p < particles; ++p) v *= chi[a[p]][d[p]];
    j[idx] = v;
  }
  return j;
}

Vector CutoffFamily::gradient_squared(int b) const {
  const auto& a = assignments.at(static_cast<std::size_t>(b));
  const std::size_t dim = tensor_dimension(grid.points, particles);
  Vector g(dim, 0.0);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const auto d = digits(idx, grid.points, particles);
    double s = 0.0;
    for (int p = 0; p < particles; ++p) {
      double rest = chi_gradient[a[p]][d[p]];
      for (int q = 0; q < particles; ++q)
        if (q != p) rest *= chi[a[q]][d[q]] * chi[a[q]][d[q]];
      s += rest;
    }
    g[idx] = s;
  }
  return g;
}

double CutoffFamily::partition_defect() const {
  const std::size_t dim = tensor_dimension(grid.points, particles);
  Vector sum(dim, 0.0);
  for (int b = 0; b < size(); ++b) {
    const Vector j = cutoff(b);
    for (std::size_t i = 0; i < dim; ++i) sum[i] += j[i] * j[i];
  }
  double m = 0.0;
  for (double s : sum) m = std::max(m, std::abs(s - 1.0));
  return m;
}

double max_cutoff_scale(const NuclearPartition& partition) {
  double best = std::numeric_limits<double>::infinity();
  const int k = partition.size();
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      best = std::min(best, partition.separations[i][j] / (4.0 * (partition.radii[i] + partition.radii[j])));
  return best;
}

CutoffFamily build_cutoffs(const NuclearPartition& partition, const Grid& grid, int particles, double scale,
                           int stencil_order, const CutoffOptions& options) {
  if (!(scale > 0.0)) throw ValidationError("cutoff scale R must be positive");
  if (particles < 1) throw ValidationError("cutoff family needs at least one electron");
  const int k = partition.size();
  if (k < 1) throw ValidationError("empty partition");
  const double rmax = max_cutoff_scale(partition);
  if (scale > rmax) {
    std::ostringstream os;
    os << "scale condition 2R(C_i + C_j) <= r_ij/2 violated: R = " << scale << " exceeds " << rmax
       << " (clusters too close for this R)";
    throw ValidationError(os.str());
  }
  const double cmin = *std::min_element(partition.radii.begin(), partition.radii.end());
  CutoffFamily f;
  f.grid = grid;
  f.particles = particles;
  f.stencil_order = stencil_order;
  f.scale = scale;
  f.width = options.width_factor * std::sqrt(scale) * cmin;
  if (!(f.width > 0.0) || f.width >= 2.0 * scale * cmin)
    throw ValidationError("transition width must be positive and smaller than the smallest ball radius");

  const int n = grid.points;
  std::vector<Vector> raw;
  std::vector<int> cluster;
  std::vector<double> radius;
  Vector far(n, 1.0);
  for (int j = 0; j < k; ++j) {
    const double rho = 2.0 * scale * partition.radii[j];
    Vector c(n);
    for (int i = 0; i < n; ++i) {
      const double t = (std::abs(grid.coordinate(i) - partition.centers[j]) - (rho - f.width)) / f.width;
      c[i] = 1.0 - smoothstep5(t);
      far[i] *= smoothstep5(t);
    }
    raw.push_back(std::move(c));
    cluster.push_back(j);
    radius.push_back(rho);
  }
  raw.push_back(std::move(far));
  cluster.push_back(-1);
  radius.push_back(0.0);

  Vector norm(n, 0.0);
  for (const auto& c : raw)
    for (int i = 0; i < n; ++i) norm[i] += c[i] * c[i];
  const auto weights = stencil_weights(stencil_order);
  const double h = grid.spacing;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    Vector c = raw[r];
    bool any = false;
    for (int i = 0; i < n; ++i) {
      c[i] /= std::sqrt(norm[i]);
      any = any || c[i] != 0.0;
    }
    if (!any) continue;  // region does not meet the grid
    Vector g(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (auto [off, w] : weights)
        for (int sign : {-1, 1}) {
          const int nb = std::clamp(i + sign * off, 0, n - 1);
          s += w * (c[i] - c[nb]) * (c[i] - c[nb]);
        }
      g[i] = s / (2.0 * h * h);
      f.max_gradient_squared = std::max(f.max_gradient_squared, g[i]);
    }
    f.chi.push_back(std::move(c));
    f.chi_gradient.push_back(std::move(g));
    f.region_cluster.push_back(cluster[r]);
    f.ball_radius.push_back(radius[r]);
  }
  f.d = scale * f.max_gradient_squared;

  const int regions = static_cast<int>(f.chi.size());
  std::size_t count = 1;
  for (int p = 0; p < particles; ++p) count *= static_cast<std::size_t>(regions);
  for (std::size_t b = 0; b < count; ++b) f.assignments.push_back(digits(b, regions, particles));
  return f;
}

ImsDefect ims_defect(const ManyBodyOperator& h, const CutoffFamily& family, int samples, std::uint64_t seed,
                     int workers) {
  if (h.grid().points != family.grid.points || h.particles() != family.particles ||
      std::abs(h.grid().spacing - family.grid.spacing) > 1e-14 * family.grid.spacing)
    throw ValidationError("operator and cutoff family live on different grids");
  if (h.stencil_order() != family.stencil_order)
    throw ValidationError("cutoff gradients were built for a different stencil order");
  const std::size_t dim = h.dimension();
  const int np = h.particles();
  const Grid& grid = h.grid();
  const double c = h.kinetic_coefficient();
  const double cell = std::pow(grid.spacing, np);

  std::vector<Vector> cutoffs, gradients;
  for (int b = 0; b < family.size(); ++b) {
    cutoffs.push_back(family.cutoff(b));
    Vector g(dim, 0.0);
    // Only axes that carry kinetic energy produce a gradient term.
    const auto& a = family.assignments[b];
    for (std::size_t idx = 0; idx < dim; ++idx) {
      const auto d = digits(idx, grid.points, np);
      double s = 0.0;
      for (int p = 0; p < np; ++p) {
        if (!h.kinetic_axes()[p]) continue;
        double rest = family.chi_gradient[a[p]][d[p]];
        for (int q = 0; q < np; ++q)
          if (q != p) rest *= family.chi[a[q]][d[q]] * family.chi[a[q]][d[q]];
        s += rest;
      }
      g[idx] = c * s;
    }
    gradients.push_back(std::move(g));
  }

  // Sample parameters are drawn up front so results do not depend on workers.
  struct Bump {
    double amplitude;
    std::vector<double> center, width;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-0.6 * grid.extent, 0.6 * grid.extent), wid(1.0, 3.0);
  std::normal_distribution<double> amp(0.0, 1.0);
  std::vector<std::vector<Bump>> draws(static_cast<std::size_t>(samples));
  for (auto& s : draws)
    for (int t = 0; t < 3; ++t) {
      Bump b{amp(rng), {}, {}};
      for (int p = 0; p < np; ++p) {
        b.center.push_back(pos(rng));
        b.width.push_back(wid(rng));
      }
      s.push_back(std::move(b));
    }

  std::vector<double> defects(static_cast<std::size_t>(samples));
  parallel_for(static_cast<std::size_t>(samples), workers, [&](std::size_t s) {
    Vector v(dim, 0.0);
    for (std::size_t idx = 0; idx < dim; ++idx) {
      const auto d = digits(idx, grid.points, np);
      for (const auto& b : draws[s]) {
        double e = 0.0;
        for (int p = 0; p < np; ++p) {
          const double z = (grid.coordinate(d[p]) - b.center[p]) / b.width[p];
          e += 0.5 * z * z;
        }
        v[idx] += b.amplitude * std::exp(-e);
      }
    }
    kernels::scale(1.0 / (kernels::norm2(v) * std::sqrt(cell)), v);
    Vector out(dim), jv(dim), hjv(dim);
    h.apply(v, out);
    for (std::size_t b = 0; b < cutoffs.size(); ++b) {
      const auto& j = cutoffs[b];
      for (std::size_t i = 0; i < dim; ++i) jv[i] = j[i] * v[i];
      h.apply(jv, hjv);
      for (std::size_t i = 0; i < dim; ++i) out[i] -= j[i] * hjv[i] - gradients[b][i] * v[i];
    }
    defects[s] = kernels::norm2(out) * std::sqrt(cell);
  });
  ImsDefect r;
  r.samples = samples;
  for (double d : defects) {
    r.max_defect = std::max(r.max_defect, d);
    r.mean_defect += d / std::max(samples, 1);
  }
  return r;
}

double cutoff_symmetry_defect(const CutoffFamily& family, int samples, std::uint64_t seed) {
  const TensorShape shape{family.grid.points, family.particles};
  const std::size_t dim = shape.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  const int regions = static_cast<int>(family.chi.size());
  for (int b = 0; b < family.size(); ++b) {
    const Vector j = family.cutoff(b);
    for (int r = 0; r < regions; ++r) {
      std::vector<int> group;
      for (int p = 0; p < family.particles; ++p)
        if (family.assignments[b][p] == r) group.push_back(p);
      if (group.size() < 2) continue;
      const auto s = StatisticsProjector::cluster_factor(shape, group);
      for (int t = 0; t < samples; ++t) {
        Vector v(dim), jv(dim);
        for (auto& x : v) x = g(rng);
        for (std::size_t i = 0; i < dim; ++i) jv[i] = j[i] * v[i];
        const Vector lhs = s.apply(jv);
        const Vector sv = s.apply(v);
        for (std::size_t i = 0; i < dim; ++i) worst = std::max(worst, std::abs(lhs[i] - j[i] * sv[i]));
      }
    }
  }
  return worst;
}

LocalizedBound localized_lower_bound(const ManyBodyOperator& h, const CutoffFamily& family,
                                     const VectorProjector* projector, std::uint64_t seed) {
  std::vector<Vector> cutoffs;
  const std::size_t dim = h.dimension();
  Vector penalty(dim, 0.0);
  for (int b = 0; b < family.size(); ++b) {
    cutoffs.push_back(family.cutoff(b));
    const Vector g = family.gradient_squared(b);
    for (std::size_t i = 0; i < dim; ++i) penalty[i] += g[i];
  }
  const LocalizedSum op(h, std::move(cutoffs));
  LocalizedBound r;
  r.scale = family.scale;
  r.penalty = h.kinetic_coefficient() * *std::max_element(penalty.begin(), penalty.end());
  if (dim <= 600) {
    const auto e = dense_eigen(to_dense(op), 1, projector);
    if (e.values.empty()) throw SolverError("localized operator has an empty restricted range");
    r.bottom = e.values.front();
    r.method = "dense";
  } else {
    EigenOptions eo;
    eo.count = 1;
    eo.seed = seed;
    eo.projector = projector;
    const auto e = block_lanczos(op, eo);
    if (!e.converged) throw SolverError("localized operator eigensolve did not converge");
    r.bottom = e.values.front();
    r.method = "lanczos";
  }
  r.bound = r.bottom - r.penalty;
  return r;
}

nlohmann::json to_json(const CutoffFamily& f) {
  return {{"scale", f.scale},
          {"width", f.width},
          {"particles", f.particles},
          {"regions", f.region_cluster},
          {"ball_radius", f.ball_radius},
          {"functions", f.size()},
          {"max_gradient_squared", f.max_gradient_squared},
          {"d", f.d}};
}

nlohmann::json to_json(const ImsDefect& d) {
  return {{"max_defect", d.max_defect}, {"mean_defect", d.mean_defect}, {"samples", d.samples}};
}

nlohmann::json to_json(const LocalizedBound& b) {
  return {{"scale", b.scale}, {"bottom", b.bottom}, {"penalty", b.penalty}, {"bound", b.bound}, {"method", b.method}};
}

std::string cutoff_csv(const CutoffFamily& f) {
  std::ostringstream os;
  os.precision(17);
  os << "x";
  for (std::size_t r = 0; r < f.chi.size(); ++r) {
    const std::string tag = f.region_cluster[r] < 0 ? "far" : "c" + std::to_string(f.region_cluster[r]);
    os << ",chi_" << tag << ",grad2_" << tag;
  }
  os << "\n";
  for (int i = 0; i < f.grid.points; ++i) {
    os << f.grid.coordinate(i);
    for (std::size_t r = 0; r < f.chi.size(); ++r) os << "," << f.chi[r][i] << "," << f.chi_gradient[r][i];
    os << "\n";
  }
  return os.str();
}

}  // namespace bosegap
