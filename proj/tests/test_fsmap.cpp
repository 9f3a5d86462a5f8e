#include <doctest.h>

#include <cmath>
#include <random>

#include "bosegap/clusters.hpp"
#include "bosegap/error.hpp"
#include "bosegap/fsmap.hpp"
#include "bosegap/spectra.hpp"
#include "bosegap/symmetry.hpp"
#include "test_helpers.hpp"

using namespace bosegap;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct DenseCase {
  MatrixXd h;
  VectorXd levels;
  MatrixXd modes;
};

DenseCase random_hamiltonian(std::mt19937_64& rng, int n = 12) {
  MatrixXd a(n, n);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  const MatrixXd u = qr.householderQ();
  VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = -3.0 + 0.9 * i + 0.05 * g(rng);
  return {u * d.asDiagonal() * u.transpose(), d, u};
}

Vector col(const MatrixXd& m, int j) { return Vector(m.col(j).data(), m.col(j).data() + m.rows()); }

// B^T H B - B^T H Q (Q^T H Q - lambda)^{-1} Q^T H B with Q completing B.
MatrixXd schur_oracle(const MatrixXd& h, const MatrixXd& b, double lambda) {
  const int n = static_cast<int>(h.rows()), r = static_cast<int>(b.cols());
  Eigen::HouseholderQR<MatrixXd> qr(b);
  const MatrixXd full = qr.householderQ();
  const MatrixXd q = full.rightCols(n - r);
  const MatrixXd hqq = q.transpose() * h * q - lambda * MatrixXd::Identity(n - r, n - r);
  return b.transpose() * h * b - b.transpose() * h * q * hqq.inverse() * q.transpose() * h * b;
}

MatrixXd basis_matrix(const FsProjection& p) {
  MatrixXd b(p.basis.front().size(), p.rank);
  for (int j = 0; j < p.rank; ++j)
    for (std::size_t i = 0; i < p.basis[j].size(); ++i) b(i, j) = p.basis[j][i];
  return b;
}

std::vector<Vector> perturbed_modes(const DenseCase& c, int count, double eps, std::mt19937_64& rng) {
  std::vector<Vector> out;
  for (int j = 0; j < count; ++j) {
    Vector v = col(c.modes, j);
    const Vector noise = testutil::random_vector(v.size(), rng);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += eps * noise[i];
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("F_P matches the dense Schur complement and its fixed points are eigenvalues") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_hamiltonian(rng);
    const DenseOperator h(c.h);
    const int r = 1 + trial % 3;
    FsOptions opt;
    opt.dense = true;
    FsProblem p(h, gram_and_inverse(perturbed_modes(c, r, 0.1, rng)), nullptr, nullptr, opt);
    const double bottom = p.complement().bottom;
    REQUIRE(bottom > c.levels(r - 1));

    // The complement bottom against the oracle.
    {
      Eigen::HouseholderQR<MatrixXd> qr(basis_matrix(p.projection()));
      const MatrixXd full = qr.householderQ();
      const MatrixXd q = full.rightCols(12 - r);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(q.transpose() * c.h * q);
      CHECK(bottom == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-11));
    }
    for (double lambda : {c.levels(0) - 2.0, c.levels(0), 0.5 * (c.levels(0) + bottom)}) {
      const auto f = p.evaluate(lambda);
      const MatrixXd ref = schur_oracle(c.h, basis_matrix(p.projection()), lambda);
      CHECK((f.matrix - ref).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(f.asymmetry <= 1e-8);
      CHECK((f.matrix - f.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    for (int i = 0; i < r; ++i) {
      const auto fp = p.solve_fixed_point(i, c.levels(0) - 3.0, bottom);
      CHECK(fp.lambda == doctest::Approx(c.levels(i)).epsilon(1e-10));
      CHECK(fp.reconstruction_residual <= 1e-7);
      CHECK(fp.projection_error <= 1e-10);
      CHECK(std::abs(testutil::dot(fp.eigenvector, col(c.modes, i))) == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(fp.lower <= fp.upper);
    }
  }
}

TEST_CASE("full-space projection gives F = H and an empty complement") {
  std::mt19937_64 rng(3);
  const auto c = random_hamiltonian(rng, 6);
  const DenseOperator h(c.h);
  std::vector<Vector> members;
  for (int j = 0; j < 6; ++j) members.push_back(testutil::random_vector(6, rng));
  FsProblem p(h, gram_and_inverse(members));
  CHECK(std::isinf(p.complement().bottom));
  const auto f = p.evaluate(100.0);
  const MatrixXd b = basis_matrix(p.projection());
  CHECK((f.matrix - b.transpose() * c.h * b).cwiseAbs().maxCoeff() <= 1e-12);
  for (int i = 0; i < 6; ++i) CHECK(f.nu[i] == doctest::Approx(c.levels(i)).epsilon(1e-12));
}

TEST_CASE("rank one exact eigenvector gives the constant map") {
  std::mt19937_64 rng(5);
  const auto c = random_hamiltonian(rng);
  const DenseOperator h(c.h);
  FsProblem p(h, gram_and_inverse(std::vector<Vector>{col(c.modes, 0)}));
  for (double lambda : {-10.0, -4.0, c.levels(0)}) {
    const auto f = p.evaluate(lambda);
    CHECK(f.nu[0] == doctest::Approx(c.levels(0)).epsilon(1e-12));
    CHECK(std::abs(f.schur(0, 0)) <= 1e-12);
  }
  const auto fp = p.solve_fixed_point(0, -10.0, 0.0);
  CHECK(fp.lambda == doctest::Approx(c.levels(0)).epsilon(1e-12));
}

TEST_CASE("Q_P inverts P and nu is nonincreasing") {
  std::mt19937_64 rng(9);
  const auto c = random_hamiltonian(rng);
  const DenseOperator h(c.h);
  FsProblem p(h, gram_and_inverse(perturbed_modes(c, 2, 0.3, rng)));
  const double bottom = p.complement().bottom;
  std::vector<double> prev;
  for (int s = 0; s <= 40; ++s) {
    const double lambda = -8.0 + s * (bottom - 1e-3 + 8.0) / 40.0;
    const auto f = p.evaluate(lambda);
    VectorXd coef = VectorXd::Random(2);
    const Vector psi = p.q_map(f, coef);
    Vector ppsi(psi.size()), phi(psi.size(), 0.0);
    p.projection().apply(psi, ppsi);
    for (int j = 0; j < 2; ++j)
      for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += coef(j) * p.projection().basis[j][i];
    CHECK(testutil::max_abs_diff(ppsi, phi) <= 1e-10);
    if (!prev.empty())
      for (int i = 0; i < 2; ++i) CHECK(f.nu[i] <= prev[i] + 1e-12);
    prev = f.nu;
  }
  CHECK_THROWS_AS(p.evaluate(bottom + 0.1), SolverError);
  CHECK_THROWS_AS(p.solve_fixed_point(2, -8.0, 0.0), ValidationError);
}

TEST_CASE("Gram matrix checks") {
  std::mt19937_64 rng(1);
  const Vector a = testutil::random_vector(8, rng);
  Vector b = testutil::random_vector(8, rng);
  CHECK_THROWS_AS(gram_and_inverse(std::vector<Vector>{a, b, a}), SolverError);

  MatrixXd id = MatrixXd::Identity(8, 8);
  std::vector<Vector> units{col(id, 1), col(id, 4), col(id, 6)};
  const auto p = gram_and_inverse(units);
  CHECK((p.gram - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((p.gram_inverse - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(p.max_offdiagonal() == 0.0);
  CHECK(p.condition == doctest::Approx(1.0));

  const auto q = gram_and_inverse(std::vector<Vector>{a, b});
  CHECK((q.gram * q.gram_inverse - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
  const MatrixXd bm = basis_matrix(q);
  CHECK((bm.transpose() * bm - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("two-dimensional bound dominates E1") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_hamiltonian(rng);
    const DenseOperator h(c.h);
    std::vector<Vector> members;
    for (int j = 0; j < 3; ++j) members.push_back(testutil::random_vector(12, rng));
    FsProblem p(h, gram_and_inverse(members));
    CHECK(two_dimensional_bound(p) >= c.levels(1) - 1e-12);
  }
}

TEST_CASE("empty family leaves the whole spectrum in the complement") {
  std::mt19937_64 rng(2);
  const auto c = random_hamiltonian(rng);
  const DenseOperator h(c.h);
  FsProblem p(h, gram_and_inverse(std::vector<Vector>{}));
  CHECK(p.rank() == 0);
  CHECK(p.complement().bottom == doctest::Approx(c.levels(0)).epsilon(1e-12));
  CHECK(p.evaluate(c.levels(0) - 1.0).nu.empty());
}

namespace {

ExperimentConfig soft_pair(double separation, int points = 101) {
  ExperimentConfig cfg;
  cfg.model.grid_extent = 20.0;
  cfg.model.grid_points = points;
  cfg.nuclei = NuclearConfiguration{{-0.5 * separation, 0.5 * separation}, {1, 1}, true};
  cfg.particles.electron_count = 2;
  return cfg;
}

}  // namespace

TEST_CASE("diatomic candidate family") {
  double prev = 1.0;
  for (double r : {6.0, 9.0, 12.0}) {
    const auto cfg = soft_pair(r);
    const auto d = detect_partition({cfg.nuclei}, cfg.tolerances.partition_distance);
    const auto t = build_threshold_table(cfg, cfg.nuclei, d.partition);
    const auto fam = build_candidate_family(t, cfg.model.grid_points);
    // Ground product plus one single excitation on each atom.
    REQUIRE(fam.size() == 3);
    CHECK(fam.members[0].kind == FamilyMember::Kind::ground);
    const auto s = StatisticsProjector::symmetric(fam.shape);
    for (const auto& m : fam.members) {
      CHECK(testutil::norm(m.vector) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(testutil::max_abs_diff(s.apply(m.vector), m.vector) <= 1e-14);
    }
    const auto p = gram_and_inverse(fam);
    CHECK(p.max_offdiagonal() < prev);
    prev = p.max_offdiagonal();
  }

  auto cfg = soft_pair(6.0);
  cfg.particles.statistics = Statistics::fermionic;
  const auto d = detect_partition({cfg.nuclei}, 5.0);
  const auto t = build_threshold_table(cfg, cfg.nuclei, d.partition);
  const auto fam = build_candidate_family(t, cfg.model.grid_points);
  const auto a = StatisticsProjector::antisymmetric(fam.shape);
  for (const auto& m : fam.members) CHECK(testutil::max_abs_diff(a.apply(m.vector), m.vector) <= 1e-14);
  CHECK(to_json(fam)["members"].size() == static_cast<std::size_t>(fam.size()));
}

TEST_CASE("fixed points reproduce the bosonic diatomic spectrum") {
  const auto cfg = soft_pair(6.0, 81);
  const auto d = detect_partition({cfg.nuclei}, 5.0);
  const auto t = build_threshold_table(cfg, cfg.nuclei, d.partition);
  const auto fam = build_candidate_family(t, cfg.model.grid_points);
  const auto h = assemble_full(cfg, cfg.nuclei);
  const auto s = StatisticsProjector::symmetric(fam.shape);
  SolveOptions so;
  so.count = 3;
  so.tolerance = 1e-10;
  const auto ref = lowest_eigenpairs(h, so, &s, Statistics::bosonic);

  const SeparablePreconditioner pre(h);
  FsProblem p(h, gram_and_inverse(fam), &s, &pre);
  const double g = *t.g;
  const auto f0 = p.solve_fixed_point(0, t.e_inf0 - 5.0 * g, 0.5 * (t.e_inf0 + t.e_inf1));
  CHECK(f0.lambda == doctest::Approx(ref.eigenvalues[0]).epsilon(1e-9));
  CHECK(f0.reconstruction_residual <= 1e-6);
  CHECK(std::abs(testutil::dot(f0.eigenvector, ref.eigenvectors[0])) == doctest::Approx(1.0).epsilon(1e-8));
  const auto f1 = p.solve_fixed_point(1, t.e_inf1 - 5.0 * g, t.e_inf1 + g);
  CHECK(f1.lambda == doctest::Approx(ref.eigenvalues[1]).epsilon(1e-9));

  const auto diag = fs_diagnostics(p, fam.energies(), f0.lambda);
  CHECK(diag.gram_offdiagonal == doctest::Approx(p.projection().max_offdiagonal()));
  CHECK(diag.schur_magnitude >= 0.0);
  CHECK(trace_csv({f0, f1}).rfind("index,lambda,g\n", 0) == 0);
}
