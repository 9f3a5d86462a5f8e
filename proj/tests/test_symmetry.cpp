#include <doctest.h>

#include <cmath>

#include "bosegap/error.hpp"
#include "bosegap/operators.hpp"
#include "bosegap/spectra.hpp"
#include "bosegap/symmetry.hpp"
#include "test_helpers.hpp"

using namespace bosegap;
using testutil::random_vector;

namespace {

Vector basis_product(int n, std::vector<int> digits) {
  std::size_t idx = 0;
  for (int d : digits) idx = idx * n + d;
  std::size_t dim = 1;
  for (std::size_t p = 0; p < digits.size(); ++p) dim *= n;
  Vector v(dim, 0.0);
  v[idx] = 1.0;
  return v;
}

// Reference action written directly from the definition
// (T_pi v)(x_1..x_N) = v(x_{pi^-1(1)}, .., x_{pi^-1(N)}).
Vector permute_reference(const Vector& v, const Permutation& pi, int n, int N) {
  Vector out(v.size());
  const Permutation inv = pi.inverse();
  std::vector<int> x(N);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t r = i;
    for (int p = N - 1; p >= 0; --p) {
      x[p] = static_cast<int>(r % n);
      r /= n;
    }
    std::size_t src = 0;
    for (int q = 0; q < N; ++q) src = src * n + x[inv(q)];
    out[i] = v[src];
  }
  return out;
}

}  // namespace

TEST_CASE("permutation basics") {
  const auto p = Permutation({1, 2, 0});
  CHECK(p.sign() == 1);
  CHECK(Permutation::transposition(3, 0, 2).sign() == -1);
  CHECK(compose(p, p.inverse()) == Permutation::identity(3));
  CHECK(all_permutations(3).size() == 6);
  CHECK_THROWS(Permutation({0, 0, 1}));
}

TEST_CASE("permute examples") {
  const int n = 5;
  const TensorShape s2{n, 2};
  const auto v = basis_product(n, {1, 3});
  CHECK(permute(v, Permutation::identity(2), s2) == v);
  CHECK(permute(v, Permutation::transposition(2, 0, 1), s2) == basis_product(n, {3, 1}));
  CHECK_THROWS_AS(permute(Vector(7), Permutation::identity(2), s2), std::invalid_argument);
}

TEST_CASE("permute agrees with the index-level definition and composes") {
  std::mt19937_64 rng(2);
  const int n = 6;
  for (int N : {2, 3}) {
    const TensorShape s{n, N};
    const auto perms = all_permutations(N);
    for (const auto& pi : perms) {
      const auto v = random_vector(s.size(), rng);
      const auto out = permute(v, pi, s);
      CHECK(testutil::max_abs_diff(out, permute_reference(v, pi, n, N)) == 0.0);
      CHECK(testutil::norm(out) == doctest::Approx(testutil::norm(v)).epsilon(1e-14));
      for (const auto& sigma : perms) {
        const auto lhs = permute(permute(v, sigma, s), pi, s);
        const auto rhs = permute(v, compose(pi, sigma), s);
        CHECK(testutil::max_abs_diff(lhs, rhs) == 0.0);
      }
    }
  }
}

TEST_CASE("symmetrizer examples") {
  const int n = 4;
  const TensorShape s{n, 2};
  const auto S = StatisticsProjector::symmetric(s);
  const auto e12 = basis_product(n, {1, 2}), e21 = basis_product(n, {2, 1});
  auto expected = e12;
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] = 0.5 * (e12[i] + e21[i]);
  CHECK(project_statistics(e12, S) == expected);
  auto anti = e12;
  for (std::size_t i = 0; i < anti.size(); ++i) anti[i] = e12[i] - e21[i];
  CHECK(testutil::norm(project_statistics(anti, S)) == 0.0);
  const auto ns = normalized_symmetrize(e12, s);
  CHECK(ns[1 * n + 2] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(ns[2 * n + 1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(normalized_symmetrize(anti, s), SolverError);
  const auto sym_unit = normalized_symmetrize(ns, s);
  CHECK(testutil::max_abs_diff(sym_unit, ns) <= 1e-15);
}

TEST_CASE("projector algebra on random vectors") {
  std::mt19937_64 rng(9);
  const int n = 7;
  for (int N : {2, 3}) {
    const TensorShape s{n, N};
    const auto S = StatisticsProjector::symmetric(s);
    const auto A = StatisticsProjector::antisymmetric(s);
    for (int t = 0; t < 20; ++t) {
      const auto v = random_vector(s.size(), rng);
      const double nv = testutil::norm(v);
      const auto sv = S.apply(v), av = A.apply(v);
      CHECK(testutil::max_abs_diff(S.apply(sv), sv) <= 1e-12 * nv);
      CHECK(testutil::max_abs_diff(A.apply(av), av) <= 1e-12 * nv);
      CHECK(testutil::norm(S.apply(av)) <= 1e-12 * nv);
      CHECK(testutil::norm(A.apply(sv)) <= 1e-12 * nv);
    }
  }
}

TEST_CASE("cluster symmetrizers") {
  std::mt19937_64 rng(4);
  const int n = 5;
  const TensorShape s{n, 3};
  const std::vector<std::vector<int>> groups{{0, 1}, {2}};
  const auto SE = StatisticsProjector::cluster(s, groups);
  const auto S1 = StatisticsProjector::cluster_factor(s, groups[0]);
  const auto S2 = StatisticsProjector::cluster_factor(s, groups[1]);
  CHECK(SE.elements().size() == 2);
  for (int t = 0; t < 10; ++t) {
    const auto v = random_vector(s.size(), rng);
    CHECK(testutil::max_abs_diff(SE.apply(v), S1.apply(S2.apply(v))) <= 1e-12 * testutil::norm(v));
    CHECK(testutil::max_abs_diff(SE.apply(SE.apply(v)), SE.apply(v)) <= 1e-12 * testutil::norm(v));
  }
  // A product symmetric in cluster 0's electrons is left unchanged.
  const auto f = random_vector(n, rng), g = random_vector(n, rng);
  Vector prod(s.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) prod[(i * n + j) * n + k] = f[i] * f[j] * g[k];
  CHECK(testutil::max_abs_diff(S1.apply(prod), prod) <= 1e-14);
}

TEST_CASE("symmetrizer commutes with the Hamiltonian; bosonic and full ground states agree") {
  std::mt19937_64 rng(8);
  auto m = testutil::small_model(8.0, 41);
  NuclearConfiguration nuc{{-1.0, 1.0}, {1, 1}, true};
  const auto op = assemble_molecule(m, nuc, 2);
  const TensorShape s{41, 2};
  const auto S = StatisticsProjector::symmetric(s);
  for (int t = 0; t < 20; ++t) {
    const auto v = random_vector(op.dimension(), rng);
    CHECK(testutil::max_abs_diff(S.apply(op(v)), op(S.apply(v))) <= 1e-10 * testutil::norm(v));
  }
  SolveOptions o;
  o.count = 2;
  const auto full = lowest_eigenpairs(op, o);
  const auto bos = lowest_eigenpairs(op, o, &S, Statistics::bosonic);
  CHECK(std::abs(full.eigenvalues[0] - bos.eigenvalues[0]) <= 1e-9 * std::abs(full.eigenvalues[0]));
  const auto& psi = full.eigenvectors[0];
  CHECK(testutil::max_abs_diff(S.apply(psi), psi) <= 1e-8);
  double lowest = 0.0;
  for (double x : psi) lowest = std::min(lowest, x);
  CHECK(lowest >= -1e-10);
}

TEST_CASE("projector_for") {
  CHECK(projector_for(Statistics::distinguishable, {5, 2}) == nullptr);
  CHECK(projector_for(Statistics::bosonic, {5, 1}) == nullptr);
  CHECK(projector_for(Statistics::bosonic, {5, 2})->kind() == ProjectorKind::symmetric);
  CHECK(projector_for(Statistics::fermionic, {5, 2})->kind() == ProjectorKind::antisymmetric);
}
