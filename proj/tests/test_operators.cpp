#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "bosegap/error.hpp"
#include "bosegap/operators.hpp"
#include "bosegap/spectra.hpp"
#include "bosegap/symmetry.hpp"
#include "test_helpers.hpp"

using namespace bosegap;
using testutil::random_vector;

TEST_CASE("soft_coulomb values") {
  CHECK(soft_coulomb(1, 1, 1, 0) == 1.0);
  CHECK(soft_coulomb(-1, 1, 1, 0) == -1.0);
  CHECK(soft_coulomb(1, 1, 1, 100) == doctest::Approx(0.0099995000374968).epsilon(1e-13));
  CHECK(soft_coulomb(2, 3, 0.5, -1.5) == soft_coulomb(2, 3, 0.5, 1.5));
  for (double r : {0.0, 0.3, 7.0}) CHECK(std::abs(soft_coulomb(2, -3, 0.5, r)) <= 6.0 / 0.5);
}

TEST_CASE("matrix-free action equals the explicit stencil matrix") {
  for (int order : {2, 4}) {
    for (int electrons : {1, 2, 3}) {
      auto m = testutil::small_model(5.0, electrons == 3 ? 11 : 17);
      m.stencil_order = order;
      NuclearConfiguration nuc{{-1.0, 1.5}, {1, 2}, true};
      const auto op = assemble_molecule(m, nuc, electrons);
      const Eigen::MatrixXd a = op.dense();
      const Eigen::MatrixXd b = to_dense(op);
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("every assembled operator is symmetric on random pairs") {
  std::mt19937_64 rng(11);
  auto m = testutil::small_model(6.0, 21);
  NuclearConfiguration nuc{{-2.0, 0.5, 3.0}, {1, 1, 2}, true};
  const auto part = make_partition(nuc, {{0, 1}, {2}});
  const auto decomp = decomposition_from_occupation(part, {1, 1});
  std::vector<ManyBodyOperator> ops;
  ops.push_back(assemble_molecule(m, nuc, 2));
  ops.push_back(assemble_decomposed(m, nuc, decomp));
  ops.push_back(assemble_interaction(m, nuc, decomp));
  ops.push_back(assemble_cluster(m, nuc, decomp, 0));
  for (const auto& op : ops) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      auto u = random_vector(op.dimension(), rng), v = random_vector(op.dimension(), rng);
      const double lhs = testutil::dot(u, op(v)), rhs = testutil::dot(op(u), v);
      worst = std::max(worst, std::abs(lhs - rhs) / (testutil::norm(u) * testutil::norm(v)));
    }
    CHECK(worst <= 1e-12);
    for (double d : op.potential()) CHECK(std::isfinite(d));
  }
}

TEST_CASE("free particle lowest level matches the discrete and continuum box values") {
  ModelParams m;
  m.grid_extent = 10.0;
  m.grid_points = 401;
  NuclearConfiguration nuc{{0.0}, {1}, false};
  TermSet free;
  free.electron_nuclear = false;
  const auto op = assemble_molecule(m, nuc, 1, free);
  SolveOptions o;
  o.count = 2;
  const auto rep = lowest_eigenpairs(op, o);
  const double h = m.spacing(), c = m.kinetic_coefficient();
  const int n = m.grid_points;
  // Zero ghosts at -1 and n: discrete sine modes with n + 1 intervals.
  const double discrete0 = 2.0 * c / (h * h) * (1.0 - std::cos(std::numbers::pi / (n + 1)));
  const double discrete1 = 2.0 * c / (h * h) * (1.0 - std::cos(2.0 * std::numbers::pi / (n + 1)));
  CHECK(rep.eigenvalues[0] == doctest::Approx(discrete0).epsilon(1e-10));
  CHECK(rep.eigenvalues[1] == doctest::Approx(discrete1).epsilon(1e-10));
  const double continuum = std::numbers::pi * std::numbers::pi / (8.0 * m.grid_extent * m.grid_extent);
  CHECK(std::abs(rep.eigenvalues[0] - continuum) / continuum < 0.01);
  CHECK(rep.eigenvalues[1] / rep.eigenvalues[0] == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("fourth-order stencil converges faster than second order on a bound state") {
  // The state is negligible at the walls, so only the interior stencil error shows.
  auto level = [](int order, int n) {
    ModelParams m;
    m.grid_extent = 20.0;
    m.grid_points = n;
    m.stencil_order = order;
    NuclearConfiguration nuc{{0.0}, {1}, false};
    const auto op = assemble_molecule(m, nuc, 1, TermSet{});
    SolveOptions o;
    o.count = 1;
    o.tolerance = 1e-12;
    return lowest_eigenpairs(op, o).eigenvalues[0];
  };
  const double ref = level(4, 1601);
  const double r2 = (level(2, 101) - ref) / (level(2, 201) - ref);
  const double r4 = (level(4, 101) - ref) / (level(4, 201) - ref);
  CHECK(r2 == doctest::Approx(4.0).epsilon(0.1));
  CHECK(r4 > 10.0);
}

TEST_CASE("nuclear repulsion shifts the whole spectrum by V_n") {
  auto m = testutil::small_model(8.0, 41);
  NuclearConfiguration with{{-1.5, 1.5}, {1, 1}, true};
  NuclearConfiguration without = with;
  without.include_nuclear_repulsion = false;
  SolveOptions o;
  o.count = 4;
  auto proj = projector_for(Statistics::bosonic, {41, 2});
  const auto a = lowest_eigenpairs(assemble_molecule(m, with, 2), o, proj.get());
  const auto b = lowest_eigenpairs(assemble_molecule(m, without, 2), o, proj.get());
  const double vn = with.nuclear_repulsion(m);
  CHECK(vn == doctest::Approx(1.0 / std::sqrt(9.0 + 1.0)));
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a.eigenvalues[i] - b.eigenvalues[i] - vn) <= 1e-10);
  CHECK(std::abs(gap(a, 1e-9).gap - gap(b, 1e-9).gap) <= 1e-12);
}

TEST_CASE("H_E + I_E reproduces the full operator for every decomposition") {
  std::mt19937_64 rng(5);
  auto m = testutil::small_model(8.0, 25);
  NuclearConfiguration nuc{{-4.0, -3.0, 4.0}, {1, 1, 1}, true};
  const auto full = assemble_molecule(m, nuc, 2);
  const std::vector<std::vector<std::vector<int>>> partitions{
      {{0}, {1}, {2}}, {{0, 1}, {2}}, {{0, 2}, {1}}, {{0}, {1, 2}}};
  int checked = 0;
  for (const auto& blocks : partitions) {
    const auto part = make_partition(nuc, blocks);
    const int k = part.size();
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        ClusterDecomposition d{part, {a, b}};
        const auto he = assemble_decomposed(m, nuc, d);
        const auto ie = assemble_interaction(m, nuc, d);
        for (int t = 0; t < 20; ++t) {
          auto v = random_vector(full.dimension(), rng);
          auto x = he(v), y = ie(v), z = full(v);
          for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
          CHECK(testutil::max_abs_diff(x, z) <= 1e-12 * testutil::norm(v));
        }
        ++checked;
      }
  }
  CHECK(checked == 9 + 4 + 4 + 4);
}

TEST_CASE("cluster operators") {
  auto m = testutil::small_model(10.0, 101);
  NuclearConfiguration nuc{{-4.0, 4.0}, {1, 1}, false};
  const auto part = make_partition(nuc, {{0}, {1}});
  SUBCASE("single atom cluster equals a hydrogen operator at that nucleus") {
    const auto d = decomposition_from_occupation(part, {1, 1});
    const auto c = assemble_cluster(m, nuc, d, 1);
    NuclearConfiguration atom{{4.0}, {1}, false};
    const auto h = assemble_molecule(m, atom, 1);
    CHECK(testutil::max_abs_diff(c.potential(), h.potential()) == 0.0);
    const auto centered = assemble_cluster(m, nuc, d, 1, true);
    const auto h0 = assemble_molecule(m, NuclearConfiguration{{0.0}, {1}, false}, 1);
    CHECK(testutil::max_abs_diff(centered.potential(), h0.potential()) == 0.0);
  }
  SUBCASE("empty cluster is the one-dimensional zero operator") {
    const auto d = decomposition_from_occupation(part, {2, 0});
    const auto c = assemble_cluster(m, nuc, d, 1);
    CHECK(c.dimension() == 1);
    SolveOptions o;
    o.count = 1;
    CHECK(lowest_eigenpairs(c, o).eigenvalues[0] == 0.0);
  }
  SUBCASE("interaction needs two clusters") {
    const auto one = make_partition(nuc, {{0, 1}});
    const auto d = decomposition_from_occupation(one, {2});
    CHECK_THROWS_AS(assemble_interaction(m, nuc, d), ValidationError);
  }
}

TEST_CASE("interaction without electron-nuclear terms vanishes when one cluster is empty") {
  auto m = testutil::small_model(8.0, 21);
  NuclearConfiguration nuc{{-3.0, 3.0}, {1, 1}, false};
  const auto part = make_partition(nuc, {{0}, {1}});
  const auto d = decomposition_from_occupation(part, {2, 0});
  TermSet t;
  t.electron_nuclear = false;
  const auto ie = assemble_interaction(m, nuc, d, t);
  for (double v : ie.potential()) CHECK(v == 0.0);
}

TEST_CASE("interaction decays like 1/r on the localized box") {
  auto sup_norm = [](double r) {
    ModelParams m;
    m.grid_extent = 30.0;
    m.grid_points = 121;
    NuclearConfiguration nuc{{-r / 2, r / 2}, {1, 1}, true};
    const auto part = make_partition(nuc, {{0}, {1}});
    const auto d = decomposition_from_occupation(part, {1, 1});
    const auto ie = assemble_interaction(m, nuc, d);
    const Grid g = Grid::from(m);
    const double box = 1.0;
    double s = 0.0;
    for (int i = 0; i < g.points; ++i)
      for (int j = 0; j < g.points; ++j) {
        if (std::abs(g.coordinate(i) + r / 2) > box || std::abs(g.coordinate(j) - r / 2) > box) continue;
        s = std::max(s, std::abs(ie.potential()[static_cast<std::size_t>(i) * g.points + j]));
      }
    return s;
  };
  const double s10 = sup_norm(10.0), s20 = sup_norm(20.0), s40 = sup_norm(40.0);
  // Fit c in sup <= c / r on the three points; doubling r at least halves it.
  const double c = std::max({s10 * 10.0, s20 * 20.0, s40 * 40.0});
  CHECK(c < 1.0);
  CHECK(s20 <= 0.55 * s10);
  CHECK(s40 <= 0.55 * s20);
}

TEST_CASE("electron permutations commute with the full operator") {
  std::mt19937_64 rng(3);
  auto m = testutil::small_model(6.0, 13);
  NuclearConfiguration nuc{{-1.0, 2.0}, {2, 1}, false};
  const auto op = assemble_molecule(m, nuc, 3);
  const TensorShape shape{13, 3};
  for (const auto& pi : all_permutations(3)) {
    auto v = random_vector(op.dimension(), rng);
    const auto lhs = permute(op(v), pi, shape);
    const auto rhs = op(permute(v, pi, shape));
    CHECK(testutil::max_abs_diff(lhs, rhs) <= 1e-12 * testutil::norm(v));
  }
}

TEST_CASE("assembly guards") {
  ExperimentConfig cfg;
  cfg.nuclei = {{0.0}, {1}, false};
  cfg.particles.electron_count = 3;
  cfg.model.grid_points = 201;
  cfg.solver.max_dimension = 1000;
  CHECK_THROWS_AS(assemble_full(cfg, cfg.nuclei), ValidationError);
  NuclearConfiguration empty;
  CHECK_THROWS_AS(assemble_molecule(cfg.model, empty, 1), ValidationError);
}

TEST_CASE("potential dump writes one row per grid point") {
  auto m = testutil::small_model(4.0, 17);
  const auto op = assemble_molecule(m, NuclearConfiguration{{0.0}, {1}, false}, 1);
  const std::string path = "potential_dump_test.csv";
  op.write_potential_csv(path);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 18);
  std::remove(path.c_str());
}
