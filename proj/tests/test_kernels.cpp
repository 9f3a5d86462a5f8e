#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "bosegap/kernels.hpp"

using namespace bosegap;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("scalar kernels match hand-computed values") {
  const auto& k = kernels::scalar_table();
  std::vector<double> a{1, 2, 3}, b{4, 5, 6}, y{1, 1, 1};
  CHECK(k.dot(a.data(), b.data(), 3) == 32.0);
  k.axpy(2.0, a.data(), y.data(), 3);
  CHECK(y == std::vector<double>{3, 5, 7});
  k.xpby(a.data(), 0.5, y.data(), 3);
  CHECK(y == std::vector<double>{2.5, 4.5, 6.5});
  k.add_pair(2.0, a.data(), b.data(), y.data(), 3);
  CHECK(y == std::vector<double>{12.5, 18.5, 24.5});
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!kernels::avx2_available()) {
    MESSAGE("AVX2 not available on this host; equivalence test skipped");
    return;
  }
  const auto& s = kernels::scalar_table();
  const auto& v = kernels::avx2_table();
  std::mt19937_64 rng(7);
  for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 31, 33, 64, 65, 100, 1023, 4097}) {
    for (std::size_t shift : {0, 1, 3}) {
      auto a = random_vector(n + shift, rng), b = random_vector(n + shift, rng), d = random_vector(n + shift, rng);
      auto y0 = random_vector(n + shift, rng);
      auto y1 = y0;
      const double* pa = a.data() + shift;
      const double* pb = b.data() + shift;
      const double* pd = d.data() + shift;

      const double ds = s.dot(pa, pb, n), dv = v.dot(pa, pb, n);
      CHECK(std::abs(ds - dv) <= 1e-13 * (1.0 + static_cast<double>(n)));

      s.axpy(0.37, pa, y0.data() + shift, n);
      v.axpy(0.37, pa, y1.data() + shift, n);
      CHECK(max_diff(y0, y1) <= 1e-15);

      s.xpby(pa, -1.3, y0.data() + shift, n);
      v.xpby(pa, -1.3, y1.data() + shift, n);
      CHECK(max_diff(y0, y1) <= 1e-14);

      s.scale(0.9, y0.data() + shift, n);
      v.scale(0.9, y1.data() + shift, n);
      CHECK(max_diff(y0, y1) <= 1e-14);

      s.add_pair(-0.25, pa, pb, y0.data() + shift, n);
      v.add_pair(-0.25, pa, pb, y1.data() + shift, n);
      CHECK(max_diff(y0, y1) <= 1e-14);

      s.diag_fma(1.7, pd, pa, y0.data() + shift, n);
      v.diag_fma(1.7, pd, pa, y1.data() + shift, n);
      CHECK(max_diff(y0, y1) <= 1e-14);

      s.diag_mul(pd, pb, y0.data() + shift, n);
      v.diag_mul(pd, pb, y1.data() + shift, n);
      CHECK(max_diff(y0, y1) == 0.0);
    }
  }
}

TEST_CASE("span wrappers reject mismatched sizes") {
  std::vector<double> a(3), b(4);
  CHECK_THROWS_AS(kernels::dot(a, b), std::invalid_argument);
  CHECK_THROWS_AS(kernels::axpy(1.0, a, b), std::invalid_argument);
}

TEST_CASE("dispatch can be overridden") {
  const auto before = kernels::active().isa;
  kernels::set_active(kernels::Isa::scalar);
  CHECK(kernels::active().isa == kernels::Isa::scalar);
  std::vector<double> a{3, 4};
  CHECK(kernels::norm2(a) == doctest::Approx(5.0));
  kernels::set_active(before);
}
