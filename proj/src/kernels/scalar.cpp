#include "kernels_internal.hpp"

namespace bosegap::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void xpby_scalar(const double* x, double beta, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + beta * y[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void diag_mul_scalar(const double* d, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = d[i] * x[i];
}

void add_pair_scalar(double c, const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += c * (a[i] + b[i]);
}

void diag_fma_scalar(double c, const double* d, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += c * d[i] * x[i];
}

}  // namespace

const KernelTable kScalarTable{
    Isa::scalar,     "scalar",        &dot_scalar,      &axpy_scalar,    &xpby_scalar,
    &scale_scalar,   &diag_mul_scalar, &add_pair_scalar, &diag_fma_scalar,
};

}  // namespace bosegap::kernels::detail
