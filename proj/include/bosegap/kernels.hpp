#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops used by the grid operators and the iterative
// solvers. Every kernel has a portable scalar reference implementation and,
// when compiled in and supported by the host CPU, an AVX2/FMA variant. The
// variant is picked once at startup; BOSEGAP_ISA=scalar forces the reference.

namespace bosegap::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = x + beta * y
  void (*xpby)(const double* x, double beta, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // y = d .* x   (elementwise)
  void (*diag_mul)(const double* d, const double* x, double* y, std::size_t n);
  // y += c * (a + b)   (the symmetric off-diagonal stencil update)
  void (*add_pair)(double c, const double* a, const double* b, double* y, std::size_t n);
  // y += c .* d .* x   (weighted diagonal accumulate)
  void (*diag_fma)(double c, const double* d, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table();

// True when the AVX2 variant is compiled in and the CPU reports avx2 + fma.
bool avx2_available();

// Throws std::runtime_error when the AVX2 table is unavailable.
const KernelTable& avx2_table();

const KernelTable& table(Isa isa);

// The table every higher-level routine uses.
const KernelTable& active();

// Overrides the dispatch decision (tests and benchmarks).
void set_active(Isa isa);

std::string_view isa_name(Isa isa);

// Span conveniences over the active table.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void xpby(std::span<const double> x, double beta, std::span<double> y);
void scale(double alpha, std::span<double> x);

}  // namespace bosegap::kernels
