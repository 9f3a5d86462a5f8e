#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace bosegap::kernels {
namespace {

bool cpu_supports_avx2() {
#if defined(BOSEGAP_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__)) && defined(__GNUC__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* forced = std::getenv("BOSEGAP_ISA");
  if (forced != nullptr && std::string(forced) == "scalar") return &detail::kScalarTable;
  if (avx2_available()) return &avx2_table();
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& scalar_table() { return detail::kScalarTable; }

bool avx2_available() {
  static const bool ok = cpu_supports_avx2();
  return ok;
}

const KernelTable& avx2_table() {
#if defined(BOSEGAP_HAVE_AVX2)
  if (avx2_available()) return detail::kAvx2Table;
#endif
  throw std::runtime_error("AVX2 kernels are not available on this build or CPU");
}

const KernelTable& table(Isa isa) {
  return isa == Isa::avx2 ? avx2_table() : scalar_table();
}

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

void set_active(Isa isa) { active_slot().store(&table(isa), std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void xpby(std::span<const double> x, double beta, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("xpby: size mismatch");
  active().xpby(x.data(), beta, y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

}  // namespace bosegap::kernels
