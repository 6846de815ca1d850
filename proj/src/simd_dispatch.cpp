#include <atomic>
#include <cstdlib>
#include <string>

#include "anneal/errors.hpp"
#include "simd_common.hpp"

namespace anneal::simd {

namespace detail {
extern const KernelTable kScalarTable;
#ifdef ANNEAL_HAVE_AVX2
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

namespace {

Backend detect() noexcept {
  if (const char* env = std::getenv("ANNEAL_SIMD"); env && std::string(env) == "scalar") {
    return Backend::scalar;
  }
  return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> t{&table(detect())};
  return t;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_supported(Backend b) noexcept {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(ANNEAL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Backend b) {
  if (!backend_supported(b)) {
    throw UsageError("simd backend '" + std::string(backend_name(b)) + "' is not available");
  }
#ifdef ANNEAL_HAVE_AVX2
  if (b == Backend::avx2) return detail::kAvx2Table;
#endif
  return detail::kScalarTable;
}

Backend active_backend() noexcept {
  return &active() == &detail::kScalarTable ? Backend::scalar : Backend::avx2;
}

void set_backend(Backend b) { current().store(&table(b), std::memory_order_relaxed); }

BackendGuard::BackendGuard(Backend b) : saved_(active_backend()) { set_backend(b); }
BackendGuard::~BackendGuard() { set_backend(saved_); }

double exp(double x) noexcept { return detail::exp_ref(x); }

double max(std::span<const double> x) noexcept { return active().max(x.data(), x.size()); }

double sum_exp(std::span<const double> x, double scale, double shift) noexcept {
  return active().sum_exp(x.data(), x.size(), scale, shift);
}

double sum(std::span<const double> x) noexcept { return active().sum(x.data(), x.size()); }

double dot(std::span<const double> x, std::span<const double> y) noexcept {
  return active().dot(x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  active().axpy(a, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

void exp_shifted(std::span<const double> x, double shift, std::span<double> out) noexcept {
  active().exp_shifted(x.data(), shift, out.data(), x.size() < out.size() ? x.size() : out.size());
}

void affine(double a, double b, std::span<const double> x, std::span<double> y) noexcept {
  active().affine(a, b, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

}  // namespace anneal::simd
