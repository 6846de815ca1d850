#pragma once

// Data-parallel kernels for particle-weight arithmetic.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant picked at runtime. Both variants perform the same floating-point
// operations in the same order: reductions accumulate into kLanes interleaved
// partial sums (element i feeds lane i % kLanes) which are combined as
// (l0 + l1) + (l2 + l3), and exp() is a shared range-reduced polynomial. The
// results are therefore bitwise identical across backends, so a run is
// reproducible at a given seed no matter which backend the host selects.

#include <cstddef>
#include <span>
#include <string_view>

namespace anneal::simd {

inline constexpr std::size_t kLanes = 4;

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b) noexcept;
bool backend_supported(Backend b) noexcept;

/// Backend used by the free functions below. Defaults to the widest supported
/// one; the environment variable ANNEAL_SIMD=scalar forces the reference path.
Backend active_backend() noexcept;

/// Throws UsageError if `b` is not supported on this host/build.
void set_backend(Backend b);

/// Scoped override, mainly for equivalence tests.
class BackendGuard {
 public:
  explicit BackendGuard(Backend b);
  ~BackendGuard();
  BackendGuard(const BackendGuard&) = delete;
  BackendGuard& operator=(const BackendGuard&) = delete;

 private:
  Backend saved_;
};

/// exp(x) with the kernel polynomial. Inputs below kExpLow return 0, above
/// kExpHigh return +inf, NaN propagates. Within ~2 ulp of std::exp.
double exp(double x) noexcept;
inline constexpr double kExpLow = -708.0;
inline constexpr double kExpHigh = 709.7;

/// max_i x_i; -inf for an empty span.
double max(std::span<const double> x) noexcept;

/// sum_i exp(scale * x_i - shift).
double sum_exp(std::span<const double> x, double scale, double shift) noexcept;

/// sum_i x_i
double sum(std::span<const double> x) noexcept;

/// sum_i x_i * y_i
double dot(std::span<const double> x, std::span<const double> y) noexcept;

/// y_i += a * x_i. When a == 0 y is left untouched (so -inf entries of x do
/// not turn into NaN).
void axpy(double a, std::span<const double> x, std::span<double> y) noexcept;

/// out_i = exp(x_i - shift)
void exp_shifted(std::span<const double> x, double shift, std::span<double> out) noexcept;

/// y_i = a + b * x_i
void affine(double a, double b, std::span<const double> x, std::span<double> y) noexcept;

// Backend-specific entry points. Used by the dispatcher and by the
// equivalence tests; regular callers should use the functions above.
struct KernelTable {
  double (*max)(const double*, std::size_t) noexcept;
  double (*sum_exp)(const double*, std::size_t, double, double) noexcept;
  double (*sum)(const double*, std::size_t) noexcept;
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
  void (*exp_shifted)(const double*, double, double*, std::size_t) noexcept;
  void (*affine)(double, double, const double*, double*, std::size_t) noexcept;
};

const KernelTable& table(Backend b);

}  // namespace anneal::simd
