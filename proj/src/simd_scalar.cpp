#include <limits>

#include "simd_common.hpp"

namespace anneal::simd {
namespace {

using detail::combine;
using detail::exp_ref;

double max_scalar(const double* x, std::size_t n) noexcept {
  double lanes[kLanes];
  for (auto& l : lanes) l = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double& l = lanes[i % kLanes];
    if (x[i] > l) l = x[i];
  }
  const double a = lanes[1] > lanes[0] ? lanes[1] : lanes[0];
  const double b = lanes[3] > lanes[2] ? lanes[3] : lanes[2];
  return b > a ? b : a;
}

double sum_exp_scalar(const double* x, std::size_t n, double scale, double shift) noexcept {
  double lanes[kLanes] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lanes[i % kLanes] += exp_ref(scale * x[i] - shift);
  return combine(lanes);
}

double sum_scalar(const double* x, std::size_t n) noexcept {
  double lanes[kLanes] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lanes[i % kLanes] += x[i];
  return combine(lanes);
}

double dot_scalar(const double* x, const double* y, std::size_t n) noexcept {
  double lanes[kLanes] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lanes[i % kLanes] += x[i] * y[i];
  return combine(lanes);
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) noexcept {
  if (a == 0.0) return;
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void exp_shifted_scalar(const double* x, double shift, double* out, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) out[i] = exp_ref(x[i] - shift);
}

void affine_scalar(double a, double b, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] = a + b * x[i];
}

}  // namespace

namespace detail {
extern const KernelTable kScalarTable;
const KernelTable kScalarTable{max_scalar,  sum_exp_scalar,     sum_scalar,   dot_scalar,
                               axpy_scalar, exp_shifted_scalar, affine_scalar};
}  // namespace detail

}  // namespace anneal::simd
