#pragma once

#include <cmath>
#include <functional>

namespace oracle {

// Composite Simpson on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Tensor Simpson over a rectangle.
inline double simpson2(const std::function<double(double, double)>& f, double ax, double bx,
                       double ay, double by, int panels) {
  return simpson(
      [&](double x) { return simpson([&](double y) { return f(x, y); }, ay, by, panels); }, ax,
      bx, panels);
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double pi = std::acos(-1.0);
  return -0.5 * (x - mean) * (x - mean) / var - 0.5 * std::log(2.0 * pi * var);
}

inline double normal_pdf(double x, double mean, double var) {
  const double pi = std::acos(-1.0);
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * pi * var);
}

}  // namespace oracle
