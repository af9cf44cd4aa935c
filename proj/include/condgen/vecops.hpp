#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace condgen {

inline void check_same_length(std::span<const double> a, std::span<const double> b,
                              const char* op) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(op) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
}

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  check_same_length(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

// x *= a
inline void scale(std::span<double> x, double a) {
  for (double& v : x) v *= a;
}

// acc += g
inline void accumulate_grad(std::span<double> acc, std::span<const double> g) {
  check_same_length(acc, g, "accumulate_grad");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

inline void fill_zero(std::span<double> x) {
  for (double& v : x) v = 0.0;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  check_same_length(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same_length(a, b, "squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace condgen
