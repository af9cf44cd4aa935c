#include "condgen/cond_cdf.hpp"

#include <stdexcept>
#include <string>

namespace condgen {

ConditionalCdf::ConditionalCdf(std::vector<double> responses, double bandwidth)
    : responses_(std::move(responses)), bandwidth_(bandwidth) {
  if (responses_.empty()) {
    throw std::invalid_argument("ConditionalCdf: responses must be nonempty");
  }
  if (!(bandwidth_ > 0.0)) {
    throw std::invalid_argument("ConditionalCdf: bandwidth must be positive");
  }
}

double ConditionalCdf::eval(double y) const {
  double s = 0.0;
  for (double yk : responses_) s += normal_cdf((y - yk) / bandwidth_);
  return s / static_cast<double>(responses_.size());
}

double ConditionalCdf::eval_derivative(double y) const {
  double s = 0.0;
  for (double yk : responses_) s += normal_pdf((y - yk) / bandwidth_);
  return s / (static_cast<double>(responses_.size()) * bandwidth_);
}

std::vector<double> bandwidth_grid_explicit(std::vector<double> candidates) {
  if (candidates.empty()) {
    throw std::invalid_argument("bandwidth grid: must be nonempty");
  }
  for (double h : candidates) {
    if (!(h > 0.0)) {
      throw std::invalid_argument("bandwidth grid: candidate " + std::to_string(h) +
                                  " is not positive");
    }
  }
  return candidates;
}

std::vector<double> bandwidth_grid_geometric(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > 0.0)) {
    throw std::invalid_argument("bandwidth grid: endpoints must be positive");
  }
  if (count < 1) throw std::invalid_argument("bandwidth grid: count must be >= 1");
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    grid[static_cast<std::size_t>(i)] = std::exp(log_lo + t * (log_hi - log_lo));
  }
  grid.front() = lo;  // endpoints exact
  grid.back() = hi;
  return grid;
}

std::vector<double> default_bandwidth_grid() {
  return {0.1, 0.2, 0.3, 0.5, 0.8};
}

}  // namespace condgen
