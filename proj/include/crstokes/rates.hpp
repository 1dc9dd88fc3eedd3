#pragma once

#include <span>

namespace crstokes {

/// Least-squares fit of log(err) = slope * log(h) + c.
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Requires at least two points with positive h and err; invalid-argument otherwise.
LogLogFit fit_loglog(std::span<const double> h, std::span<const double> err);

}  // namespace crstokes
