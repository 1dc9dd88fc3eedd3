#include "crstokes/rates.hpp"

#include <cmath>
#include <stdexcept>

namespace crstokes {

LogLogFit fit_loglog(std::span<const double> h, std::span<const double> err) {
  if (h.size() != err.size()) throw std::invalid_argument("fit_loglog: size mismatch");
  if (h.size() < 2) throw std::invalid_argument("fit_loglog: need at least two points");
  const double n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0) || !(err[i] > 0.0))
      throw std::invalid_argument("fit_loglog: h and err must be positive");
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  LogLogFit fit;
  fit.points = static_cast<int>(h.size());
  const double det = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ymean = sy / n;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    const double r = y - (fit.slope * x + fit.intercept);
    ss_res += r * r;
    ss_tot += (y - ymean) * (y - ymean);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace crstokes
