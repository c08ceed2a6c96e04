#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace chainlab {

struct LineFit {
  double slope = 0.0, intercept = 0.0;
  double slope_stderr = 0.0, intercept_stderr = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = a + b x with textbook standard errors.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw std::invalid_argument("fit_line: size mismatch");
  if (n < 2) throw std::invalid_argument("fit_line: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    const double s2 = rss / static_cast<double>(n - 2);
    f.slope_stderr = std::sqrt(s2 / sxx);
    f.intercept_stderr = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

/// Weighted least squares with per-point standard deviations.
inline LineFit fit_line_weighted(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& sd) {
  const std::size_t n = x.size();
  if (n != y.size() || n != sd.size()) throw std::invalid_argument("fit_line_weighted: size mismatch");
  if (n < 2) throw std::invalid_argument("fit_line_weighted: need at least two points");
  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / (sd[i] * sd[i]);
    sw += w;
    swx += w * x[i];
    swy += w * y[i];
  }
  const double mx = swx / sw, my = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / (sd[i] * sd[i]);
    sxx += w * (x[i] - mx) * (x[i] - mx);
    sxy += w * (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.slope_stderr = std::sqrt(1.0 / sxx);
  f.intercept_stderr = std::sqrt(1.0 / sw + mx * mx / sxx);
  return f;
}

}  // namespace chainlab
