#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "amcr/errors.hpp"
#include "amcr/tensor.hpp"

// Central-difference gradient verification. Runs in double only: float
// round-off drowns the O(eps^2) truncation term at eps ~ 1e-5.

namespace amcr {

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst_param;

  bool passed(double tol) const { return max_rel_error < tol; }
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates per parameter tensor; every tensor additionally gets its
  // largest-|analytic| coordinate checked even if sampling misses it.
  std::size_t max_coords = 24;
};

// loss_fn must recompute the full loss from the current parameter values and
// be deterministic across calls (freeze any stochastic state inside it).
// Analytic gradients must already be in each parameter's grad tensor.
inline GradCheckReport gradient_check(std::vector<ParamTensorT<double>*> params,
                                      const std::function<double()>& loss_fn,
                                      const GradCheckOptions& opt = {}) {
  if (!(opt.epsilon > 0)) throw ValidationError("gradient check epsilon must be > 0");
  GradCheckReport report;
  for (auto* p : params) {
    GradCheckEntry e;
    e.name = p->name;
    const std::size_t n = p->value.size();
    if (n == 0) {
      report.entries.push_back(e);
      continue;
    }

    std::size_t largest = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(p->grad.data[i]) > std::abs(p->grad.data[largest])) largest = i;

    std::vector<std::size_t> coords;
    const std::size_t stride = n <= opt.max_coords ? 1 : n / opt.max_coords;
    for (std::size_t i = 0; i < n && coords.size() < opt.max_coords; i += stride)
      coords.push_back(i);
    bool has_largest = false;
    for (std::size_t c : coords)
      if (c == largest) has_largest = true;
    if (!has_largest) coords.push_back(largest);

    for (std::size_t c : coords) {
      const double saved = p->value.data[c];
      p->value.data[c] = saved + opt.epsilon;
      const double up = loss_fn();
      p->value.data[c] = saved - opt.epsilon;
      const double down = loss_fn();
      p->value.data[c] = saved;
      const double numeric = (up - down) / (2.0 * opt.epsilon);
      const double analytic = p->grad.data[c];
      const double rel = std::abs(analytic - numeric) /
                         std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
      ++e.coords_checked;
      if (rel > e.max_rel_error) {
        e.max_rel_error = rel;
        e.worst_coord = c;
        e.worst_analytic = analytic;
        e.worst_numeric = numeric;
      }
    }
    if (e.max_rel_error > report.max_rel_error) {
      report.max_rel_error = e.max_rel_error;
      report.worst_param = e.name;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace amcr
