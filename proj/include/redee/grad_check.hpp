#pragma once
// Central finite-difference gradient checker. The callable evaluates the
// scalar loss; with accumulate=true it must also backprop into the store.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "redee/param_store.hpp"

namespace redee {

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_err = 0.0;
    int coords_checked = 0;
  };
  std::vector<Entry> entries;
  double max_err = 0.0;

  bool within(double tol) const { return max_err <= tol; }
};

// err = |analytic - numeric| / max(1, |analytic|, |numeric|): relative for
// large gradients, absolute near zero.
inline double grad_error(double analytic, double numeric) {
  double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

inline GradCheckReport grad_check(ParamStore& ps, const std::function<double(bool)>& eval, double h = 1e-5,
                                  int max_coords_per_param = -1, std::uint64_t sample_seed = 0x5eed) {
  ps.zero_grads();
  eval(true);

  std::map<std::string, Tensor> analytic;
  for (const auto& name : ps.names()) analytic.emplace(name, ps.grad(name));

  GradCheckReport report;
  std::mt19937_64 rng(sample_seed);
  for (const auto& name : ps.names()) {
    Tensor& value = ps.value(name);
    const Tensor& a = analytic.at(name);
    std::vector<std::int64_t> coords;
    const std::int64_t n = value.numel();
    if (max_coords_per_param < 0 || n <= max_coords_per_param) {
      coords.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
    } else {
      std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
      for (int i = 0; i < max_coords_per_param; ++i) coords.push_back(pick(rng));
    }
    GradCheckReport::Entry entry{name, 0.0, static_cast<int>(coords.size())};
    for (std::int64_t c : coords) {
      double orig = value.data[static_cast<std::size_t>(c)];
      value.data[static_cast<std::size_t>(c)] = orig + h;
      double fp = eval(false);
      value.data[static_cast<std::size_t>(c)] = orig - h;
      double fm = eval(false);
      value.data[static_cast<std::size_t>(c)] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      entry.max_err = std::max(entry.max_err, grad_error(a.data[static_cast<std::size_t>(c)], numeric));
    }
    report.max_err = std::max(report.max_err, entry.max_err);
    report.entries.push_back(std::move(entry));
  }
  ps.zero_grads();
  return report;
}

}  // namespace redee
