#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "orderplan/errors.hpp"
#include "orderplan/tensor.hpp"

namespace orderplan {

enum class Stencil { central3, central5 };

struct GradCheckOptions {
  double step = 1e-5;
  // central5: (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h, O(h^4) truncation.
  Stencil stencil = Stencil::central3;
  double tolerance = 1e-6;
  // 0 checks every entry; otherwise a seeded random subsample per parameter.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 17;
  // Denominator floor for the relative error: entries whose true gradient
  // is ~0 are compared on an absolute scale.
  double abs_floor = 1e-7;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  double max_abs_gradient = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = false;
  std::vector<GradCheckEntry> per_param;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Compares tape gradients of the scalar loss built by `f` with central
// differences, (f(x+h) - f(x-h)) / 2h by default. Parameter gradients are
// overwritten.
inline GradCheckReport grad_check(const std::function<Var(Tape&)>& f, std::span<Parameter* const> params,
                                  const GradCheckOptions& opt = {}) {
  if (opt.step <= 0) throw InvalidInput("grad_check: step must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    if (!std::isfinite(loss.value().item())) throw NumericalError("grad_check: loss is not finite at the base point");
    tape.backward(loss);
  }
  auto eval = [&](const std::string& name) {
    Tape tape;
    const double v = f(tape).value().item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: loss is not finite while perturbing '" + name + "'");
    return v;
  };

  GradCheckReport report;
  std::mt19937_64 rng(opt.seed);
  for (Parameter* p : params) {
    GradCheckEntry entry;
    entry.name = p->name;
    std::vector<std::size_t> idx(p->value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opt.max_entries_per_param != 0 && idx.size() > opt.max_entries_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.max_entries_per_param);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      auto at = [&](double offset) {
        p->value[i] = saved + offset;
        const double v = eval(p->name);
        p->value[i] = saved;
        return v;
      };
      const double h = opt.step;
      const double numeric = opt.stencil == Stencil::central3
                                 ? (at(h) - at(-h)) / (2.0 * h)
                                 : (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
      const double analytic = p->gradient[i];
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic, numeric, opt.abs_floor));
      entry.max_abs_gradient = std::max(entry.max_abs_gradient, std::abs(analytic));
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.per_param.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < opt.tolerance;
  return report;
}

}  // namespace orderplan
