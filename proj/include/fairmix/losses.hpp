#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/numerics.hpp"

namespace fairmix {

enum class FidelityKind { cross_entropy, cross_entropy_swapped, squared_error, integrated_survival_se };

inline constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// -f_comb log f_perf - (1 - f_comb) log(1 - f_perf). The combined prediction
/// sits in the label slot, so the loss is linear in it.
inline double ce_fidelity(double f_comb, double f_perf) {
  const double q = clamp_prob(f_perf);
  return -f_comb * std::log(q) - (1.0 - f_comb) * std::log1p(-q);
}

/// Cross-entropy with the arguments exchanged; minimized at f_comb = f_perf.
inline double ce_swapped_fidelity(double f_comb, double f_perf) {
  const double q = clamp_prob(f_comb);
  return -f_perf * std::log(q) - (1.0 - f_perf) * std::log1p(-q);
}

inline double se_fidelity(double f_comb, double f_perf) {
  const double d = f_comb - f_perf;
  return d * d;
}

inline double score_fidelity(FidelityKind kind, double f_comb, double f_perf) {
  switch (kind) {
    case FidelityKind::cross_entropy:
      return ce_fidelity(f_comb, f_perf);
    case FidelityKind::cross_entropy_swapped:
      return ce_swapped_fidelity(f_comb, f_perf);
    case FidelityKind::squared_error:
      return se_fidelity(f_comb, f_perf);
    case FidelityKind::integrated_survival_se:
      break;
  }
  throw ValidationError("fidelity kind does not apply to score predictions");
}

/// Trapezoid of the squared curve difference over the grid.
inline double survival_fidelity(std::span<const double> s_comb, std::span<const double> s_perf,
                                const TimeGrid& grid) {
  if (s_comb.size() != grid.size() || s_perf.size() != grid.size()) {
    throw ValidationError("survival rows do not match the time grid");
  }
  double total = 0.0;
  double prev = (s_comb[0] - s_perf[0]) * (s_comb[0] - s_perf[0]);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double d = s_comb[j] - s_perf[j];
    const double cur = d * d;
    total += 0.5 * (grid.times[j] - grid.times[j - 1]) * (prev + cur);
    prev = cur;
  }
  return total;
}

}  // namespace fairmix
