#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/numerics.hpp"

namespace fairmix {

enum class FairnessKind { statistical_parity, statistical_parity_auc, group_fairness_survival };

namespace detail {

inline void check_partition(const GroupAssignment& g, std::size_t n) {
  if (g.size() != n) {
    throw ValidationError("group assignment has " + std::to_string(g.size()) + " rows, predictions " +
                          std::to_string(n));
  }
  const auto sizes = g.group_sizes();
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0) throw ValidationError("group '" + g.labels[k] + "' is empty");
  }
  if (sizes.empty()) throw ValidationError("group assignment has no groups");
}

// Values of each group, ascending.
inline std::vector<std::vector<double>> sorted_by_group(std::span<const double> preds,
                                                        const GroupAssignment& g) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(g.count()));
  for (std::size_t i = 0; i < preds.size(); ++i) out[static_cast<std::size_t>(g.ids[i])].push_back(preds[i]);
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

// Fraction of ascending `v` that is >= q.
inline double exceedance(const std::vector<double>& v, double q) {
  const auto below = std::lower_bound(v.begin(), v.end(), q) - v.begin();
  return static_cast<double>(static_cast<std::ptrdiff_t>(v.size()) - below) /
         static_cast<double>(v.size());
}

}  // namespace detail

/// Largest gap between group mean predictions (max over ordered pairs).
inline double sp_penalty(std::span<const double> preds, const GroupAssignment& groups) {
  double worst = 0.0;
  for (const GroupAssignment* part : groups.partitions()) {
    detail::check_partition(*part, preds.size());
    const auto G = static_cast<std::size_t>(part->count());
    std::vector<double> sum(G, 0.0);
    std::vector<std::size_t> cnt(G, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto k = static_cast<std::size_t>(part->ids[i]);
      sum[k] += preds[i];
      ++cnt[k];
    }
    double lo = sum[0] / static_cast<double>(cnt[0]);
    double hi = lo;
    for (std::size_t k = 1; k < G; ++k) {
      const double m = sum[k] / static_cast<double>(cnt[k]);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

/// Statistical-parity AUC: for each group pair, the integral over quantile
/// levels t of |Pr(f >= Q(t) | a) - Pr(f >= Q(t) | b)|, with Q the lower
/// empirical quantile of the pooled predictions; the largest pair wins.
inline double sp_auc_penalty(std::span<const double> preds, const GroupAssignment& groups,
                             const IntegratorConfig& cfg = {}) {
  if (preds.size() < 2) throw ValidationError("sp_auc_penalty needs at least 2 predictions");
  std::vector<double> pooled(preds.begin(), preds.end());
  std::sort(pooled.begin(), pooled.end());
  double worst = 0.0;
  for (const GroupAssignment* part : groups.partitions()) {
    detail::check_partition(*part, preds.size());
    const auto by_group = detail::sorted_by_group(preds, *part);
    for (std::size_t a = 0; a < by_group.size(); ++a) {
      for (std::size_t b = a + 1; b < by_group.size(); ++b) {
        const double v = adaptive_even_grid_integral(
            [&](double t) {
              const double q = empirical_quantile(pooled, t);
              return std::abs(detail::exceedance(by_group[a], q) - detail::exceedance(by_group[b], q));
            },
            0.0, 1.0, cfg);
        worst = std::max(worst, v);
      }
    }
  }
  return worst;
}

/// Differentiable stand-in for sp_auc_penalty used while fitting: the
/// exceedance indicator becomes sigmoid((f - Q(t)) / bandwidth) and the
/// quantile levels are a fixed even grid of `levels` points.
inline double sp_auc_smoothed(std::span<const double> preds, const GroupAssignment& groups,
                              double bandwidth, std::size_t levels = 65) {
  if (preds.size() < 2) throw ValidationError("sp_auc_smoothed needs at least 2 predictions");
  if (!(bandwidth > 0.0)) throw ValidationError("sp_auc_smoothed needs a positive bandwidth");
  if (levels < 2) throw ValidationError("sp_auc_smoothed needs at least 2 levels");
  std::vector<double> pooled(preds.begin(), preds.end());
  std::sort(pooled.begin(), pooled.end());
  const double inv_bw = 1.0 / bandwidth;
  double worst = 0.0;
  for (const GroupAssignment* part : groups.partitions()) {
    detail::check_partition(*part, preds.size());
    const auto G = static_cast<std::size_t>(part->count());
    const auto sizes = part->group_sizes();
    // exceed[j * G + k]: smoothed exceedance of group k at level j
    std::vector<double> exceed(levels * G, 0.0);
    for (std::size_t j = 0; j < levels; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(levels - 1);
      const double q = empirical_quantile(pooled, t);
      double* row = exceed.data() + j * G;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        row[static_cast<std::size_t>(part->ids[i])] += sigmoid((preds[i] - q) * inv_bw);
      }
      for (std::size_t k = 0; k < G; ++k) row[k] /= static_cast<double>(sizes[k]);
    }
    const double h = 1.0 / static_cast<double>(levels - 1);
    for (std::size_t a = 0; a < G; ++a) {
      for (std::size_t b = a + 1; b < G; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < levels; ++j) {
          const double d = std::abs(exceed[j * G + a] - exceed[j * G + b]);
          s += (j == 0 || j + 1 == levels) ? 0.5 * d : d;
        }
        worst = std::max(worst, s * h);
      }
    }
  }
  return worst;
}

/// Pointwise survival group-fairness penalty for every grid column: the
/// largest |group mean - population mean| of S(t|x).
inline std::vector<double> gf_profile(const SurvivalCurves& curves, const GroupAssignment& groups) {
  const std::size_t m = curves.cols();
  std::vector<double> profile(m, 0.0);
  for (const GroupAssignment* part : groups.partitions()) {
    detail::check_partition(*part, curves.rows);
    const auto G = static_cast<std::size_t>(part->count());
    const auto sizes = part->group_sizes();
    std::vector<double> sums(G * m, 0.0);
    std::vector<double> total(m, 0.0);
    for (std::size_t i = 0; i < curves.rows; ++i) {
      const auto r = curves.row(i);
      double* s = sums.data() + static_cast<std::size_t>(part->ids[i]) * m;
      for (std::size_t j = 0; j < m; ++j) {
        s[j] += r[j];
        total[j] += r[j];
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double pop = total[j] / static_cast<double>(curves.rows);
      for (std::size_t k = 0; k < G; ++k) {
        const double dev = std::abs(sums[k * m + j] / static_cast<double>(sizes[k]) - pop);
        profile[j] = std::max(profile[j], dev);
      }
    }
  }
  return profile;
}

inline double gf_at_time(const SurvivalCurves& curves, const GroupAssignment& groups,
                         std::size_t t_index) {
  if (t_index >= curves.cols()) throw ValidationError("time index outside the grid");
  return gf_profile(curves, groups)[t_index];
}

inline double gf_integrated(const SurvivalCurves& curves, const GroupAssignment& groups) {
  const auto p = gf_profile(curves, groups);
  return trapezoid(curves.grid.times, p);
}

inline double gf_max_over_grid(const SurvivalCurves& curves, const GroupAssignment& groups) {
  const auto p = gf_profile(curves, groups);
  return p.empty() ? 0.0 : *std::max_element(p.begin(), p.end());
}

}  // namespace fairmix
