#include "seedmix/optimizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "seedmix/errors.hpp"

namespace seedmix {
namespace {

constexpr double kFeasTol = 1e-12;

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// True when candidate (obj, var) strictly beats incumbent under the
// objective-then-variability order.
bool better(double obj, double var, double best_obj, double best_var) {
  if (!nearly_equal(obj, best_obj)) return obj > best_obj;
  if (!nearly_equal(var, best_var)) return var < best_var;
  return false;
}

PortfolioSolution finalize(std::span<const VarietyStats> chosen, const SubsetSolution& sub,
                           double tau, AverageDivisor divisor) {
  PortfolioSolution solution;
  solution.tau = tau;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    solution.entries.push_back(
        MixEntry{chosen[i].variety, sub.weights[i], chosen[i].e, chosen[i].var, chosen[i].norm_var});
  }
  std::sort(solution.entries.begin(), solution.entries.end(), [](const MixEntry& a, const MixEntry& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.variety < b.variety;
  });
  solution.expected_yield = 0.0;
  solution.variability = 0.0;
  for (const auto& entry : solution.entries) {
    solution.expected_yield += entry.weight * entry.e;
    solution.variability += entry.weight * entry.norm_var;
  }
  solution.sd = solution_sd(solution, divisor);
  solution.offset_pct = solution_offset(solution);
  return solution;
}

std::vector<VarietyId> sorted_codes(const PortfolioSolution& s) {
  std::vector<VarietyId> codes;
  for (const auto& entry : s.entries) codes.push_back(entry.variety);
  std::sort(codes.begin(), codes.end());
  return codes;
}

}  // namespace

void normalize_stats(std::vector<VarietyStats>& stats) {
  if (stats.empty()) return;
  const auto [e_lo, e_hi] = std::minmax_element(
      stats.begin(), stats.end(), [](const auto& a, const auto& b) { return a.e < b.e; });
  const auto [v_lo, v_hi] = std::minmax_element(
      stats.begin(), stats.end(), [](const auto& a, const auto& b) { return a.var < b.var; });
  const double e_min = e_lo->e, e_span = e_hi->e - e_lo->e;
  const double v_min = v_lo->var, v_span = v_hi->var - v_lo->var;
  for (auto& s : stats) {
    s.norm_e = e_span > 0.0 ? std::clamp((s.e - e_min) / e_span, 0.0, 1.0) : 0.0;
    s.norm_var = v_span > 0.0 ? std::clamp((s.var - v_min) / v_span, 0.0, 1.0) : 0.0;
  }
}

std::vector<VarietyStats> make_stats(std::span<const VarietyId> varieties,
                                     std::span<const YieldDistribution> distributions) {
  if (varieties.size() != distributions.size()) {
    throw ArgumentError("make_stats: varieties and distributions differ in length");
  }
  std::vector<VarietyStats> stats;
  stats.reserve(varieties.size());
  for (std::size_t i = 0; i < varieties.size(); ++i) {
    stats.push_back(VarietyStats{varieties[i], expected_value(distributions[i]),
                                 variance(distributions[i]), 0.0, 0.0});
  }
  normalize_stats(stats);
  return stats;
}

double score(double norm_e, double norm_var) { return norm_e + (1.0 - norm_var); }

std::vector<VarietyStats> top_k(std::vector<VarietyStats> stats, std::size_t k) {
  if (k > stats.size()) {
    throw ArgumentError("top_k: k = " + std::to_string(k) + " exceeds " +
                        std::to_string(stats.size()) + " varieties");
  }
  std::stable_sort(stats.begin(), stats.end(), [](const VarietyStats& a, const VarietyStats& b) {
    const double sa = score(a);
    const double sb = score(b);
    if (sa != sb) return sa > sb;
    return a.variety < b.variety;
  });
  stats.resize(k);
  return stats;
}

std::optional<SubsetSolution> solve_subset(std::span<const double> e,
                                           std::span<const double> norm_var, double tau) {
  const std::size_t s = e.size();
  if (s < 1 || s > kMaxMix || norm_var.size() != s) {
    throw ArgumentError("solve_subset: subset size must be 1..5 with matching inputs");
  }
  // Substitute w = 0.1 + u with u >= 0: sum u = budget and
  // sum u * norm_var <= slack. Every vertex of that polytope has at most two
  // non-zero u, and a two-support vertex has the variability row tight.
  const double budget = 1.0 - kMinWeight * static_cast<double>(s);
  double floor_var = 0.0;
  for (double v : norm_var) floor_var += kMinWeight * v;
  const double slack = tau - floor_var;

  const auto lowest = static_cast<std::size_t>(
      std::min_element(norm_var.begin(), norm_var.end()) - norm_var.begin());
  if (norm_var[lowest] * budget > slack + kFeasTol) return std::nullopt;

  std::optional<SubsetSolution> best;
  const auto consider = [&](std::size_t i, double ui, std::size_t j, double uj) {
    SubsetSolution cand;
    cand.weights.assign(s, kMinWeight);
    cand.weights[i] += ui;
    if (j != i) cand.weights[j] += uj;
    for (std::size_t l = 0; l < s; ++l) {
      cand.objective += cand.weights[l] * e[l];
      cand.variability += cand.weights[l] * norm_var[l];
    }
    if (!best || better(cand.objective, cand.variability, best->objective, best->variability)) {
      best = std::move(cand);
    }
  };

  for (std::size_t i = 0; i < s; ++i) {
    if (norm_var[i] * budget <= slack + kFeasTol) consider(i, budget, i, 0.0);
  }
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) {
      const double dv = norm_var[i] - norm_var[j];
      if (dv == 0.0) continue;
      double ui = (slack - norm_var[j] * budget) / dv;
      if (ui < -kFeasTol || ui > budget + kFeasTol) continue;
      ui = std::clamp(ui, 0.0, budget);
      consider(i, ui, j, budget - ui);
    }
  }
  return best;
}

std::optional<double> PortfolioSolution::weight_of(const VarietyId& variety) const {
  for (const auto& entry : entries) {
    if (entry.variety == variety) return entry.weight;
  }
  return std::nullopt;
}

double solution_sd(const PortfolioSolution& solution, AverageDivisor divisor) {
  double sum = 0.0;
  for (const auto& entry : solution.entries) sum += entry.weight * std::sqrt(entry.var);
  const double d = divisor == AverageDivisor::five ? static_cast<double>(kMaxMix)
                                                   : static_cast<double>(solution.entries.size());
  return d > 0.0 ? sum / d : 0.0;
}

double solution_offset(const PortfolioSolution& solution) {
  if (solution.expected_yield == 0.0) {
    throw ArgumentError("offset is undefined for a zero expected yield");
  }
  return solution.sd / solution.expected_yield * 100.0;
}

std::optional<PortfolioSolution> optimize_fixed_subset(std::span<const VarietyStats> chosen,
                                                       double tau, AverageDivisor divisor) {
  std::vector<double> e, nv;
  for (const auto& c : chosen) {
    e.push_back(c.e);
    nv.push_back(c.norm_var);
  }
  const auto sub = solve_subset(e, nv, tau);
  if (!sub) return std::nullopt;
  return finalize(chosen, *sub, tau, divisor);
}

std::optional<PortfolioSolution> optimize_subregion(std::span<const VarietyStats> topk, double tau,
                                                    AverageDivisor divisor) {
  const std::size_t k = topk.size();
  if (k > kMaxTopK) throw ArgumentError("optimize_subregion supports at most 10 candidates");
  std::optional<PortfolioSolution> best;
  std::vector<VarietyId> best_codes;
  std::vector<VarietyStats> chosen;
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    if (std::popcount(mask) > static_cast<int>(kMaxMix)) continue;
    chosen.clear();
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (1u << i)) chosen.push_back(topk[i]);
    }
    auto cand = optimize_fixed_subset(chosen, tau, divisor);
    if (!cand) continue;
    bool take = !best;
    if (!take) {
      if (better(cand->expected_yield, cand->variability, best->expected_yield, best->variability)) {
        take = true;
      } else if (!better(best->expected_yield, best->variability, cand->expected_yield,
                         cand->variability)) {
        take = sorted_codes(*cand) < best_codes;
      }
    }
    if (take) {
      best_codes = sorted_codes(*cand);
      best = std::move(cand);
    }
  }
  return best;
}

const std::vector<double>& tau_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g;
    for (std::size_t i = 1; i <= kTauSteps; ++i) g.push_back(static_cast<double>(i) / 10.0);
    return g;
  }();
  return grid;
}

std::optional<std::size_t> tau_index(double tau) {
  const auto& grid = tau_grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - tau) <= 1e-9) return i;
  }
  return std::nullopt;
}

TauSweep tau_sweep(std::span<const VarietyStats> topk, AverageDivisor divisor) {
  TauSweep sweep;
  for (double tau : tau_grid()) sweep.push_back(TauEntry{tau, optimize_subregion(topk, tau, divisor)});
  return sweep;
}

TauSweep tau_sweep_fixed(std::span<const VarietyStats> chosen, AverageDivisor divisor) {
  TauSweep sweep;
  for (double tau : tau_grid()) {
    sweep.push_back(TauEntry{tau, optimize_fixed_subset(chosen, tau, divisor)});
  }
  return sweep;
}

const PortfolioSolution& default_solution(const TauSweep& sweep) {
  const PortfolioSolution* best = nullptr;
  for (const auto& entry : sweep) {
    if (!entry.solution) continue;
    const PortfolioSolution& s = *entry.solution;
    // Entries are visited in ascending tau, so keeping the incumbent on a full
    // tie selects the smallest tau.
    if (!best || better(s.expected_yield, s.variability, best->expected_yield, best->variability)) {
      best = &s;
    }
  }
  if (!best) throw NoSolutionError("no feasible solution at any tau");
  return *best;
}

std::optional<std::string> check_solution(const PortfolioSolution& s) {
  if (s.entries.empty() || s.entries.size() > kMaxMix) return "solution must hold 1..5 entries";
  double total = 0.0;
  double variability = 0.0;
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const auto& entry = s.entries[i];
    if (entry.weight < kMinWeight - 1e-9) {
      return "weight of " + entry.variety.code + " below 0.1";
    }
    for (std::size_t j = i + 1; j < s.entries.size(); ++j) {
      if (s.entries[j].variety == entry.variety) return "duplicate variety " + entry.variety.code;
    }
    total += entry.weight;
    variability += entry.weight * entry.norm_var;
  }
  if (std::abs(total - 1.0) > 1e-9) return "weights do not sum to 1";
  if (s.variability > s.tau + 1e-9) return "variability exceeds tau";
  if (std::abs(variability - s.variability) > 1e-9) return "stored variability is inconsistent";
  return std::nullopt;
}

}  // namespace seedmix
