#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seedmix/domain.hpp"
#include "seedmix/yield_model.hpp"

namespace seedmix {

inline constexpr double kMinWeight = 0.10;
inline constexpr std::size_t kMaxMix = 5;
inline constexpr std::size_t kMaxTopK = 10;
inline constexpr std::size_t kTauSteps = 10;

// Divisor used by the S.D. and spatial-cohesion averages: `five` is the
// maximum mix size, `entry_count` the size of the mix at hand.
enum class AverageDivisor { five, entry_count };

struct VarietyStats {
  VarietyId variety;
  double e = 0.0;
  double var = 0.0;
  double norm_e = 0.0;
  double norm_var = 0.0;
};

// Min-max normalizes e and var across `stats` in place (max == min gives 0).
void normalize_stats(std::vector<VarietyStats>& stats);

// Builds normalized stats from per-variety distributions.
std::vector<VarietyStats> make_stats(std::span<const VarietyId> varieties,
                                     std::span<const YieldDistribution> distributions);

double score(double norm_e, double norm_var);
inline double score(const VarietyStats& s) { return score(s.norm_e, s.norm_var); }

// The k highest-scoring varieties, best first; equal scores go to the smaller
// code. Throws ArgumentError when k > stats.size().
std::vector<VarietyStats> top_k(std::vector<VarietyStats> stats, std::size_t k);

struct SubsetSolution {
  std::vector<double> weights;  // aligned with the input order
  double objective = 0.0;       // sum w * e
  double variability = 0.0;     // sum w * norm_var
};

// Exact maximizer of sum w*e subject to sum w = 1, w >= 0.1 and
// sum w*norm_var <= tau, for 1..5 varieties. nullopt when infeasible.
std::optional<SubsetSolution> solve_subset(std::span<const double> e,
                                           std::span<const double> norm_var, double tau);

struct MixEntry {
  VarietyId variety;
  double weight = 0.0;
  double e = 0.0;
  double var = 0.0;
  double norm_var = 0.0;
};

struct PortfolioSolution {
  std::vector<MixEntry> entries;  // weight descending, then code
  double tau = 0.0;
  double expected_yield = 0.0;
  double variability = 0.0;
  double sd = 0.0;
  double offset_pct = 0.0;

  std::optional<double> weight_of(const VarietyId& variety) const;
};

// S.D. = sum w * sqrt(Var) / divisor.
double solution_sd(const PortfolioSolution& solution, AverageDivisor divisor = AverageDivisor::five);
// Offset % = sd / expected_yield * 100; throws ArgumentError when the yield is 0.
double solution_offset(const PortfolioSolution& solution);

// Best solution over every subset of 1..5 varieties of `topk` (at most 10).
// Ties: higher objective, then lower variability, then smaller sorted codes.
std::optional<PortfolioSolution> optimize_subregion(std::span<const VarietyStats> topk, double tau,
                                                    AverageDivisor divisor = AverageDivisor::five);

// Weights for exactly the given varieties (1..5, all held at >= 0.1).
std::optional<PortfolioSolution> optimize_fixed_subset(std::span<const VarietyStats> chosen,
                                                       double tau,
                                                       AverageDivisor divisor = AverageDivisor::five);

// tau values 0.1, 0.2, ..., 1.0.
const std::vector<double>& tau_grid();
// Grid position of `tau` (tolerance 1e-9) or nullopt when off-grid.
std::optional<std::size_t> tau_index(double tau);

struct TauEntry {
  double tau = 0.0;
  std::optional<PortfolioSolution> solution;
};
using TauSweep = std::vector<TauEntry>;

TauSweep tau_sweep(std::span<const VarietyStats> topk,
                   AverageDivisor divisor = AverageDivisor::five);
TauSweep tau_sweep_fixed(std::span<const VarietyStats> chosen,
                         AverageDivisor divisor = AverageDivisor::five);

// Maximum expected yield, then minimum variability, then smallest tau.
// Throws NoSolutionError when no entry is feasible.
const PortfolioSolution& default_solution(const TauSweep& sweep);

// Invariant audit; returns a description of the first violation, if any.
std::optional<std::string> check_solution(const PortfolioSolution& solution);

}  // namespace seedmix
