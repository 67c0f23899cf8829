#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "crskit/selection.hpp"

namespace crskit {

struct RandomProblemParams {
  int min_regions = 1;
  int max_regions = 12;
  int max_count = 4;
  double canvas = 100.0;
  double min_extent = 5.0;
  double max_extent = 50.0;
  std::optional<double> threshold;  // drawn from {0.1, ..., 1.0} when unset
  bool pairwise_disjoint = false;   // regions placed in separate grid cells
};

/// Random selection problem with uniform scores in [0, 1].
SelectionProblem random_problem(std::mt19937_64& rng, const RandomProblemParams& params = {});

struct OracleGap {
  std::size_t instances = 0;
  std::size_t matches = 0;              // greedy total equals the exact total
  std::size_t greedy_above_exact = 0;   // would contradict optimality
  double mean_score_gap = 0.0;          // exact - greedy, averaged
  double max_score_gap = 0.0;

  double match_rate() const { return instances == 0 ? 0.0 : static_cast<double>(matches) / instances; }
};

/// Relative tolerance used when comparing total scores.
inline constexpr double kScoreTolerance = 1e-9;

bool scores_equal(double a, double b);

/// Runs the greedy and the exact solver on every problem and tallies the gap.
OracleGap compare_with_exact(std::span<const SelectionProblem> problems, ConstraintMode mode);

}  // namespace crskit
