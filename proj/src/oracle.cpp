#include "crskit/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "crskit/errors.hpp"

namespace crskit {

bool scores_equal(double a, double b) {
  return std::abs(a - b) <= kScoreTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

SelectionProblem random_problem(std::mt19937_64& rng, const RandomProblemParams& params) {
  if (params.min_regions < 1 || params.max_regions < params.min_regions || params.max_count < 1) {
    throw ConfigError("invalid random problem parameters");
  }
  std::uniform_int_distribution<int> n_dist(params.min_regions, params.max_regions);
  std::uniform_int_distribution<int> c_dist(1, params.max_count);
  std::uniform_int_distribution<int> t_dist(1, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SelectionProblem p;
  const int n = n_dist(rng);
  p.count = c_dist(rng);
  p.threshold = params.threshold ? *params.threshold : t_dist(rng) / 10.0;

  const int cells = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const double cell = params.canvas / cells;
  for (int i = 0; i < n; ++i) {
    Box b;
    if (params.pairwise_disjoint) {
      // Strictly inside its own grid cell.
      const double x0 = (i % cells) * cell;
      const double y0 = (i / cells) * cell;
      const double w = cell * (0.2 + 0.7 * unit(rng));
      const double h = cell * (0.2 + 0.7 * unit(rng));
      const double x = x0 + (cell - w) * unit(rng);
      const double y = y0 + (cell - h) * unit(rng);
      b = {x, y, x + w, y + h};
    } else {
      const double w = params.min_extent + (params.max_extent - params.min_extent) * unit(rng);
      const double h = params.min_extent + (params.max_extent - params.min_extent) * unit(rng);
      const double x = (params.canvas - w) * unit(rng);
      const double y = (params.canvas - h) * unit(rng);
      b = {x, y, x + w, y + h};
    }
    p.regions.push_back({b, unit(rng), i});
  }
  return p;
}

OracleGap compare_with_exact(std::span<const SelectionProblem> problems, ConstraintMode mode) {
  OracleGap gap;
  double sum = 0.0;
  for (const auto& problem : problems) {
    const double greedy = crs_greedy(problem).total_score;
    const double exact = crs_exact(problem, mode).total_score;
    ++gap.instances;
    if (scores_equal(greedy, exact)) {
      ++gap.matches;
    } else if (greedy > exact) {
      ++gap.greedy_above_exact;
    }
    const double d = exact - greedy;
    sum += d;
    gap.max_score_gap = std::max(gap.max_score_gap, d);
  }
  if (gap.instances > 0) gap.mean_score_gap = sum / static_cast<double>(gap.instances);
  return gap;
}

}  // namespace crskit
