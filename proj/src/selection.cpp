#include "crskit/selection.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

namespace crskit {

namespace {

void check_score(const ScoredRegion& r) {
  if (!(r.score >= 0.0 && r.score <= 1.0)) {
    throw ConfigError("region " + std::to_string(r.region_id) + ": score " + std::to_string(r.score) +
                      " outside [0, 1]");
  }
}

void check_regions(std::span<const ScoredRegion> regions) {
  std::unordered_set<int> ids;
  for (const auto& r : regions) {
    validate(r.box);
    check_score(r);
    if (!ids.insert(r.region_id).second) {
      throw ConfigError("duplicate region_id " + std::to_string(r.region_id));
    }
  }
}

// overlap[i][j] = a_o(regions[i], regions[j])
std::vector<std::vector<double>> overlap_matrix(std::span<const ScoredRegion> regions) {
  const std::size_t n = regions.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) m[i][j] = asymmetric_overlap(regions[i].box, regions[j].box);
    }
  }
  return m;
}

SelectionResult make_result(std::span<const ScoredRegion> sorted, const std::vector<std::size_t>& members,
                            int count) {
  SelectionResult result;
  for (std::size_t idx : members) {
    result.selected.push_back(sorted[idx].region_id);
    result.total_score += sorted[idx].score;
  }
  result.complete = static_cast<int>(members.size()) == count;
  return result;
}

// Depth-first search for an insertion order of `members` in which every
// element clears the threshold against all elements placed before it.
// Elements are tried in ascending position, so the first order found is the
// lexicographically smallest feasible one.
bool find_feasible_order(const std::vector<std::size_t>& members, const std::vector<std::vector<double>>& overlap,
                         double threshold, std::vector<std::size_t>& order, std::vector<bool>& used) {
  if (order.size() == members.size()) return true;
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (used[m]) continue;
    const std::size_t cand = members[m];
    const bool ok = std::all_of(order.begin(), order.end(),
                                [&](std::size_t prev) { return overlap[prev][cand] < threshold; });
    if (!ok) continue;
    used[m] = true;
    order.push_back(cand);
    if (find_feasible_order(members, overlap, threshold, order, used)) return true;
    order.pop_back();
    used[m] = false;
  }
  return false;
}

struct ExactSearch {
  const std::vector<std::vector<double>>& overlap;
  std::span<const ScoredRegion> sorted;
  double threshold;
  ConstraintMode mode;
  std::size_t target;

  std::vector<std::size_t> current;
  double current_score = 0.0;
  bool found = false;
  double best_score = 0.0;
  std::vector<std::size_t> best_order;

  bool pair_ok(std::size_t a, std::size_t b) const {
    const bool ab = overlap[a][b] < threshold;
    const bool ba = overlap[b][a] < threshold;
    return mode == ConstraintMode::symmetric ? (ab && ba) : (ab || ba);
  }

  void visit(std::size_t start) {
    if (current.size() == target) {
      std::vector<std::size_t> order;
      if (mode == ConstraintMode::symmetric) {
        order = current;
      } else {
        std::vector<bool> used(current.size(), false);
        if (!find_feasible_order(current, overlap, threshold, order, used)) return;
      }
      if (!found || current_score > best_score) {
        found = true;
        best_score = current_score;
        best_order = std::move(order);
      }
      return;
    }
    const std::size_t n = sorted.size();
    for (std::size_t i = start; i + (target - current.size()) <= n; ++i) {
      const bool compatible =
          std::all_of(current.begin(), current.end(), [&](std::size_t prev) { return pair_ok(prev, i); });
      if (!compatible) continue;
      current.push_back(i);
      current_score += sorted[i].score;
      visit(i + 1);
      current_score -= sorted[i].score;
      current.pop_back();
    }
  }
};

}  // namespace

void validate(const SelectionProblem& problem) {
  if (problem.regions.empty()) throw ConfigError("selection problem has no regions");
  if (problem.count < 1) throw ConfigError("count must be >= 1, got " + std::to_string(problem.count));
  if (!(problem.threshold > 0.0 && problem.threshold <= 1.0)) {
    throw ConfigError("overlap threshold must lie in (0, 1], got " + std::to_string(problem.threshold));
  }
  check_regions(problem.regions);
}

std::vector<ScoredRegion> sort_by_score(std::span<const ScoredRegion> regions) {
  std::vector<ScoredRegion> sorted(regions.begin(), regions.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const ScoredRegion& a, const ScoredRegion& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.region_id < b.region_id;
  });
  return sorted;
}

std::vector<ScoredRegion> nms(std::span<const ScoredRegion> regions, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("nms threshold must lie in (0, 1], got " + std::to_string(iou_threshold));
  }
  check_regions(regions);
  std::vector<ScoredRegion> kept;
  for (const auto& r : sort_by_score(regions)) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](const ScoredRegion& k) { return iou(k.box, r.box) >= iou_threshold; });
    if (!suppressed) kept.push_back(r);
  }
  return kept;
}

SelectionResult crs_greedy(const SelectionProblem& problem) {
  validate(problem);
  const auto sorted = sort_by_score(problem.regions);
  const auto overlap = overlap_matrix(sorted);
  const std::size_t n = sorted.size();
  const std::size_t target = static_cast<std::size_t>(problem.count);

  std::vector<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    std::vector<std::size_t> group{seed};
    double score = sorted[seed].score;
    for (std::size_t j = seed + 1; j < n && group.size() < target; ++j) {
      const bool admissible = std::all_of(group.begin(), group.end(),
                                          [&](std::size_t k) { return overlap[k][j] < problem.threshold; });
      if (admissible) {
        group.push_back(j);
        score += sorted[j].score;
      }
    }
    const bool better = best.empty() || group.size() > best.size() ||
                        (group.size() == best.size() && score > best_score);
    if (better) {
      best = std::move(group);
      best_score = score;
    }
  }
  return make_result(sorted, best, problem.count);
}

SelectionResult crs_exact(const SelectionProblem& problem, ConstraintMode mode, std::size_t enumeration_cap) {
  validate(problem);
  if (problem.regions.size() > enumeration_cap) {
    throw CapacityError("exact selection supports at most " + std::to_string(enumeration_cap) + " regions, got " +
                        std::to_string(problem.regions.size()));
  }
  const auto sorted = sort_by_score(problem.regions);
  const auto overlap = overlap_matrix(sorted);
  const std::size_t largest = std::min<std::size_t>(static_cast<std::size_t>(problem.count), sorted.size());

  for (std::size_t size = largest; size >= 1; --size) {
    ExactSearch search{overlap, sorted, problem.threshold, mode, size, {}, 0.0, false, 0.0, {}};
    search.visit(0);
    if (search.found) return make_result(sorted, search.best_order, problem.count);
  }
  return {};  // unreachable: every single region is feasible
}

std::vector<ScoredRegion> filter_by_min_size(std::span<const ScoredRegion> regions, double min_area) {
  if (!(min_area >= 0.0)) throw ConfigError("min_area must be >= 0");
  std::vector<ScoredRegion> kept;
  std::copy_if(regions.begin(), regions.end(), std::back_inserter(kept),
               [&](const ScoredRegion& r) { return area(r.box) >= min_area; });
  return kept;
}

bool directional_certificate_holds(std::span<const ScoredRegion> ordered, double threshold) {
  for (std::size_t j = 0; j < ordered.size(); ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      if (!(asymmetric_overlap(ordered[k].box, ordered[j].box) < threshold)) return false;
    }
  }
  return true;
}

}  // namespace crskit
