#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crskit/geometry.hpp"

namespace crskit {

inline constexpr double kDefaultOverlapThreshold = 0.1;
inline constexpr double kDefaultNmsThreshold = 0.3;
inline constexpr std::size_t kDefaultEnumerationCap = 20;

struct ScoredRegion {
  Box box;
  double score = 0.0;  // in [0, 1] for the class under consideration
  int region_id = 0;
};

struct SelectionProblem {
  std::vector<ScoredRegion> regions;
  int count = 1;                                 // C, the per-class object count
  double threshold = kDefaultOverlapThreshold;   // T, in (0, 1]
};

struct SelectionResult {
  std::vector<int> selected;  // region ids in selection order
  double total_score = 0.0;
  bool complete = false;      // selected.size() == count
};

enum class ConstraintMode {
  directional,  // a_o(earlier, later) < T along some insertion order
  symmetric,    // a_o < T for both argument orders of every pair
};

/// Regions sorted by descending score, ties by ascending region_id.
std::vector<ScoredRegion> sort_by_score(std::span<const ScoredRegion> regions);

/// Greedy IoU suppression. Output is the kept subsequence of the score-sorted
/// input; a region survives iff its IoU with every kept region is below
/// `iou_threshold`.
std::vector<ScoredRegion> nms(std::span<const ScoredRegion> regions, double iou_threshold = kDefaultNmsThreshold);

/// Count-based region selection (greedy). Every region in score order seeds a
/// candidate set; the scan appends each later region whose asymmetric overlap
/// with every member is below T and stops once the set holds C regions.
/// Candidates are ranked by size first (a complete set beats any partial one)
/// and then by total score; ties go to the earlier seed.
SelectionResult crs_greedy(const SelectionProblem& problem);

/// Exhaustive solver for the count-constrained selection objective. Returns the
/// best feasible subset of size C, or when none exists the best feasible
/// subset of the largest feasible size (complete = false). Throws
/// CapacityError when the problem has more than `enumeration_cap` regions.
SelectionResult crs_exact(const SelectionProblem& problem, ConstraintMode mode,
                          std::size_t enumeration_cap = kDefaultEnumerationCap);

/// Drops regions whose area is below `min_area`; order is preserved.
std::vector<ScoredRegion> filter_by_min_size(std::span<const ScoredRegion> regions, double min_area);

/// True when, in the given order, every member satisfies a_o(earlier, later) < T
/// against all earlier members.
bool directional_certificate_holds(std::span<const ScoredRegion> ordered, double threshold);

/// Throws ConfigError when the problem breaks its invariants (empty regions,
/// count < 1, threshold outside (0, 1], score outside [0, 1], duplicate ids,
/// invalid boxes).
void validate(const SelectionProblem& problem);

}  // namespace crskit
