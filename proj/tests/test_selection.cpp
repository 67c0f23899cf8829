#include <algorithm>
#include <bit>
#include <numeric>
#include <random>
#include <set>

#include "crskit/oracle.hpp"
#include "crskit/selection.hpp"
#include "doctest.h"

using namespace crskit;

namespace {

// Merged-box fixture: A spans two objects and scores highest, B and C each
// cover one of them.
SelectionProblem merged_fixture(int count) {
  SelectionProblem p;
  p.regions = {{{0, 0, 10, 10}, 0.9, 0}, {{0, 0, 4, 10}, 0.6, 1}, {{6, 0, 10, 10}, 0.5, 2}};
  p.count = count;
  p.threshold = 0.1;
  return p;
}

std::set<int> as_set(const std::vector<int>& ids) { return {ids.begin(), ids.end()}; }

// Independent brute force: bitmask subsets and std::next_permutation orderings.
struct BruteResult {
  double score = -1.0;
  std::size_t size = 0;
};

bool brute_feasible(const SelectionProblem& p, std::vector<std::size_t> members, ConstraintMode mode) {
  auto ao = [&](std::size_t i, std::size_t j) { return asymmetric_overlap(p.regions[i].box, p.regions[j].box); };
  if (mode == ConstraintMode::symmetric) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = 0; b < members.size(); ++b) {
        if (a != b && !(ao(members[a], members[b]) < p.threshold)) return false;
      }
    }
    return true;
  }
  std::sort(members.begin(), members.end());
  do {
    bool ok = true;
    for (std::size_t j = 0; j < members.size() && ok; ++j) {
      for (std::size_t k = 0; k < j && ok; ++k) ok = ao(members[k], members[j]) < p.threshold;
    }
    if (ok) return true;
  } while (std::next_permutation(members.begin(), members.end()));
  return false;
}

BruteResult brute_force(const SelectionProblem& p, ConstraintMode mode) {
  const std::size_t n = p.regions.size();
  for (std::size_t size = std::min<std::size_t>(p.count, n); size >= 1; --size) {
    BruteResult best;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != size) continue;
      std::vector<std::size_t> members;
      double score = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          members.push_back(i);
          score += p.regions[i].score;
        }
      }
      if (brute_feasible(p, members, mode) && score > best.score) best = {score, size};
    }
    if (best.score >= 0.0) return best;
  }
  return {};
}

std::vector<ScoredRegion> ordered_regions(const SelectionProblem& p, const SelectionResult& r) {
  std::vector<ScoredRegion> out;
  for (int id : r.selected) {
    out.push_back(*std::find_if(p.regions.begin(), p.regions.end(),
                                [&](const ScoredRegion& s) { return s.region_id == id; }));
  }
  return out;
}

std::vector<int> top_ids(const SelectionProblem& p, std::size_t c) {
  const auto sorted = sort_by_score(p.regions);
  std::vector<int> ids;
  for (std::size_t i = 0; i < std::min(c, sorted.size()); ++i) ids.push_back(sorted[i].region_id);
  return ids;
}

}  // namespace

TEST_CASE("nms examples") {
  SUBCASE("duplicates collapse to the best") {
    std::vector<ScoredRegion> r{{{0, 0, 10, 10}, 0.8, 1}, {{0, 0, 10, 10}, 0.9, 2}};
    const auto kept = nms(r, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].region_id == 2);
  }
  SUBCASE("disjoint boxes all survive in score order") {
    std::vector<ScoredRegion> r{{{0, 0, 1, 1}, 0.2, 0}, {{5, 5, 6, 6}, 0.7, 1}, {{9, 9, 10, 10}, 0.5, 2}};
    const auto kept = nms(r, 0.01);
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].region_id == 1);
    CHECK(kept[1].region_id == 2);
    CHECK(kept[2].region_id == 0);
  }
  SUBCASE("IoU of one third suppresses at threshold 0.3") {
    std::vector<ScoredRegion> r{{{0, 0, 10, 10}, 0.9, 0}, {{5, 0, 15, 10}, 0.8, 1}};
    const auto kept = nms(r, 0.3);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].region_id == 0);
  }
  SUBCASE("empty input") { CHECK(nms({}, 0.3).empty()); }
  SUBCASE("equal scores break ties by region id") {
    std::vector<ScoredRegion> r{{{0, 0, 10, 10}, 0.5, 7}, {{0, 0, 10, 10}, 0.5, 3}};
    CHECK(nms(r, 0.5).front().region_id == 3);
  }
  CHECK_THROWS_AS(nms({}, 0.0), ConfigError);
}

TEST_CASE("crs_greedy on the merged-box fixture") {
  const auto two = crs_greedy(merged_fixture(2));
  CHECK(two.selected == std::vector<int>{1, 2});
  CHECK(two.total_score == doctest::Approx(1.1));
  CHECK(two.complete);

  const auto one = crs_greedy(merged_fixture(1));
  CHECK(one.selected == std::vector<int>{0});
  CHECK(one.total_score == doctest::Approx(0.9));
  CHECK(one.complete);
}

TEST_CASE("crs_greedy without binding constraints takes the top C") {
  SelectionProblem p;
  p.regions = {{{0, 0, 1, 1}, 0.6, 0}, {{3, 3, 4, 4}, 0.7, 1}, {{6, 6, 7, 7}, 0.5, 2}};
  p.count = 2;
  const auto r = crs_greedy(p);
  CHECK(r.selected == std::vector<int>{1, 0});
  CHECK(r.total_score == doctest::Approx(1.3));
}

TEST_CASE("crs_greedy falls back to the top region when nothing is compatible") {
  SelectionProblem p;
  p.regions = {{{0, 0, 10, 10}, 0.4, 0}, {{1, 1, 10, 10}, 0.8, 1}, {{0, 0, 9, 9}, 0.6, 2}};
  p.count = 3;
  const auto r = crs_greedy(p);
  CHECK(r.selected == std::vector<int>{1});
  CHECK_FALSE(r.complete);
}

TEST_CASE("crs_greedy prefers a complete set over a higher-scoring partial one") {
  // {A} alone outscores {B, C}, but only {B, C} reaches the count.
  SelectionProblem p;
  p.regions = {{{0, 0, 10, 10}, 0.9, 0}, {{0, 0, 4, 10}, 0.45, 1}, {{6, 0, 10, 10}, 0.35, 2}};
  p.count = 2;
  const auto r = crs_greedy(p);
  CHECK(as_set(r.selected) == std::set<int>{1, 2});
  CHECK(r.complete);
}

TEST_CASE("strict inequality at the threshold") {
  // a_o(A, B) = 0.5 exactly
  SelectionProblem p;
  p.regions = {{{0, 0, 10, 10}, 0.9, 0}, {{5, 0, 15, 10}, 0.8, 1}};
  p.count = 2;
  p.threshold = 0.5;
  CHECK(crs_greedy(p).selected == std::vector<int>{0});
  p.threshold = 0.5000001;
  CHECK(crs_greedy(p).selected == std::vector<int>{0, 1});
}

TEST_CASE("invalid problems are rejected") {
  SelectionProblem p = merged_fixture(0);
  CHECK_THROWS_AS(crs_greedy(p), ConfigError);
  p = merged_fixture(2);
  p.threshold = 0.0;
  CHECK_THROWS_AS(crs_greedy(p), ConfigError);
  p = merged_fixture(2);
  p.regions[1].region_id = 0;
  CHECK_THROWS_AS(crs_greedy(p), ConfigError);
  p = merged_fixture(2);
  p.regions[1].score = 1.5;
  CHECK_THROWS_AS(crs_greedy(p), ConfigError);
  CHECK_THROWS_AS(crs_greedy(SelectionProblem{}), ConfigError);
}

TEST_CASE("crs_exact examples") {
  const auto sym = crs_exact(merged_fixture(2), ConstraintMode::symmetric);
  CHECK(as_set(sym.selected) == std::set<int>{1, 2});
  CHECK(sym.total_score == doctest::Approx(1.1));

  for (auto mode : {ConstraintMode::directional, ConstraintMode::symmetric}) {
    const auto one = crs_exact(merged_fixture(1), mode);
    CHECK(one.selected == std::vector<int>{0});
  }

  SelectionProblem nested;
  nested.regions = {{{0, 0, 10, 10}, 0.3, 0}, {{0, 0, 10, 10}, 0.5, 1}, {{0, 0, 10, 10}, 0.4, 2}};
  nested.count = 3;
  const auto fallback = crs_exact(nested, ConstraintMode::directional);
  CHECK(fallback.selected == std::vector<int>{1});
  CHECK_FALSE(fallback.complete);
}

TEST_CASE("directional exact mode reorders insertions") {
  // B is tiny and nested in A: only the order B-then-A is feasible.
  SelectionProblem p;
  p.regions = {{{0, 0, 100, 100}, 0.9, 0}, {{10, 10, 12, 12}, 0.2, 1}};
  p.count = 2;
  const auto greedy = crs_greedy(p);
  CHECK(greedy.selected == std::vector<int>{0});
  const auto directional = crs_exact(p, ConstraintMode::directional);
  CHECK(directional.selected == std::vector<int>{1, 0});
  CHECK(directional.complete);
  CHECK(directional_certificate_holds(ordered_regions(p, directional), p.threshold));
  const auto symmetric = crs_exact(p, ConstraintMode::symmetric);
  CHECK_FALSE(symmetric.complete);
}

TEST_CASE("crs_exact enforces its enumeration cap") {
  SelectionProblem p;
  for (int i = 0; i < 21; ++i) p.regions.push_back({{double(i) * 2, 0, double(i) * 2 + 1, 1}, 0.5, i});
  p.count = 2;
  CHECK_THROWS_AS(crs_exact(p, ConstraintMode::directional), CapacityError);
  p.regions.pop_back();
  CHECK_NOTHROW(crs_exact(p, ConstraintMode::directional));
}

TEST_CASE("filter_by_min_size") {
  std::vector<ScoredRegion> r{{{0, 0, 10, 10}, 0.1, 0}, {{0, 0, 5, 5}, 0.2, 1}, {{0, 0, 2, 2}, 0.3, 2}};
  CHECK(filter_by_min_size(r, 0.0).size() == 3);
  const auto kept = filter_by_min_size(r, 25.0);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].region_id == 0);
  CHECK(kept[1].region_id == 1);
  CHECK(filter_by_min_size(r, 1000.0).empty());
  CHECK_THROWS_AS(filter_by_min_size(r, -1.0), ConfigError);
}

TEST_CASE("exact solver agrees with brute force") {
  std::mt19937_64 rng(2024);
  RandomProblemParams params;
  params.max_regions = 9;
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = random_problem(rng, params);
    for (auto mode : {ConstraintMode::directional, ConstraintMode::symmetric}) {
      const auto exact = crs_exact(p, mode);
      const auto brute = brute_force(p, mode);
      CHECK(exact.selected.size() == brute.size);
      CHECK(scores_equal(exact.total_score, brute.score));
      CHECK(exact.complete == (static_cast<int>(brute.size) == p.count));
      if (mode == ConstraintMode::directional) {
        CHECK(directional_certificate_holds(ordered_regions(p, exact), p.threshold));
      }
    }
  }
}

TEST_CASE("greedy properties on random instances") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 400; ++trial) {
    const auto p = random_problem(rng);
    const auto greedy = crs_greedy(p);
    const auto exact = crs_exact(p, ConstraintMode::directional);

    CHECK(greedy.total_score <= exact.total_score + kScoreTolerance);
    CHECK(greedy.selected.size() <= static_cast<std::size_t>(p.count));
    CHECK(greedy.complete == (greedy.selected.size() == static_cast<std::size_t>(p.count)));
    CHECK(directional_certificate_holds(ordered_regions(p, greedy), p.threshold));

    double sum = 0.0;
    for (const auto& r : ordered_regions(p, greedy)) sum += r.score;
    CHECK(scores_equal(sum, greedy.total_score));

    // C = 1 reduces to the argmax.
    SelectionProblem single = p;
    single.count = 1;
    CHECK(crs_greedy(single).selected == top_ids(p, 1));

    // Score scaling keeps the selection.
    SelectionProblem scaled = p;
    const double lambda = 0.37;
    for (auto& r : scaled.regions) r.score *= lambda;
    const auto g2 = crs_greedy(scaled);
    CHECK(g2.selected == greedy.selected);
    CHECK(g2.total_score == doctest::Approx(lambda * greedy.total_score).epsilon(1e-9));

    // Input order does not matter; repeated calls are identical.
    SelectionProblem shuffled = p;
    std::shuffle(shuffled.regions.begin(), shuffled.regions.end(), rng);
    const auto g3 = crs_greedy(shuffled);
    CHECK(g3.selected == greedy.selected);
    CHECK(g3.total_score == greedy.total_score);
  }
}

TEST_CASE("dropping a member of the best C+1 set leaves a feasible C set") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_problem(rng);
    p.count = std::min<int>(p.count, 3);
    const auto at_c = crs_exact(p, ConstraintMode::directional);
    p.count += 1;
    const auto at_c1 = crs_exact(p, ConstraintMode::directional);
    if (!at_c1.complete) continue;
    CHECK(at_c.complete);
    double weakest = 1.0;
    for (int id : at_c1.selected) {
      for (const auto& r : p.regions) {
        if (r.region_id == id) weakest = std::min(weakest, r.score);
      }
    }
    CHECK(at_c.total_score >= at_c1.total_score - weakest - kScoreTolerance);
  }
}

TEST_CASE("all solvers agree when every pair is compatible") {
  std::mt19937_64 rng(17);
  RandomProblemParams params;
  params.pairwise_disjoint = true;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_problem(rng, params);
    const auto expected = top_ids(p, static_cast<std::size_t>(p.count));
    CHECK(crs_greedy(p).selected == expected);
    CHECK(as_set(crs_exact(p, ConstraintMode::directional).selected) == as_set(expected));
    CHECK(as_set(crs_exact(p, ConstraintMode::symmetric).selected) == as_set(expected));
  }
}

TEST_CASE("nms invariants on random inputs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> thr(0.05, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = random_problem(rng);
    const double t = thr(rng);
    const auto kept = nms(p.regions, t);
    for (std::size_t a = 0; a < kept.size(); ++a) {
      for (std::size_t b = a + 1; b < kept.size(); ++b) CHECK(iou(kept[a].box, kept[b].box) < t);
    }
    // subsequence of the sorted input
    const auto sorted = sort_by_score(p.regions);
    std::size_t pos = 0;
    for (const auto& k : kept) {
      while (pos < sorted.size() && sorted[pos].region_id != k.region_id) ++pos;
      CHECK(pos < sorted.size());
    }
  }
}
