#include "crskit/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "crskit/errors.hpp"

namespace crskit {

void validate(const RefinementConfig& config) {
  if (config.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(config.threshold > 0.0 && config.threshold <= 1.0)) throw ConfigError("T must lie in (0, 1]");
  if (config.k < 1) throw ConfigError("k must be >= 1");
  if (!(config.nms_threshold > 0.0 && config.nms_threshold <= 1.0)) {
    throw ConfigError("nms threshold must lie in (0, 1]");
  }
  if (config.feature_dim < 1) throw ConfigError("feature dimension must be >= 1");
}

// ---------------------------------------------------------------------------
// World generation

namespace {

class WorldSampler {
 public:
  explicit WorldSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double jitter(double half_width) { return uniform(-half_width, half_width); }

  Eigen::VectorXd gaussian(int dim, double sigma) {
    std::normal_distribution<double> n(0.0, sigma);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = n(rng_);
    return v;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

constexpr double kMergedScore = 0.9;
constexpr double kTightScore = 0.7;
constexpr double kPartScore = 0.5;
constexpr double kBackgroundScore = 0.2;
constexpr double kScoreNoise = 0.05;
constexpr double kTightJitter = 0.1;
// Largest IoU tolerated between an instance and the hull of it and a same-class
// neighbour; keeps tight boxes alive through NMS next to merged boxes.
constexpr double kMaxInstanceHullIou = 0.15;
constexpr int kPlacementAttempts = 500;

Box expand(const Box& b, double fraction) {
  const double dx = fraction * b.width();
  const double dy = fraction * b.height();
  return {b.x1 - dx, b.y1 - dy, b.x2 + dx, b.y2 + dy};
}

struct Instance {
  int class_index;
  Box box;
};

bool placement_ok(const Box& candidate, int class_index, const std::vector<Instance>& placed) {
  const Box padded = expand(candidate, 0.25);
  for (const auto& other : placed) {
    if (intersection_area(padded, expand(other.box, 0.25)) > 0.0) return false;
    if (other.class_index == class_index) {
      const Box pair = hull(expand(candidate, kTightJitter), expand(other.box, kTightJitter));
      if (iou(candidate, pair) >= kMaxInstanceHullIou || iou(other.box, pair) >= kMaxInstanceHullIou) return false;
    }
  }
  return true;
}

std::vector<Instance> place_instances(WorldSampler& rng, const std::vector<std::pair<int, int>>& class_counts,
                                      const WorldParams& params) {
  for (int restart = 0; restart < 100; ++restart) {
    std::vector<Instance> placed;
    bool failed = false;
    for (const auto& [class_index, count] : class_counts) {
      for (int n = 0; n < count && !failed; ++n) {
        bool ok = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
          const double w = rng.uniform(params.min_object, params.max_object);
          const double h = rng.uniform(params.min_object, params.max_object);
          const double x = rng.uniform(0.0, params.canvas - w);
          const double y = rng.uniform(0.0, params.canvas - h);
          const Box b{x, y, x + w, y + h};
          if (placement_ok(b, class_index, placed)) {
            placed.push_back({class_index, b});
            ok = true;
          }
        }
        failed = !ok;
      }
      if (failed) break;
    }
    if (!failed) return placed;
  }
  throw ConfigError("could not place object instances; enlarge the canvas or reduce counts");
}

Box jittered(WorldSampler& rng, const Box& b, double fraction) {
  const double w = b.width();
  const double h = b.height();
  return {b.x1 + rng.jitter(fraction * w), b.y1 + rng.jitter(fraction * h), b.x2 + rng.jitter(fraction * w),
          b.y2 + rng.jitter(fraction * h)};
}

Box random_part(WorldSampler& rng, const Box& b) {
  const double f = rng.uniform(0.2, 0.5);
  const double wf = rng.uniform(f, 1.0);
  const double hf = f / wf;
  const double pw = wf * b.width();
  const double ph = hf * b.height();
  const double x = rng.uniform(b.x1, b.x2 - pw);
  const double y = rng.uniform(b.y1, b.y2 - ph);
  return {x, y, x + pw, y + ph};
}

std::string class_name(int index) { return "class" + std::to_string(index); }

}  // namespace

std::vector<ImageRecord> generate_world(const RefinementConfig& config, int num_images, int class_count,
                                        const WorldParams& params) {
  validate(config);
  if (num_images < 1) throw ConfigError("num_images must be >= 1");
  if (class_count < 1) throw ConfigError("class_count must be >= 1");
  if (params.min_count < 1 || params.max_count < params.min_count || params.max_count > kMaxAnnotatedCount) {
    throw ConfigError("instance counts must satisfy 1 <= min_count <= max_count <= 15");
  }
  if (params.tight_per_instance < 1 || params.parts_per_instance < 1 || params.background_per_image < 1) {
    throw ConfigError("every proposal kind needs at least one proposal");
  }
  if (!(params.min_object > 0.0 && params.max_object >= params.min_object && params.canvas > params.max_object)) {
    throw ConfigError("invalid object size range");
  }

  WorldSampler rng(config.seed);
  const int dim = config.feature_dim;

  std::vector<Eigen::VectorXd> signatures;
  std::vector<Eigen::VectorXd> composites;
  for (int c = 0; c < class_count; ++c) {
    signatures.push_back(rng.gaussian(dim, 1.0));
  }
  for (int c = 0; c < class_count; ++c) {
    Eigen::VectorXd offset = rng.gaussian(dim, 1.0);
    offset *= params.composite_strength * signatures[c].norm() / offset.norm();
    composites.push_back(offset);
  }

  std::vector<std::string> names;
  for (int c = 0; c < class_count; ++c) names.push_back(class_name(c));

  std::vector<ImageRecord> world;
  world.reserve(static_cast<std::size_t>(num_images));
  for (int i = 0; i < num_images; ++i) {
    ImageRecord image;
    image.image_id = "img" + std::to_string(i);

    std::vector<int> order(static_cast<std::size_t>(class_count));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const int positives = rng.uniform_int(1, std::min(params.max_positive_classes, class_count));
    std::vector<std::pair<int, int>> class_counts;
    for (int p = 0; p < positives; ++p) {
      class_counts.emplace_back(order[static_cast<std::size_t>(p)], rng.uniform_int(params.min_count, params.max_count));
    }
    std::sort(class_counts.begin(), class_counts.end());

    const auto instances = place_instances(rng, class_counts, params);

    int next_id = 0;
    auto add_proposal = [&](const Box& box, int owner, Provenance prov, Eigen::VectorXd feature) {
      Proposal p;
      p.region_id = next_id++;
      p.box = box;
      p.feature = std::move(feature);
      p.provenance = prov;
      double base = kBackgroundScore;
      switch (prov) {
        case Provenance::merged: base = kMergedScore; break;
        case Provenance::tight: base = kTightScore; break;
        case Provenance::part: base = kPartScore; break;
        case Provenance::background: base = kBackgroundScore; break;
      }
      for (int c = 0; c < class_count; ++c) {
        const double b = (c == owner) ? base : kBackgroundScore;
        p.scores[names[static_cast<std::size_t>(c)]] = std::clamp(b + rng.jitter(kScoreNoise), 0.0, 1.0);
      }
      image.proposals.push_back(std::move(p));
    };

    for (const auto& [class_index, count] : class_counts) {
      const auto& sig = signatures[static_cast<std::size_t>(class_index)];
      std::vector<Box> members;
      for (const auto& inst : instances) {
        if (inst.class_index == class_index) members.push_back(inst.box);
      }
      ClassEntry entry;
      entry.gt_boxes = members;
      entry.count = std::min(count, kMaxAnnotatedCount);
      image.classes.emplace(names[static_cast<std::size_t>(class_index)], entry);

      for (const auto& gt : members) {
        for (int t = 0; t < params.tight_per_instance; ++t) {
          add_proposal(jittered(rng, gt, kTightJitter), class_index, Provenance::tight,
                       sig + rng.gaussian(dim, params.tight_noise));
        }
        for (int t = 0; t < params.parts_per_instance; ++t) {
          add_proposal(random_part(rng, gt), class_index, Provenance::part, sig + rng.gaussian(dim, params.part_noise));
        }
      }

      // Merged boxes enclose every jittered tight box of their members.
      auto merged_over = [&](const std::vector<std::size_t>& idx) {
        Box h = expand(members[idx.front()], kTightJitter);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
        for (std::size_t m : idx) {
          h = hull(h, expand(members[m], kTightJitter));
          mean += sig;
        }
        mean /= static_cast<double>(idx.size());
        add_proposal(h, class_index, Provenance::merged,
                     mean + composites[static_cast<std::size_t>(class_index)] + rng.gaussian(dim, params.tight_noise));
      };
      if (members.size() >= 2) {
        std::vector<std::size_t> all(members.size());
        std::iota(all.begin(), all.end(), 0);
        merged_over(all);
      }
      if (members.size() >= 3) {
        const int a = rng.uniform_int(0, static_cast<int>(members.size()) - 1);
        int b = rng.uniform_int(0, static_cast<int>(members.size()) - 2);
        if (b >= a) ++b;
        merged_over({static_cast<std::size_t>(std::min(a, b)), static_cast<std::size_t>(std::max(a, b))});
      }
    }

    for (int n = 0; n < params.background_per_image; ++n) {
      const double w = rng.uniform(10.0, 80.0);
      const double h = rng.uniform(10.0, 80.0);
      const double x = rng.uniform(0.0, params.canvas - w);
      const double y = rng.uniform(0.0, params.canvas - h);
      add_proposal({x, y, x + w, y + h}, -1, Provenance::background, rng.gaussian(dim, 1.0));
    }
    world.push_back(std::move(image));
  }
  return world;
}

// ---------------------------------------------------------------------------
// Scoring

double cosine_score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw FeatureDimensionError("feature dimension " + std::to_string(a.size()) + " does not match " +
                                std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.5;
  const double cosine = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::clamp((1.0 + cosine) / 2.0, 0.0, 1.0);
}

const Eigen::VectorXd& CentroidScorer::prototype(const std::string& class_id) const {
  auto it = prototypes_.find(class_id);
  if (it == prototypes_.end()) throw ConfigError("no prototype for class " + class_id);
  return it->second;
}

void CentroidScorer::set_prototype(const std::string& class_id, Eigen::VectorXd prototype) {
  if (dim_ == 0) dim_ = static_cast<int>(prototype.size());
  if (prototype.size() != dim_) {
    throw FeatureDimensionError("prototype dimension " + std::to_string(prototype.size()) + " does not match " +
                                std::to_string(dim_));
  }
  if (!prototype.allFinite()) throw ConfigError("prototype for " + class_id + " is not finite");
  prototypes_[class_id] = std::move(prototype);
}

double CentroidScorer::score(const std::string& class_id, const Eigen::VectorXd& feature) const {
  return cosine_score(feature, prototype(class_id));
}

ScoreTable initial_scores(const ImageRecord& image, std::span<const std::string> classes) {
  ScoreTable table;
  for (const auto& c : classes) {
    auto& col = table[c];
    col.reserve(image.proposals.size());
    for (const auto& p : image.proposals) {
      auto it = p.scores.find(c);
      col.push_back(it == p.scores.end() ? 0.0 : it->second);
    }
  }
  return table;
}

ScoreTable score_proposals(const CentroidScorer& scorer, const ImageRecord& image,
                           std::span<const std::string> classes, const ScoreTable* fallback) {
  ScoreTable table;
  for (const auto& c : classes) {
    auto& col = table[c];
    if (!scorer.has_prototype(c)) {
      if (fallback != nullptr && fallback->count(c)) {
        col = fallback->at(c);
      } else {
        col.assign(image.proposals.size(), 0.5);
      }
      continue;
    }
    col.reserve(image.proposals.size());
    for (const auto& p : image.proposals) {
      if (p.feature.size() == 0) {
        throw FeatureDimensionError("image " + image.image_id + " region " + std::to_string(p.region_id) +
                                    " has no feature vector");
      }
      col.push_back(scorer.score(c, p.feature));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Pseudo ground truth

namespace {

std::vector<ScoredRegion> regions_for(const ImageRecord& image, std::span<const double> class_scores) {
  if (class_scores.size() != image.proposals.size()) {
    throw ConfigError("image " + image.image_id + ": score column does not match the proposal list");
  }
  std::vector<ScoredRegion> regions;
  regions.reserve(image.proposals.size());
  for (std::size_t i = 0; i < image.proposals.size(); ++i) {
    regions.push_back({image.proposals[i].box, class_scores[i], image.proposals[i].region_id});
  }
  return regions;
}

const Proposal& proposal_by_id(const ImageRecord& image, int region_id) {
  auto it = std::find_if(image.proposals.begin(), image.proposals.end(),
                         [&](const Proposal& p) { return p.region_id == region_id; });
  if (it == image.proposals.end()) {
    throw ConfigError("image " + image.image_id + ": unknown region_id " + std::to_string(region_id));
  }
  return *it;
}

}  // namespace

PseudoGtSet select_pseudo_gt(const ImageRecord& image, std::size_t image_index, const std::string& class_id,
                             std::span<const double> class_scores, const RefinementConfig& config,
                             double min_area) {
  PseudoGtSet out;
  out.image_index = image_index;
  out.class_id = class_id;
  auto it = image.classes.find(class_id);
  const int count = it == image.classes.end() ? 0 : it->second.count;
  if (count == 0) return out;
  if (image.proposals.empty()) {
    out.empty_proposals = true;
    return out;
  }
  auto regions = regions_for(image, class_scores);
  if (min_area > 0.0) regions = filter_by_min_size(regions, min_area);
  if (regions.empty()) {
    out.empty_proposals = true;
    return out;
  }
  const auto kept = nms(regions, config.nms_threshold);
  SelectionProblem problem;
  problem.regions = kept;
  problem.count = config.count_guided ? cap_count(count, config.k) : 1;
  problem.threshold = config.threshold;
  out.selection = crs_greedy(problem);
  return out;
}

CentroidScorer retrain_scorer(std::span<const PseudoGtSet> pseudo_gt, std::span<const ImageRecord> world,
                              const CentroidScorer& previous) {
  std::map<std::string, std::pair<Eigen::VectorXd, std::size_t>> sums;
  for (const auto& set : pseudo_gt) {
    if (set.image_index >= world.size()) throw ConfigError("pseudo-GT set refers to a missing image");
    const auto& image = world[set.image_index];
    for (int id : set.selection.selected) {
      const auto& p = proposal_by_id(image, id);
      if (p.feature.size() == 0) {
        throw FeatureDimensionError("image " + image.image_id + " region " + std::to_string(id) +
                                    " has no feature vector");
      }
      auto& [sum, n] = sums[set.class_id];
      if (n == 0) {
        sum = p.feature;
      } else {
        if (sum.size() != p.feature.size()) throw FeatureDimensionError("inconsistent feature dimensions");
        sum += p.feature;
      }
      ++n;
    }
  }
  CentroidScorer next = previous;
  for (auto& [class_id, acc] : sums) {
    next.set_prototype(class_id, acc.first / static_cast<double>(acc.second));
  }
  next.mark_trained();
  return next;
}

std::vector<Detection> detections_from_scores(std::span<const ImageRecord> world, std::span<const ScoreTable> scores,
                                              std::span<const std::string> classes, double nms_threshold) {
  std::vector<Detection> out;
  for (std::size_t i = 0; i < world.size(); ++i) {
    for (const auto& c : classes) {
      const auto& col = scores[i].at(c);
      for (const auto& r : nms(regions_for(world[i], col), nms_threshold)) {
        out.push_back({world[i].image_id, c, r.box, r.score});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alternating refinement

namespace {

EvalReport evaluate_scores(std::span<const ImageRecord> world, std::span<const ScoreTable> scores,
                           std::span<const std::string> classes, std::span<const ImageGroundTruth> gt,
                           const RefinementConfig& config) {
  const auto dets = detections_from_scores(world, scores, classes, config.nms_threshold);
  const EvalOptions options{config.ap_mode, config.corloc_variant, kMatchIou};
  EvalReport report;
  static_cast<EvalMetrics&>(report) = evaluate(dets, gt, options);
  report.buckets = slice_by_count(dets, gt, options);
  return report;
}

int feature_dim_of(std::span<const ImageRecord> world) {
  for (const auto& image : world) {
    for (const auto& p : image.proposals) {
      if (p.feature.size() > 0) return static_cast<int>(p.feature.size());
    }
  }
  throw FeatureDimensionError("the world carries no feature vectors");
}

}  // namespace

RefinementReport run_adr(std::span<const ImageRecord> world, const RefinementConfig& config) {
  validate(config);
  if (world.empty()) throw ConfigError("refinement needs at least one image");
  for (const auto& image : world) validate(image);

  RefinementReport report;
  report.config = config;
  report.num_images = world.size();
  report.classes = class_names(world);
  const auto gt = ground_truth_of(world);

  std::vector<ScoreTable> scores;
  scores.reserve(world.size());
  for (const auto& image : world) scores.push_back(initial_scores(image, report.classes));
  report.initial = evaluate_scores(world, scores, report.classes, gt, config);

  CentroidScorer scorer(feature_dim_of(world));
  for (int it = 1; it <= config.iterations; ++it) {
    IterationMetrics m;
    m.iteration = it;

    std::vector<PseudoGtSet> sets;
    std::vector<SelectionCase> cases;
    for (std::size_t i = 0; i < world.size(); ++i) {
      for (const auto& [class_id, entry] : world[i].classes) {
        if (entry.count < 1) continue;
        auto set = select_pseudo_gt(world[i], i, class_id, scores[i].at(class_id), config);
        SelectionCase sc;
        sc.gt_boxes = entry.gt_boxes;
        for (int id : set.selection.selected) sc.selected.push_back(proposal_by_id(world[i], id).box);
        m.selected_regions += set.selection.selected.size();
        if (!set.selection.complete) ++m.incomplete_sets;
        if (!entry.gt_boxes.empty()) cases.push_back(std::move(sc));
        sets.push_back(std::move(set));
      }
    }
    m.purity = purity(cases);

    scorer = retrain_scorer(sets, world, scorer);
    std::vector<ScoreTable> next;
    next.reserve(world.size());
    for (std::size_t i = 0; i < world.size(); ++i) {
      next.push_back(score_proposals(scorer, world[i], report.classes, &scores[i]));
    }
    scores = std::move(next);

    m.eval = evaluate_scores(world, scores, report.classes, gt, config);
    m.eval.purity = m.purity;
    report.iterations.push_back(std::move(m));
  }
  report.final_scorer = scorer;
  return report;
}

}  // namespace crskit
