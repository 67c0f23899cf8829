#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crskit/dataset.hpp"
#include "crskit/evaluation.hpp"
#include "crskit/selection.hpp"

namespace crskit {

inline constexpr std::uint64_t kCanonicalSeed = 20180908;

struct RefinementConfig {
  int iterations = 3;
  double threshold = kDefaultOverlapThreshold;  // T
  int k = kDefaultCountCap;
  double nms_threshold = kDefaultNmsThreshold;
  int feature_dim = 16;
  std::uint64_t seed = kCanonicalSeed;
  bool count_guided = true;
  CorLocVariant corloc_variant = CorLocVariant::iou50;
  ApMode ap_mode = ApMode::eleven_point;
};

/// Throws ConfigError when a field is out of range.
void validate(const RefinementConfig& config);

// Synthetic world ------------------------------------------------------------

struct WorldParams {
  double canvas = 256.0;
  double min_object = 20.0;
  double max_object = 40.0;
  int max_positive_classes = 2;  // per image
  int min_count = 1;
  int max_count = 4;
  int tight_per_instance = 2;
  int parts_per_instance = 2;
  int background_per_image = 8;
  double tight_noise = 0.1;
  double part_noise = 0.3;
  // Norm of the per-class offset that separates the appearance of a box
  // holding several instances from a single-instance box, relative to the
  // class signature norm.
  double composite_strength = 0.8;
};

/// Deterministic synthetic proposal world. Class names are "class0", "class1",
/// ...; every proposal carries a feature, a provenance tag and an initial score
/// for every class that imitates a pretrained detector favouring merged boxes.
std::vector<ImageRecord> generate_world(const RefinementConfig& config, int num_images, int class_count,
                                        const WorldParams& params = {});

// Scoring --------------------------------------------------------------------

/// Per-class prototype vectors; a proposal's score is (1 + cos) / 2.
class CentroidScorer {
 public:
  CentroidScorer() = default;
  explicit CentroidScorer(int feature_dim) : dim_(feature_dim) {}

  int feature_dim() const { return dim_; }
  bool trained() const { return trained_; }
  bool has_prototype(const std::string& class_id) const { return prototypes_.count(class_id) > 0; }
  const Eigen::VectorXd& prototype(const std::string& class_id) const;
  const std::map<std::string, Eigen::VectorXd>& prototypes() const { return prototypes_; }

  void set_prototype(const std::string& class_id, Eigen::VectorXd prototype);
  void mark_trained() { trained_ = true; }

  /// Score in [0, 1]; zero-norm vectors score 0.5.
  double score(const std::string& class_id, const Eigen::VectorXd& feature) const;

 private:
  int dim_ = 0;
  bool trained_ = false;
  std::map<std::string, Eigen::VectorXd> prototypes_;
};

/// Cosine mapped to [0, 1]; 0.5 when either vector has zero norm.
double cosine_score(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// class -> score per proposal (aligned with ImageRecord::proposals).
using ScoreTable = std::map<std::string, std::vector<double>>;

/// Scores the generator / file attached to the proposals.
ScoreTable initial_scores(const ImageRecord& image, std::span<const std::string> classes);

/// Rescores every proposal for every class with a prototype; classes without
/// one fall back to `fallback` when given. Throws FeatureDimensionError on a
/// mismatched or missing feature.
ScoreTable score_proposals(const CentroidScorer& scorer, const ImageRecord& image,
                           std::span<const std::string> classes, const ScoreTable* fallback = nullptr);

// Pseudo ground truth ---------------------------------------------------------

struct PseudoGtSet {
  std::size_t image_index = 0;
  std::string class_id;
  SelectionResult selection;
  bool empty_proposals = false;  // flagged: nothing to select from
};

/// NMS followed by CRS with C = min(count, k) when count-guided, C = 1
/// otherwise. A class with count 0 yields an empty, incomplete result.
/// `min_area` > 0 first drops proposals smaller than that area (size prior).
PseudoGtSet select_pseudo_gt(const ImageRecord& image, std::size_t image_index, const std::string& class_id,
                             std::span<const double> class_scores, const RefinementConfig& config,
                             double min_area = 0.0);

/// Prototype of each class = mean feature of its selected regions; classes
/// without selections keep the prototype of `previous`.
CentroidScorer retrain_scorer(std::span<const PseudoGtSet> pseudo_gt, std::span<const ImageRecord> world,
                              const CentroidScorer& previous);

/// Per-class NMS of the scored proposals, emitted as detections.
std::vector<Detection> detections_from_scores(std::span<const ImageRecord> world, std::span<const ScoreTable> scores,
                                              std::span<const std::string> classes, double nms_threshold);

// Alternating refinement ---------------------------------------------------

struct IterationMetrics {
  int iteration = 0;
  std::optional<double> purity;  // of the pseudo GT selected in this iteration
  std::size_t selected_regions = 0;
  std::size_t incomplete_sets = 0;
  EvalReport eval;  // detector quality after retraining
};

struct RefinementReport {
  RefinementConfig config;
  std::size_t num_images = 0;
  std::vector<std::string> classes;
  EvalReport initial;  // the pretrained detector's scores
  std::vector<IterationMetrics> iterations;
  CentroidScorer final_scorer;
};

/// Alternates pseudo-GT selection and scorer retraining for
/// `config.iterations` rounds, starting from the proposals' own scores.
RefinementReport run_adr(std::span<const ImageRecord> world, const RefinementConfig& config);

}  // namespace crskit
