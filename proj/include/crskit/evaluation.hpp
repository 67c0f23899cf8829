#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crskit/annotation.hpp"
#include "crskit/geometry.hpp"

namespace crskit {

struct Detection {
  std::string image_id;
  std::string class_id;
  Box box;
  double confidence = 0.0;  // in [0, 1]
};

enum class ApMode { eleven_point, area };
enum class CorLocVariant { iou50, center };

inline constexpr double kMatchIou = 0.5;

/// Stable sort by descending confidence, ties by image_id, then input order.
std::vector<Detection> sort_detections(std::span<const Detection> detections);

/// Greedy TP/FP labelling of detections already in ranked order. A detection is
/// a true positive iff it reaches `iou_threshold` with a still-unmatched GT box
/// of its class in its image; the best such box is consumed.
std::vector<bool> match_detections(std::span<const Detection> ranked, std::span<const ImageGroundTruth> ground_truth,
                                   double iou_threshold = kMatchIou);

struct ApValue {
  double value = 0.0;
  bool present = false;  // false when there is no ground truth to recall
};

/// VOC average precision from ranked TP/FP labels.
ApValue average_precision(const std::vector<bool>& ranked_labels, std::size_t num_gt,
                          ApMode mode = ApMode::eleven_point);

/// One positive image for one class: its best detection (if any) and GT boxes.
struct LocalizationCase {
  std::optional<Box> top_detection;
  std::vector<Box> gt_boxes;
};

bool localizes(const LocalizationCase& c, CorLocVariant variant);

/// Fraction of cases whose top detection localizes an instance. Empty input
/// yields nullopt.
std::optional<double> corloc(std::span<const LocalizationCase> cases, CorLocVariant variant = CorLocVariant::iou50);

/// Selected regions of one image/class together with that class's GT boxes.
struct SelectionCase {
  std::vector<Box> selected;
  std::vector<Box> gt_boxes;
};

/// True when `region` reaches IoU 0.5 with exactly one of `gt_boxes`.
bool is_pure(const Box& region, std::span<const Box> gt_boxes);

/// Fraction of selected regions that cover exactly one instance; nullopt when
/// nothing was selected.
std::optional<double> purity(std::span<const SelectionCase> cases);

struct EvalOptions {
  ApMode ap_mode = ApMode::eleven_point;
  CorLocVariant corloc_variant = CorLocVariant::iou50;
  double iou_threshold = kMatchIou;
};

struct EvalMetrics {
  std::map<std::string, double> ap;      // classes with at least one GT box
  std::optional<double> mean_ap;
  std::map<std::string, double> corloc;  // classes with at least one positive image
  std::optional<double> mean_corloc;
  std::optional<double> purity;
};

struct EvalReport : EvalMetrics {
  // Label ("1", "2", "3", "4+") -> metrics restricted to that count bucket.
  std::vector<std::pair<std::string, std::optional<EvalMetrics>>> buckets;
};

EvalMetrics evaluate(std::span<const Detection> detections, std::span<const ImageGroundTruth> ground_truth,
                     const EvalOptions& options = {});

/// Count bucket of a per-class GT count: "1", "2", "3" or "4+".
std::string count_bucket(std::size_t count);
inline const std::vector<std::string>& count_bucket_labels() {
  static const std::vector<std::string> labels{"1", "2", "3", "4+"};
  return labels;
}

/// Metrics recomputed per count bucket. Each bucket keeps the positive
/// image/class pairs whose GT count falls into it; images where a class is
/// absent stay in every bucket as negatives. Empty buckets are nullopt.
std::vector<std::pair<std::string, std::optional<EvalMetrics>>> slice_by_count(
    std::span<const Detection> detections, std::span<const ImageGroundTruth> ground_truth,
    const EvalOptions& options = {});

}  // namespace crskit
