#include "crskit/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "crskit/errors.hpp"

namespace crskit {

namespace {

using GtIndex = std::unordered_map<std::string, const ImageGroundTruth*>;

GtIndex index_ground_truth(std::span<const ImageGroundTruth> ground_truth) {
  GtIndex index;
  for (const auto& image : ground_truth) {
    if (!index.emplace(image.image_id, &image).second) {
      throw ConfigError("duplicate image_id in ground truth: " + image.image_id);
    }
  }
  return index;
}

const std::vector<Box>* find_boxes(const GtIndex& index, const std::string& image_id, const std::string& class_id) {
  auto it = index.find(image_id);
  if (it == index.end()) return nullptr;
  auto jt = it->second->boxes.find(class_id);
  if (jt == it->second->boxes.end()) return nullptr;
  return &jt->second;
}

std::optional<double> mean_of(const std::map<std::string, double>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [_, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

std::vector<Detection> sort_detections(std::span<const Detection> detections) {
  std::vector<Detection> sorted(detections.begin(), detections.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.image_id < b.image_id;
  });
  return sorted;
}

std::vector<bool> match_detections(std::span<const Detection> ranked, std::span<const ImageGroundTruth> ground_truth,
                                   double iou_threshold) {
  const GtIndex index = index_ground_truth(ground_truth);
  std::map<std::pair<std::string, std::string>, std::vector<bool>> used;
  std::vector<bool> labels;
  labels.reserve(ranked.size());
  for (const auto& det : ranked) {
    const auto* boxes = find_boxes(index, det.image_id, det.class_id);
    if (boxes == nullptr || boxes->empty()) {
      labels.push_back(false);
      continue;
    }
    auto& taken = used[{det.image_id, det.class_id}];
    taken.resize(boxes->size(), false);
    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t g = 0; g < boxes->size(); ++g) {
      if (taken[g]) continue;
      const double o = iou(det.box, (*boxes)[g]);
      if (o > best) {
        best = o;
        best_idx = g;
      }
    }
    const bool tp = best >= iou_threshold;
    if (tp) taken[best_idx] = true;
    labels.push_back(tp);
  }
  return labels;
}

ApValue average_precision(const std::vector<bool>& ranked_labels, std::size_t num_gt, ApMode mode) {
  if (num_gt == 0) return {0.0, false};
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked_labels.size(); ++i) {
    if (ranked_labels[i]) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }

  if (mode == ApMode::eleven_point) {
    double ap = 0.0;
    for (int step = 0; step <= 10; ++step) {
      const double t = step / 10.0;
      double p = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i) {
        if (recall[i] >= t) p = std::max(p, precision[i]);
      }
      ap += p / 11.0;
    }
    return {std::clamp(ap, 0.0, 1.0), true};
  }

  // Area under the precision envelope.
  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) {
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  }
  return {std::clamp(ap, 0.0, 1.0), true};
}

bool localizes(const LocalizationCase& c, CorLocVariant variant) {
  if (!c.top_detection) return false;
  const Box& det = *c.top_detection;
  return std::any_of(c.gt_boxes.begin(), c.gt_boxes.end(), [&](const Box& gt) {
    if (variant == CorLocVariant::iou50) return iou(det, gt) >= kMatchIou;
    return contains_point(gt, det.center_x(), det.center_y());
  });
}

std::optional<double> corloc(std::span<const LocalizationCase> cases, CorLocVariant variant) {
  if (cases.empty()) return std::nullopt;
  const auto hits = std::count_if(cases.begin(), cases.end(),
                                  [&](const LocalizationCase& c) { return localizes(c, variant); });
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

bool is_pure(const Box& region, std::span<const Box> gt_boxes) {
  const auto matches = std::count_if(gt_boxes.begin(), gt_boxes.end(),
                                     [&](const Box& gt) { return iou(region, gt) >= kMatchIou; });
  return matches == 1;
}

std::optional<double> purity(std::span<const SelectionCase> cases) {
  std::size_t total = 0;
  std::size_t pure = 0;
  for (const auto& c : cases) {
    for (const auto& region : c.selected) {
      ++total;
      if (is_pure(region, c.gt_boxes)) ++pure;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(pure) / static_cast<double>(total);
}

EvalMetrics evaluate(std::span<const Detection> detections, std::span<const ImageGroundTruth> ground_truth,
                     const EvalOptions& options) {
  const auto ranked = sort_detections(detections);
  const auto labels = match_detections(ranked, ground_truth, options.iou_threshold);

  std::map<std::string, std::size_t> num_gt;
  for (const auto& image : ground_truth) {
    for (const auto& [class_id, boxes] : image.boxes) {
      if (!boxes.empty()) num_gt[class_id] += boxes.size();
    }
  }

  EvalMetrics metrics;
  for (const auto& [class_id, n] : num_gt) {
    std::vector<bool> class_labels;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (ranked[i].class_id == class_id) class_labels.push_back(labels[i]);
    }
    const ApValue ap = average_precision(class_labels, n, options.ap_mode);
    if (ap.present) metrics.ap[class_id] = ap.value;

    // Top detection per positive image: the first ranked detection wins.
    std::map<std::string, const Detection*> top;
    for (const auto& det : ranked) {
      if (det.class_id == class_id) top.emplace(det.image_id, &det);
    }
    std::vector<LocalizationCase> cases;
    for (const auto& image : ground_truth) {
      auto it = image.boxes.find(class_id);
      if (it == image.boxes.end() || it->second.empty()) continue;
      LocalizationCase c;
      c.gt_boxes = it->second;
      if (auto t = top.find(image.image_id); t != top.end()) c.top_detection = t->second->box;
      cases.push_back(std::move(c));
    }
    if (auto value = corloc(cases, options.corloc_variant)) metrics.corloc[class_id] = *value;
  }
  metrics.mean_ap = mean_of(metrics.ap);
  metrics.mean_corloc = mean_of(metrics.corloc);
  return metrics;
}

std::string count_bucket(std::size_t count) {
  if (count >= 4) return "4+";
  return std::to_string(count);
}

std::vector<std::pair<std::string, std::optional<EvalMetrics>>> slice_by_count(
    std::span<const Detection> detections, std::span<const ImageGroundTruth> ground_truth,
    const EvalOptions& options) {
  std::vector<std::pair<std::string, std::optional<EvalMetrics>>> out;
  for (const auto& label : count_bucket_labels()) {
    std::vector<ImageGroundTruth> subset;
    std::set<std::pair<std::string, std::string>> excluded;
    bool any_positive = false;
    for (const auto& image : ground_truth) {
      ImageGroundTruth kept{image.image_id, {}};
      for (const auto& [class_id, boxes] : image.boxes) {
        if (boxes.empty()) continue;
        if (count_bucket(boxes.size()) == label) {
          kept.boxes.emplace(class_id, boxes);
          any_positive = true;
        } else {
          excluded.emplace(image.image_id, class_id);
        }
      }
      subset.push_back(std::move(kept));
    }
    if (!any_positive) {
      out.emplace_back(label, std::nullopt);
      continue;
    }
    std::vector<Detection> dets;
    for (const auto& d : detections) {
      if (!excluded.count({d.image_id, d.class_id})) dets.push_back(d);
    }
    out.emplace_back(label, evaluate(dets, subset, options));
  }
  return out;
}

}  // namespace crskit
