#include "crskit/dataset.hpp"

#include <unordered_set>

#include "crskit/errors.hpp"

namespace crskit {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::tight: return "tight";
    case Provenance::merged: return "merged";
    case Provenance::part: return "part";
    case Provenance::background: return "background";
  }
  return "background";
}

std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "tight") return Provenance::tight;
  if (s == "merged") return Provenance::merged;
  if (s == "part") return Provenance::part;
  if (s == "background") return Provenance::background;
  return std::nullopt;
}

std::vector<std::string> class_names(std::span<const ImageRecord> records) {
  std::set<std::string> names;
  for (const auto& r : records) {
    for (const auto& [name, _] : r.classes) names.insert(name);
    for (const auto& p : r.proposals) {
      for (const auto& [name, _] : p.scores) names.insert(name);
    }
  }
  return {names.begin(), names.end()};
}

std::vector<ImageGroundTruth> ground_truth_of(std::span<const ImageRecord> records) {
  std::vector<ImageGroundTruth> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    ImageGroundTruth gt{r.image_id, {}};
    for (const auto& [name, entry] : r.classes) {
      if (!entry.gt_boxes.empty()) gt.boxes.emplace(name, entry.gt_boxes);
    }
    out.push_back(std::move(gt));
  }
  return out;
}

void validate(const ImageRecord& record) {
  const std::string where = "image " + record.image_id + ": ";
  for (const auto& [name, entry] : record.classes) {
    for (const auto& b : entry.gt_boxes) validate(b);
    if (entry.count < 0 || entry.count > kMaxAnnotatedCount) {
      throw ConfigError(where + "class " + name + ": count " + std::to_string(entry.count) + " outside [0, " +
                        std::to_string(kMaxAnnotatedCount) + "]");
    }
    if (!entry.gt_boxes.empty() && static_cast<std::size_t>(entry.count) > entry.gt_boxes.size()) {
      throw ConfigError(where + "class " + name + ": count exceeds the number of GT boxes");
    }
  }
  std::unordered_set<int> ids;
  std::optional<Eigen::Index> dim;
  for (const auto& p : record.proposals) {
    validate(p.box);
    if (!ids.insert(p.region_id).second) {
      throw ConfigError(where + "duplicate region_id " + std::to_string(p.region_id));
    }
    for (const auto& [name, s] : p.scores) {
      if (!(s >= 0.0 && s <= 1.0)) {
        throw ConfigError(where + "region " + std::to_string(p.region_id) + ": score for " + name +
                          " outside [0, 1]");
      }
    }
    if (p.feature.size() > 0) {
      if (!p.feature.allFinite()) {
        throw ConfigError(where + "region " + std::to_string(p.region_id) + ": non-finite feature");
      }
      if (dim && *dim != p.feature.size()) {
        throw FeatureDimensionError(where + "feature dimension " + std::to_string(p.feature.size()) +
                                    " differs from " + std::to_string(*dim));
      }
      dim = p.feature.size();
    }
  }
}

}  // namespace crskit
