#include "crskit/annotation.hpp"

#include <algorithm>

#include "crskit/errors.hpp"

namespace crskit {

std::vector<CountAnnotation> counts_from_ground_truth(std::span<const ImageGroundTruth> images) {
  std::vector<CountAnnotation> out;
  for (const auto& image : images) {
    for (const auto& [class_id, boxes] : image.boxes) {
      for (const auto& b : boxes) validate(b);
      const int n = static_cast<int>(std::min<std::size_t>(boxes.size(), kMaxAnnotatedCount));
      out.push_back({image.image_id, class_id, n});
    }
  }
  return out;
}

int cap_count(int count, int k) {
  if (k < 1) throw ConfigError("count cap k must be >= 1, got " + std::to_string(k));
  return std::min(count, k);
}

std::vector<CountAnnotation> cap_counts(std::span<const CountAnnotation> annotations, int k) {
  std::vector<CountAnnotation> out(annotations.begin(), annotations.end());
  for (auto& a : out) a.count = cap_count(a.count, k);
  return out;
}

}  // namespace crskit
