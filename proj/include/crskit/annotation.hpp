#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "crskit/geometry.hpp"

namespace crskit {

/// Upper bound of the counting interface; larger counts are clamped.
inline constexpr int kMaxAnnotatedCount = 15;
/// Default K: counts are capped at three instances per class.
inline constexpr int kDefaultCountCap = 3;

// Measured annotation times, kept for reference only (seconds).
inline constexpr double kSecondsPerCountSingleObject = 0.90;
inline constexpr double kSecondsPerImageCount = 1.48;

struct CountAnnotation {
  std::string image_id;
  std::string class_id;
  int count = 0;  // 0 means the class is absent from the image

  friend bool operator==(const CountAnnotation&, const CountAnnotation&) = default;
};

/// Ground-truth boxes of one image, grouped by class.
struct ImageGroundTruth {
  std::string image_id;
  std::map<std::string, std::vector<Box>> boxes;
};

/// One annotation per (image, class) entry present in the ground truth, in
/// image order and then class-name order. Counts are clamped to 15.
std::vector<CountAnnotation> counts_from_ground_truth(std::span<const ImageGroundTruth> images);

/// Replaces every count with min(count, k). Throws ConfigError for k < 1.
std::vector<CountAnnotation> cap_counts(std::span<const CountAnnotation> annotations, int k = kDefaultCountCap);

int cap_count(int count, int k);

}  // namespace crskit
