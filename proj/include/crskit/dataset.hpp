#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "crskit/annotation.hpp"
#include "crskit/geometry.hpp"

namespace crskit {

enum class Provenance { tight, merged, part, background };

std::string_view to_string(Provenance p);
std::optional<Provenance> parse_provenance(std::string_view s);

struct Proposal {
  int region_id = 0;
  Box box;
  Eigen::VectorXd feature;                // empty when the record carries none
  std::map<std::string, double> scores;   // class -> confidence in [0, 1]
  std::optional<Provenance> provenance;
};

struct ClassEntry {
  std::vector<Box> gt_boxes;
  int count = 0;
};

/// One image: per-class ground truth and count, plus scored proposals.
struct ImageRecord {
  std::string image_id;
  std::map<std::string, ClassEntry> classes;
  std::vector<Proposal> proposals;
};

/// Sorted union of the class names appearing in GT entries or proposal scores.
std::vector<std::string> class_names(std::span<const ImageRecord> records);

std::vector<ImageGroundTruth> ground_truth_of(std::span<const ImageRecord> records);

/// Checks record invariants (valid boxes, scores in [0, 1], unique region ids,
/// counts in [0, 15], uniform feature dimension). Throws Error subclasses.
void validate(const ImageRecord& record);

}  // namespace crskit
