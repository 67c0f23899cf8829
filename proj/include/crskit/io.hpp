#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "crskit/dataset.hpp"
#include "crskit/evaluation.hpp"
#include "crskit/refinement.hpp"
#include "crskit/selection.hpp"

namespace crskit::io {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Settings shared by every CLI run.
struct RunConfig {
  RefinementConfig refinement;
  bool voc_plus_one = false;
};

/// Accepts T, k, nms_threshold, iterations, seed, count_guided,
/// corloc_variant, ap_mode, voc_plus_one (and format_version); any other key
/// is a ParseError.
RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

std::string to_string(CorLocVariant v);
std::string to_string(ApMode m);
CorLocVariant parse_corloc_variant(const std::string& s);
ApMode parse_ap_mode(const std::string& s);

// Dataset: JSON Lines, one ImageRecord per line.
json to_json(const ImageRecord& record);
/// Throws ParseError naming `line` and the offending field path.
ImageRecord image_record_from_json(const json& j, std::size_t line = 0);

std::vector<ImageRecord> read_dataset(std::istream& in);
std::vector<ImageRecord> load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const std::vector<ImageRecord>& records);
void save_dataset(const std::filesystem::path& path, const std::vector<ImageRecord>& records);

// Detections: JSON Lines of {image_id, class_id, box, confidence}.
json to_json(const Detection& d);
std::vector<Detection> read_detections(std::istream& in);
std::vector<Detection> load_detections(const std::filesystem::path& path);
void write_detections(std::ostream& out, const std::vector<Detection>& detections);

json to_json(const Box& b);
Box box_from_json(const json& j, std::size_t line, const std::string& path);

json to_json(const SelectionResult& r);
json to_json(const EvalMetrics& m);
json to_json(const EvalReport& r);
json to_json(const RefinementReport& r);

/// Human-readable rendering of any report written by the CLI.
std::string render_report(const json& report);

/// Writes `j` followed by a newline; output is stable for identical input.
void write_json(std::ostream& out, const json& j);

}  // namespace crskit::io
