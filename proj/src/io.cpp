#include "crskit/io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "crskit/errors.hpp"

namespace crskit::io {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& path, const std::string& what) {
  throw ParseError(line, path, what);
}

const json& member(const json& obj, const char* key, std::size_t line, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(line, path.empty() ? std::string(key) : path + "." + key, "missing field");
  return *it;
}

double as_number(const json& j, std::size_t line, const std::string& path) {
  if (!j.is_number()) fail(line, path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, std::size_t line, const std::string& path) {
  if (!j.is_number_integer()) fail(line, path, "expected an integer");
  return j.get<int>();
}

std::string as_string(const json& j, std::size_t line, const std::string& path) {
  if (!j.is_string()) fail(line, path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, std::size_t line, const std::string& path) {
  if (!j.is_boolean()) fail(line, path, "expected a boolean");
  return j.get<bool>();
}

void check_format_version(const json& j, std::size_t line) {
  auto it = j.find("format_version");
  if (it == j.end()) return;
  if (!it->is_number_integer() || it->get<int>() != kFormatVersion) {
    fail(line, "format_version", "unsupported format version (expected " + std::to_string(kFormatVersion) + ")");
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

template <typename Parse>
auto read_lines(std::istream& in, Parse parse) {
  std::vector<decltype(parse(json{}, std::size_t{}))> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(line, "", std::string("malformed JSON: ") + e.what());
    }
    out.push_back(parse(j, line));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::string to_string(CorLocVariant v) { return v == CorLocVariant::iou50 ? "iou50" : "center"; }
std::string to_string(ApMode m) { return m == ApMode::eleven_point ? "11pt" : "area"; }

CorLocVariant parse_corloc_variant(const std::string& s) {
  if (s == "iou50") return CorLocVariant::iou50;
  if (s == "center") return CorLocVariant::center;
  throw ConfigError("unknown CorLoc variant '" + s + "' (expected iou50 or center)");
}

ApMode parse_ap_mode(const std::string& s) {
  if (s == "11pt") return ApMode::eleven_point;
  if (s == "area") return ApMode::area;
  throw ConfigError("unknown AP mode '" + s + "' (expected 11pt or area)");
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) fail(0, "", "config must be a JSON object");
  check_format_version(j, 0);
  RunConfig cfg;
  auto& r = cfg.refinement;
  for (const auto& [key, value] : j.items()) {
    if (key == "format_version") continue;
    if (key == "T") {
      r.threshold = as_number(value, 0, key);
    } else if (key == "k") {
      r.k = as_int(value, 0, key);
    } else if (key == "nms_threshold") {
      r.nms_threshold = as_number(value, 0, key);
    } else if (key == "iterations") {
      r.iterations = as_int(value, 0, key);
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) fail(0, key, "expected a non-negative integer");
      r.seed = value.get<std::uint64_t>();
    } else if (key == "count_guided") {
      r.count_guided = as_bool(value, 0, key);
    } else if (key == "corloc_variant") {
      r.corloc_variant = parse_corloc_variant(as_string(value, 0, key));
    } else if (key == "ap_mode") {
      r.ap_mode = parse_ap_mode(as_string(value, 0, key));
    } else if (key == "voc_plus_one") {
      cfg.voc_plus_one = as_bool(value, 0, key);
    } else {
      fail(0, key, "unknown config key");
    }
  }
  validate(r);
  return cfg;
}

json to_json(const RunConfig& config) {
  const auto& r = config.refinement;
  return json{{"T", r.threshold},
              {"k", r.k},
              {"nms_threshold", r.nms_threshold},
              {"iterations", r.iterations},
              {"seed", r.seed},
              {"count_guided", r.count_guided},
              {"corloc_variant", to_string(r.corloc_variant)},
              {"ap_mode", to_string(r.ap_mode)},
              {"voc_plus_one", config.voc_plus_one}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(0, "", std::string("malformed JSON in ") + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Dataset

json to_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from_json(const json& j, std::size_t line, const std::string& path) {
  if (!j.is_array() || j.size() != 4) fail(line, path, "expected [x1, y1, x2, y2]");
  Box b{as_number(j[0], line, path + "[0]"), as_number(j[1], line, path + "[1]"), as_number(j[2], line, path + "[2]"),
        as_number(j[3], line, path + "[3]")};
  if (!is_valid(b)) fail(line, path, "invalid box: requires x2 > x1 and y2 > y1");
  return b;
}

json to_json(const ImageRecord& record) {
  json classes = json::object();
  for (const auto& [name, entry] : record.classes) {
    json boxes = json::array();
    for (const auto& b : entry.gt_boxes) boxes.push_back(to_json(b));
    classes[name] = {{"gt_boxes", boxes}, {"count", entry.count}};
  }
  json proposals = json::array();
  for (const auto& p : record.proposals) {
    json jp{{"region_id", p.region_id}, {"box", to_json(p.box)}, {"scores", p.scores}};
    if (p.feature.size() > 0) jp["feature"] = std::vector<double>(p.feature.data(), p.feature.data() + p.feature.size());
    if (p.provenance) jp["provenance"] = std::string(to_string(*p.provenance));
    proposals.push_back(std::move(jp));
  }
  return json{{"format_version", kFormatVersion},
              {"image_id", record.image_id},
              {"classes", classes},
              {"proposals", proposals}};
}

ImageRecord image_record_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) fail(line, "", "expected a JSON object");
  check_format_version(j, line);
  for (const auto& [key, _] : j.items()) {
    if (key != "format_version" && key != "image_id" && key != "classes" && key != "proposals") {
      fail(line, key, "unknown field");
    }
  }
  ImageRecord r;
  r.image_id = as_string(member(j, "image_id", line, ""), line, "image_id");

  const json& classes = member(j, "classes", line, "");
  if (!classes.is_object()) fail(line, "classes", "expected an object");
  for (const auto& [name, entry] : classes.items()) {
    const std::string path = "classes." + name;
    if (!entry.is_object()) fail(line, path, "expected an object");
    ClassEntry ce;
    if (auto it = entry.find("gt_boxes"); it != entry.end()) {
      if (!it->is_array()) fail(line, path + ".gt_boxes", "expected an array");
      for (std::size_t b = 0; b < it->size(); ++b) {
        ce.gt_boxes.push_back(box_from_json((*it)[b], line, path + ".gt_boxes[" + std::to_string(b) + "]"));
      }
    }
    ce.count = as_int(member(entry, "count", line, path), line, path + ".count");
    if (ce.count < 0 || ce.count > kMaxAnnotatedCount) fail(line, path + ".count", "count outside [0, 15]");
    if (!ce.gt_boxes.empty() && static_cast<std::size_t>(ce.count) > ce.gt_boxes.size()) {
      fail(line, path + ".count", "count exceeds the number of GT boxes");
    }
    r.classes.emplace(name, std::move(ce));
  }

  const json& proposals = member(j, "proposals", line, "");
  if (!proposals.is_array()) fail(line, "proposals", "expected an array");
  std::optional<std::size_t> dim;
  std::set<int> ids;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const std::string path = "proposals[" + std::to_string(i) + "]";
    const json& jp = proposals[i];
    if (!jp.is_object()) fail(line, path, "expected an object");
    Proposal p;
    p.region_id = as_int(member(jp, "region_id", line, path), line, path + ".region_id");
    if (!ids.insert(p.region_id).second) fail(line, path + ".region_id", "duplicate region_id");
    p.box = box_from_json(member(jp, "box", line, path), line, path + ".box");
    const json& scores = member(jp, "scores", line, path);
    if (!scores.is_object()) fail(line, path + ".scores", "expected an object");
    for (const auto& [name, s] : scores.items()) {
      const double v = as_number(s, line, path + ".scores." + name);
      if (!(v >= 0.0 && v <= 1.0)) fail(line, path + ".scores." + name, "score outside [0, 1]");
      p.scores[name] = v;
    }
    if (auto it = jp.find("feature"); it != jp.end()) {
      if (!it->is_array()) fail(line, path + ".feature", "expected an array");
      if (dim && *dim != it->size()) fail(line, path + ".feature", "feature dimension differs from earlier proposals");
      dim = it->size();
      p.feature.resize(static_cast<Eigen::Index>(it->size()));
      for (std::size_t f = 0; f < it->size(); ++f) {
        p.feature[static_cast<Eigen::Index>(f)] = as_number((*it)[f], line, path + ".feature[" + std::to_string(f) + "]");
      }
    }
    if (auto it = jp.find("provenance"); it != jp.end()) {
      auto prov = parse_provenance(as_string(*it, line, path + ".provenance"));
      if (!prov) fail(line, path + ".provenance", "expected tight, merged, part or background");
      p.provenance = prov;
    }
    r.proposals.push_back(std::move(p));
  }
  try {
    validate(r);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    fail(line, "", e.what());
  }
  return r;
}

std::vector<ImageRecord> read_dataset(std::istream& in) {
  auto records = read_lines(in, [](const json& j, std::size_t line) { return image_record_from_json(j, line); });
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!seen.insert(records[i].image_id).second) {
      throw ParseError(0, "image_id", "duplicate image_id " + records[i].image_id);
    }
  }
  return records;
}

std::vector<ImageRecord> load_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const std::vector<ImageRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset(out, records);
}

// ---------------------------------------------------------------------------
// Detections

json to_json(const Detection& d) {
  return json{{"image_id", d.image_id}, {"class_id", d.class_id}, {"box", to_json(d.box)}, {"confidence", d.confidence}};
}

std::vector<Detection> read_detections(std::istream& in) {
  return read_lines(in, [](const json& j, std::size_t line) {
    if (!j.is_object()) fail(line, "", "expected a JSON object");
    Detection d;
    d.image_id = as_string(member(j, "image_id", line, ""), line, "image_id");
    d.class_id = as_string(member(j, "class_id", line, ""), line, "class_id");
    d.box = box_from_json(member(j, "box", line, ""), line, "box");
    d.confidence = as_number(member(j, "confidence", line, ""), line, "confidence");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) fail(line, "confidence", "confidence outside [0, 1]");
    return d;
  });
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_detections(in);
}

void write_detections(std::ostream& out, const std::vector<Detection>& detections) {
  for (const auto& d : detections) out << to_json(d).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Reports

json to_json(const SelectionResult& r) {
  return json{{"selected", r.selected}, {"total_score", r.total_score}, {"complete", r.complete}};
}

json to_json(const EvalMetrics& m) {
  return json{{"ap", m.ap},
              {"mAP", optional_number(m.mean_ap)},
              {"corloc", m.corloc},
              {"mean_corloc", optional_number(m.mean_corloc)},
              {"purity", optional_number(m.purity)}};
}

json to_json(const EvalReport& r) {
  json j = to_json(static_cast<const EvalMetrics&>(r));
  json buckets = json::object();
  for (const auto& [label, metrics] : r.buckets) buckets[label] = metrics ? to_json(*metrics) : json(nullptr);
  j["by_count"] = buckets;
  return j;
}

json to_json(const RefinementReport& r) {
  RunConfig rc;
  rc.refinement = r.config;
  rc.voc_plus_one = geometry::voc_plus_one();
  json iterations = json::array();
  for (const auto& m : r.iterations) {
    iterations.push_back({{"iteration", m.iteration},
                          {"purity", optional_number(m.purity)},
                          {"selected_regions", m.selected_regions},
                          {"incomplete_sets", m.incomplete_sets},
                          {"eval", to_json(m.eval)}});
  }
  json prototypes = json::object();
  for (const auto& [name, v] : r.final_scorer.prototypes()) {
    prototypes[name] = std::vector<double>(v.data(), v.data() + v.size());
  }
  return json{{"format_version", kFormatVersion},
              {"kind", "refinement"},
              {"config", to_json(rc)},
              {"num_images", r.num_images},
              {"classes", r.classes},
              {"initial", to_json(r.initial)},
              {"iterations", iterations},
              {"final_prototypes", prototypes}};
}

void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// Text rendering

namespace {

std::string fmt(const json& v) {
  if (v.is_null()) return "n/a";
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v.get<double>();
    return os.str();
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void render_metrics(std::ostringstream& os, const json& m, const std::string& indent) {
  os << indent << "mAP " << fmt(m.value("mAP", json())) << "  mean CorLoc " << fmt(m.value("mean_corloc", json()))
     << "  purity " << fmt(m.value("purity", json())) << '\n';
  if (m.contains("ap")) {
    for (const auto& [cls, ap] : m["ap"].items()) {
      const json cl = m.contains("corloc") ? m["corloc"].value(cls, json()) : json();
      os << indent << "  " << cls << ": AP " << fmt(ap) << "  CorLoc " << fmt(cl) << '\n';
    }
  }
  if (m.contains("by_count")) {
    for (const auto& [bucket, bm] : m["by_count"].items()) {
      if (bm.is_null()) {
        os << indent << "  count " << bucket << ": (empty)\n";
      } else {
        os << indent << "  count " << bucket << ": mAP " << fmt(bm.value("mAP", json())) << "  mean CorLoc "
           << fmt(bm.value("mean_corloc", json())) << '\n';
      }
    }
  }
}

}  // namespace

std::string render_report(const json& report) {
  if (!report.is_object()) throw ConfigError("report must be a JSON object");
  const std::string kind = report.value("kind", "");
  std::ostringstream os;
  if (kind == "refinement") {
    const auto& cfg = report.at("config");
    os << "Alternating refinement over " << report.at("num_images").get<std::size_t>() << " images ("
       << (cfg.at("count_guided").get<bool>() ? "count-guided" : "top-1 baseline") << ", T=" << fmt(cfg.at("T"))
       << ", k=" << cfg.at("k").dump() << ")\n";
    os << "initial detector:\n";
    render_metrics(os, report.at("initial"), "  ");
    for (const auto& it : report.at("iterations")) {
      os << "iteration " << it.at("iteration").dump() << ": " << it.at("selected_regions").dump()
         << " pseudo-GT regions, " << it.at("incomplete_sets").dump() << " incomplete sets, purity "
         << fmt(it.at("purity")) << '\n';
      render_metrics(os, it.at("eval"), "  ");
    }
  } else if (kind == "evaluation") {
    os << "Detection evaluation (" << fmt(report.value("ap_mode", json())) << " AP, "
       << fmt(report.value("corloc_variant", json())) << " CorLoc)\n";
    render_metrics(os, report.at("metrics"), "  ");
  } else if (kind == "selection") {
    os << "Region selection: " << report.at("selections").size() << " image/class problems\n";
    for (const auto& s : report.at("selections")) {
      os << "  " << s.at("image_id").get<std::string>() << " / " << s.at("class_id").get<std::string>() << " (C="
         << s.at("effective_count").dump() << "): ";
      for (const auto& r : s.at("regions")) os << r.at("region_id").dump() << ' ';
      os << "total " << fmt(s.at("total_score")) << (s.at("complete").get<bool>() ? "" : " [incomplete]") << '\n';
    }
  } else if (kind == "oracle") {
    os << "Greedy vs exact selection over " << report.at("instances").dump() << " instances\n";
    for (const char* mode : {"directional", "symmetric"}) {
      const auto& m = report.at(mode);
      os << "  " << mode << ": match rate " << fmt(m.at("match_rate")) << ", mean gap " << fmt(m.at("mean_score_gap"))
         << ", max gap " << fmt(m.at("max_score_gap")) << ", greedy above exact " << m.at("greedy_above_exact").dump()
         << '\n';
    }
  } else if (kind == "nms") {
    os << "Non-maximum suppression: " << report.at("results").size() << " image/class lists\n";
    for (const auto& r : report.at("results")) {
      os << "  " << r.at("image_id").get<std::string>() << " / " << r.at("class_id").get<std::string>() << ": "
         << r.at("kept").size() << " kept\n";
    }
  } else {
    throw ConfigError("unknown report kind '" + kind + "'");
  }
  return os.str();
}

}  // namespace crskit::io
