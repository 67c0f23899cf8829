#include "crskit/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "crskit/annotation.hpp"
#include "crskit/errors.hpp"
#include "crskit/io.hpp"
#include "crskit/oracle.hpp"
#include "crskit/refinement.hpp"

namespace crskit {

namespace {

using io::json;

enum class LogLevel { quiet = 0, error = 1, warn = 2, info = 3, debug = 4 };

LogLevel log_level_from_env() {
  const char* v = std::getenv("CRSKIT_LOG");
  if (v == nullptr) return LogLevel::warn;
  const std::string s(v);
  if (s == "quiet" || s == "off") return LogLevel::quiet;
  if (s == "error") return LogLevel::error;
  if (s == "info") return LogLevel::info;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err), level_(log_level_from_env()) {}
  void log(LogLevel level, const std::string& msg) const {
    if (level <= level_) err_ << "crskit: " << msg << '\n';
  }

 private:
  std::ostream& err_;
  LogLevel level_;
};

// Flags shared by the data subcommands; unset values leave the config alone.
struct CommonFlags {
  std::string config_path;
  std::optional<double> threshold;
  std::optional<int> k;
  std::optional<double> nms_threshold;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<bool> count_guided;
  std::optional<std::string> corloc_variant;
  std::optional<std::string> ap_mode;
  bool voc_plus_one = false;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "RunConfig JSON file");
    cmd->add_option("--T", threshold, "asymmetric-overlap threshold T in (0, 1]");
    cmd->add_option("--k", k, "per-class count cap K");
    cmd->add_option("--nms-threshold", nms_threshold, "IoU threshold of the NMS preprocessing");
    cmd->add_option("--iterations", iterations, "refinement iterations");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_flag_callback("--count-guided", [this] { count_guided = true; }, "select C regions per class (default)");
    cmd->add_flag_callback("--no-count-guided", [this] { count_guided = false; }, "select the top region only");
    cmd->add_option("--corloc-variant", corloc_variant, "iou50 or center")->check(CLI::IsMember({"iou50", "center"}));
    cmd->add_option("--ap-mode", ap_mode, "11pt or area")->check(CLI::IsMember({"11pt", "area"}));
    cmd->add_flag("--voc-plus-one", voc_plus_one, "measure extents as x2 - x1 + 1");
    cmd->add_option("--out", out, "output file (default: standard output)");
  }

  io::RunConfig resolve() const {
    io::RunConfig cfg = config_path.empty() ? io::RunConfig{} : io::load_run_config(config_path);
    auto& r = cfg.refinement;
    if (threshold) r.threshold = *threshold;
    if (k) r.k = *k;
    if (nms_threshold) r.nms_threshold = *nms_threshold;
    if (iterations) r.iterations = *iterations;
    if (seed) r.seed = *seed;
    if (count_guided) r.count_guided = *count_guided;
    if (corloc_variant) r.corloc_variant = io::parse_corloc_variant(*corloc_variant);
    if (ap_mode) r.ap_mode = io::parse_ap_mode(*ap_mode);
    if (voc_plus_one) cfg.voc_plus_one = true;
    validate(r);
    return cfg;
  }
};

class OutputSink {
 public:
  OutputSink(const std::string& path, std::ostream& fallback) : fallback_(fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : fallback_; }

 private:
  std::ofstream file_;
  std::ostream& fallback_;
};

json header(const char* kind, const io::RunConfig& cfg) {
  return json{{"format_version", io::kFormatVersion}, {"kind", kind}, {"config", io::to_json(cfg)}};
}

json regions_json(const ImageRecord& image, const std::vector<int>& ids, std::span<const double> scores) {
  json arr = json::array();
  for (int id : ids) {
    for (std::size_t i = 0; i < image.proposals.size(); ++i) {
      if (image.proposals[i].region_id == id) {
        arr.push_back({{"region_id", id}, {"box", io::to_json(image.proposals[i].box)}, {"score", scores[i]}});
      }
    }
  }
  return arr;
}

// ---------------------------------------------------------------------------

int cmd_gen(const CommonFlags& flags, int images, int classes, std::ostream& out, const Logger& log) {
  const auto cfg = flags.resolve();
  const auto world = generate_world(cfg.refinement, images, classes);
  log.log(LogLevel::info, "generated " + std::to_string(world.size()) + " images");
  OutputSink sink(flags.out, out);
  io::write_dataset(sink.stream(), world);
  return kExitOk;
}

int cmd_nms(const CommonFlags& flags, const std::string& dataset, std::ostream& out) {
  const auto cfg = flags.resolve();
  geometry::ScopedVocPlusOne convention(cfg.voc_plus_one);
  const auto records = io::load_dataset(dataset);
  const auto classes = class_names(records);
  json results = json::array();
  for (const auto& image : records) {
    const auto table = initial_scores(image, classes);
    for (const auto& c : classes) {
      std::vector<ScoredRegion> regions;
      for (std::size_t i = 0; i < image.proposals.size(); ++i) {
        regions.push_back({image.proposals[i].box, table.at(c)[i], image.proposals[i].region_id});
      }
      json kept = json::array();
      for (const auto& r : nms(regions, cfg.refinement.nms_threshold)) {
        kept.push_back({{"region_id", r.region_id}, {"box", io::to_json(r.box)}, {"score", r.score}});
      }
      results.push_back({{"image_id", image.image_id}, {"class_id", c}, {"kept", kept}});
    }
  }
  json report = header("nms", cfg);
  report["results"] = results;
  OutputSink sink(flags.out, out);
  io::write_json(sink.stream(), report);
  return kExitOk;
}

int cmd_select(const CommonFlags& flags, const std::string& dataset, double min_area, std::ostream& out) {
  const auto cfg = flags.resolve();
  geometry::ScopedVocPlusOne convention(cfg.voc_plus_one);
  const auto records = io::load_dataset(dataset);
  const auto classes = class_names(records);
  json selections = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& image = records[i];
    const auto table = initial_scores(image, classes);
    for (const auto& [class_id, entry] : image.classes) {
      if (entry.count < 1) continue;
      const auto& scores = table.at(class_id);
      const auto set = select_pseudo_gt(image, i, class_id, scores, cfg.refinement, min_area);
      const int effective = cfg.refinement.count_guided ? cap_count(entry.count, cfg.refinement.k) : 1;
      selections.push_back({{"image_id", image.image_id},
                            {"class_id", class_id},
                            {"count", entry.count},
                            {"effective_count", effective},
                            {"regions", regions_json(image, set.selection.selected, scores)},
                            {"total_score", set.selection.total_score},
                            {"complete", set.selection.complete},
                            {"empty_proposals", set.empty_proposals}});
    }
  }
  json report = header("selection", cfg);
  report["min_area"] = min_area;
  report["selections"] = selections;
  OutputSink sink(flags.out, out);
  io::write_json(sink.stream(), report);
  return kExitOk;
}

json gap_json(const OracleGap& g) {
  return json{{"instances", g.instances},
              {"matches", g.matches},
              {"match_rate", g.match_rate()},
              {"mean_score_gap", g.mean_score_gap},
              {"max_score_gap", g.max_score_gap},
              {"greedy_above_exact", g.greedy_above_exact}};
}

int cmd_oracle(const CommonFlags& flags, int instances, int max_n, int max_count, bool disjoint, std::ostream& out) {
  const auto cfg = flags.resolve();
  if (instances < 1) throw ConfigError("--instances must be >= 1");
  if (max_n < 1 || static_cast<std::size_t>(max_n) > kDefaultEnumerationCap) {
    throw ConfigError("--max-n must lie in [1, " + std::to_string(kDefaultEnumerationCap) + "]");
  }
  geometry::ScopedVocPlusOne convention(cfg.voc_plus_one);
  RandomProblemParams params;
  params.max_regions = max_n;
  params.max_count = max_count;
  params.pairwise_disjoint = disjoint;
  if (flags.threshold) params.threshold = cfg.refinement.threshold;
  std::mt19937_64 rng(cfg.refinement.seed);
  std::vector<SelectionProblem> problems;
  for (int i = 0; i < instances; ++i) problems.push_back(random_problem(rng, params));

  const auto directional = compare_with_exact(problems, ConstraintMode::directional);
  const auto symmetric = compare_with_exact(problems, ConstraintMode::symmetric);
  json report = header("oracle", cfg);
  report["instances"] = instances;
  report["max_n"] = max_n;
  report["max_count"] = max_count;
  report["pairwise_disjoint"] = disjoint;
  report["match_rate"] = directional.match_rate();
  report["mean_score_gap"] = directional.mean_score_gap;
  report["directional"] = gap_json(directional);
  report["symmetric"] = gap_json(symmetric);
  OutputSink sink(flags.out, out);
  io::write_json(sink.stream(), report);
  return kExitOk;
}

int cmd_refine(const CommonFlags& flags, const std::string& dataset, int images, int classes, std::ostream& out,
               const Logger& log) {
  const auto cfg = flags.resolve();
  geometry::ScopedVocPlusOne convention(cfg.voc_plus_one);
  const auto world = dataset.empty() ? generate_world(cfg.refinement, images, classes) : io::load_dataset(dataset);
  const auto report = run_adr(world, cfg.refinement);
  for (const auto& it : report.iterations) {
    log.log(LogLevel::info, "iteration " + std::to_string(it.iteration) + " mean CorLoc " +
                                std::to_string(it.eval.mean_corloc.value_or(0.0)));
  }
  OutputSink sink(flags.out, out);
  io::write_json(sink.stream(), io::to_json(report));
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& dataset, const std::string& detections, std::ostream& out) {
  const auto cfg = flags.resolve();
  geometry::ScopedVocPlusOne convention(cfg.voc_plus_one);
  const auto records = io::load_dataset(dataset);
  const auto dets = io::load_detections(detections);
  const auto gt = ground_truth_of(records);
  const EvalOptions options{cfg.refinement.ap_mode, cfg.refinement.corloc_variant, kMatchIou};
  EvalReport er;
  static_cast<EvalMetrics&>(er) = evaluate(dets, gt, options);
  er.buckets = slice_by_count(dets, gt, options);
  json report = header("evaluation", cfg);
  report["ap_mode"] = io::to_string(options.ap_mode);
  report["corloc_variant"] = io::to_string(options.corloc_variant);
  report["num_detections"] = dets.size();
  report["metrics"] = io::to_json(er);
  OutputSink sink(flags.out, out);
  io::write_json(sink.stream(), report);
  return kExitOk;
}

int cmd_report(const std::string& in_path, const std::string& out_path, std::ostream& out) {
  std::ifstream in(in_path);
  if (!in) throw Error("cannot open " + in_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(0, "", std::string("malformed JSON in ") + in_path + ": " + e.what());
  }
  OutputSink sink(out_path, out);
  sink.stream() << io::render_report(j);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log(err);
  CLI::App app{"Count-guided region selection toolkit", "crskit"};
  app.require_subcommand(1);

  CommonFlags flags;
  int images = 200;
  int classes = 4;
  std::string dataset;
  std::string detections;
  std::string in_path;
  std::string report_out;
  double min_area = 0.0;
  int instances = 100;
  int max_n = 12;
  int max_count = 4;
  bool disjoint = false;

  auto* gen = app.add_subcommand("gen", "write a synthetic proposal world (JSON Lines)");
  flags.attach(gen);
  gen->add_option("--images", images, "number of images")->check(CLI::PositiveNumber);
  gen->add_option("--classes", classes, "number of classes")->check(CLI::PositiveNumber);

  CommonFlags nms_flags;
  auto* nms_cmd = app.add_subcommand("nms", "non-maximum suppression per image and class");
  nms_flags.attach(nms_cmd);
  nms_cmd->add_option("--dataset", dataset, "dataset JSON Lines")->required();

  CommonFlags select_flags;
  auto* select = app.add_subcommand("select", "count-based region selection per image and class");
  select_flags.attach(select);
  select->add_option("--dataset", dataset, "dataset JSON Lines")->required();
  select->add_option("--min-area", min_area, "drop proposals smaller than this area first");

  CommonFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "compare greedy selection with the exact solver");
  oracle_flags.attach(oracle);
  oracle->add_option("--instances", instances, "number of random problems");
  oracle->add_option("--max-n", max_n, "maximum regions per problem");
  oracle->add_option("--max-count", max_count, "maximum count C per problem")->check(CLI::PositiveNumber);
  oracle->add_flag("--disjoint", disjoint, "use pairwise-disjoint boxes");

  CommonFlags refine_flags;
  auto* refine = app.add_subcommand("refine", "alternating detector refinement");
  refine_flags.attach(refine);
  refine->add_option("--dataset", dataset, "dataset JSON Lines (default: generate one)");
  refine->add_option("--images", images, "images to generate without --dataset")->check(CLI::PositiveNumber);
  refine->add_option("--classes", classes, "classes to generate without --dataset")->check(CLI::PositiveNumber);

  CommonFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "AP / CorLoc of detections against a dataset's ground truth");
  eval_flags.attach(eval);
  eval->add_option("--dataset", dataset, "dataset JSON Lines holding the ground truth")->required();
  eval->add_option("--detections", detections, "detections JSON Lines")->required();

  auto* report = app.add_subcommand("report", "render a report JSON as text");
  report->add_option("--in", in_path, "report JSON")->required();
  report->add_option("--out", report_out, "output file (default: standard output)");

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "crskit: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(flags, images, classes, out, log);
    if (*nms_cmd) return cmd_nms(nms_flags, dataset, out);
    if (*select) return cmd_select(select_flags, dataset, min_area, out);
    if (*oracle) return cmd_oracle(oracle_flags, instances, max_n, max_count, disjoint, out);
    if (*refine) return cmd_refine(refine_flags, dataset, images, classes, out, log);
    if (*eval) return cmd_eval(eval_flags, dataset, detections, out);
    if (*report) return cmd_report(in_path, report_out, out);
  } catch (const Error& e) {
    log.log(LogLevel::error, e.what());
    return kExitValidation;
  } catch (const CLI::Error& e) {
    log.log(LogLevel::error, e.what());
    return kExitUsage;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace crskit
