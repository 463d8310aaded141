#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vislog/detection.hpp"
#include "vislog/image_io.hpp"
#include "vislog/mining.hpp"
#include "vislog/parallel.hpp"
#include "vislog/synth.hpp"
#include "vislog/tracking.hpp"
#include "vislog/visual_log.hpp"

namespace vislog {

using detection::DetectorConfig;
using detection::FrameDetection;
using detection::TextPolicy;
using tracking::TrackingConfig;

struct PipelineConfig {
  DetectorConfig detector;
  TrackingConfig tracking;
  double theta = 0.01;
  std::size_t delay = 2;
  bool require_monotone = false;
  int ngram_n = 3;
  double smoothing_k = 1.0;
  std::size_t min_support = 2;
  int min_pattern_len = 2;
  int max_pattern_len = 16;
  double anomaly_z = 3.0;
  std::string text_detector = "none";
  TextPolicy text_policy = TextPolicy::strict;
  std::size_t workers = 1;

  void validate() const {
    detector.validate();
    tracking.validate();
    if (!(theta > 0.0 && theta < 1.0)) fail_invalid("config: theta must be in (0,1)");
    if (ngram_n < 2 || ngram_n > 5) fail_invalid("config: ngram_n must be in [2,5]");
    if (!(smoothing_k > 0.0)) fail_invalid("config: smoothing_k must be > 0");
    if (min_support < 1) fail_invalid("config: min_support must be >= 1");
    if (min_pattern_len < 2 || min_pattern_len > max_pattern_len || max_pattern_len > mining::kMaxPatternLength) {
      fail_invalid("config: need 2 <= min_pattern_len <= max_pattern_len <= " +
                   std::to_string(mining::kMaxPatternLength));
    }
    if (!(anomaly_z > 0.0)) fail_invalid("config: anomaly_z must be > 0");
    if (workers < 1 || workers > 256) fail_invalid("config: workers must be in [1,256]");
    if (text_detector != "none" && text_detector != "oracle" && text_detector.rfind("external:", 0) != 0) {
      fail_invalid("config: text_detector must be none, oracle or external:<cmd>");
    }
    if (text_detector == "external:") fail_invalid("config: external text detector needs a command");
  }
};

namespace detail {

// Binds each config key to its field once so reading and writing agree.
template <typename Visitor>
void visit_config(PipelineConfig& c, Visitor&& v) {
  auto& d = c.detector;
  auto& t = c.tracking;
  v("min_rel_size", d.min_rel_size);
  v("max_irregular_rel_size", d.max_irregular_rel_size);
  v("comb_min_rel_size", d.comb_min_rel_size);
  v("merge_margin", d.merge_margin);
  v("relation_gap_fraction", d.relation_gap_fraction);
  v("alignment_fraction", d.alignment_fraction);
  v("relation_gap_px", d.relation_gap_px);
  v("alignment_px", d.alignment_px);
  v("text_overlap_suppress", d.text_overlap_suppress);
  v("canny_low", d.canny_low);
  v("canny_high", d.canny_high);
  v("gaussian_sigma", d.gaussian_sigma);
  v("dilation_radius", d.dilation_radius);
  v("circularity_min", d.shape.circularity);
  v("rect_fill_min", d.shape.rect_fill);
  v("angle_tolerance_deg", d.shape.angle_tolerance);
  v("square_tolerance", d.shape.square_tolerance);
  v("match_iou", t.match_iou);
  v("match_center_fraction", t.match_center_fraction);
  v("match_size_tolerance", t.match_size_tolerance);
  v("click_delta", t.click_delta);
  v("click_margin", t.click_margin);
  v("static_tolerance", t.static_tolerance);
  v("swipe_quorum", t.swipe_quorum);
  v("swipe_tolerance", t.swipe_tolerance);
  v("swipe_min_fraction", t.swipe_min_fraction);
  v("adjust_max_rel_size", t.adjust_max_rel_size);
  v("adjust_min_move", t.adjust_min_move);
  v("animation_window_ms", t.animation_window_ms);
  v("theta", c.theta);
  v("delay", c.delay);
  v("require_monotone", c.require_monotone);
  v("ngram_n", c.ngram_n);
  v("smoothing_k", c.smoothing_k);
  v("min_support", c.min_support);
  v("min_pattern_len", c.min_pattern_len);
  v("max_pattern_len", c.max_pattern_len);
  v("anomaly_z", c.anomaly_z);
  v("text_detector", c.text_detector);
  v("text_policy", c.text_policy);
  v("workers", c.workers);
}

template <typename T>
void read_field(const json& j, const std::string& key, T& field) {
  if constexpr (std::is_same_v<T, TextPolicy>) {
    const auto s = j.get<std::string>();
    if (s == "strict") {
      field = TextPolicy::strict;
    } else if (s == "lenient") {
      field = TextPolicy::lenient;
    } else {
      fail_invalid("config: text_policy must be strict or lenient");
    }
  } else if constexpr (std::is_same_v<T, std::optional<int>> || std::is_same_v<T, std::optional<double>>) {
    if (j.is_null()) {
      field.reset();
    } else {
      read_field(j, key, field.emplace());
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) fail_invalid("config: '" + key + "' must be a boolean");
    field = j.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) fail_invalid("config: '" + key + "' must be an integer");
    if (std::is_unsigned_v<T> && j.get<long long>() < 0) fail_invalid("config: '" + key + "' must be >= 0");
    field = j.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) fail_invalid("config: '" + key + "' must be a number");
    field = j.get<T>();
  } else {
    if (!j.is_string()) fail_invalid("config: '" + key + "' must be a string");
    field = j.get<T>();
  }
}

template <typename T>
json write_field(const T& field) {
  if constexpr (std::is_same_v<T, TextPolicy>) {
    return field == TextPolicy::strict ? "strict" : "lenient";
  } else if constexpr (std::is_same_v<T, std::optional<int>> || std::is_same_v<T, std::optional<double>>) {
    return field ? json(*field) : json(nullptr);
  } else {
    return field;
  }
}

}  // namespace detail

/// Reads a flat JSON object; absent keys keep their defaults, unknown keys
/// are rejected.
inline PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) fail_invalid("config must be a JSON object");
  PipelineConfig c;
  std::set<std::string> known;
  detail::visit_config(c, [&](const char* key, auto& field) {
    known.insert(key);
    if (j.contains(key)) detail::read_field(j.at(key), key, field);
  });
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail_invalid("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

inline json config_to_json(PipelineConfig c) {
  json j = json::object();
  detail::visit_config(c, [&](const char* key, auto& field) { j[key] = detail::write_field(field); });
  return j;
}

inline PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_invalid("cannot read config '" + path.string() + "'");
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail_invalid("malformed config '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------

inline std::unique_ptr<detection::TextDetector> make_text_detector(const std::string& spec, const fs::path& log_dir) {
  if (spec == "none") return std::make_unique<detection::NoTextDetector>();
  if (spec == "oracle") {
    const fs::path truth = log_dir / "truth.json";
    if (!fs::exists(truth)) fail_invalid("oracle text detector needs '" + truth.string() + "'");
    return std::make_unique<detection::OracleTextDetector>(detection::OracleTextDetector::from_truth_file(truth));
  }
  if (spec.rfind("external:", 0) == 0 && spec.size() > 9) {
    return std::make_unique<detection::ExternalTextDetector>(spec.substr(9));
  }
  fail_invalid("unknown text detector '" + spec + "'");
}

inline fs::path log_directory(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }

struct Diagnostics {
  std::vector<std::string> lines;
};

/// Detects elements on the listed frames; frames identical to their
/// predecessor in the list reuse its result.
inline std::vector<FrameDetection> detect_frames(const VisualLog& log, const std::vector<std::size_t>& indices,
                                                 const PipelineConfig& cfg, const detection::TextDetector& text,
                                                 Diagnostics* diag = nullptr) {
  const std::size_t n = indices.size();
  std::vector<std::size_t> rep(n);
  std::vector<std::size_t> unique;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && log.frames[indices[k]].image == log.frames[indices[k - 1]].image) {
      rep[k] = rep[k - 1];
    } else {
      rep[k] = k;
      unique.push_back(k);
    }
  }
  std::vector<FrameDetection> out(n);
  std::vector<std::vector<std::string>> notes(n);
  DetectorConfig dcfg = cfg.detector;
  dcfg.screen_width = log.width;
  dcfg.screen_height = log.height;
  parallel_for(unique.size(), cfg.workers, [&](std::size_t u) {
    const std::size_t k = unique[u];
    const Frame& f = log.frames[indices[k]];
    const detection::TextContext ctx{f.index, f.source};
    const auto regions = detection::detect_text(f.image, text, ctx, cfg.text_policy, &notes[k]);
    out[k] = detection::detect_elements(f.image, regions, dcfg);
  });
  for (std::size_t k = 0; k < n; ++k) {
    if (rep[k] != k) out[k] = out[rep[k]];
    if (diag) diag->lines.insert(diag->lines.end(), notes[k].begin(), notes[k].end());
  }
  return out;
}

inline void write_json(const fs::path& path, const json& j) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

inline VisualLog load_for_pipeline(const fs::path& path, const PipelineConfig& cfg, Diagnostics* diag) {
  LoadReport report;
  VisualLog log = load_log(path, &report, LoadOptions{cfg.require_monotone});
  if (diag) diag->lines.insert(diag->lines.end(), report.warnings.begin(), report.warnings.end());
  return log;
}

// ---------------------------------------------------------------------------
// Commands. Each returns normally on success and throws vislog::Error.

struct DetectResult {
  std::vector<std::size_t> sampled;
  std::vector<FrameDetection> detections;
};

inline DetectResult cmd_detect(const fs::path& log_path, const PipelineConfig& cfg, const fs::path& out_dir,
                               Diagnostics* diag = nullptr) {
  cfg.validate();
  const VisualLog log = load_for_pipeline(log_path, cfg, diag);
  const auto text = make_text_detector(cfg.text_detector, log_directory(log_path));
  const auto majors = detect_major_events(log, cfg.theta, cfg.workers);
  DetectResult r;
  r.sampled = sample_indices(log.frames.size(), majors, cfg.delay);
  r.detections = detect_frames(log, r.sampled, cfg, *text, diag);
  for (std::size_t k = 0; k < r.sampled.size(); ++k) {
    const std::size_t i = r.sampled[k];
    const std::string stem = frame_file_name(i).substr(0, frame_file_name(i).size() - 4);
    write_json(out_dir / stem / "elements.json", detection::detection_to_json(i, r.detections[k]));
    fs::create_directories(out_dir / "annotated");
    io::write_png(out_dir / "annotated" / frame_file_name(i), detection::render_overlay(log.frames[i].image,
                                                                                      r.detections[k]));
  }
  return r;
}

inline tracking::InteractionSequence analyze_log(const VisualLog& log, const PipelineConfig& cfg,
                                                 const detection::TextDetector& text, Diagnostics* diag = nullptr) {
  std::vector<std::size_t> all(log.frames.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto dets = detect_frames(log, all, cfg, text, diag);
  const auto majors = detect_major_events(log, cfg.theta, cfg.workers);
  const auto matches = tracking::match_log(log, dets, cfg.tracking, cfg.workers);
  return tracking::infer_interactions(log, dets, matches, majors, cfg.tracking);
}

inline tracking::InteractionSequence cmd_analyze(const fs::path& log_path, const PipelineConfig& cfg,
                                                 const fs::path& out_dir, Diagnostics* diag = nullptr) {
  cfg.validate();
  const VisualLog log = load_for_pipeline(log_path, cfg, diag);
  const auto text = make_text_detector(cfg.text_detector, log_directory(log_path));
  auto seq = analyze_log(log, cfg, *text, diag);
  write_json(out_dir / "interactions.json", tracking::interactions_to_json(seq));
  return seq;
}

struct MineResult {
  mining::Corpus corpus;
  mining::NGramModel model;
  std::vector<mining::UsagePattern> patterns;
  std::vector<mining::Anomaly> anomalies;
};

inline MineResult cmd_mine(const std::vector<fs::path>& files, const PipelineConfig& cfg, const fs::path& out_dir,
                           std::ostream* report = nullptr) {
  cfg.validate();
  if (files.empty()) fail_invalid("mine needs at least one interactions file");
  MineResult r;
  std::size_t tokens = 0;
  for (const auto& f : files) {
    r.corpus.push_back(tracking::tokenize(tracking::load_interactions(f)));
    tokens += r.corpus.back().size();
  }
  if (tokens == 0) fail_invalid("corpus is empty: no interaction tokens in the given files");
  r.model = mining::train(r.corpus, cfg.ngram_n, cfg.smoothing_k);
  r.patterns = mining::mine_patterns(r.corpus, cfg.min_support, cfg.min_pattern_len, cfg.max_pattern_len, &r.model);
  r.anomalies = mining::detect_anomalies(r.model, r.corpus, cfg.anomaly_z);
  write_json(out_dir / "model.json", mining::model_to_json(r.model));
  write_json(out_dir / "patterns.json", mining::patterns_to_json(r.patterns));
  if (report) {
    *report << "sequences " << r.corpus.size() << "\n"
            << "tokens " << tokens << "\n"
            << "vocabulary " << r.model.outcomes().size() - 1 << "\n"
            << "patterns " << r.patterns.size() << "\n"
            << "anomalies " << r.anomalies.size() << "\n";
    for (const auto& a : r.anomalies) {
      *report << "anomaly " << files[a.index].string() << " " << std::setprecision(6) << a.score << "\n";
    }
  }
  return r;
}

inline std::vector<mining::Sequence> cmd_generate(const fs::path& model_path, mining::GenerateMode mode,
                                                  std::uint64_t seed, std::size_t max_len, std::size_t count,
                                                  std::ostream& out) {
  const auto model = mining::load_model(model_path);
  std::vector<mining::Sequence> seqs;
  for (std::size_t c = 0; c < count; ++c) {
    seqs.push_back(mining::generate(model, mode, seed + c, max_len));
    const auto& s = seqs.back();
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
    out << '\n';
  }
  return seqs;
}

inline synth::SynthLog cmd_synth(const fs::path& spec_path, const fs::path& out_dir) {
  const auto spec = synth::load_log_spec(spec_path);
  auto s = synth::render_log(spec);
  s.log.id = spec_path.stem().string();
  synth::write_synth_log(s, out_dir);
  return s;
}

}  // namespace vislog
