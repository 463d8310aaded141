#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vislog/contour.hpp"
#include "vislog/image_io.hpp"
#include "vislog/imaging.hpp"
#include "vislog/raster.hpp"

namespace vislog::detection {

namespace fs = std::filesystem;
using imaging::Contour;
using imaging::ContourKind;
using imaging::ContourMetrics;
using imaging::Orientation;
using imaging::Shape;
using nlohmann::json;

enum class ElementType { text, icon, comb };
enum class RelationKind { below, right, left, above, inside };

struct GuiElement {
  int id = 0;
  ElementType type = ElementType::icon;
  BBox bbox;
  Shape shape = Shape::rectangle;
  Orientation orientation = Orientation::horizontal;
  double rel_size = 0.0;
  std::optional<std::string> label;
  std::vector<int> children;
  friend bool operator==(const GuiElement&, const GuiElement&) = default;
};

struct ElementRelation {
  int source = 0;
  int target = 0;
  RelationKind kind = RelationKind::below;
  friend bool operator==(const ElementRelation&, const ElementRelation&) = default;
};

struct TextRegion {
  BBox bbox;
  std::string text;
  friend bool operator==(const TextRegion&, const TextRegion&) = default;
};

struct FrameDetection {
  std::vector<GuiElement> elements;
  std::vector<ElementRelation> relations;
  friend bool operator==(const FrameDetection&, const FrameDetection&) = default;

  [[nodiscard]] const GuiElement* find(int id) const {
    for (const auto& e : elements) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }
};

struct DetectorConfig {
  double min_rel_size = 0.0001;
  double max_irregular_rel_size = 0.01;
  double comb_min_rel_size = 0.01;
  std::optional<int> merge_margin;       // default 2 * dilation_radius
  double relation_gap_fraction = 0.02;   // of screen height
  double alignment_fraction = 0.01;      // of screen width
  std::optional<double> relation_gap_px;
  std::optional<double> alignment_px;
  double text_overlap_suppress = 0.5;
  double canny_low = 0.10;
  double canny_high = 0.25;
  double gaussian_sigma = 1.4;
  int dilation_radius = 1;
  imaging::ShapeThresholds shape;
  int screen_width = 0;  // 0: take from the frame
  int screen_height = 0;

  [[nodiscard]] int margin() const { return merge_margin.value_or(2 * dilation_radius); }
  [[nodiscard]] double gap_px() const {
    return relation_gap_px.value_or(relation_gap_fraction * screen_height);
  }
  [[nodiscard]] double align_px() const { return alignment_px.value_or(alignment_fraction * screen_width); }

  void validate() const {
    if (!(min_rel_size > 0.0 && min_rel_size < max_irregular_rel_size && max_irregular_rel_size < 1.0)) {
      fail_invalid("detector config: need 0 < min_rel_size < max_irregular_rel_size < 1");
    }
    if (!(canny_low >= 0.0 && canny_low < canny_high && canny_high <= 1.0)) {
      fail_invalid("detector config: need 0 <= canny_low < canny_high <= 1");
    }
    if (!(gaussian_sigma > 0.0 && gaussian_sigma <= 10.0)) fail_invalid("detector config: sigma out of range");
    if (dilation_radius < 1 || dilation_radius > 10) fail_invalid("detector config: dilation radius out of range");
    if (margin() < 0) fail_invalid("detector config: merge margin must be >= 0");
    if (!(text_overlap_suppress > 0.0 && text_overlap_suppress <= 1.0)) {
      fail_invalid("detector config: text_overlap_suppress must be in (0, 1]");
    }
  }
};

inline std::string_view to_string(ElementType t) {
  switch (t) {
    case ElementType::text: return "text";
    case ElementType::icon: return "icon";
    case ElementType::comb: return "comb";
  }
  return "icon";
}

inline std::string_view to_string(RelationKind k) {
  switch (k) {
    case RelationKind::below: return "below";
    case RelationKind::right: return "right";
    case RelationKind::left: return "left";
    case RelationKind::above: return "above";
    case RelationKind::inside: return "inside";
  }
  return "inside";
}

inline ElementType parse_element_type(std::string_view s) {
  if (s == "text") return ElementType::text;
  if (s == "icon") return ElementType::icon;
  if (s == "comb") return ElementType::comb;
  fail_invalid("unknown element type '" + std::string(s) + "'");
}

inline RelationKind parse_relation_kind(std::string_view s) {
  if (s == "below") return RelationKind::below;
  if (s == "right") return RelationKind::right;
  if (s == "left") return RelationKind::left;
  if (s == "above") return RelationKind::above;
  if (s == "inside") return RelationKind::inside;
  fail_invalid("unknown relation kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Text detection

struct TextContext {
  std::size_t frame_index = 0;
  fs::path frame_path;  // empty when the frame only exists in memory
};

class TextDetector {
 public:
  virtual ~TextDetector() = default;
  [[nodiscard]] virtual std::vector<TextRegion> detect(const Raster& frame, const TextContext& ctx) const = 0;
};

class NoTextDetector final : public TextDetector {
 public:
  [[nodiscard]] std::vector<TextRegion> detect(const Raster&, const TextContext&) const override { return {}; }
};

/// Test stand-in for OCR: returns ground-truth text regions for the frame,
/// but only those whose pixels still show content (a flat region reads as
/// nothing, as it would to a real OCR engine).
class OracleTextDetector final : public TextDetector {
 public:
  explicit OracleTextDetector(std::map<std::size_t, std::vector<TextRegion>> by_frame)
      : by_frame_(std::move(by_frame)) {}

  static OracleTextDetector from_truth_file(const fs::path& truth_path) {
    std::ifstream in(truth_path);
    if (!in) throw Error(ErrorKind::text_detection, "oracle: cannot read '" + truth_path.string() + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::text_detection, std::string("oracle: malformed truth file: ") + e.what());
    }
    std::map<std::size_t, std::vector<TextRegion>> by_frame;
    for (const auto& fr : j.at("frames")) {
      auto& regions = by_frame[fr.at("frame").get<std::size_t>()];
      for (const auto& el : fr.at("elements")) {
        if (el.at("type") != "text") continue;
        const auto b = el.at("bbox");
        regions.push_back({{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()},
                           el.value("label", std::string{})});
      }
    }
    return OracleTextDetector(std::move(by_frame));
  }

  [[nodiscard]] std::vector<TextRegion> detect(const Raster& frame, const TextContext& ctx) const override {
    std::vector<TextRegion> out;
    const auto it = by_frame_.find(ctx.frame_index);
    if (it == by_frame_.end()) return out;
    const Raster g = imaging::gray(frame);
    for (const TextRegion& r : it->second) {
      const BBox b = r.bbox;
      if (b.x < 0 || b.y < 0 || b.right() > g.width() || b.bottom() > g.height() || b.w <= 0 || b.h <= 0) continue;
      double lo = 1.0, hi = 0.0;
      for (int y = b.y; y < b.bottom(); ++y) {
        for (int x = b.x; x < b.right(); ++x) {
          lo = std::min(lo, g.at(x, y));
          hi = std::max(hi, g.at(x, y));
        }
      }
      if (hi - lo >= kMinContrast) out.push_back(r);
    }
    return out;
  }

  static constexpr double kMinContrast = 0.1;

 private:
  std::map<std::size_t, std::vector<TextRegion>> by_frame_;
};

/// Parses a TextRegion array: `[{"bbox":[x,y,w,h],"text":"..."}]`.
inline std::vector<TextRegion> parse_text_regions(const std::string& payload, int width, int height) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::text_detection, std::string("text detector output is not JSON: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorKind::text_detection, "text detector output must be an array");
  std::vector<TextRegion> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("bbox") || !item["bbox"].is_array() || item["bbox"].size() != 4 ||
        !item.contains("text") || !item["text"].is_string()) {
      throw Error(ErrorKind::text_detection, "text region needs bbox [x,y,w,h] and text: " + item.dump());
    }
    TextRegion r;
    try {
      r.bbox = {item["bbox"][0].get<int>(), item["bbox"][1].get<int>(), item["bbox"][2].get<int>(),
                item["bbox"][3].get<int>()};
    } catch (const json::exception&) {
      throw Error(ErrorKind::text_detection, "text region bbox must be integers: " + item.dump());
    }
    r.text = item["text"].get<std::string>();
    if (r.bbox.w <= 0 || r.bbox.h <= 0 || r.bbox.x < 0 || r.bbox.y < 0 || r.bbox.right() > width ||
        r.bbox.bottom() > height) {
      throw Error(ErrorKind::text_detection, "text region outside frame: " + item.dump());
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Runs `<command> <frame.png>` and reads a TextRegion array from stdout.
class ExternalTextDetector final : public TextDetector {
 public:
  explicit ExternalTextDetector(std::string command) : command_(std::move(command)) {}

  [[nodiscard]] std::vector<TextRegion> detect(const Raster& frame, const TextContext& ctx) const override {
    fs::path image = ctx.frame_path;
    std::optional<fs::path> scratch;
    if (image.empty()) {
      scratch = fs::temp_directory_path() /
                ("vislog-text-" + std::to_string(reinterpret_cast<std::uintptr_t>(&frame)) + "-" +
                 std::to_string(ctx.frame_index) + ".png");
      io::write_png(*scratch, frame);
      image = *scratch;
    }
    const std::string cmd = command_ + " '" + escape(image.string()) + "' 2>&1";
    std::string output;
    int status = -1;
    if (FILE* pipe = popen(cmd.c_str(), "r")) {
      char buf[4096];
      std::size_t n = 0;
      while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
      status = pclose(pipe);
    }
    if (scratch) fs::remove(*scratch);
    if (status != 0) {
      throw Error(ErrorKind::text_detection,
                  "text detector '" + command_ + "' failed (status " + std::to_string(status) + "): " + output);
    }
    return parse_text_regions(output, frame.width(), frame.height());
  }

 private:
  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '\'') {
        out += "'\\''";
      } else {
        out += c;
      }
    }
    return out;
  }

  std::string command_;
};

enum class TextPolicy { strict, lenient };

/// Runs the detector. Under the lenient policy a failure yields no regions and
/// its message is appended to `diagnostics`.
inline std::vector<TextRegion> detect_text(const Raster& frame, const TextDetector& detector, const TextContext& ctx,
                                           TextPolicy policy = TextPolicy::strict,
                                           std::vector<std::string>* diagnostics = nullptr) {
  try {
    return detector.detect(frame, ctx);
  } catch (const Error& e) {
    if (policy == TextPolicy::strict) throw;
    if (diagnostics) diagnostics->push_back("frame " + std::to_string(ctx.frame_index) + ": " + e.what());
    return {};
  }
}

// ---------------------------------------------------------------------------
// Contour post-processing

namespace detail {
/// `inner` lies inside `outer` and no side is inset by more than `margin`.
inline bool nested_within(const BBox& outer, const BBox& inner, int margin) {
  if (!outer.contains(inner)) return false;
  return inner.x - outer.x <= margin && inner.y - outer.y <= margin && outer.right() - inner.right() <= margin &&
         outer.bottom() - inner.bottom() <= margin;
}
}  // namespace detail

/// Collapses the double contours a dilated border produces: a hole hugging an
/// outer contour is dropped, and near-identical outer contours keep the larger.
inline std::vector<Contour> merge_contours(const std::vector<Contour>& contours, int margin) {
  if (margin < 0) fail_invalid("merge margin must be >= 0");
  std::vector<BBox> boxes;
  boxes.reserve(contours.size());
  for (const auto& c : contours) boxes.push_back(c.bbox());

  std::vector<bool> keep(contours.size(), true);
  for (std::size_t h = 0; h < contours.size(); ++h) {
    if (contours[h].kind != ContourKind::hole) continue;
    for (std::size_t o = 0; o < contours.size(); ++o) {
      if (contours[o].kind == ContourKind::outer && detail::nested_within(boxes[o], boxes[h], margin)) {
        keep[h] = false;
        break;
      }
    }
  }
  for (std::size_t a = 0; a < contours.size(); ++a) {
    if (!keep[a] || contours[a].kind != ContourKind::outer) continue;
    for (std::size_t b = 0; b < contours.size(); ++b) {
      if (a == b || !keep[b] || contours[b].kind != ContourKind::outer) continue;
      // b is absorbed by a when it sits within margin of a (ties keep the earlier one).
      const bool absorbed = detail::nested_within(boxes[a], boxes[b], margin) &&
                            (boxes[a].area() > boxes[b].area() || (boxes[a].area() == boxes[b].area() && a < b));
      if (absorbed) keep[b] = false;
    }
  }
  std::vector<Contour> out;
  for (std::size_t i = 0; i < contours.size(); ++i) {
    if (keep[i]) out.push_back(contours[i]);
  }
  return out;
}

inline double relative_size(const BBox& b, double screen_area) {
  return static_cast<double>(b.area()) / screen_area;
}

/// Rule 1: too small to be seen or touched. Rule 2: large and neither
/// rectangular/circular nor axis-aligned.
inline bool passes_size_rules(double rel_size, const imaging::ShapeClass& cls, const DetectorConfig& cfg) {
  if (rel_size < cfg.min_rel_size) return false;
  if (rel_size > cfg.max_irregular_rel_size &&
      (cls.shape == Shape::irregular || cls.orientation == Orientation::irregular)) {
    return false;
  }
  return true;
}

inline std::vector<Contour> filter_contours(const std::vector<Contour>& contours, double screen_area,
                                            const DetectorConfig& cfg) {
  if (!(screen_area > 0.0)) fail_invalid("screen area must be positive");
  std::vector<Contour> out;
  for (const auto& c : contours) {
    // a surviving hole is the inside of a thick outline, not an object of its own
    if (c.kind == imaging::ContourKind::hole) continue;
    const ContourMetrics m = imaging::contour_metrics(c);
    if (passes_size_rules(relative_size(m.bbox, screen_area), imaging::classify_shape(m, cfg.shape), cfg)) {
      out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Typing and relations

struct Candidate {
  BBox bbox;
  Shape shape = Shape::rectangle;
  Orientation orientation = Orientation::horizontal;
  double rel_size = 0.0;
  bool from_text = false;
  std::string text;
};

inline bool strictly_contains(const BBox& outer, const BBox& inner) {
  return outer.contains(inner) && outer != inner;
}

inline ElementType classify_type(const Candidate& c, std::span<const Candidate> all, const DetectorConfig& cfg = {}) {
  if (c.from_text) return ElementType::text;
  for (const Candidate& o : all) {
    if (&o != &c && strictly_contains(c.bbox, o.bbox)) return ElementType::comb;
  }
  if (c.rel_size >= cfg.comb_min_rel_size && (c.shape == Shape::rectangle || c.shape == Shape::circle)) {
    return ElementType::comb;
  }
  return ElementType::icon;
}

/// Id of the smallest Comb strictly containing each element, or -1.
inline std::map<int, int> immediate_parents(const std::vector<GuiElement>& elements) {
  std::map<int, int> parent;
  for (const auto& e : elements) {
    int best = -1;
    long long best_area = 0;
    for (const auto& p : elements) {
      if (p.id == e.id || p.type != ElementType::comb || !strictly_contains(p.bbox, e.bbox)) continue;
      if (best < 0 || p.bbox.area() < best_area || (p.bbox.area() == best_area && p.id < best)) {
        best = p.id;
        best_area = p.bbox.area();
      }
    }
    parent[e.id] = best;
  }
  return parent;
}

/// Directional kind of `text` relative to `target`, if within gap and aligned.
inline std::optional<RelationKind> directional_relation(const BBox& text, const BBox& target, double gap,
                                                        double align) {
  const bool h_aligned = std::abs(text.cx() - target.cx()) <= align;
  const bool v_aligned = std::abs(text.cy() - target.cy()) <= align;
  if (h_aligned && text.y >= target.bottom() && text.y - target.bottom() <= gap) return RelationKind::below;
  if (h_aligned && target.y >= text.bottom() && target.y - text.bottom() <= gap) return RelationKind::above;
  if (v_aligned && text.x >= target.right() && text.x - target.right() <= gap) return RelationKind::right;
  if (v_aligned && target.x >= text.right() && target.x - text.right() <= gap) return RelationKind::left;
  return std::nullopt;
}

/// Containment yields `inside` (child -> immediate Comb). Each Text binds to
/// at most one nearest sibling Icon/Comb that is aligned and within the gap.
inline std::vector<ElementRelation> infer_relations(const std::vector<GuiElement>& elements,
                                                    const DetectorConfig& cfg) {
  std::vector<ElementRelation> out;
  const auto parent = immediate_parents(elements);
  for (const auto& e : elements) {
    if (const int p = parent.at(e.id); p >= 0) out.push_back({e.id, p, RelationKind::inside});
  }
  const double gap = cfg.gap_px();
  const double align = cfg.align_px();
  for (const auto& t : elements) {
    if (t.type != ElementType::text) continue;
    const GuiElement* best = nullptr;
    RelationKind best_kind = RelationKind::below;
    double best_dist = 0.0;
    for (const auto& e : elements) {
      if (e.type == ElementType::text || parent.at(e.id) != parent.at(t.id)) continue;
      const auto kind = directional_relation(t.bbox, e.bbox, gap, align);
      if (!kind) continue;
      const double dist = std::hypot(t.bbox.cx() - e.bbox.cx(), t.bbox.cy() - e.bbox.cy());
      if (!best || dist < best_dist || (dist == best_dist && e.id < best->id)) {
        best = &e;
        best_kind = *kind;
        best_dist = dist;
      }
    }
    if (best) out.push_back({t.id, best->id, best_kind});
  }
  std::sort(out.begin(), out.end(), [](const ElementRelation& a, const ElementRelation& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
  return out;
}

/// Indices of `elements` in reading order: top to bottom, left to right,
/// containers before their contents.
inline std::vector<std::size_t> reading_order(const std::vector<GuiElement>& elements) {
  std::vector<std::size_t> idx(elements.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    const GuiElement& a = elements[i];
    const GuiElement& b = elements[j];
    if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
    if (a.bbox.x != b.bbox.x) return a.bbox.x < b.bbox.x;
    if (a.bbox.area() != b.bbox.area()) return a.bbox.area() > b.bbox.area();
    return a.type < b.type;
  });
  return idx;
}

/// Reorders into reading order and renumbers ids from 0.
inline void assign_reading_order(std::vector<GuiElement>& elements) {
  const auto idx = reading_order(elements);
  std::vector<GuiElement> sorted;
  sorted.reserve(elements.size());
  for (std::size_t i : idx) sorted.push_back(std::move(elements[i]));
  elements = std::move(sorted);
  for (std::size_t i = 0; i < elements.size(); ++i) elements[i].id = static_cast<int>(i);
}

inline void fill_children(std::vector<GuiElement>& elements) {
  const auto parent = immediate_parents(elements);
  for (auto& e : elements) e.children.clear();
  for (const auto& [child, p] : parent) {
    if (p >= 0) elements[static_cast<std::size_t>(p)].children.push_back(child);
  }
  for (auto& e : elements) std::sort(e.children.begin(), e.children.end());
}

// ---------------------------------------------------------------------------
// Full pipeline

struct EdgeStages {
  Raster blurred;
  BitMask edges;
  BitMask dilated;
};

inline EdgeStages edge_stages(const Raster& frame, const DetectorConfig& cfg) {
  EdgeStages s;
  s.blurred = imaging::gaussian_blur(imaging::gray(frame), cfg.gaussian_sigma);
  s.edges = imaging::canny(s.blurred, cfg.canny_low, cfg.canny_high);
  s.dilated = imaging::dilate(s.edges, cfg.dilation_radius);
  return s;
}

/// Detects GUI elements: edges, dilation, contours, merge, filter, typing,
/// relations. Text regions always become Text elements; contour candidates
/// mostly covered by text are dropped in favour of them.
inline FrameDetection detect_elements(const Raster& frame, const std::vector<TextRegion>& text,
                                      DetectorConfig cfg) {
  if (cfg.screen_width == 0) cfg.screen_width = frame.width();
  if (cfg.screen_height == 0) cfg.screen_height = frame.height();
  if (cfg.screen_width != frame.width() || cfg.screen_height != frame.height()) {
    fail_invalid("frame does not match configured screen geometry");
  }
  cfg.validate();
  const double screen_area = static_cast<double>(frame.width()) * frame.height();

  const EdgeStages stages = edge_stages(frame, cfg);
  auto contours = imaging::trace_contours(stages.dilated);
  contours = merge_contours(contours, cfg.margin());

  std::vector<Candidate> candidates;
  for (const auto& c : contours) {
    // a surviving hole is the inside of a thick outline, not an object of its own
    if (c.kind == imaging::ContourKind::hole) continue;
    const ContourMetrics m = imaging::contour_metrics(c);
    const auto cls = imaging::classify_shape(m, cfg.shape);
    if (!passes_size_rules(relative_size(m.bbox, screen_area), cls, cfg)) continue;
    // Report the object rather than its dilated outline.
    const int r = cfg.dilation_radius;
    BBox b = m.bbox;
    if (b.w > 2 * r && b.h > 2 * r) b = {b.x + r, b.y + r, b.w - 2 * r, b.h - 2 * r};
    const double rel = relative_size(b, screen_area);
    if (rel < cfg.min_rel_size) continue;
    long long covered = 0;
    for (const auto& t : text) covered += intersection_area(b, t.bbox);
    if (static_cast<double>(std::min(covered, b.area())) >= cfg.text_overlap_suppress * static_cast<double>(b.area())) {
      continue;
    }
    candidates.push_back({b, cls.shape, cls.orientation, rel, false, {}});
  }
  for (const auto& t : text) {
    const double rel = relative_size(t.bbox, screen_area);
    if (rel < cfg.min_rel_size) continue;
    candidates.push_back({t.bbox, Shape::rectangle, Orientation::horizontal, rel, true, t.text});
  }
  // Identical boxes collapse to one candidate, text winning.
  std::vector<Candidate> unique;
  for (const auto& c : candidates) {
    auto it = std::find_if(unique.begin(), unique.end(), [&](const Candidate& u) { return u.bbox == c.bbox; });
    if (it == unique.end()) {
      unique.push_back(c);
    } else if (c.from_text) {
      *it = c;
    }
  }

  FrameDetection out;
  for (const auto& c : unique) {
    GuiElement e;
    e.type = classify_type(c, unique, cfg);
    e.bbox = c.bbox;
    e.shape = c.shape;
    e.orientation = e.type == ElementType::text ? Orientation::horizontal : c.orientation;
    e.rel_size = c.rel_size;
    if (c.from_text) e.label = c.text;
    out.elements.push_back(std::move(e));
  }
  assign_reading_order(out.elements);
  fill_children(out.elements);
  out.relations = infer_relations(out.elements, cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization and overlays

inline json element_to_json(const GuiElement& e) {
  json j = {{"id", e.id},
            {"type", to_string(e.type)},
            {"bbox", {e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h}},
            {"shape", imaging::to_string(e.shape)},
            {"orientation", imaging::to_string(e.orientation)},
            {"rel_size", e.rel_size}};
  if (e.label) j["label"] = *e.label;
  j["children"] = e.children;
  return j;
}

inline GuiElement element_from_json(const json& j) {
  GuiElement e;
  e.id = j.at("id").get<int>();
  e.type = parse_element_type(j.at("type").get<std::string>());
  const auto& b = j.at("bbox");
  e.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
  e.shape = imaging::parse_shape(j.at("shape").get<std::string>());
  e.orientation = imaging::parse_orientation(j.at("orientation").get<std::string>());
  e.rel_size = j.at("rel_size").get<double>();
  if (j.contains("label")) e.label = j["label"].get<std::string>();
  if (j.contains("children")) e.children = j["children"].get<std::vector<int>>();
  return e;
}

inline json detection_to_json(std::size_t frame_index, const FrameDetection& d) {
  json elements = json::array();
  for (const auto& e : d.elements) elements.push_back(element_to_json(e));
  json relations = json::array();
  for (const auto& r : d.relations) {
    relations.push_back({{"source", r.source}, {"target", r.target}, {"kind", to_string(r.kind)}});
  }
  return {{"frame", frame_index}, {"elements", elements}, {"relations", relations}};
}

inline FrameDetection detection_from_json(const json& j) {
  FrameDetection d;
  for (const auto& e : j.at("elements")) d.elements.push_back(element_from_json(e));
  for (const auto& r : j.at("relations")) {
    d.relations.push_back({r.at("source").get<int>(), r.at("target").get<int>(),
                           parse_relation_kind(r.at("kind").get<std::string>())});
  }
  return d;
}

/// RGB copy of the frame with 1-px bbox outlines: text blue, icon green, comb red.
inline Raster render_overlay(const Raster& frame, const FrameDetection& d) {
  Raster out(frame.width(), frame.height(), 3);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = frame.at(x, y, frame.channels() == 3 ? c : 0);
    }
  }
  for (const auto& e : d.elements) {
    double rgb[3] = {0, 0, 0};
    if (e.type == ElementType::text) rgb[2] = 1.0;
    if (e.type == ElementType::icon) rgb[1] = 0.8;
    if (e.type == ElementType::comb) rgb[0] = 1.0;
    const auto plot = [&](int x, int y) {
      if (x < 0 || y < 0 || x >= out.width() || y >= out.height()) return;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[c];
    };
    const BBox b = e.bbox;
    for (int x = b.x; x < b.right(); ++x) {
      plot(x, b.y);
      plot(x, b.bottom() - 1);
    }
    for (int y = b.y; y < b.bottom(); ++y) {
      plot(b.x, y);
      plot(b.right() - 1, y);
    }
  }
  return out;
}

}  // namespace vislog::detection
