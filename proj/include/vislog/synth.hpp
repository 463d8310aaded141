#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vislog/detection.hpp"
#include "vislog/tracking.hpp"
#include "vislog/visual_log.hpp"

namespace vislog::synth {

namespace fs = std::filesystem;
using detection::ElementRelation;
using detection::ElementType;
using detection::FrameDetection;
using detection::GuiElement;
using detection::RelationKind;
using imaging::Orientation;
using imaging::Shape;
using nlohmann::json;

[[noreturn]] inline void invalid(const std::string& what) { throw Error(ErrorKind::validation, what); }

/// Canonical device screens (width x height).
inline bool is_canonical_screen(int w, int h) {
  return (w == 1136 && h == 640) || (w == 1334 && h == 750) || (w == 1920 && h == 1080);
}

struct ElementSpec {
  std::string name;
  ElementType type = ElementType::icon;
  BBox bbox;
  Shape shape = Shape::rectangle;  // irregular draws a triangle
  std::string text;                // Text elements
  std::string parent;              // containing Comb, if any
  std::string label_of;            // element this Text captions
  RelationKind caption_kind = RelationKind::below;
  std::string anchor;              // inside captions: icon sibling the text sits below
  bool row = false;                // moves with swipes
};

inline ElementSpec make_element(std::string name, ElementType type, BBox bbox, Shape shape = Shape::rectangle,
                                std::string text = {}) {
  ElementSpec e;
  e.name = std::move(name);
  e.type = type;
  e.bbox = bbox;
  e.shape = shape;
  e.text = std::move(text);
  return e;
}

struct ScreenSpec {
  std::string name;
  double background = 0.95;
  std::vector<ElementSpec> elements;

  [[nodiscard]] const ElementSpec* find(const std::string& n) const {
    for (const auto& e : elements) {
      if (e.name == n) return &e;
    }
    return nullptr;
  }
};

enum class StepKind { click, swipe, adjust, transition };

struct ScriptStep {
  StepKind kind = StepKind::transition;
  std::string target;     // click / adjust
  std::string next;       // click / transition
  std::string direction;  // swipe
  int delta = 0;          // adjust, pixels
};

struct LogSpec {
  int width = 1136;
  int height = 640;
  std::uint64_t seed = 1;
  int lead_frames = 2;
  int frames_per_step = 4;
  long long frame_interval_ms = 100;
  bool record_events = true;
  std::vector<ScreenSpec> screens;
  std::vector<ScriptStep> script;

  [[nodiscard]] const ScreenSpec& screen(const std::string& n) const {
    for (const auto& s : screens) {
      if (s.name == n) return s;
    }
    invalid("unknown screen '" + n + "'");
  }
};

// ---------------------------------------------------------------------------
// Deterministic helpers

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Integer in [lo, hi] from a 64-bit engine, independent of the std distributions.
inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}
inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Scale factor relative to the smallest canonical screen.
inline double ui_scale(int height) { return height / 640.0; }
inline int text_height(int screen_h) { return static_cast<int>(std::lround(12 * ui_scale(screen_h))); }
inline int char_width(int screen_h) { return static_cast<int>(std::lround(7 * ui_scale(screen_h))); }
inline int caption_gap(int screen_h) { return static_cast<int>(std::lround(8 * ui_scale(screen_h))); }

// ---------------------------------------------------------------------------
// Palette: element tones are set relative to what they are drawn on.

inline double away(double base, double amount) {
  return quantize8(base > 0.5 ? base - amount : base + amount);
}
inline double comb_fill(double base) { return away(base, 0.55); }
inline double icon_fill(double base) { return away(base, 0.45); }
inline double text_ink(double base) { return quantize8(base > 0.5 ? 0.10 : 0.90); }
inline double highlighted(double fill, double base) {
  return quantize8(std::clamp(fill > base ? fill + 0.2 : fill - 0.2, 0.0, 1.0));
}

// ---------------------------------------------------------------------------
// Validation

inline void validate_screen(const ScreenSpec& s, int width, int height) {
  if (!is_canonical_screen(width, height)) {
    invalid("screen size " + std::to_string(width) + "x" + std::to_string(height) +
            " is not one of 1136x640, 1334x750, 1920x1080");
  }
  const double screen_area = static_cast<double>(width) * height;
  std::set<std::string> names;
  for (const auto& e : s.elements) {
    const std::string where = "screen '" + s.name + "' element '" + e.name + "'";
    if (e.name.empty()) invalid("screen '" + s.name + "' has an unnamed element");
    if (!names.insert(e.name).second) invalid(where + ": duplicate name");
    if (e.bbox.w <= 0 || e.bbox.h <= 0 || e.bbox.x < 0 || e.bbox.y < 0 || e.bbox.right() > width ||
        e.bbox.bottom() > height) {
      invalid(where + ": bbox outside screen");
    }
    const double rel = static_cast<double>(e.bbox.area()) / screen_area;
    if (rel < 0.0001 || rel > 0.05) invalid(where + ": relative size outside [0.0001, 0.05]");
    if (e.type == ElementType::text && e.text.empty()) invalid(where + ": text element without text");
  }
  const auto ancestor_of = [&](const ElementSpec& a, const ElementSpec& b) {
    for (const ElementSpec* p = &b; !p->parent.empty();) {
      p = s.find(p->parent);
      if (!p) return false;
      if (p->name == a.name) return true;
    }
    return false;
  };
  for (const auto& e : s.elements) {
    const std::string where = "screen '" + s.name + "' element '" + e.name + "'";
    if (!e.parent.empty()) {
      const ElementSpec* p = s.find(e.parent);
      if (!p) invalid(where + ": unknown parent '" + e.parent + "'");
      if (p->type != ElementType::comb) invalid(where + ": parent '" + e.parent + "' is not a comb");
      if (!p->bbox.contains(e.bbox) || p->bbox == e.bbox) invalid(where + ": not strictly inside its parent");
    }
    if (!e.label_of.empty() && !s.find(e.label_of)) invalid(where + ": captions unknown element '" + e.label_of + "'");
    if (!e.anchor.empty() && !s.find(e.anchor)) invalid(where + ": unknown anchor '" + e.anchor + "'");
  }
  for (std::size_t i = 0; i < s.elements.size(); ++i) {
    for (std::size_t j = i + 1; j < s.elements.size(); ++j) {
      const auto& a = s.elements[i];
      const auto& b = s.elements[j];
      if (ancestor_of(a, b) || ancestor_of(b, a)) continue;
      if (intersection_area(a.bbox, b.bbox) > 0) {
        invalid("screen '" + s.name + "' elements '" + a.name + "' and '" + b.name + "' overlap");
      }
    }
  }
}

inline std::string label_for(const ScreenSpec& s, const std::string& target) {
  const ElementSpec* t = s.find(target);
  if (!t) invalid("screen '" + s.name + "' has no element '" + target + "'");
  if (t->type == ElementType::text) return t->text;
  for (const auto& e : s.elements) {
    if (e.type == ElementType::text && e.label_of == target) return e.text;
  }
  invalid("element '" + target + "' on screen '" + s.name + "' has no caption to label it");
}

// ---------------------------------------------------------------------------
// Rendering

struct ScreenState {
  std::map<std::string, Point> offsets;  // per element translation
  std::string highlight;                 // element drawn in its pressed state
};

struct RenderedScreen {
  Raster image;
  FrameDetection truth;
};

namespace detail {

inline void fill_shape(Raster& img, const BBox& b, Shape shape, double v) {
  const int x0 = std::max(0, b.x), y0 = std::max(0, b.y);
  const int x1 = std::min(img.width(), b.right()), y1 = std::min(img.height(), b.bottom());
  const double cx = b.x + b.w / 2.0, cy = b.y + b.h / 2.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      bool in = true;
      if (shape == Shape::circle) {
        const double u = (px - cx) / (b.w / 2.0), w = (py - cy) / (b.h / 2.0);
        in = u * u + w * w <= 1.0;
      } else if (shape == Shape::irregular) {
        // upward triangle: apex at top centre, base along the bottom edge
        const double t = (py - b.y) / b.h;
        in = std::abs(px - cx) <= t * b.w / 2.0;
      }
      if (in) img.at(x, y) = v;
    }
  }
}

inline void draw_text(Raster& img, const BBox& b, double ink, std::uint64_t pattern_seed) {
  std::mt19937_64 rng(pattern_seed);
  const int h = b.h;
  const int cw = std::max(3, static_cast<int>(std::lround(h * 7.0 / 12.0)));
  for (int gx = b.x; gx + 2 <= b.right(); gx += cw) {
    // one glyph: horizontal strokes of 2px on a 3px pitch, first stroke always on
    const int gw = std::min(cw - 1, b.right() - gx);
    for (int row = 1, k = 0; row + 2 <= h; row += 3, ++k) {
      if (k > 0 && uniform_int(rng, 0, 9) < 3) continue;
      for (int y = b.y + row; y < b.y + row + 2; ++y) {
        for (int x = gx; x < gx + gw; ++x) {
          if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) img.at(x, y) = ink;
        }
      }
    }
  }
}

inline Orientation truth_orientation(const ElementSpec& e) {
  if (e.type == ElementType::text || e.shape != Shape::rectangle) return Orientation::horizontal;
  return e.bbox.w >= e.bbox.h ? Orientation::horizontal : Orientation::vertical;
}

inline int depth(const ScreenSpec& s, const ElementSpec& e) {
  int d = 0;
  for (const ElementSpec* p = &e; !p->parent.empty(); p = s.find(p->parent)) ++d;
  return d;
}

}  // namespace detail

/// Draws a screen and its ground-truth annotation. Offsets translate elements
/// (clipped at the screen edge; fully hidden elements drop out of the truth).
inline RenderedScreen render_screen(const ScreenSpec& s, int width, int height, std::uint64_t seed,
                                    const ScreenState& state = {}) {
  const double bg = quantize8(s.background);
  RenderedScreen out{Raster(width, height, 1, bg), {}};

  const auto moved = [&](const ElementSpec& e) {
    BBox b = e.bbox;
    if (auto it = state.offsets.find(e.name); it != state.offsets.end()) {
      b.x += it->second.x;
      b.y += it->second.y;
    }
    return b;
  };
  // Base tone each element is drawn on, and its own fill.
  std::map<std::string, double> base, fill;
  std::vector<const ElementSpec*> order;
  for (const auto& e : s.elements) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [&](const ElementSpec* a, const ElementSpec* b) {
    return detail::depth(s, *a) < detail::depth(s, *b);
  });
  for (const ElementSpec* e : order) {
    const double under = e->parent.empty() ? bg : fill.at(e->parent);
    base[e->name] = under;
    switch (e->type) {
      case ElementType::comb: fill[e->name] = comb_fill(under); break;
      case ElementType::icon: fill[e->name] = icon_fill(under); break;
      case ElementType::text: fill[e->name] = under; break;
    }
  }
  for (const ElementSpec* e : order) {
    const BBox b = moved(*e);
    const bool pressed = state.highlight == e->name;
    if (e->type == ElementType::text) {
      if (pressed) detail::fill_shape(out.image, b, Shape::rectangle, away(base[e->name], 0.2));
      detail::draw_text(out.image, b, text_ink(base[e->name]), fnv1a(e->name + "|" + e->text, seed));
    } else {
      const double v = pressed ? highlighted(fill[e->name], base[e->name]) : fill[e->name];
      detail::fill_shape(out.image, b, e->shape, v);
    }
  }

  // Ground truth.
  const double screen_area = static_cast<double>(width) * height;
  std::vector<GuiElement> elements;
  std::vector<std::string> names;
  for (const auto& e : s.elements) {
    const BBox m = moved(e);
    const int x0 = std::max(0, m.x), y0 = std::max(0, m.y);
    const int x1 = std::min(width, m.right()), y1 = std::min(height, m.bottom());
    if (x1 <= x0 || y1 <= y0) continue;
    GuiElement g;
    g.type = e.type;
    g.bbox = {x0, y0, x1 - x0, y1 - y0};
    g.shape = e.type == ElementType::text ? Shape::rectangle : e.shape;
    g.orientation = detail::truth_orientation(e);
    g.rel_size = static_cast<double>(g.bbox.area()) / screen_area;
    if (e.type == ElementType::text) g.label = e.text;
    g.id = static_cast<int>(elements.size());
    elements.push_back(g);
    names.push_back(e.name);
  }
  // Reading order, then translate name-based relations to ids.
  const auto order_idx = detection::reading_order(elements);
  std::vector<GuiElement> sorted;
  std::map<std::string, int> id_of;
  for (std::size_t i : order_idx) {
    id_of[names[i]] = static_cast<int>(sorted.size());
    sorted.push_back(elements[i]);
    sorted.back().id = static_cast<int>(sorted.size()) - 1;
  }
  elements = std::move(sorted);
  std::vector<ElementRelation> rel;
  for (const auto& e : s.elements) {
    if (!id_of.count(e.name)) continue;
    const int id = id_of[e.name];
    if (!e.parent.empty() && id_of.count(e.parent)) rel.push_back({id, id_of[e.parent], RelationKind::inside});
    if (e.type != ElementType::text) continue;
    if (!e.label_of.empty() && e.caption_kind != RelationKind::inside && id_of.count(e.label_of)) {
      rel.push_back({id, id_of[e.label_of], e.caption_kind});
    }
    if (!e.anchor.empty() && id_of.count(e.anchor)) rel.push_back({id, id_of[e.anchor], RelationKind::below});
  }
  std::sort(rel.begin(), rel.end(), [](const ElementRelation& a, const ElementRelation& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
  for (const auto& r : rel) {
    if (r.kind == RelationKind::inside) elements[static_cast<std::size_t>(r.target)].children.push_back(r.source);
  }
  for (auto& g : elements) std::sort(g.children.begin(), g.children.end());
  out.truth.elements = std::move(elements);
  out.truth.relations = std::move(rel);
  return out;
}

// ---------------------------------------------------------------------------
// Spec parsing

namespace detail {

inline BBox parse_bbox(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) invalid(where + ": bbox must be [x, y, w, h]");
  try {
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  } catch (const json::exception&) {
    invalid(where + ": bbox entries must be integers");
  }
}

/// Appends a caption Text element for `target`, positioned by placement.
inline void add_caption(ScreenSpec& s, const ElementSpec& target, const std::string& text, RelationKind placement,
                        int gap, int screen_h) {
  ElementSpec t;
  t.name = target.name + ".caption";
  t.type = ElementType::text;
  t.text = text;
  t.label_of = target.name;
  t.caption_kind = placement;
  t.row = target.row;
  const int th = text_height(screen_h);
  const int tw = char_width(screen_h) * static_cast<int>(text.size());
  const BBox b = target.bbox;
  const int cx = b.x + b.w / 2, cy = b.y + b.h / 2;
  switch (placement) {
    case RelationKind::below: t.bbox = {cx - tw / 2, b.bottom() + gap, tw, th}; break;
    case RelationKind::above: t.bbox = {cx - tw / 2, b.y - gap - th, tw, th}; break;
    case RelationKind::right: t.bbox = {b.right() + gap, cy - th / 2, tw, th}; break;
    case RelationKind::left: t.bbox = {b.x - gap - tw, cy - th / 2, tw, th}; break;
    case RelationKind::inside: {
      t.parent = target.name;
      const ElementSpec* icon = nullptr;
      for (const auto& e : s.elements) {
        if (e.parent == target.name && e.type == ElementType::icon && (!icon || e.bbox.bottom() > icon->bbox.bottom())) {
          icon = &e;
        }
      }
      if (icon) {
        const int icx = icon->bbox.x + icon->bbox.w / 2;
        t.bbox = {icx - tw / 2, icon->bbox.bottom() + gap, tw, th};
        t.anchor = icon->name;
      } else {
        t.bbox = {cx - tw / 2, cy - th / 2, tw, th};
      }
      break;
    }
  }
  s.elements.push_back(std::move(t));
}

}  // namespace detail

ScreenSpec random_screen(int width, int height, std::uint64_t seed, int min_elements = 8, int max_elements = 20,
                         const std::string& name = "random");

inline ScreenSpec parse_screen(const json& j, int width, int height) {
  if (!j.is_object()) invalid("screen entry must be an object");
  const std::string name = j.value("name", std::string{});
  if (name.empty()) invalid("screen without a name");
  if (j.contains("random")) {
    const auto& r = j["random"];
    ScreenSpec s = random_screen(width, height, r.value("seed", 1ULL), r.value("min_elements", 8),
                                 r.value("max_elements", 20), name);
    s.background = j.value("background", s.background);
    return s;
  }
  ScreenSpec s;
  s.name = name;
  s.background = j.value("background", 0.95);
  if (!(s.background >= 0.0 && s.background <= 1.0)) invalid("screen '" + name + "': background outside [0,1]");
  std::vector<std::pair<std::size_t, json>> captions;
  for (const auto& ej : j.value("elements", json::array())) {
    ElementSpec e;
    e.name = ej.value("name", std::string{});
    const std::string where = "screen '" + name + "' element '" + e.name + "'";
    try {
      e.type = detection::parse_element_type(ej.value("type", std::string{"icon"}));
      e.shape = imaging::parse_shape(ej.value("shape", std::string{"rectangle"}));
    } catch (const Error& err) {
      invalid(where + ": " + err.what());
    }
    e.bbox = detail::parse_bbox(ej.value("bbox", json()), where);
    e.text = ej.value("text", std::string{});
    e.parent = ej.value("parent", std::string{});
    e.row = ej.value("row", false);
    s.elements.push_back(e);
    if (ej.contains("caption")) captions.emplace_back(s.elements.size() - 1, ej["caption"]);
  }
  for (const auto& [idx, cj] : captions) {
    const ElementSpec target = s.elements[idx];
    RelationKind kind = RelationKind::below;
    try {
      kind = detection::parse_relation_kind(cj.value("placement", std::string{"below"}));
    } catch (const Error& err) {
      invalid("caption of '" + target.name + "': " + err.what());
    }
    detail::add_caption(s, target, cj.value("text", std::string{}), kind, cj.value("gap", caption_gap(height)), height);
  }
  return s;
}

inline ScriptStep parse_step(const json& j, std::size_t index) {
  const std::string where = "script step " + std::to_string(index);
  if (!j.is_object()) invalid(where + ": must be an object");
  ScriptStep st;
  const std::string action = j.value("action", std::string{});
  if (action == "click") {
    st.kind = StepKind::click;
  } else if (action == "swipe") {
    st.kind = StepKind::swipe;
  } else if (action == "adjust") {
    st.kind = StepKind::adjust;
  } else if (action == "transition") {
    st.kind = StepKind::transition;
  } else {
    invalid(where + ": unknown action '" + action + "'");
  }
  st.target = j.value("target", std::string{});
  st.next = j.value("next", std::string{});
  st.direction = j.value("direction", std::string{});
  st.delta = j.value("delta", 0);
  return st;
}

inline LogSpec parse_log_spec(const json& j) {
  if (!j.is_object()) invalid("spec must be a JSON object");
  LogSpec spec;
  try {
    spec.width = j.at("screen").at("width").get<int>();
    spec.height = j.at("screen").at("height").get<int>();
  } catch (const json::exception&) {
    invalid("spec needs screen.width and screen.height");
  }
  spec.seed = j.value("seed", 1ULL);
  spec.lead_frames = j.value("lead_frames", 2);
  spec.frames_per_step = j.value("frames_per_step", 4);
  spec.frame_interval_ms = j.value("frame_interval_ms", 100LL);
  spec.record_events = j.value("record_events", true);
  for (const auto& sj : j.value("screens", json::array())) spec.screens.push_back(parse_screen(sj, spec.width, spec.height));
  std::size_t i = 0;
  for (const auto& st : j.value("script", json::array())) spec.script.push_back(parse_step(st, i++));
  return spec;
}

inline LogSpec load_log_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot read spec '" + path.string() + "'");
  try {
    return parse_log_spec(json::parse(in));
  } catch (const json::parse_error& e) {
    invalid("malformed spec '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Random screens

inline ScreenSpec random_screen(int width, int height, std::uint64_t seed, int min_elements, int max_elements,
                                const std::string& name) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  ScreenSpec s;
  s.name = name;
  s.background = uniform_int(rng, 0, 1) ? 0.95 : 0.75;
  const double area = static_cast<double>(width) * height;
  const double k = ui_scale(height);
  const int pad = static_cast<int>(std::lround(16 * k));
  const int gap = caption_gap(height);
  const int th = text_height(height);
  const int cw = char_width(height);
  const int cols = 4, rows = 3;
  const int cell_w = width / cols, cell_h = height / rows;
  const int target = uniform_int(rng, min_elements, max_elements);

  std::vector<int> cells(cols * rows);
  for (int i = 0; i < cols * rows; ++i) cells[i] = i;
  for (int i = cols * rows - 1; i > 0; --i) std::swap(cells[i], cells[uniform_int(rng, 0, i)]);

  static const char* kWords[] = {"Camera", "Album", "Edit", "Save", "Crop", "Share", "Filter", "Beauty",
                                 "Collage", "Tone", "Light", "Frame", "Text", "Sticker", "Blur", "Sharpen"};
  const auto word = [&]() { return std::string(kWords[uniform_int(rng, 0, 15)]); };
  const auto icon_side = [&](double lo, double hi) {
    return static_cast<int>(std::lround(std::sqrt(uniform_real(rng, lo, hi) * area)));
  };

  int count = 0;
  int unit_no = 0;
  for (int cell : cells) {
    const int remaining = target - count;
    if (remaining <= 0) break;
    const int cells_left = cols * rows - unit_no;
    const int ox = (cell % cols) * cell_w + pad, oy = (cell / cols) * cell_h + pad;
    const int aw = cell_w - 2 * pad, ah = cell_h - 2 * pad;
    // Bias toward multi-element units when many elements remain.
    int kind = uniform_int(rng, 0, 5);
    if (remaining >= 3 && remaining > 2 * (cells_left - 1)) kind = 2;
    if (kind == 2 && remaining < 3) kind = remaining == 2 ? 0 : 3;
    if ((kind == 0 || kind == 1 || kind == 5) && remaining < 2) kind = 3;
    const std::string base = "u" + std::to_string(unit_no++);
    const auto place = [&](int w, int h) {
      return Point{ox + uniform_int(rng, 0, std::max(0, aw - w)), oy + uniform_int(rng, 0, std::max(0, ah - h))};
    };
    switch (kind) {
      case 0:
      case 1: {  // icon with caption below / right
        const int side = icon_side(0.001, 0.004);
        const std::string text = word();
        const int tw = cw * static_cast<int>(text.size());
        const bool below = kind == 0;
        const int w = below ? std::max(side, tw) : side + gap + tw;
        const int h = below ? side + gap + th : std::max(side, th);
        const Point p = place(w, h);
        ElementSpec icon = make_element(base + ".icon", ElementType::icon, {}, uniform_int(rng, 0, 2) ? Shape::rectangle : Shape::circle);
        icon.bbox = below ? BBox{p.x + (w - side) / 2, p.y, side, side} : BBox{p.x, p.y + (h - side) / 2, side, side};
        s.elements.push_back(icon);
        detail::add_caption(s, icon, text, below ? RelationKind::below : RelationKind::right, gap, height);
        count += 2;
        break;
      }
      case 2: {  // comb button: icon + caption inside
        const double rel = uniform_real(rng, 0.012, std::min(0.045, 0.9 * aw * ah / area));
        const double aspect = uniform_real(rng, 1.2, 1.8);
        int w = static_cast<int>(std::lround(std::sqrt(rel * area * aspect)));
        int h = static_cast<int>(std::lround(std::sqrt(rel * area / aspect)));
        w = std::min(w, aw);
        h = std::min(h, ah);
        const Point p = place(w, h);
        ElementSpec comb = make_element(base + ".comb", ElementType::comb, {p.x, p.y, w, h}, Shape::rectangle);
        s.elements.push_back(comb);
        const std::string text = word();
        const int inner = static_cast<int>(std::lround(10 * k));
        const int side = std::max(8, std::min({h - 2 * inner - gap - th, w / 3, static_cast<int>(0.45 * h)}));
        const int block = side + gap + th;
        ElementSpec icon = make_element(base + ".icon", ElementType::icon, {p.x + (w - side) / 2, p.y + (h - block) / 2, side, side}, Shape::rectangle);
        icon.parent = comb.name;
        s.elements.push_back(icon);
        detail::add_caption(s, comb, text, RelationKind::inside, gap, height);
        count += 3;
        break;
      }
      case 3: {  // lone icon
        const int side = icon_side(0.001, 0.004);
        const int shape = uniform_int(rng, 0, 2);
        const int w = shape == 2 ? static_cast<int>(side * 1.2) : side;
        const Point p = place(w, side);
        s.elements.push_back(make_element(base + ".icon", ElementType::icon, {p.x, p.y, w, side},
                                         shape == 0 ? Shape::rectangle : (shape == 1 ? Shape::circle : Shape::irregular)));
        count += 1;
        break;
      }
      case 4: {  // lone text
        const std::string text = word();
        const int tw = cw * static_cast<int>(text.size());
        const Point p = place(tw, th);
        ElementSpec t = make_element(base + ".text", ElementType::text, {p.x, p.y, tw, th}, Shape::rectangle, text);
        s.elements.push_back(t);
        count += 1;
        break;
      }
      default: {  // round comb holding an icon
        const double rel = uniform_real(rng, 0.012, std::min(0.03, 0.8 * std::min(aw, ah) * std::min(aw, ah) / area));
        const int d = std::min({static_cast<int>(std::lround(std::sqrt(rel * area))), aw, ah});
        const Point p = place(d, d);
        ElementSpec comb = make_element(base + ".comb", ElementType::comb, {p.x, p.y, d, d}, Shape::circle);
        s.elements.push_back(comb);
        const int side = static_cast<int>(d * 0.35);
        ElementSpec icon = make_element(base + ".icon", ElementType::icon, {p.x + (d - side) / 2, p.y + (d - side) / 2, side, side}, Shape::rectangle);
        icon.parent = comb.name;
        s.elements.push_back(icon);
        count += 2;
        break;
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Scripted logs

struct SynthLog {
  VisualLog log;
  std::vector<FrameDetection> truth;    // per frame
  std::vector<std::string> screens;     // screen name per frame
  std::vector<std::string> tokens;      // canonical interaction tokens
  std::vector<std::size_t> major_events;
};

/// Renders a scripted session. Major-change steps (clicks, transitions) must
/// change the screen clearly (MSE > 0.02) and every other frame pair must
/// stay quiet (MSE < 0.005), so the log is unambiguous for the default
/// threshold.
inline SynthLog render_log(const LogSpec& spec) {
  if (spec.screens.empty()) invalid("spec needs at least one screen");
  if (spec.lead_frames < 1) invalid("lead_frames must be >= 1");
  if (spec.frames_per_step < 2) invalid("frames_per_step must be >= 2");
  for (const auto& s : spec.screens) validate_screen(s, spec.width, spec.height);

  SynthLog out;
  out.log.id = "synth";
  out.log.width = spec.width;
  out.log.height = spec.height;
  out.log.has_events = spec.record_events;
  std::map<std::string, ScreenState> states;
  std::string current = spec.screens.front().name;

  const auto emit = [&](const std::string& screen_name, const ScreenState& st) {
    const ScreenSpec& sc = spec.screen(screen_name);
    RenderedScreen r = render_screen(sc, spec.width, spec.height, spec.seed, st);
    Frame f;
    f.index = out.log.frames.size();
    f.t_ms = static_cast<long long>(f.index) * spec.frame_interval_ms;
    f.image = std::move(r.image);
    out.log.frames.push_back(std::move(f));
    out.truth.push_back(std::move(r.truth));
    out.screens.push_back(screen_name);
    return out.log.frames.back().t_ms;
  };
  const auto touch = [&](InputKind kind, long long t, double x, double y) {
    InputEvent e;
    e.kind = kind;
    e.t_ms = t;
    e.x = std::clamp(static_cast<int>(std::lround(x)), 0, spec.width - 1);
    e.y = std::clamp(static_cast<int>(std::lround(y)), 0, spec.height - 1);
    out.log.events.push_back(e);
  };
  const auto center_of = [&](const ScreenSpec& sc, const std::string& name) {
    const ElementSpec* e = sc.find(name);
    Point off{};
    if (auto it = states[sc.name].offsets.find(name); it != states[sc.name].offsets.end()) off = it->second;
    return std::pair<double, double>{e->bbox.x + off.x + e->bbox.w / 2.0, e->bbox.y + off.y + e->bbox.h / 2.0};
  };
  const long long dt = spec.frame_interval_ms;
  const long long press_lead = std::max<long long>(1, dt * 2 / 5);

  const int lead = spec.script.empty() ? 1 : spec.lead_frames;
  for (int i = 0; i < lead; ++i) emit(current, states[current]);

  for (std::size_t si = 0; si < spec.script.size(); ++si) {
    const ScriptStep& step = spec.script[si];
    const std::string where = "script step " + std::to_string(si);
    const ScreenSpec& sc = spec.screen(current);
    int used = 0;
    switch (step.kind) {
      case StepKind::click: {
        if (!sc.find(step.target)) invalid(where + ": no element '" + step.target + "' on screen '" + current + "'");
        const std::string label = label_for(sc, step.target);
        (void)spec.screen(step.next);
        if (step.next == current) invalid(where + ": click must lead to a different screen");
        ScreenState pressed = states[current];
        pressed.highlight = step.target;
        const auto [cx, cy] = center_of(sc, step.target);
        const long long t0 = emit(current, pressed);
        touch(InputKind::touch_down, t0 - press_lead, cx, cy);
        touch(InputKind::touch_up, t0 + press_lead / 2, cx, cy);
        current = step.next;
        emit(current, states[current]);
        out.major_events.push_back(out.log.frames.size() - 1);
        out.tokens.push_back("click:" + tracking::token_text(label));
        used = 2;
        break;
      }
      case StepKind::transition: {
        (void)spec.screen(step.next);
        if (step.next == current) invalid(where + ": transition must lead to a different screen");
        current = step.next;
        emit(current, states[current]);
        out.major_events.push_back(out.log.frames.size() - 1);
        out.tokens.push_back("transition");
        used = 1;
        break;
      }
      case StepKind::swipe: {
        int dx = 0, dy = 0;
        const int shift = static_cast<int>(std::ceil(0.07 * spec.width));
        if (step.direction == "left") dx = -shift;
        else if (step.direction == "right") dx = shift;
        else if (step.direction == "up") dy = -shift;
        else if (step.direction == "down") dy = shift;
        else invalid(where + ": swipe direction must be left, right, up or down");
        std::vector<std::string> row;
        for (const auto& e : sc.elements) {
          if (e.row) row.push_back(e.name);
        }
        if (row.size() < 3) invalid(where + ": screen '" + current + "' needs >= 3 row elements to swipe");
        auto [tx, ty] = center_of(sc, row.front());
        ScreenState& st = states[current];
        for (int k = 0; k < 2; ++k) {
          for (const auto& n : row) {
            st.offsets[n].x += dx;
            st.offsets[n].y += dy;
          }
          const long long t = emit(current, st);
          if (k == 0) touch(InputKind::touch_down, t - press_lead, tx, ty);
          tx += dx;
          ty += dy;
          touch(InputKind::touch_move, t - press_lead / 4, tx, ty);
          if (k == 1) touch(InputKind::touch_up, t + press_lead / 2, tx, ty);
        }
        out.tokens.push_back("swipe:" + step.direction);
        used = 2;
        break;
      }
      case StepKind::adjust: {
        const ElementSpec* slider = sc.find(step.target);
        if (!slider || slider->type != ElementType::comb) invalid(where + ": adjust target must be a comb slider");
        const ElementSpec* knob = nullptr;
        for (const auto& e : sc.elements) {
          if (e.parent == slider->name && e.type == ElementType::icon) {
            knob = &e;
            break;
          }
        }
        if (!knob) invalid(where + ": slider '" + slider->name + "' has no knob");
        if (std::abs(step.delta) < 20) invalid(where + ": adjust delta must be at least 20 px");
        const std::string label = label_for(sc, slider->name);
        ScreenState& st = states[current];
        auto [tx, ty] = center_of(sc, knob->name);
        const int half = step.delta / 2;
        for (int k = 0; k < 2; ++k) {
          const int move = k == 0 ? half : step.delta - half;
          st.offsets[knob->name].x += move;
          BBox kb = knob->bbox;
          kb.x += st.offsets[knob->name].x;
          if (!slider->bbox.contains(kb) || kb.x == slider->bbox.x || kb.right() == slider->bbox.right()) {
            invalid(where + ": knob leaves its slider");
          }
          const long long t = emit(current, st);
          if (k == 0) touch(InputKind::touch_down, t - press_lead, tx, ty);
          tx += move;
          touch(InputKind::touch_move, t - press_lead / 4, tx, ty);
          if (k == 1) touch(InputKind::touch_up, t + press_lead / 2, tx, ty);
        }
        out.tokens.push_back("adjust:" + tracking::token_text(label) + ":" + (step.delta > 0 ? "+" : "-"));
        used = 2;
        break;
      }
    }
    for (int k = used; k < spec.frames_per_step; ++k) emit(current, states[current]);
  }

  if (!spec.record_events) out.log.events.clear();
  std::stable_sort(out.log.events.begin(), out.log.events.end(),
                   [](const InputEvent& a, const InputEvent& b) { return a.t_ms < b.t_ms; });

  // Unambiguity check against the default major-event threshold.
  const auto mse = consecutive_mse(out.log);
  std::set<std::size_t> majors(out.major_events.begin(), out.major_events.end());
  for (std::size_t i = 1; i < mse.size(); ++i) {
    if (majors.count(i) && mse[i] <= 0.02) {
      invalid("frame " + std::to_string(i) + ": screen change too faint (mse " + std::to_string(mse[i]) + ")");
    }
    if (!majors.count(i) && mse[i] >= 0.005) {
      invalid("frame " + std::to_string(i) + ": local change too large (mse " + std::to_string(mse[i]) + ")");
    }
  }
  return out;
}

inline json truth_to_json(const SynthLog& s) {
  json frames = json::array();
  for (std::size_t i = 0; i < s.truth.size(); ++i) {
    json f = detection::detection_to_json(i, s.truth[i]);
    f["screen"] = s.screens[i];
    frames.push_back(std::move(f));
  }
  return {{"frames", frames}, {"tokens", s.tokens}, {"major_events", s.major_events}};
}

/// Writes manifest, frames, events.jsonl (when recorded) and truth.json.
inline void write_synth_log(const SynthLog& s, const fs::path& dir) {
  write_log(s.log, dir);
  std::ofstream(dir / "truth.json") << truth_to_json(s).dump(1) << '\n';
}

}  // namespace vislog::synth
