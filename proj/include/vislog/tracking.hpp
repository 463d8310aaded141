#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vislog/detection.hpp"
#include "vislog/parallel.hpp"
#include "vislog/visual_log.hpp"

namespace vislog::tracking {

namespace fs = std::filesystem;
using detection::ElementType;
using detection::FrameDetection;
using detection::GuiElement;
using detection::RelationKind;
using nlohmann::json;

struct ElementMatch {
  int prev_id = 0;
  int next_id = 0;
  Point displacement;
  double appearance_delta = 0.0;
  friend bool operator==(const ElementMatch&, const ElementMatch&) = default;
};

struct MatchResult {
  std::vector<ElementMatch> matches;  // ordered by prev_id
  std::vector<int> disappeared;       // prev ids
  std::vector<int> appeared;          // next ids

  [[nodiscard]] const ElementMatch* for_prev(int id) const {
    for (const auto& m : matches) {
      if (m.prev_id == id) return &m;
    }
    return nullptr;
  }
};

struct TrackingConfig {
  double match_iou = 0.3;
  double match_center_fraction = 0.1;  // of screen width
  double match_size_tolerance = 0.3;
  double click_delta = 0.05;
  int click_margin = 5;
  int static_tolerance = 3;
  int swipe_quorum = 3;
  int swipe_tolerance = 3;
  double swipe_min_fraction = 0.05;  // of screen width
  double adjust_max_rel_size = 0.002;
  int adjust_min_move = 10;
  long long animation_window_ms = 200;

  void validate() const {
    const auto require = [](bool ok, const char* what) {
      if (!ok) fail_invalid(std::string("tracking config: ") + what);
    };
    require(match_iou > 0 && match_iou <= 1, "match_iou must be in (0,1]");
    require(match_center_fraction > 0 && match_center_fraction <= 1, "match_center_fraction must be in (0,1]");
    require(match_size_tolerance >= 0 && match_size_tolerance < 1, "match_size_tolerance must be in [0,1)");
    require(click_delta > 0 && click_delta <= 1, "click_delta must be in (0,1]");
    require(click_margin >= 0, "click_margin must be >= 0");
    require(static_tolerance >= 0, "static_tolerance must be >= 0");
    require(swipe_quorum >= 2, "swipe_quorum must be >= 2");
    require(swipe_tolerance >= 0, "swipe_tolerance must be >= 0");
    require(swipe_min_fraction > 0 && swipe_min_fraction < 1, "swipe_min_fraction must be in (0,1)");
    require(adjust_max_rel_size > 0 && adjust_max_rel_size < 1, "adjust_max_rel_size must be in (0,1)");
    require(adjust_min_move >= 1, "adjust_min_move must be >= 1");
    require(animation_window_ms >= 0, "animation_window_ms must be >= 0");
  }
};

/// Mean absolute gray difference between two boxes, top-left aligned over the
/// common width and height.
inline double appearance_delta(const Raster& prev, const BBox& a, const Raster& next, const BBox& b) {
  const int w = std::min(a.w, b.w), h = std::min(a.h, b.h);
  if (w <= 0 || h <= 0) return 0.0;
  double sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) sum += std::abs(prev.at(a.x + x, a.y + y) - next.at(b.x + x, b.y + y));
  }
  return std::clamp(sum / (static_cast<double>(w) * h), 0.0, 1.0);
}

/// One-to-one matching: greedy by IoU, then by nearest centre for elements of
/// the same type and similar size. Frames must be grayscale.
inline MatchResult match_elements(const FrameDetection& prev, const Raster& prev_frame, const FrameDetection& next,
                                  const Raster& next_frame, const TrackingConfig& cfg = {}) {
  struct Pair {
    double key;
    std::size_t i, j;
  };
  const auto& P = prev.elements;
  const auto& N = next.elements;
  std::vector<bool> used_p(P.size()), used_n(N.size());
  std::vector<std::pair<std::size_t, std::size_t>> chosen;

  const auto take = [&](std::vector<Pair>& pairs) {
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.key != b.key) return a.key < b.key;
      return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });
    for (const auto& p : pairs) {
      if (used_p[p.i] || used_n[p.j]) continue;
      used_p[p.i] = used_n[p.j] = true;
      chosen.emplace_back(p.i, p.j);
    }
  };

  std::vector<Pair> by_iou;
  for (std::size_t i = 0; i < P.size(); ++i) {
    for (std::size_t j = 0; j < N.size(); ++j) {
      const double v = iou(P[i].bbox, N[j].bbox);
      if (v >= cfg.match_iou) by_iou.push_back({-v, i, j});
    }
  }
  take(by_iou);

  const double reach = cfg.match_center_fraction * prev_frame.width();
  const auto similar = [&](int a, int b) {
    return std::abs(a - b) <= cfg.match_size_tolerance * std::max(a, b);
  };
  std::vector<Pair> by_center;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (used_p[i]) continue;
    for (std::size_t j = 0; j < N.size(); ++j) {
      if (used_n[j] || P[i].type != N[j].type) continue;
      if (!similar(P[i].bbox.w, N[j].bbox.w) || !similar(P[i].bbox.h, N[j].bbox.h)) continue;
      const double d = std::hypot(P[i].bbox.cx() - N[j].bbox.cx(), P[i].bbox.cy() - N[j].bbox.cy());
      if (d <= reach) by_center.push_back({d, i, j});
    }
  }
  take(by_center);

  MatchResult out;
  for (const auto& [i, j] : chosen) {
    ElementMatch m;
    m.prev_id = P[i].id;
    m.next_id = N[j].id;
    m.displacement = {N[j].bbox.x - P[i].bbox.x, N[j].bbox.y - P[i].bbox.y};
    m.appearance_delta = appearance_delta(prev_frame, P[i].bbox, next_frame, N[j].bbox);
    out.matches.push_back(m);
  }
  std::sort(out.matches.begin(), out.matches.end(),
            [](const ElementMatch& a, const ElementMatch& b) { return a.prev_id < b.prev_id; });
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (!used_p[i]) out.disappeared.push_back(P[i].id);
  }
  for (std::size_t j = 0; j < N.size(); ++j) {
    if (!used_n[j]) out.appeared.push_back(N[j].id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interactions

enum class Action { click, swipe, adjust, transition };

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::click: return "click";
    case Action::swipe: return "swipe";
    case Action::adjust: return "adjust";
    case Action::transition: return "transition";
  }
  return "?";
}

inline Action parse_action(std::string_view s) {
  if (s == "click") return Action::click;
  if (s == "swipe") return Action::swipe;
  if (s == "adjust") return Action::adjust;
  if (s == "transition") return Action::transition;
  fail_invalid("unknown action '" + std::string(s) + "'");
}

struct InteractionEvent {
  long long t_ms = 0;
  Action action = Action::transition;
  std::optional<int> target_id;
  std::optional<std::string> target_label;
  std::optional<std::string> direction;
  std::optional<int> delta;
  bool low_confidence = false;
  std::size_t frame = 0;  // frame that ends the step which produced the event
  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

struct InteractionSequence {
  std::string log_id;
  std::vector<InteractionEvent> events;
  friend bool operator==(const InteractionSequence&, const InteractionSequence&) = default;
};

inline std::string token_text(std::string_view label) {
  std::string out;
  for (char c : label) {
    const auto u = static_cast<unsigned char>(c);
    out += std::isspace(u) ? '_' : static_cast<char>(std::tolower(u));
  }
  return out;
}

inline std::string token(const InteractionEvent& e) {
  const auto name = [&]() {
    if (e.target_label && !e.target_label->empty()) return token_text(*e.target_label);
    return "#" + std::to_string(e.target_id.value_or(-1));
  };
  switch (e.action) {
    case Action::click: return "click:" + name();
    case Action::swipe: return "swipe:" + e.direction.value_or("?");
    case Action::adjust: return "adjust:" + name() + ":" + (e.delta.value_or(0) < 0 ? "-" : "+");
    case Action::transition: return "transition";
  }
  return "?";
}

inline std::vector<std::string> tokenize(const InteractionSequence& seq) {
  std::vector<std::string> out;
  out.reserve(seq.events.size());
  for (const auto& e : seq.events) out.push_back(token(e));
  return out;
}

inline InteractionEvent make_event(long long t_ms, Action action, std::optional<int> target = std::nullopt,
                                   std::optional<std::string> label = std::nullopt) {
  InteractionEvent e;
  e.t_ms = t_ms;
  e.action = action;
  e.target_id = target;
  e.target_label = std::move(label);
  return e;
}

namespace detail {

inline bool is_static(const ElementMatch& m, int tol) {
  return std::abs(m.displacement.x) <= tol && std::abs(m.displacement.y) <= tol;
}

/// Text naming an element: its own label, a caption related to it
/// (below > right > left > above), else a text placed inside it.
inline std::optional<std::string> label_of(const FrameDetection& d, int id) {
  const GuiElement* e = d.find(id);
  if (!e) return std::nullopt;
  if (e->label) return e->label;
  for (RelationKind kind : {RelationKind::below, RelationKind::right, RelationKind::left, RelationKind::above,
                            RelationKind::inside}) {
    for (const auto& r : d.relations) {
      if (r.target != id || r.kind != kind) continue;
      const GuiElement* t = d.find(r.source);
      if (t && t->type == ElementType::text && t->label) return t->label;
    }
  }
  return std::nullopt;
}

inline std::optional<int> parent_of(const FrameDetection& d, int id) {
  for (const auto& e : d.elements) {
    if (std::find(e.children.begin(), e.children.end(), id) != e.children.end()) return e.id;
  }
  return std::nullopt;
}

}  // namespace detail

/// Infers one interaction per inter-frame step at most. `matches[i]` relates
/// frame i-1 to frame i (entry 0 unused); frames must be grayscale-comparable
/// with the detections.
inline InteractionSequence infer_interactions(const VisualLog& log, const std::vector<FrameDetection>& dets,
                                              const std::vector<MatchResult>& matches,
                                              const std::vector<MajorEvent>& majors, const TrackingConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = log.frames.size();
  if (dets.size() != n || matches.size() != n) fail_invalid("per-frame detections and matches must cover every frame");
  std::set<std::size_t> major;
  for (const auto& m : majors) major.insert(m.frame_index);
  const int W = log.width;
  const bool events = log.has_events;

  InteractionSequence seq;
  seq.log_id = log.id;
  std::vector<std::optional<Action>> emitted(n);  // per step, by ending frame

  const auto inputs_in = [&](long long lo, long long hi, std::optional<InputKind> kind) {
    std::vector<const InputEvent*> out;
    for (const auto& e : log.events) {
      if (e.t_ms > lo && e.t_ms <= hi && (!kind || e.kind == *kind)) out.push_back(&e);
    }
    return out;
  };

  for (std::size_t i = 1; i < n; ++i) {
    const FrameDetection& prev = dets[i - 1];
    const MatchResult& mr = matches[i];
    const long long t0 = log.frames[i - 1].t_ms, t1 = log.frames[i].t_ms;
    const bool is_major = major.count(i) > 0;
    const auto downs = inputs_in(t0, t1, InputKind::touch_down);
    const auto any_input = inputs_in(t0, t1, std::nullopt);
    std::optional<InteractionEvent> ev;

    if (events && !is_major) {
      bool active = false;
      for (const auto& e : log.events) {
        active = active || (e.t_ms >= t0 - cfg.animation_window_ms && e.t_ms <= t1 + cfg.animation_window_ms);
      }
      if (!active) continue;  // routine automatic animation
    }

    std::vector<const ElementMatch*> moved;
    for (const auto& m : mr.matches) {
      if (!detail::is_static(m, cfg.static_tolerance)) moved.push_back(&m);
    }
    const auto contains_moved = [&](const GuiElement& e) {
      for (const ElementMatch* m : moved) {
        const GuiElement* o = prev.find(m->prev_id);
        if (o && o->id != e.id && e.bbox.contains(o->bbox)) return true;
      }
      return false;
    };
    const auto changed_static = [&](const ElementMatch& m) {
      const GuiElement* e = prev.find(m.prev_id);
      return e && detail::is_static(m, cfg.static_tolerance) && m.appearance_delta >= cfg.click_delta &&
             !contains_moved(*e);
    };

    // (1) click
    if (events) {
      for (const InputEvent* down : downs) {
        const ElementMatch* best = nullptr;
        for (const auto& m : mr.matches) {
          if (!changed_static(m)) continue;
          const GuiElement* e = prev.find(m.prev_id);
          if (!e->bbox.expanded(cfg.click_margin).contains(Point{down->x, down->y})) continue;
          if (!best || e->bbox.area() > prev.find(best->prev_id)->bbox.area()) best = &m;
        }
        if (!best && is_major) {
          // press and screen change landed in the same step: take the
          // innermost element under the touch
          const GuiElement* hit = nullptr;
          for (const auto& e : prev.elements) {
            if (!e.bbox.expanded(cfg.click_margin).contains(Point{down->x, down->y})) continue;
            if (!hit || e.bbox.area() < hit->bbox.area()) hit = &e;
          }
          if (hit) {
            ev = make_event(down->t_ms, Action::click, hit->id, detail::label_of(prev, hit->id));
            break;
          }
        }
        if (best) {
          ev = make_event(down->t_ms, Action::click, best->prev_id, detail::label_of(prev, best->prev_id));
          break;
        }
      }
    } else if (!is_major && i + 1 < n && major.count(i + 1)) {
      std::vector<const GuiElement*> changed;
      for (const auto& m : mr.matches) {
        if (changed_static(m)) changed.push_back(prev.find(m.prev_id));
      }
      std::vector<const GuiElement*> outer;
      for (const GuiElement* e : changed) {
        bool inner = false;
        for (const GuiElement* o : changed) inner = inner || (o != e && o->bbox.contains(e->bbox));
        if (!inner) outer.push_back(e);
      }
      if (outer.size() == 1) {
        ev = make_event(t1, Action::click, outer[0]->id, detail::label_of(prev, outer[0]->id));
        ev->low_confidence = true;
      }
    }

    const long long motion_t = any_input.empty() ? t1 : any_input.front()->t_ms;

    // (2) swipe
    if (!ev && !is_major) {
      const double min_move = cfg.swipe_min_fraction * W;
      std::vector<Point> big;
      for (const ElementMatch* m : moved) {
        if (std::hypot(m->displacement.x, m->displacement.y) >= min_move) big.push_back(m->displacement);
      }
      std::size_t best_count = 0;
      Point best{};
      for (const Point& c : big) {
        std::size_t count = 0;
        for (const Point& o : big) {
          count += std::abs(o.x - c.x) <= cfg.swipe_tolerance && std::abs(o.y - c.y) <= cfg.swipe_tolerance;
        }
        if (count > best_count) {
          best_count = count;
          best = c;
        }
      }
      if (best_count >= static_cast<std::size_t>(cfg.swipe_quorum)) {
        InteractionEvent e = make_event(motion_t, Action::swipe);
        if (std::abs(best.x) >= std::abs(best.y)) {
          e.direction = best.x < 0 ? "left" : "right";
        } else {
          e.direction = best.y < 0 ? "up" : "down";
        }
        ev = e;
      }
    }

    // (3) adjust
    if (!ev && !is_major) {
      const double screen_area = static_cast<double>(log.width) * log.height;
      for (const ElementMatch* m : moved) {
        const GuiElement* e = prev.find(m->prev_id);
        if (static_cast<double>(e->bbox.area()) / screen_area > cfg.adjust_max_rel_size) continue;
        const int dx = m->displacement.x, dy = m->displacement.y;
        const bool along_x = std::abs(dx) >= cfg.adjust_min_move && std::abs(dy) <= cfg.static_tolerance;
        const bool along_y = std::abs(dy) >= cfg.adjust_min_move && std::abs(dx) <= cfg.static_tolerance;
        if (!along_x && !along_y) continue;
        const auto parent = detail::parent_of(prev, e->id);
        if (!parent) continue;
        const GuiElement* comb = prev.find(*parent);
        const ElementMatch* pm = mr.for_prev(*parent);
        if (!comb || comb->type != ElementType::comb || !pm || !detail::is_static(*pm, cfg.static_tolerance)) continue;
        InteractionEvent a = make_event(motion_t, Action::adjust, comb->id, detail::label_of(prev, comb->id));
        a.delta = along_x ? dx : dy;
        ev = a;
        break;
      }
    }

    // (4) transition
    if (!ev && is_major) {
      const bool explained = emitted[i - 1].has_value() && *emitted[i - 1] != Action::transition;
      if (!explained) ev = make_event(t1, Action::transition);
    }
    if (!ev) continue;
    ev->frame = i;

    // Continuations of the previous step's gesture fold into it.
    if (!seq.events.empty() && downs.empty() && emitted[i - 1]) {
      InteractionEvent& last = seq.events.back();
      if (ev->action == Action::swipe && last.action == Action::swipe && last.direction == ev->direction) {
        emitted[i] = Action::swipe;
        continue;
      }
      if (ev->action == Action::adjust && last.action == Action::adjust && last.target_label == ev->target_label &&
          (last.delta.value_or(0) < 0) == (ev->delta.value_or(0) < 0)) {
        last.delta = last.delta.value_or(0) + ev->delta.value_or(0);
        emitted[i] = Action::adjust;
        continue;
      }
    }
    emitted[i] = ev->action;
    seq.events.push_back(*ev);
  }
  return seq;
}

/// Matches every consecutive frame pair; pairs are independent and may run on
/// several workers.
inline std::vector<MatchResult> match_log(const VisualLog& log, const std::vector<FrameDetection>& dets,
                                          const TrackingConfig& cfg = {}, std::size_t workers = 1) {
  const std::size_t n = log.frames.size();
  std::vector<Raster> grays(n, Raster(1, 1, 1));
  parallel_for(n, workers, [&](std::size_t i) { grays[i] = imaging::gray(log.frames[i].image); });
  std::vector<MatchResult> out(n);
  parallel_for(n > 0 ? n - 1 : 0, workers, [&](std::size_t k) {
    out[k + 1] = match_elements(dets[k], grays[k], dets[k + 1], grays[k + 1], cfg);
  });
  return out;
}

// ---------------------------------------------------------------------------
// interactions.json

inline json interactions_to_json(const InteractionSequence& seq) {
  json events = json::array();
  for (const auto& e : seq.events) {
    json j{{"t_ms", e.t_ms}, {"action", std::string(to_string(e.action))}};
    if (e.target_id) j["target_id"] = *e.target_id;
    if (e.target_label) j["target_label"] = *e.target_label;
    if (e.direction) j["direction"] = *e.direction;
    if (e.delta) j["delta"] = *e.delta;
    if (e.low_confidence) j["low_confidence"] = true;
    j["frame"] = e.frame;
    j["token"] = token(e);
    events.push_back(std::move(j));
  }
  return {{"log", seq.log_id}, {"events", events}};
}

inline InteractionSequence interactions_from_json(const json& j) {
  InteractionSequence seq;
  try {
    seq.log_id = j.at("log").get<std::string>();
    long long last = std::numeric_limits<long long>::min();
    for (const auto& ej : j.at("events")) {
      InteractionEvent e;
      e.t_ms = ej.at("t_ms").get<long long>();
      e.action = parse_action(ej.at("action").get<std::string>());
      if (ej.contains("target_id")) e.target_id = ej["target_id"].get<int>();
      if (ej.contains("target_label")) e.target_label = ej["target_label"].get<std::string>();
      if (ej.contains("direction")) e.direction = ej["direction"].get<std::string>();
      if (ej.contains("delta")) e.delta = ej["delta"].get<int>();
      e.low_confidence = ej.value("low_confidence", false);
      e.frame = ej.value("frame", std::size_t{0});
      if ((e.action == Action::click || e.action == Action::adjust) && !e.target_id) {
        fail_invalid(std::string(to_string(e.action)) + " event without target_id");
      }
      if (e.action == Action::swipe && !e.direction) fail_invalid("swipe event without direction");
      if (e.t_ms < last) fail_invalid("events out of time order");
      last = e.t_ms;
      seq.events.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail_invalid(std::string("malformed interactions: ") + e.what());
  }
  return seq;
}

inline InteractionSequence load_interactions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_invalid("cannot read interactions file '" + path.string() + "'");
  try {
    return interactions_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail_invalid("malformed interactions file '" + path.string() + "': " + e.what());
  } catch (const Error& e) {
    fail_invalid("interactions file '" + path.string() + "': " + e.what());
  }
}

}  // namespace vislog::tracking
