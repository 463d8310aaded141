#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vislog/image_io.hpp"
#include "vislog/imaging.hpp"
#include "vislog/parallel.hpp"
#include "vislog/raster.hpp"

namespace vislog {

namespace fs = std::filesystem;
using nlohmann::json;

struct Frame {
  std::size_t index = 0;
  long long t_ms = 0;
  Raster image;
  fs::path source;  // file the frame was decoded from, if any
};

enum class InputKind { touch_down, touch_up, touch_move, key };

struct InputEvent {
  long long t_ms = 0;
  InputKind kind = InputKind::touch_down;
  int x = 0;
  int y = 0;
  std::string key;

  [[nodiscard]] bool is_touch() const { return kind != InputKind::key; }
  friend bool operator==(const InputEvent&, const InputEvent&) = default;
};

struct VisualLog {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<Frame> frames;
  std::vector<InputEvent> events;
  bool has_events = false;  // an events stream was recorded (it may still be empty)
};

struct MajorEvent {
  std::size_t frame_index = 0;
  double mse = 0.0;
  friend bool operator==(const MajorEvent&, const MajorEvent&) = default;
};

struct LoadOptions {
  // Frames are ordered by timestamp. When set, a manifest whose listing order
  // disagrees with its timestamps is rejected instead of re-sorted.
  bool require_monotone = false;
};

struct LoadReport {
  std::vector<std::string> warnings;
};

inline std::string to_string(InputKind k) {
  switch (k) {
    case InputKind::touch_down: return "touch_down";
    case InputKind::touch_up: return "touch_up";
    case InputKind::touch_move: return "touch_move";
    case InputKind::key: return "key";
  }
  return "key";
}

inline std::optional<InputKind> parse_input_kind(const std::string& s) {
  if (s == "touch_down") return InputKind::touch_down;
  if (s == "touch_up") return InputKind::touch_up;
  if (s == "touch_move") return InputKind::touch_move;
  if (s == "key") return InputKind::key;
  return std::nullopt;
}

inline json event_to_json(const InputEvent& e) {
  json j = {{"t_ms", e.t_ms}, {"kind", to_string(e.kind)}};
  if (e.is_touch()) {
    j["x"] = e.x;
    j["y"] = e.y;
  } else {
    j["key"] = e.key;
  }
  return j;
}

namespace detail {

inline json read_json_file(const fs::path& path, const std::string& entry) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadErrorCode::missing_file, entry, "cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(LoadErrorCode::malformed_manifest, entry,
                    "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

[[noreturn]] inline void malformed(const std::string& entry, const std::string& what) {
  throw LoadError(LoadErrorCode::malformed_manifest, entry, "malformed " + entry + ": " + what);
}

inline std::vector<InputEvent> load_events(const fs::path& path, int width, int height) {
  const std::string name = path.filename().string();
  std::ifstream in(path);
  if (!in) throw LoadError(LoadErrorCode::missing_file, name, "events file not found: '" + path.string() + "'");
  std::vector<InputEvent> events;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string entry = name + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      malformed(entry, "not a JSON object");
    }
    if (!j.is_object() || !j.contains("t_ms") || !j["t_ms"].is_number_integer() || !j.contains("kind") ||
        !j["kind"].is_string()) {
      malformed(entry, "event needs integer t_ms and string kind");
    }
    InputEvent e;
    e.t_ms = j["t_ms"].get<long long>();
    const auto kind = parse_input_kind(j["kind"].get<std::string>());
    if (!kind) malformed(entry, "unknown event kind '" + j["kind"].get<std::string>() + "'");
    e.kind = *kind;
    if (e.is_touch()) {
      if (!j.contains("x") || !j.contains("y") || !j["x"].is_number_integer() || !j["y"].is_number_integer()) {
        malformed(entry, "touch event needs integer x and y");
      }
      e.x = j["x"].get<int>();
      e.y = j["y"].get<int>();
      if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) malformed(entry, "touch outside screen bounds");
    } else {
      if (!j.contains("key") || !j["key"].is_string()) malformed(entry, "key event needs string key");
      e.key = j["key"].get<std::string>();
    }
    events.push_back(std::move(e));
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const InputEvent& a, const InputEvent& b) { return a.t_ms < b.t_ms; });
  return events;
}

}  // namespace detail

/// Loads a visual log from a `vislog.json` manifest (or the directory holding one).
inline VisualLog load_log(const fs::path& manifest_or_dir, LoadReport* report = nullptr,
                          const LoadOptions& options = {}) {
  fs::path manifest = manifest_or_dir;
  if (fs::is_directory(manifest)) manifest /= "vislog.json";
  if (!fs::exists(manifest)) {
    throw LoadError(LoadErrorCode::missing_file, manifest.string(),
                    "manifest not found: '" + manifest.string() + "'");
  }
  const fs::path dir = manifest.parent_path();
  const json j = detail::read_json_file(manifest, manifest.filename().string());
  if (!j.is_object()) detail::malformed("manifest", "top level must be an object");
  if (!j.contains("version")) detail::malformed("manifest", "missing version");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != 1) {
    detail::malformed("manifest", "unsupported version");
  }
  if (!j.contains("screen") || !j["screen"].is_object() || !j["screen"].contains("width") ||
      !j["screen"].contains("height") || !j["screen"]["width"].is_number_integer() ||
      !j["screen"]["height"].is_number_integer()) {
    detail::malformed("manifest", "screen must carry integer width and height");
  }
  VisualLog log;
  log.id = dir.filename().string();
  if (log.id.empty()) log.id = fs::absolute(dir).filename().string();
  log.width = j["screen"]["width"].get<int>();
  log.height = j["screen"]["height"].get<int>();
  if (log.width < 1 || log.height < 1) detail::malformed("manifest", "screen dimensions must be positive");
  if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty()) {
    detail::malformed("manifest", "frames must be a non-empty array");
  }

  const auto& entries = j["frames"];
  std::vector<Frame> frames;
  frames.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& fe = entries[i];
    const std::string entry = "frame " + std::to_string(i);
    if (!fe.is_object() || !fe.contains("file") || !fe["file"].is_string() || !fe.contains("t_ms") ||
        !fe["t_ms"].is_number_integer()) {
      detail::malformed(entry, "needs string file and integer t_ms");
    }
    Frame fr;
    fr.t_ms = fe["t_ms"].get<long long>();
    fr.source = dir / fe["file"].get<std::string>();
    const std::string file_name = fe["file"].get<std::string>();
    if (!fs::exists(fr.source)) {
      throw LoadError(LoadErrorCode::missing_file, entry,
                      entry + ": file not found '" + fr.source.string() + "'");
    }
    if (options.require_monotone && !frames.empty() && fr.t_ms < frames.back().t_ms) {
      throw LoadError(LoadErrorCode::non_monotone_timestamps, entry,
                      entry + " (" + file_name + "): timestamp goes backwards");
    }
    try {
      fr.image = io::read_image(fr.source);
    } catch (const Error& e) {
      throw LoadError(LoadErrorCode::decode_failure, entry, entry + " (" + file_name + "): " + e.what());
    }
    if (fr.image.width() != log.width || fr.image.height() != log.height) {
      throw LoadError(LoadErrorCode::dimension_mismatch, entry,
                      entry + " (" + file_name + ") is " + std::to_string(fr.image.width()) + "x" +
                          std::to_string(fr.image.height()) + ", screen is " + std::to_string(log.width) +
                          "x" + std::to_string(log.height));
    }
    if (io::is_lossy_extension(fr.source) && report) {
      report->warnings.push_back(entry + " (" + file_name + ") uses a lossy format");
    }
    frames.push_back(std::move(fr));
  }
  std::stable_sort(frames.begin(), frames.end(), [](const Frame& a, const Frame& b) { return a.t_ms < b.t_ms; });
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i].index = i;
  log.frames = std::move(frames);

  if (j.contains("events_file") && !j["events_file"].is_null()) {
    if (!j["events_file"].is_string()) detail::malformed("manifest", "events_file must be a string");
    log.events = detail::load_events(dir / j["events_file"].get<std::string>(), log.width, log.height);
    log.has_events = true;
  }
  return log;
}

inline std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "f%04zu.png", index);
  return buf;
}

/// Writes frames as PNG plus manifest and (when recorded) events.jsonl.
inline void write_log(const VisualLog& log, const fs::path& dir) {
  fs::create_directories(dir);
  json frames = json::array();
  for (const Frame& f : log.frames) {
    const std::string name = frame_file_name(f.index);
    io::write_png(dir / name, f.image);
    frames.push_back({{"file", name}, {"t_ms", f.t_ms}});
  }
  json manifest = {{"version", 1}, {"screen", {{"width", log.width}, {"height", log.height}}}, {"frames", frames}};
  if (log.has_events) {
    manifest["events_file"] = "events.jsonl";
    std::ofstream ev(dir / "events.jsonl");
    for (const InputEvent& e : log.events) ev << event_to_json(e).dump() << '\n';
  }
  std::ofstream(dir / "vislog.json") << manifest.dump(2) << '\n';
}

/// Mean over pixels of the squared difference of two gray rasters.
inline double frame_mse(const Raster& a, const Raster& b) {
  if (a.channels() != 1 || b.channels() != 1) fail_invalid("frame_mse expects 1-channel rasters");
  if (a.width() != b.width() || a.height() != b.height()) fail_invalid("frame_mse: dimension mismatch");
  double acc = 0.0;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

/// MSE between each frame and its predecessor; entry 0 is 0.
inline std::vector<double> consecutive_mse(const VisualLog& log, std::size_t workers = 1) {
  const std::size_t n = log.frames.size();
  std::vector<Raster> grays(n);
  parallel_for(n, workers, [&](std::size_t i) { grays[i] = imaging::gray(log.frames[i].image); });
  std::vector<double> mse(n, 0.0);
  parallel_for(n, workers, [&](std::size_t i) {
    if (i > 0) mse[i] = frame_mse(grays[i - 1], grays[i]);
  });
  return mse;
}

inline std::vector<MajorEvent> major_events_from_mse(const std::vector<double>& mse, double theta) {
  std::vector<MajorEvent> out;
  for (std::size_t i = 1; i < mse.size(); ++i) {
    if (mse[i] > theta) out.push_back({i, mse[i]});
  }
  return out;
}

inline std::vector<MajorEvent> detect_major_events(const VisualLog& log, double theta, std::size_t workers = 1) {
  if (!(theta > 0.0 && theta < 1.0)) fail_invalid("major-event threshold must be in (0, 1)");
  return major_events_from_mse(consecutive_mse(log, workers), theta);
}

/// Frame 0 plus, for each major event at i, frame min(i + delay, last);
/// repeated indices collapse.
inline std::vector<std::size_t> sample_indices(std::size_t frame_count, const std::vector<MajorEvent>& events,
                                               std::size_t delay) {
  std::vector<std::size_t> out;
  if (frame_count == 0) return out;
  out.push_back(0);
  for (const MajorEvent& e : events) {
    const std::size_t idx = std::min(e.frame_index + delay, frame_count - 1);
    if (idx > out.back()) out.push_back(idx);
  }
  return out;
}

inline std::vector<std::reference_wrapper<const Frame>> sample_frames(const VisualLog& log,
                                                                      const std::vector<MajorEvent>& events,
                                                                      std::size_t delay) {
  std::vector<std::reference_wrapper<const Frame>> out;
  for (std::size_t i : sample_indices(log.frames.size(), events, delay)) out.emplace_back(log.frames[i]);
  return out;
}

/// Replaces every pixel inside the given regions with mid gray.
inline Raster anonymize(const Raster& frame, const std::vector<BBox>& regions) {
  for (const BBox& r : regions) {
    if (r.w < 0 || r.h < 0 || r.x < 0 || r.y < 0 || r.right() > frame.width() || r.bottom() > frame.height()) {
      fail_invalid("anonymize region outside frame bounds");
    }
  }
  Raster out = frame;
  for (const BBox& r : regions) {
    for (int y = r.y; y < r.bottom(); ++y) {
      for (int x = r.x; x < r.right(); ++x) {
        for (int c = 0; c < out.channels(); ++c) out.at(x, y, c) = 0.5;
      }
    }
  }
  return out;
}

}  // namespace vislog
