#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "vislog/detection.hpp"
#include "vislog/synth.hpp"

using namespace vislog;
using namespace vislog::detection;
namespace fs = std::filesystem;

namespace {

using imaging::Contour;
using imaging::ContourKind;

std::vector<Contour> contours_of(const BitMask& m) { return imaging::trace_contours(m); }

BitMask ring(int W, int H, BBox outer, int thickness) {
  BitMask m(W, H);
  for (int y = outer.y; y < outer.bottom(); ++y)
    for (int x = outer.x; x < outer.right(); ++x) {
      const bool edge = x < outer.x + thickness || y < outer.y + thickness || x >= outer.right() - thickness ||
                        y >= outer.bottom() - thickness;
      if (edge) m.set(x, y);
    }
  return m;
}

BitMask filled(int W, int H, BBox b) {
  BitMask m(W, H);
  for (int y = b.y; y < b.bottom(); ++y)
    for (int x = b.x; x < b.right(); ++x) m.set(x, y);
  return m;
}

Contour single_outer(const BitMask& m) {
  for (auto& c : contours_of(m))
    if (c.kind == ContourKind::outer) return c;
  throw std::runtime_error("no outer contour");
}

synth::ElementSpec caption(const std::string& name, BBox b, const std::string& text, const std::string& of,
                           RelationKind kind = RelationKind::below) {
  auto e = synth::make_element(name, ElementType::text, b, Shape::rectangle, text);
  e.label_of = of;
  e.caption_kind = kind;
  return e;
}

std::vector<TextRegion> text_of(const FrameDetection& truth) {
  std::vector<TextRegion> out;
  for (auto& e : truth.elements)
    if (e.type == ElementType::text) out.push_back({e.bbox, e.label.value_or("")});
  return out;
}

const GuiElement* best_match(const FrameDetection& d, const BBox& b, double min_iou = 0.7) {
  const GuiElement* best = nullptr;
  double best_iou = min_iou;
  for (auto& e : d.elements) {
    const double v = iou(e.bbox, b);
    if (v >= best_iou) {
      best = &e;
      best_iou = v;
    }
  }
  return best;
}

}  // namespace

// ----- text detection

TEST(TextDetection, NoneIsEmpty) {
  NoTextDetector none;
  EXPECT_TRUE(none.detect(Raster(20, 10, 1, 0.3), {}).empty());
}

TEST(TextDetection, OracleReturnsGroundTruth) {
  synth::ScreenSpec s;
  s.name = "four";
  for (int i = 0; i < 4; ++i)
    s.elements.push_back(synth::make_element("t" + std::to_string(i), ElementType::text,
                                             {100 + 200 * i, 300, 70, 12}, Shape::rectangle, "w" + std::to_string(i)));
  synth::LogSpec spec;
  spec.screens = {s};
  spec.record_events = false;
  const auto log = synth::render_log(spec);
  const fs::path dir = fs::temp_directory_path() / "vislog_test_oracle";
  fs::remove_all(dir);
  synth::write_synth_log(log, dir);
  const auto oracle = OracleTextDetector::from_truth_file(dir / "truth.json");
  const auto regions = oracle.detect(log.log.frames[0].image, {0, {}});
  ASSERT_EQ(regions.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(regions[i].bbox, (BBox{100 + 200 * i, 300, 70, 12}));
    EXPECT_EQ(regions[i].text, "w" + std::to_string(i));
  }
  // the same frame id with the text painted over reads as nothing
  EXPECT_TRUE(oracle.detect(Raster(1136, 640, 1, 0.5), {0, {}}).empty());
}

class ExternalDetector : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() / "vislog_test_external";
  void SetUp() override {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string script(const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream(p) << "#!/bin/sh\n" << body << "\n";
    fs::permissions(p, fs::perms::owner_all);
    return p.string();
  }
};

TEST_F(ExternalDetector, ParsesRegions) {
  const auto cmd = script("ok.sh", R"(echo '[{"bbox":[10,10,50,12],"text":"Camera"}]')");
  const auto regions = ExternalTextDetector(cmd).detect(Raster(100, 40, 1, 0.9), {3, {}});
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].text, "Camera");
  EXPECT_EQ(regions[0].bbox, (BBox{10, 10, 50, 12}));
}

TEST_F(ExternalDetector, ReceivesTheFramePath) {
  const auto cmd = script("arg.sh", R"(test -f "$1" && echo '[]')");
  EXPECT_TRUE(ExternalTextDetector(cmd).detect(Raster(8, 8, 1), {0, {}}).empty());
}

TEST_F(ExternalDetector, FailuresAreTextDetectionErrors) {
  const Raster frame(100, 40, 1, 0.9);
  const auto fails = script("fail.sh", "echo boom; exit 3");
  const auto garbage = script("garbage.sh", "echo 'not json'");
  const auto outside = script("outside.sh", R"(echo '[{"bbox":[90,10,50,12],"text":"x"}]')");
  for (const auto& cmd : {fails, garbage, outside}) {
    try {
      (void)ExternalTextDetector(cmd).detect(frame, {});
      FAIL() << cmd;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::text_detection);
    }
  }
  try {
    (void)ExternalTextDetector(fails).detect(frame, {});
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
  std::vector<std::string> diag;
  EXPECT_TRUE(detect_text(frame, ExternalTextDetector(fails), {7, {}}, TextPolicy::lenient, &diag).empty());
  ASSERT_EQ(diag.size(), 1u);
  EXPECT_NE(diag[0].find("frame 7"), std::string::npos);
  EXPECT_THROW(detect_text(frame, ExternalTextDetector(fails), {}, TextPolicy::strict), Error);
}

// ----- merge

TEST(Merge, BorderPairCollapses) {
  const auto cs = contours_of(ring(40, 40, {5, 5, 20, 20}, 2));
  ASSERT_EQ(cs.size(), 2u);
  const auto merged = merge_contours(cs, 2);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].kind, ContourKind::outer);
  EXPECT_EQ(merged[0].bbox(), (BBox{5, 5, 20, 20}));
}

TEST(Merge, WideHoleSurvives) {
  // a 1 px border leaves a hole inset by 1, a 6 px border by 6
  EXPECT_EQ(merge_contours(contours_of(ring(40, 40, {5, 5, 30, 30}, 6)), 2).size(), 2u);
  EXPECT_THROW(merge_contours({}, -1), Error);
}

TEST(Merge, DisjointOutersStay) {
  BitMask m = filled(40, 20, {2, 2, 8, 8});
  const BitMask other = filled(40, 20, {20, 2, 8, 8});
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x)
      if (other.get(x, y)) m.set(x, y);
  EXPECT_EQ(merge_contours(contours_of(m), 2).size(), 2u);
}

TEST(Merge, NestedNearIdenticalOutersKeepLarger) {
  Contour big = single_outer(filled(30, 30, {2, 2, 20, 20}));
  Contour small = single_outer(filled(30, 30, {3, 3, 18, 18}));
  const auto merged = merge_contours({small, big}, 2);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].bbox(), (BBox{2, 2, 20, 20}));
}

TEST(Merge, PipelineRectangleBorderLeavesOne) {
  Raster img(200, 120, 1, 0.95);
  for (int y = 30; y < 80; ++y)
    for (int x = 50; x < 150; ++x) img.at(x, y) = 0.4;
  DetectorConfig cfg;
  const auto stages = edge_stages(img, cfg);
  auto cs = imaging::trace_contours(stages.dilated);
  EXPECT_GE(cs.size(), 2u);
  cs = merge_contours(cs, cfg.margin());
  ASSERT_EQ(cs.size(), 1u);
  const BBox b = cs[0].bbox();
  EXPECT_GE(iou(b, {50, 30, 100, 50}), 0.9);
}

// ----- filter

TEST(Filter, Rule1DropsTinyContours) {
  const Contour c = single_outer(filled(20, 20, {0, 0, 5, 10}));  // bbox area 50
  DetectorConfig cfg;
  EXPECT_TRUE(filter_contours({c}, 50 / 0.00005, cfg).empty());
  EXPECT_EQ(filter_contours({c}, 50 / 0.0001, cfg).size(), 1u);  // exactly 0.01% is not "less than"
}

TEST(Filter, Rule2DropsLargeTiltedBlob) {
  BitMask m(60, 60);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 60; ++x)
      if (std::abs(x - y) <= 4) m.set(x, y);
  const Contour c = single_outer(m);
  const auto metrics = imaging::contour_metrics(c);
  EXPECT_EQ(imaging::classify_shape(metrics).shape, Shape::irregular);
  const double area = static_cast<double>(metrics.bbox.area());
  DetectorConfig cfg;
  EXPECT_TRUE(filter_contours({c}, area / 0.02, cfg).empty());
  EXPECT_EQ(filter_contours({c}, area / 0.005, cfg).size(), 1u);
  EXPECT_EQ(filter_contours({c}, area / 0.01, cfg).size(), 1u);  // exactly 1% is not "more than"
}

TEST(Filter, KeepsHorizontalRectangle) {
  const Contour c = single_outer(filled(100, 100, {10, 40, 60, 20}));
  EXPECT_EQ(filter_contours({c}, 1200 / 0.003, {}).size(), 1u);
  EXPECT_THROW(filter_contours({c}, 0.0, {}), Error);
}

TEST(Filter, RulesAgreeWithDirectCheckOnRandomBlobs) {
  std::mt19937 rng(21);
  DetectorConfig cfg;
  for (int t = 0; t < 300; ++t) {
    const auto g = oracle::random_grid(rng, 6 + rng() % 20, 6 + rng() % 20, 0.55);
    const int gh = static_cast<int>(g.size()), gw = static_cast<int>(g[0].size());
    BitMask m(gw, gh);
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x)
        if (g[y][x]) m.set(x, y);
    const double screen = 100.0 + rng() % 100000;
    for (const auto& c : filter_contours(contours_of(m), screen, cfg)) {
      EXPECT_EQ(c.kind, ContourKind::outer);
      const auto metrics = imaging::contour_metrics(c);
      const double rel = metrics.bbox.area() / screen;
      EXPECT_GE(rel, cfg.min_rel_size);
      const auto cls = imaging::classify_shape(metrics);
      if (rel > cfg.max_irregular_rel_size) {
        EXPECT_NE(cls.shape, Shape::irregular);
        EXPECT_NE(cls.orientation, Orientation::irregular);
      }
    }
  }
}

// ----- typing

TEST(Typing, Examples) {
  const Candidate text{{10, 10, 40, 12}, Shape::rectangle, Orientation::horizontal, 0.001, true, "Save"};
  const Candidate comb{{0, 0, 200, 100}, Shape::rectangle, Orientation::horizontal, 0.03, false, ""};
  const Candidate icon_in{{20, 20, 30, 30}, Shape::rectangle, Orientation::horizontal, 0.001, false, ""};
  const Candidate disc{{300, 300, 40, 40}, Shape::circle, Orientation::horizontal, 0.002, false, ""};
  const Candidate big_blob{{400, 0, 150, 150}, Shape::irregular, Orientation::irregular, 0.03, false, ""};
  const std::vector<Candidate> all{text, comb, icon_in, disc, big_blob};
  EXPECT_EQ(classify_type(all[0], all), ElementType::text);
  EXPECT_EQ(classify_type(all[1], all), ElementType::comb);
  EXPECT_EQ(classify_type(all[2], all), ElementType::icon);
  EXPECT_EQ(classify_type(all[3], all), ElementType::icon);
  EXPECT_EQ(classify_type(all[4], all), ElementType::icon);
  // large and regular with nothing inside
  const std::vector<Candidate> lone{{{0, 0, 200, 100}, Shape::circle, Orientation::horizontal, 0.01, false, ""}};
  EXPECT_EQ(classify_type(lone[0], lone), ElementType::comb);
}

// ----- relations

namespace {
GuiElement el(int id, ElementType t, BBox b) {
  GuiElement e;
  e.id = id;
  e.type = t;
  e.bbox = b;
  return e;
}
DetectorConfig fixed_cfg() {
  DetectorConfig cfg;
  cfg.relation_gap_px = 12.8;
  cfg.alignment_px = 11.36;
  return cfg;
}
}  // namespace

TEST(Relations, CaptionBelow) {
  const std::vector<GuiElement> es{el(0, ElementType::icon, {100, 100, 40, 40}),
                                   el(1, ElementType::text, {95, 148, 50, 12})};
  EXPECT_EQ(infer_relations(es, fixed_cfg()), (std::vector<ElementRelation>{{1, 0, RelationKind::below}}));
}

TEST(Relations, CaptionRightLeftAbove) {
  const BBox icon{100, 100, 40, 40};
  const std::vector<std::pair<BBox, RelationKind>> cases{
      {{148, 114, 50, 12}, RelationKind::right},
      {{42, 114, 50, 12}, RelationKind::left},
      {{95, 80, 50, 12}, RelationKind::above},
  };
  for (const auto& [b, kind] : cases) {
    const std::vector<GuiElement> es{el(0, ElementType::icon, icon), el(1, ElementType::text, b)};
    EXPECT_EQ(infer_relations(es, fixed_cfg()), (std::vector<ElementRelation>{{1, 0, kind}}));
  }
}

TEST(Relations, FarCaptionUnrelated) {
  const std::vector<GuiElement> es{el(0, ElementType::icon, {100, 100, 40, 40}),
                                   el(1, ElementType::text, {95, 440, 50, 12})};
  EXPECT_TRUE(infer_relations(es, fixed_cfg()).empty());
}

TEST(Relations, NearestTargetWinsThenLowerId) {
  // text between two icons, closer to the upper one
  std::vector<GuiElement> es{el(0, ElementType::icon, {100, 100, 40, 40}),
                             el(1, ElementType::text, {95, 145, 50, 12}),
                             el(2, ElementType::icon, {100, 165, 40, 40})};
  EXPECT_EQ(infer_relations(es, fixed_cfg()), (std::vector<ElementRelation>{{1, 0, RelationKind::below}}));
  // equidistant: the lower id wins
  es[1].bbox = {95, 146, 50, 12};
  es[2].bbox = {100, 164, 40, 40};
  EXPECT_EQ(infer_relations(es, fixed_cfg()), (std::vector<ElementRelation>{{1, 0, RelationKind::below}}));
}

TEST(Relations, InsideUsesSmallestComb) {
  const std::vector<GuiElement> es{el(0, ElementType::comb, {0, 0, 300, 300}),
                                   el(1, ElementType::comb, {10, 10, 200, 100}),
                                   el(2, ElementType::icon, {20, 20, 30, 30})};
  const auto rel = infer_relations(es, fixed_cfg());
  EXPECT_EQ(rel, (std::vector<ElementRelation>{{1, 0, RelationKind::inside}, {2, 1, RelationKind::inside}}));
}

// ----- full pipeline

TEST(DetectElements, BlankFrame) {
  const auto d = detect_elements(Raster(320, 200, 1, 0.7), {}, {});
  EXPECT_TRUE(d.elements.empty());
  EXPECT_TRUE(d.relations.empty());
}

TEST(DetectElements, GeometryMismatch) {
  DetectorConfig cfg;
  cfg.screen_width = 100;
  cfg.screen_height = 100;
  EXPECT_THROW(detect_elements(Raster(120, 100, 1), {}, cfg), Error);
}

TEST(DetectElements, IconWithCaptionBelow) {
  synth::ScreenSpec s;
  s.name = "one";
  s.elements.push_back(synth::make_element("cam", ElementType::icon, {500, 250, 48, 48}));
  s.elements.push_back(caption("cap", {489, 306, 70, 12}, "Camera", "cam"));
  const auto r = synth::render_screen(s, 1136, 640, 4);
  const auto d = detect_elements(r.image, text_of(r.truth), {});
  ASSERT_EQ(d.elements.size(), 2u);
  const GuiElement* icon = best_match(d, {500, 250, 48, 48});
  const GuiElement* text = best_match(d, {489, 306, 70, 12});
  ASSERT_TRUE(icon && text);
  EXPECT_EQ(icon->type, ElementType::icon);
  EXPECT_EQ(text->type, ElementType::text);
  EXPECT_EQ(text->label, "Camera");
  EXPECT_EQ(d.relations, (std::vector<ElementRelation>{{text->id, icon->id, RelationKind::below}}));
}

TEST(DetectElements, CombWithIconAndText) {
  synth::ScreenSpec s;
  s.name = "btn";
  s.elements.push_back(synth::make_element("btn", ElementType::comb, {400, 200, 200, 120}));
  auto icon = synth::make_element("i", ElementType::icon, {476, 220, 48, 48});
  icon.parent = "btn";
  auto text = caption("t", {465, 280, 70, 12}, "Camera", "btn", RelationKind::inside);
  text.parent = "btn";
  text.anchor = "i";
  s.elements.push_back(icon);
  s.elements.push_back(text);
  const auto r = synth::render_screen(s, 1136, 640, 4);
  const auto d = detect_elements(r.image, text_of(r.truth), {});
  const GuiElement* comb = best_match(d, {400, 200, 200, 120});
  ASSERT_TRUE(comb);
  EXPECT_EQ(comb->type, ElementType::comb);
  EXPECT_EQ(comb->children.size(), 2u);
  int inside = 0;
  for (auto& rel : d.relations)
    if (rel.kind == RelationKind::inside) {
      EXPECT_EQ(rel.target, comb->id);
      ++inside;
    }
  EXPECT_EQ(inside, 2);
}

TEST(DetectElements, TextOverlapSuppressesContour) {
  Raster img(400, 300, 1, 0.95);
  for (int y = 100; y < 120; ++y)
    for (int x = 100; x < 180; ++x) img.at(x, y) = 0.2;
  const auto d = detect_elements(img, {{{98, 98, 84, 24}, "Hello"}}, {});
  ASSERT_EQ(d.elements.size(), 1u);
  EXPECT_EQ(d.elements[0].type, ElementType::text);
  EXPECT_EQ(d.elements[0].orientation, Orientation::horizontal);
}

TEST(DetectElements, InvariantsOnRandomScreens) {
  const std::pair<int, int> sizes[] = {{1136, 640}, {1334, 750}, {1920, 1080}};
  for (int i = 0; i < 6; ++i) {
    const auto [W, H] = sizes[i % 3];
    const auto spec = synth::random_screen(W, H, 100 + i, 8, 20, "r");
    const auto r = synth::render_screen(spec, W, H, i);
    DetectorConfig cfg;
    const auto d = detect_elements(r.image, text_of(r.truth), cfg);
    EXPECT_EQ(d, detect_elements(r.image, text_of(r.truth), cfg));
    int texts = 0, inside = 0;
    for (size_t k = 0; k < d.elements.size(); ++k) {
      const auto& e = d.elements[k];
      EXPECT_EQ(e.id, static_cast<int>(k));
      EXPECT_GE(e.rel_size, cfg.min_rel_size);
      EXPECT_LE(e.rel_size, 1.0);
      if (e.type == ElementType::text) {
        ++texts;
        EXPECT_EQ(e.orientation, Orientation::horizontal);
      } else if (e.rel_size > cfg.max_irregular_rel_size) {
        EXPECT_NE(e.shape, Shape::irregular);
        EXPECT_NE(e.orientation, Orientation::irregular);
      }
      for (int c : e.children) EXPECT_TRUE(e.bbox.contains(d.find(c)->bbox));
      if (k > 0) {
        const auto& p = d.elements[k - 1].bbox;
        EXPECT_TRUE(p.y < e.bbox.y || (p.y == e.bbox.y && p.x <= e.bbox.x));
      }
    }
    for (auto& rel : d.relations) {
      EXPECT_NE(rel.source, rel.target);
      if (rel.kind == RelationKind::inside) {
        ++inside;
        EXPECT_TRUE(d.find(rel.target)->bbox.contains(d.find(rel.source)->bbox));
      } else {
        EXPECT_EQ(d.find(rel.source)->type, ElementType::text);
      }
    }
    EXPECT_LE(d.relations.size(), static_cast<size_t>(texts + inside));
  }
}

// ----- serialization

TEST(Json, RoundTrip) {
  const auto spec = synth::random_screen(1136, 640, 5, 8, 20, "r");
  const auto r = synth::render_screen(spec, 1136, 640, 5);
  const auto d = detect_elements(r.image, text_of(r.truth), {});
  const json j = detection_to_json(9, d);
  EXPECT_EQ(j.at("frame"), 9);
  EXPECT_EQ(detection_from_json(json::parse(j.dump())), d);
  for (auto& e : j.at("elements")) {
    EXPECT_EQ(e.at("bbox").size(), 4u);
    EXPECT_TRUE(e.contains("children"));
  }
}

TEST(Json, ParseNames) {
  EXPECT_EQ(parse_element_type("comb"), ElementType::comb);
  EXPECT_EQ(parse_relation_kind("inside"), RelationKind::inside);
  EXPECT_THROW(parse_element_type("button"), Error);
  EXPECT_THROW(parse_relation_kind("near"), Error);
}

TEST(Overlay, KeepsSizeAndDrawsBoxes) {
  Raster img(100, 80, 1, 0.5);
  FrameDetection d;
  d.elements.push_back(el(0, ElementType::icon, {10, 10, 20, 20}));
  const Raster out = render_overlay(img, d);
  EXPECT_EQ(out.width(), 100);
  EXPECT_EQ(out.height(), 80);
  EXPECT_EQ(out.channels(), 3);
  EXPECT_NE(out.at(10, 10, 0), out.at(50, 50, 0));
}
