#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vislog/pipeline.hpp"

namespace vislog::cli {

inline int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::invalid_input:
    case ErrorKind::load:
    case ErrorKind::validation: return 2;
    case ErrorKind::text_detection:
    case ErrorKind::io: return 3;
  }
  return 3;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Visual GUI log analysis: element detection, interaction tracking and usage mining"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::size_t> workers;
  std::string text_detector;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "pipeline config (JSON)");
  app.add_option("--workers", workers, "worker threads")->check(CLI::Range(1, 256));
  app.add_option("--text-detector", text_detector, "none | oracle | external:<cmd>");
  app.add_option("--out", out_dir, "output directory");

  std::string log_path;
  auto* detect = app.add_subcommand("detect", "detect GUI elements on sampled frames");
  detect->add_option("log", log_path, "log directory or manifest")->required();
  auto* analyze = app.add_subcommand("analyze", "infer the user interaction sequence");
  analyze->add_option("log", log_path, "log directory or manifest")->required();

  std::vector<std::string> inputs;
  std::optional<int> n;
  std::optional<double> k;
  std::optional<std::size_t> min_support;
  auto* mine = app.add_subcommand("mine", "train an n-gram model and mine usage patterns");
  mine->add_option("interactions", inputs, "interactions.json files")->required();
  mine->add_option("--n", n, "n-gram order");
  mine->add_option("--k", k, "add-k smoothing");
  mine->add_option("--min-support", min_support, "minimum pattern support");

  std::string model_path;
  std::string mode = "greedy";
  std::uint64_t seed = 0;
  std::size_t max_len = 32;
  std::size_t count = 1;
  auto* generate = app.add_subcommand("generate", "generate interaction sequences from a model");
  generate->add_option("model", model_path, "model.json")->required();
  generate->add_option("--mode", mode, "greedy | sample")->check(CLI::IsMember({"greedy", "sample"}));
  generate->add_option("--seed", seed, "sampling seed");
  generate->add_option("--max-len", max_len, "maximum tokens per sequence")->check(CLI::PositiveNumber);
  generate->add_option("--count", count, "number of sequences")->check(CLI::PositiveNumber);

  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "render a synthetic visual log from a spec");
  synth->add_option("spec", spec_path, "spec file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (workers) cfg.workers = *workers;
    if (!text_detector.empty()) cfg.text_detector = text_detector;
    if (n) cfg.ngram_n = *n;
    if (k) cfg.smoothing_k = *k;
    if (min_support) cfg.min_support = *min_support;
    cfg.validate();

    Diagnostics diag;
    const auto flush = [&]() {
      for (const auto& line : diag.lines) err << "warning: " << line << '\n';
    };
    if (*detect) {
      const auto r = cmd_detect(log_path, cfg, out_dir, &diag);
      flush();
      std::size_t elements = 0;
      for (const auto& d : r.detections) elements += d.elements.size();
      out << "sampled " << r.sampled.size() << " frames, " << elements << " elements\n";
    } else if (*analyze) {
      const auto seq = cmd_analyze(log_path, cfg, out_dir, &diag);
      flush();
      for (const auto& t : tracking::tokenize(seq)) out << t << '\n';
    } else if (*mine) {
      std::vector<fs::path> files(inputs.begin(), inputs.end());
      cmd_mine(files, cfg, out_dir, &out);
    } else if (*generate) {
      cmd_generate(model_path, mode == "greedy" ? mining::GenerateMode::greedy : mining::GenerateMode::sample, seed,
                   max_len, count, out);
    } else if (*synth) {
      const auto s = cmd_synth(spec_path, out_dir);
      out << "wrote " << s.log.frames.size() << " frames, " << s.tokens.size() << " steps to " << out_dir << '\n';
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace vislog::cli
