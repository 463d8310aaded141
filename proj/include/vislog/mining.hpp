#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vislog/error.hpp"

namespace vislog::mining {

namespace fs = std::filesystem;
using nlohmann::json;
using Sequence = std::vector<std::string>;
using Corpus = std::vector<Sequence>;

inline const std::string kStart = "<s>";
inline const std::string kEnd = "</s>";
inline constexpr int kMaxPatternLength = 32;

struct TrainStats {
  double mean = 0.0;
  double std = 0.0;
};

class NGramModel {
 public:
  NGramModel() = default;

  [[nodiscard]] int order() const { return n_; }
  [[nodiscard]] double k() const { return k_; }
  [[nodiscard]] const TrainStats& stats() const { return stats_; }
  /// Every token incl. the reserved markers.
  [[nodiscard]] std::set<std::string> vocabulary() const {
    std::set<std::string> v = outcomes_;
    v.insert(kStart);
    return v;
  }
  /// Tokens a context can be followed by: training tokens and `</s>`.
  [[nodiscard]] const std::set<std::string>& outcomes() const { return outcomes_; }
  [[nodiscard]] const std::map<Sequence, std::map<std::string, long long>>& counts() const { return counts_; }

  [[nodiscard]] long long context_total(const Sequence& ctx) const {
    auto it = counts_.find(ctx);
    if (it == counts_.end()) return 0;
    long long t = 0;
    for (const auto& [tok, c] : it->second) t += c;
    return t;
  }

  /// Smoothed P(token | ctx). Known tokens share the add-k mass over the
  /// outcome set; an unknown token gets the floor of one extra slot.
  [[nodiscard]] double prob(const Sequence& ctx, const std::string& token) const {
    const double total = static_cast<double>(context_total(ctx));
    const double V = static_cast<double>(outcomes_.size());
    if (!outcomes_.count(token)) return k_ / (total + k_ * (V + 1.0));
    long long c = 0;
    if (auto it = counts_.find(ctx); it != counts_.end()) {
      if (auto jt = it->second.find(token); jt != it->second.end()) c = jt->second;
    }
    return (static_cast<double>(c) + k_) / (total + k_ * V);
  }

  /// Full next-token distribution over outcomes, in lexical order.
  [[nodiscard]] std::vector<std::pair<std::string, double>> distribution(const Sequence& ctx) const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& t : outcomes_) out.emplace_back(t, prob(ctx, t));
    return out;
  }

  [[nodiscard]] Sequence start_context() const { return Sequence(static_cast<std::size_t>(n_ - 1), kStart); }

  /// Sum of log conditionals over the padded sequence, `</s>` included.
  [[nodiscard]] double logprob(const Sequence& seq) const {
    Sequence padded = start_context();
    padded.insert(padded.end(), seq.begin(), seq.end());
    padded.push_back(kEnd);
    double lp = 0.0;
    for (std::size_t i = static_cast<std::size_t>(n_ - 1); i < padded.size(); ++i) {
      const Sequence ctx(padded.begin() + static_cast<std::ptrdiff_t>(i) - (n_ - 1),
                         padded.begin() + static_cast<std::ptrdiff_t>(i));
      lp += std::log(prob(ctx, padded[i]));
    }
    return lp;
  }

  [[nodiscard]] double mean_token_logprob(const Sequence& seq) const {
    return logprob(seq) / static_cast<double>(seq.size() + 1);
  }

  friend NGramModel train(const Corpus& corpus, int n, double k);
  friend NGramModel model_from_json(const json& j);

 private:
  int n_ = 2;
  double k_ = 1.0;
  std::set<std::string> outcomes_;
  std::map<Sequence, std::map<std::string, long long>> counts_;
  TrainStats stats_;

  void compute_stats(const Corpus& corpus) {
    double sum = 0.0, sq = 0.0;
    for (const auto& s : corpus) {
      const double v = mean_token_logprob(s);
      sum += v;
      sq += v * v;
    }
    const double m = sum / static_cast<double>(corpus.size());
    stats_.mean = m;
    stats_.std = std::sqrt(std::max(0.0, sq / static_cast<double>(corpus.size()) - m * m));
  }
};

inline NGramModel train(const Corpus& corpus, int n = 3, double k = 1.0) {
  if (corpus.empty()) fail_invalid("cannot train on an empty corpus");
  if (n < 2 || n > 5) fail_invalid("n-gram order must be in [2,5]");
  if (!(k > 0.0) || !std::isfinite(k)) fail_invalid("smoothing k must be > 0");
  NGramModel m;
  m.n_ = n;
  m.k_ = k;
  m.outcomes_.insert(kEnd);
  for (const auto& seq : corpus) {
    Sequence padded(static_cast<std::size_t>(n - 1), kStart);
    for (const auto& t : seq) {
      if (t == kStart || t == kEnd) fail_invalid("corpus uses reserved token '" + t + "'");
      if (t.empty()) fail_invalid("corpus contains an empty token");
      padded.push_back(t);
      m.outcomes_.insert(t);
    }
    padded.push_back(kEnd);
    for (std::size_t i = static_cast<std::size_t>(n - 1); i < padded.size(); ++i) {
      const Sequence ctx(padded.begin() + static_cast<std::ptrdiff_t>(i) - (n - 1),
                         padded.begin() + static_cast<std::ptrdiff_t>(i));
      ++m.counts_[ctx][padded[i]];
    }
  }
  m.compute_stats(corpus);
  return m;
}

inline double sequence_logprob(const NGramModel& m, const Sequence& seq) { return m.logprob(seq); }

// ---------------------------------------------------------------------------
// Anomalies

struct Anomaly {
  std::size_t index = 0;
  double score = 0.0;  // mean per-token log-probability
  friend bool operator==(const Anomaly&, const Anomaly&) = default;
};

inline std::vector<Anomaly> detect_anomalies(const NGramModel& m, const Corpus& seqs, double z_threshold) {
  if (!(z_threshold > 0.0)) fail_invalid("z threshold must be > 0");
  const double cut = m.stats().mean - z_threshold * m.stats().std;
  std::vector<Anomaly> out;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const double s = m.mean_token_logprob(seqs[i]);
    if (s < cut - 1e-12) out.push_back({i, s});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Usage patterns

struct UsagePattern {
  Sequence tokens;
  std::size_t support = 0;
  std::optional<double> mean_logprob;
  friend bool operator==(const UsagePattern&, const UsagePattern&) = default;
};

/// Mean log conditional over positions whose full context lies inside the
/// pattern; empty when the pattern is shorter than the model order.
inline std::optional<double> pattern_logprob(const NGramModel& m, const Sequence& p) {
  const auto h = static_cast<std::size_t>(m.order() - 1);
  if (p.size() <= h) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = h; i < p.size(); ++i) {
    const Sequence ctx(p.begin() + static_cast<std::ptrdiff_t>(i - h), p.begin() + static_cast<std::ptrdiff_t>(i));
    sum += std::log(m.prob(ctx, p[i]));
  }
  return sum / static_cast<double>(p.size() - h);
}

/// Contiguous sub-sequences present in at least `min_support` sequences,
/// keeping only closed ones (no one-longer extension with equal support).
inline std::vector<UsagePattern> mine_patterns(const Corpus& corpus, std::size_t min_support, int min_len = 2,
                                               int max_len = 16, const NGramModel* model = nullptr) {
  if (min_len < 2 || min_len > max_len || max_len > kMaxPatternLength) {
    fail_invalid("pattern lengths must satisfy 2 <= min_len <= max_len <= " + std::to_string(kMaxPatternLength));
  }
  if (min_support < 1) fail_invalid("min_support must be >= 1");
  std::map<Sequence, std::size_t> support;
  for (const auto& seq : corpus) {
    std::set<Sequence> seen;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (int len = min_len; len <= max_len && i + static_cast<std::size_t>(len) <= seq.size(); ++len) {
        seen.emplace(seq.begin() + static_cast<std::ptrdiff_t>(i),
                     seq.begin() + static_cast<std::ptrdiff_t>(i) + len);
      }
    }
    for (auto& s : seen) ++support[s];
  }
  std::map<Sequence, std::size_t> frequent;
  for (auto& [p, s] : support) {
    if (s >= min_support) frequent.emplace(p, s);
  }
  std::vector<UsagePattern> out;
  for (const auto& [p, s] : frequent) {
    bool closed = true;
    if (static_cast<int>(p.size()) < max_len) {
      for (const auto& [q, t] : frequent) {
        if (t != s || q.size() != p.size() + 1) continue;
        if (std::equal(p.begin(), p.end(), q.begin()) || std::equal(p.begin(), p.end(), q.begin() + 1)) {
          closed = false;
          break;
        }
      }
    }
    if (!closed) continue;
    UsagePattern u{p, s, std::nullopt};
    if (model) u.mean_logprob = pattern_logprob(*model, p);
    out.push_back(std::move(u));
  }
  std::sort(out.begin(), out.end(), [](const UsagePattern& a, const UsagePattern& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() > b.tokens.size();
    return a.tokens < b.tokens;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Generation

enum class GenerateMode { greedy, sample };

inline Sequence generate(const NGramModel& m, GenerateMode mode, std::uint64_t seed, std::size_t max_len) {
  if (max_len < 1) fail_invalid("max_len must be >= 1");
  std::mt19937_64 rng(seed);
  Sequence ctx = m.start_context();
  Sequence out;
  while (out.size() < max_len) {
    const auto dist = m.distribution(ctx);
    std::string next;
    if (mode == GenerateMode::greedy) {
      double best = -1.0;
      for (const auto& [t, p] : dist) {
        if (p > best) {
          best = p;
          next = t;
        }
      }
    } else {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      double acc = 0.0;
      next = dist.back().first;
      for (const auto& [t, p] : dist) {
        acc += p;
        if (u < acc) {
          next = t;
          break;
        }
      }
    }
    if (next == kEnd) break;
    out.push_back(next);
    ctx.erase(ctx.begin());
    ctx.push_back(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// model.json

inline std::string join_context(const Sequence& ctx) {
  std::string s;
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    if (i) s += '\x01';
    s += ctx[i];
  }
  return s;
}

inline Sequence split_context(const std::string& s) {
  Sequence out(1);
  for (char c : s) {
    if (c == '\x01') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

inline json model_to_json(const NGramModel& m) {
  json counts = json::object();
  for (const auto& [ctx, next] : m.counts()) {
    json row = json::object();
    for (const auto& [t, c] : next) row[t] = c;
    counts[join_context(ctx)] = row;
  }
  return {{"version", 1},
          {"n", m.order()},
          {"k", m.k()},
          {"vocab", m.vocabulary()},
          {"counts", counts},
          {"train_stats", {{"mean", m.stats().mean}, {"std", m.stats().std}}}};
}

inline NGramModel model_from_json(const json& j) {
  NGramModel m;
  try {
    if (j.at("version").get<int>() != 1) fail_invalid("unsupported model version");
    m.n_ = j.at("n").get<int>();
    m.k_ = j.at("k").get<double>();
    if (m.n_ < 2 || m.n_ > 5 || !(m.k_ > 0.0)) fail_invalid("model has invalid n or k");
    for (const auto& t : j.at("vocab")) {
      const auto s = t.get<std::string>();
      if (s != kStart) m.outcomes_.insert(s);
    }
    m.outcomes_.insert(kEnd);
    for (const auto& [key, row] : j.at("counts").items()) {
      Sequence ctx = split_context(key);
      if (static_cast<int>(ctx.size()) != m.n_ - 1) fail_invalid("context '" + key + "' has the wrong length");
      long long total = 0;
      for (const auto& [t, c] : row.items()) {
        const auto v = c.get<long long>();
        if (v < 0 || !m.outcomes_.count(t)) fail_invalid("bad count for token '" + t + "'");
        m.counts_[ctx][t] = v;
        total += v;
      }
      if (total < 1) fail_invalid("context '" + key + "' has no observations");
    }
    m.stats_.mean = j.at("train_stats").at("mean").get<double>();
    m.stats_.std = j.at("train_stats").at("std").get<double>();
  } catch (const json::exception& e) {
    fail_invalid(std::string("malformed model: ") + e.what());
  }
  return m;
}

inline NGramModel load_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_invalid("cannot read model '" + path.string() + "'");
  try {
    return model_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail_invalid("malformed model '" + path.string() + "': " + e.what());
  } catch (const Error& e) {
    fail_invalid("model '" + path.string() + "': " + e.what());
  }
}

inline json patterns_to_json(const std::vector<UsagePattern>& ps) {
  json out = json::array();
  for (const auto& p : ps) {
    json j{{"tokens", p.tokens}, {"support", p.support}};
    j["mean_logprob"] = p.mean_logprob ? json(*p.mean_logprob) : json(nullptr);
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace vislog::mining
