#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vislog/mining.hpp"

using namespace vislog;
using namespace vislog::mining;

namespace {

const Sequence kScenario{"click:album", "click:summer", "click:img_01", "click:edit", "swipe:right", "click:adjust",
                         "swipe:right", "click:contrast", "adjust:level:+", "click:tick", "click:save"};

Corpus random_corpus(std::mt19937& rng, int max_seqs, int max_len, int alphabet) {
  Corpus c(1 + rng() % max_seqs);
  for (auto& s : c) {
    const int len = static_cast<int>(rng() % (max_len + 1));
    for (int i = 0; i < len; ++i) s.push_back(std::string(1, static_cast<char>('A' + rng() % alphabet)));
  }
  return c;
}

std::vector<oracle::Pattern> plain(const std::vector<UsagePattern>& ps) {
  std::vector<oracle::Pattern> out;
  for (auto& p : ps) out.push_back({p.tokens, p.support});
  return out;
}

void expect_normalized(const NGramModel& m, const Sequence& ctx) {
  double sum = 0.0;
  for (auto& [t, p] : m.distribution(ctx)) {
    EXPECT_GT(p, 0.0);
    sum += p;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

// Every sequence over `alphabet` of length `len`.
std::vector<Sequence> all_sequences(const Sequence& alphabet, int len) {
  std::vector<Sequence> out{{}};
  for (int i = 0; i < len; ++i) {
    std::vector<Sequence> next;
    for (auto& s : out)
      for (auto& t : alphabet) {
        next.push_back(s);
        next.back().push_back(t);
      }
    out = std::move(next);
  }
  return out;
}

}  // namespace

TEST(Train, HandCountedBigram) {
  const auto m = train({{"A", "B", "A", "B"}}, 2, 1.0);
  EXPECT_EQ(m.outcomes(), (std::set<std::string>{"A", "B", kEnd}));
  EXPECT_DOUBLE_EQ(m.prob({"A"}, "B"), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.prob({"A"}, "A"), 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.prob({"B"}, kEnd), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.prob({kStart}, "A"), 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(m.prob({"A"}, "Z"), 1.0 / 6.0);
  EXPECT_TRUE(m.vocabulary().count(kStart));
}

TEST(Train, AgreesWithOracleCounts) {
  std::mt19937 rng(4);
  for (int t = 0; t < 40; ++t) {
    const Corpus c = random_corpus(rng, 8, 10, 4);
    const int n = 2 + t % 3;
    const double k = t % 2 ? 1.0 : 0.25;
    const auto m = train(c, n, k);
    const auto oc = oracle::count(c, n);
    for (auto& [ctx, row] : oc.next) {
      for (auto& tok : oc.outcomes) EXPECT_NEAR(m.prob(ctx, tok), oracle::prob(oc, ctx, tok, k), 1e-12);
      EXPECT_NEAR(m.prob(ctx, "unseen"), oracle::prob(oc, ctx, "unseen", k), 1e-12);
    }
    for (auto& s : c) EXPECT_NEAR(sequence_logprob(m, s), oracle::logprob(oc, s, n, k), 1e-9);
  }
}

TEST(Train, DistributionsSumToOne) {
  std::mt19937 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto m = train(random_corpus(rng, 8, 12, 5), 2 + t % 4, 0.5 + t % 3);
    for (auto& [ctx, row] : m.counts()) {
      EXPECT_GE(m.context_total(ctx), 1);
      expect_normalized(m, ctx);
    }
    expect_normalized(m, Sequence(static_cast<size_t>(m.order() - 1), "never"));
  }
}

TEST(Train, SingleTokenCorpus) {
  const auto m = train({{"A"}}, 2, 1.0);
  const auto d = m.distribution(m.start_context());
  const auto mode = std::max_element(d.begin(), d.end(), [](auto& a, auto& b) { return a.second < b.second; });
  EXPECT_EQ(mode->first, "A");
}

TEST(Train, DuplicatedCorpusKeepsMleRatios) {
  const Corpus c{{"A", "B", "C"}, {"A", "C"}, {"B", "B", "A"}};
  Corpus twice = c;
  twice.insert(twice.end(), c.begin(), c.end());
  const auto a = train(c, 2, 1.0), b = train(twice, 2, 1.0);
  for (auto& [ctx, row] : a.counts()) {
    for (auto& [tok, cnt] : row) {
      EXPECT_EQ(b.counts().at(ctx).at(tok), 2 * cnt);
      EXPECT_DOUBLE_EQ(static_cast<double>(cnt) / a.context_total(ctx),
                       static_cast<double>(b.counts().at(ctx).at(tok)) / b.context_total(ctx));
    }
  }
  // corpus order does not matter
  Corpus shuffled{c[2], c[0], c[1]};
  EXPECT_EQ(model_to_json(train(shuffled, 2, 1.0)), model_to_json(a));
}

TEST(Train, RejectsBadInput) {
  EXPECT_THROW(train({}, 2, 1.0), Error);
  EXPECT_THROW(train({{"A"}}, 1, 1.0), Error);
  EXPECT_THROW(train({{"A"}}, 6, 1.0), Error);
  EXPECT_THROW(train({{"A"}}, 2, 0.0), Error);
  EXPECT_THROW(train({{"A", kEnd}}, 2, 1.0), Error);
}

TEST(LogProb, Examples) {
  const Corpus c{{"A", "B", "C", "D"}, {"A", "B", "C"}, {"A", "B", "C", "D"}};
  const auto m = train(c, 2, 1.0);
  const auto oc = oracle::count(c, 2);
  const Sequence fwd = c[0], rev(fwd.rbegin(), fwd.rend());
  EXPECT_TRUE(std::isfinite(sequence_logprob(m, fwd)));
  EXPECT_GT(sequence_logprob(m, fwd), sequence_logprob(m, rev));
  EXPECT_GT(oracle::logprob(oc, fwd, 2, 1.0), oracle::logprob(oc, rev, 2, 1.0));
  EXPECT_DOUBLE_EQ(sequence_logprob(m, {}), std::log(m.prob({kStart}, kEnd)));
  double last = 0.0;
  for (int len = 1; len <= 6; ++len) {
    const double lp = sequence_logprob(m, Sequence(len, "zz"));
    EXPECT_TRUE(std::isfinite(lp));
    EXPECT_LT(lp, last);
    last = lp;
  }
}

TEST(LogProb, TrainingSequenceBeatsSubstitutions) {
  // corpora whose every context has a single successor
  const std::vector<std::pair<Corpus, int>> fixtures{
      {{{"A", "B", "B"}}, 3},
      {{{"A", "A", "B", "A"}}, 3},
      {{{"A", "B", "C", "D"}}, 2},
      {{kScenario}, 3},
      {{{"A", "B"}, {"A", "B"}}, 2},
  };
  for (const auto& [c, n] : fixtures) {
    const auto m = train(c, n, 1.0);
    for (auto& [ctx, row] : m.counts()) ASSERT_EQ(row.size(), 1u) << "fixture is ambiguous";
    Sequence alphabet(m.outcomes().begin(), m.outcomes().end());
    alphabet.erase(std::find(alphabet.begin(), alphabet.end(), kEnd));
    alphabet.push_back("unknown");
    for (const auto& s : c) {
      const double base = sequence_logprob(m, s);
      for (size_t i = 0; i < s.size(); ++i)
        for (auto& t : alphabet) {
          Sequence v = s;
          v[i] = t;
          EXPECT_GE(base, sequence_logprob(m, v) - 1e-12);
        }
    }
  }
}

TEST(Patterns, ScenarioRepeated) {
  const Corpus c(10, kScenario);
  const auto ps = mine_patterns(c, 5, 2, 16);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].tokens, kScenario);
  EXPECT_EQ(ps[0].support, 10u);
}

TEST(Patterns, DisjointCorpusHasNone) {
  EXPECT_TRUE(mine_patterns({{"a", "b", "c"}, {"d", "e"}, {"f", "g", "h"}}, 2).empty());
}

TEST(Patterns, SharedPrefix) {
  Corpus c;
  for (int i = 0; i < 3; ++i) {
    c.push_back({"A", "B", "C"});
    c.push_back({"A", "B", "D"});
  }
  const auto ps = mine_patterns(c, 6, 2);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].tokens, (Sequence{"A", "B"}));
  EXPECT_EQ(ps[0].support, 6u);
}

TEST(Patterns, MatchBruteForceOracle) {
  std::mt19937 rng(9);
  for (int t = 0; t < 300; ++t) {
    const Corpus c = random_corpus(rng, 8, 12, 2 + t % 3);
    const size_t sup = 1 + rng() % 4;
    const int lo = 2 + static_cast<int>(rng() % 3);
    const int hi = lo + static_cast<int>(rng() % (13 - lo));
    EXPECT_EQ(plain(mine_patterns(c, sup, lo, hi)), oracle::mine(c, sup, lo, hi)) << "trial " << t;
  }
}

TEST(Patterns, Invariants) {
  std::mt19937 rng(10);
  const Corpus c = random_corpus(rng, 8, 12, 3);
  const auto m = train(c, 2, 1.0);
  for (auto& p : mine_patterns(c, 2, 2, 12, &m)) {
    EXPECT_GE(p.support, 2u);
    EXPECT_GE(p.tokens.size(), 2u);
    ASSERT_TRUE(p.mean_logprob.has_value());
    EXPECT_LE(*p.mean_logprob, 0.0);
  }
  EXPECT_THROW(mine_patterns(c, 2, 1, 4), Error);
  EXPECT_THROW(mine_patterns(c, 2, 5, 4), Error);
  EXPECT_THROW(mine_patterns(c, 2, 2, kMaxPatternLength + 1), Error);
  EXPECT_THROW(mine_patterns(c, 0, 2, 4), Error);
}

TEST(Anomalies, Examples) {
  const Sequence order{"a", "b", "c", "d", "e", "f", "g", "h"};
  Corpus c;
  for (int i = 0; i < 30; ++i) c.emplace_back(order.begin(), order.begin() + 4 + i % 5);
  const auto m = train(c, 2, 1.0);
  EXPECT_TRUE(detect_anomalies(m, {c[0], c[3], c[4]}, 3.0).empty());
  const Sequence shuffled{"e", "a", "h", "c", "b", "g", "d", "f"};
  const auto flagged = detect_anomalies(m, {c[0], shuffled}, 3.0);
  ASSERT_EQ(flagged.size(), 1u);
  EXPECT_EQ(flagged[0].index, 1u);
  const auto oc = oracle::count(c, 2);
  EXPECT_NEAR(flagged[0].score, oracle::logprob(oc, shuffled, 2, 1.0) / 9.0, 1e-12);
  EXPECT_TRUE(detect_anomalies(m, {}, 3.0).empty());
  EXPECT_THROW(detect_anomalies(m, {}, 0.0), Error);
}

TEST(Generate, GreedyReproducesScenario) {
  const auto m = train({kScenario}, 3, 1.0);
  EXPECT_EQ(generate(m, GenerateMode::greedy, 0, 32), kScenario);
  EXPECT_EQ(generate(m, GenerateMode::greedy, 0, 4), Sequence(kScenario.begin(), kScenario.begin() + 4));
  EXPECT_THROW(generate(m, GenerateMode::greedy, 0, 0), Error);
}

TEST(Generate, GreedyTieTakesLexicallySmallest) {
  const auto m = train({{"B"}, {"A"}}, 2, 1.0);
  EXPECT_EQ(generate(m, GenerateMode::greedy, 0, 1), (Sequence{"A"}));
}

TEST(Generate, SamplingIsSeeded) {
  const auto m = train({kScenario, {"click:album", "click:save"}}, 2, 1.0);
  EXPECT_EQ(generate(m, GenerateMode::sample, 77, 20), generate(m, GenerateMode::sample, 77, 20));
  bool differs = false;
  for (std::uint64_t s = 1; s < 20 && !differs; ++s)
    differs = generate(m, GenerateMode::sample, s, 20) != generate(m, GenerateMode::sample, 0, 20);
  EXPECT_TRUE(differs);
}

TEST(Generate, SampledFirstTokenFollowsModel) {
  const auto m = train({{"A"}, {"A"}, {"A"}, {"B"}}, 2, 0.01);
  const double expected = (3 + 0.01) / (4 + 0.03);
  int hits = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) hits += generate(m, GenerateMode::sample, s, 1) == Sequence{"A"};
  EXPECT_NEAR(hits / 10000.0, expected, 0.03);
}

TEST(Generate, GreedyIsOptimalOnUnambiguousCorpora) {
  const std::vector<std::pair<Corpus, int>> fixtures{
      {{{"A", "B", "B"}}, 3},
      {{{"A", "A", "B", "A"}}, 3},
      {{{"B", "A", "A", "B"}}, 3},
      {{{"A", "B"}, {"A", "B"}}, 2},
      {{{"B", "B", "A", "B", "A", "A", "B", "B"}}, 4},
  };
  for (const auto& [c, n] : fixtures) {
    const auto m = train(c, n, 1.0);
    for (auto& [ctx, row] : m.counts()) ASSERT_EQ(row.size(), 1u) << "fixture is ambiguous";
    const auto g = generate(m, GenerateMode::greedy, 0, 8);
    EXPECT_EQ(g, c[0]);
    const double best = sequence_logprob(m, g);
    for (auto& s : all_sequences({"A", "B"}, static_cast<int>(g.size())))
      EXPECT_LE(sequence_logprob(m, s), best + 1e-12);
  }
}

TEST(ModelJson, RoundTrip) {
  std::mt19937 rng(12);
  const Corpus c = random_corpus(rng, 8, 10, 4);
  const auto m = train(c, 3, 0.5);
  const json j = model_to_json(m);
  EXPECT_EQ(j.at("version"), 1);
  EXPECT_EQ(j.at("n"), 3);
  const auto back = model_from_json(json::parse(j.dump()));
  EXPECT_EQ(model_to_json(back), j);
  for (auto& s : c) EXPECT_DOUBLE_EQ(sequence_logprob(back, s), sequence_logprob(m, s));
  EXPECT_EQ(split_context(join_context({"a", "b c"})), (Sequence{"a", "b c"}));
}

TEST(ModelJson, RejectsMalformed) {
  json j = model_to_json(train({{"A", "B"}}, 2, 1.0));
  json bad = j;
  bad.erase("version");
  EXPECT_THROW(model_from_json(bad), Error);
  bad = j;
  bad["n"] = 9;
  EXPECT_THROW(model_from_json(bad), Error);
  bad = j;
  bad["counts"]["A"]["Q"] = 1;
  EXPECT_THROW(model_from_json(bad), Error);
  bad = j;
  bad["counts"]["A\x01" "B"] = json{{"B", 1}};
  EXPECT_THROW(model_from_json(bad), Error);
}
