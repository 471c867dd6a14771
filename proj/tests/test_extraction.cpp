#include "poiaudit/extraction.hpp"

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

namespace poiaudit {
namespace {

// Deterministic fake model: logits are a hash of (user, location sequence so
// far), so every prefix leads to a different, reproducible distribution. Also
// records query traffic so tests can verify budgets.
struct HashModel {
  int L = 5;
  mutable long queries = 0;
  mutable std::vector<std::vector<int>> seen_prefixes;
  mutable std::vector<double> seen_times;

  int num_locations() const { return L; }

  Eigen::VectorXd logits_for(int user, std::span<const Visit> prefix, std::size_t upto) const {
    std::uint64_t h = 0xabc123ULL + static_cast<std::uint64_t>(user) * 31ULL;
    for (std::size_t i = 0; i < upto; ++i) {
      h = mix64(h ^ (static_cast<std::uint64_t>(prefix[i].loc) + 0x9e3779b97f4a7c15ULL));
    }
    Eigen::VectorXd logits(L);
    for (int c = 0; c < L; ++c) {
      logits[c] = 3.0 * static_cast<double>(mix64(h ^ static_cast<std::uint64_t>(c)) >> 11) /
                  9007199254740992.0;
    }
    return logits;
  }

  QueryOutput query(int user, std::span<const Visit> prefix) const {
    ++queries;
    std::vector<int> locs;
    for (const auto& v : prefix) locs.push_back(v.loc);
    seen_prefixes.push_back(locs);
    if (!prefix.empty()) seen_times.push_back(prefix[0].t);
    QueryOutput out;
    out.steps.resize(prefix.size());
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      out.steps[i].logits = logits_for(user, prefix, i + 1);
      Eigen::VectorXd p = (out.steps[i].logits.array() - out.steps[i].logits.maxCoeff()).exp();
      out.steps[i].probs = p / p.sum();
    }
    return out;
  }
};

static_assert(QueryableModel<HashModel>);

// Full enumeration oracle for low-perplexity sequence search: scores every
// one of L^(n-1) continuations by fresh model queries, independent of the
// beam-search implementation.
std::vector<ScoredSequence> exhaustive_sequences(const HashModel& m, int user, int start, int n,
                                                 double t) {
  std::vector<ScoredSequence> all;
  const long total = static_cast<long>(std::pow(m.L, n - 1));
  for (long code = 0; code < total; ++code) {
    ScoredSequence s;
    s.locs = {start};
    long rem = code;
    std::vector<Visit> prefix{{start, t}};
    for (int step = 1; step < n; ++step) {
      const int c = static_cast<int>(rem % m.L);
      rem /= m.L;
      const QueryOutput out = m.query(user, prefix);
      s.log_perplexity -= std::log(std::max(out.last().probs[c], kProbFloor));
      s.locs.push_back(c);
      prefix.push_back(Visit{c, t});
    }
    all.push_back(std::move(s));
  }
  std::sort(all.begin(), all.end());
  return all;
}

TEST(TopKLow, TieBreaksTowardLowerIndex) {
  Eigen::VectorXd v(6);
  v << 2.0, 5.0, 5.0, 1.0, 5.0, 3.0;
  EXPECT_EQ(detail::argmax_low(v, 6), 1);
  const auto top = detail::top_k_low(v, 6, 4);
  ASSERT_EQ(top.size(), 4u);
  EXPECT_EQ(top[0], 1);
  EXPECT_EQ(top[1], 2);
  EXPECT_EQ(top[2], 4);
  EXPECT_EQ(top[3], 5);
  EXPECT_EQ(detail::top_k_low(v, 6, 99).size(), 6u);
}

TEST(CommonLocation, UsesExactQueryBudgetWithDistinctProbes) {
  HashModel m;
  m.L = 40;
  CommonLocationConfig cfg;
  cfg.query_budget = 25;
  cfg.query_time = 0.37;
  cfg.seed = 9;
  extract_common_location(m, 0, cfg);
  EXPECT_EQ(m.queries, 25);
  std::set<std::vector<int>> distinct(m.seen_prefixes.begin(), m.seen_prefixes.end());
  EXPECT_EQ(distinct.size(), 25u) << "probe locations must not repeat when budget <= vocabulary";
  for (const auto& p : m.seen_prefixes) ASSERT_EQ(p.size(), 1u) << "probes are single check-ins";
  for (double t : m.seen_times) ASSERT_DOUBLE_EQ(t, 0.37);
}

TEST(CommonLocation, BudgetBeyondVocabularyStillIssuesAllQueries) {
  HashModel m;
  m.L = 6;
  CommonLocationConfig cfg;
  cfg.query_budget = 30;
  extract_common_location(m, 1, cfg);
  EXPECT_EQ(m.queries, 30);
}

TEST(CommonLocation, DeterministicProbesBySeed) {
  HashModel a, b;
  a.L = b.L = 30;
  CommonLocationConfig cfg;
  cfg.query_budget = 10;
  cfg.seed = 4;
  extract_common_location(a, 2, cfg);
  extract_common_location(b, 2, cfg);
  EXPECT_EQ(a.seen_prefixes, b.seen_prefixes);
  HashModel c;
  c.L = 30;
  cfg.seed = 5;
  extract_common_location(c, 2, cfg);
  EXPECT_NE(a.seen_prefixes, c.seen_prefixes);
}

// Model whose response depends only on the probe location: probes with id
// below 6 put a modest peak on location 0, the other four probes put a huge
// peak on location 1. Majority voting and mean-logit voting then disagree.
struct SplitVoteModel {
  int num_locations() const { return 10; }
  QueryOutput query(int, std::span<const Visit> prefix) const {
    Eigen::VectorXd logits = Eigen::VectorXd::Zero(10);
    if (prefix[0].loc < 6) {
      logits[0] = 1.0;
    } else {
      logits[1] = 100.0;
    }
    QueryOutput out;
    out.steps.resize(prefix.size());
    for (auto& s : out.steps) {
      s.logits = logits;
      Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
      s.probs = p / p.sum();
    }
    return out;
  }
};

TEST(CommonLocation, SoftAndHardVotingAggregateDifferently) {
  SplitVoteModel m;
  CommonLocationConfig cfg;
  cfg.query_budget = 10;  // == vocabulary size, so every location is probed once
  cfg.top_k = 2;
  cfg.voting = Voting::kHard;
  const auto hard = extract_common_location(m, 0, cfg);
  EXPECT_EQ(hard[0], 0) << "six argmax votes for location 0 beat four for location 1";
  EXPECT_EQ(hard[1], 1);
  cfg.voting = Voting::kSoft;
  const auto soft = extract_common_location(m, 0, cfg);
  EXPECT_EQ(soft[0], 1) << "mean logits are dominated by the large peak";
  EXPECT_EQ(soft[1], 0);
}

TEST(CommonLocation, HardVoteTieGoesToLowerId) {
  // All probes produce uniform logits: every argmax lands on location 0.
  HashModel m;
  m.L = 4;
  struct Uniform {
    int num_locations() const { return 4; }
    QueryOutput query(int, std::span<const Visit> prefix) const {
      QueryOutput out;
      out.steps.resize(prefix.size());
      for (auto& s : out.steps) {
        s.logits = Eigen::VectorXd::Zero(4);
        s.probs = Eigen::VectorXd::Constant(4, 0.25);
      }
      return out;
    }
  } u;
  CommonLocationConfig cfg;
  cfg.query_budget = 4;
  cfg.voting = Voting::kHard;
  EXPECT_EQ(extract_common_location(u, 0, cfg)[0], 0);
}

TEST(CommonLocation, RejectsInvalidConfig) {
  HashModel m;
  CommonLocationConfig cfg;
  cfg.query_budget = 0;
  EXPECT_THROW(extract_common_location(m, 0, cfg), ValidationError);
  cfg.query_budget = 5;
  cfg.query_time = 1.5;
  EXPECT_THROW(extract_common_location(m, 0, cfg), ValidationError);
}

TEST(TrajectoryExtract, MatchesExhaustiveEnumerationWithFullBeam) {
  HashModel m;
  m.L = 5;
  const int n = 3;
  const auto oracle = exhaustive_sequences(m, 1, 2, n, 0.5);

  TrajectoryExtractConfig cfg;
  cfg.beam_width = 25;  // L^(n-1): nothing is ever pruned
  cfg.target_length = n;
  cfg.query_time = 0.5;
  const auto beam = extract_trajectory(m, 1, 2, cfg);

  ASSERT_EQ(beam.size(), oracle.size());
  for (std::size_t i = 0; i < beam.size(); ++i) {
    EXPECT_EQ(beam[i].locs, oracle[i].locs) << "rank " << i;
    EXPECT_NEAR(beam[i].log_perplexity, oracle[i].log_perplexity, 1e-12);
  }
}

TEST(TrajectoryExtract, LongerSequenceFullBeamStillExact) {
  HashModel m;
  m.L = 4;
  const int n = 4;
  const auto oracle = exhaustive_sequences(m, 0, 3, n, 0.4);
  TrajectoryExtractConfig cfg;
  cfg.beam_width = 64;  // 4^3
  cfg.target_length = n;
  cfg.query_time = 0.4;
  const auto beam = extract_trajectory(m, 0, 3, cfg);
  ASSERT_EQ(beam.size(), 64u);
  for (std::size_t i = 0; i < beam.size(); ++i) {
    EXPECT_EQ(beam[i].locs, oracle[i].locs) << "rank " << i;
    EXPECT_NEAR(beam[i].log_perplexity, oracle[i].log_perplexity, 1e-12);
  }
}

TEST(TrajectoryExtract, PrunedBeamIsSortedSubsetOfEnumeration) {
  HashModel m;
  m.L = 6;
  const auto oracle = exhaustive_sequences(m, 3, 0, 4, 0.5);
  std::set<std::vector<int>> all;
  for (const auto& s : oracle) all.insert(s.locs);

  TrajectoryExtractConfig cfg;
  cfg.beam_width = 7;
  cfg.target_length = 4;
  const auto beam = extract_trajectory(m, 3, 0, cfg);
  ASSERT_EQ(beam.size(), 7u);
  for (std::size_t i = 0; i < beam.size(); ++i) {
    EXPECT_TRUE(all.count(beam[i].locs)) << "rank " << i;
    ASSERT_EQ(beam[i].locs.size(), 4u);
    EXPECT_EQ(beam[i].locs[0], 0);
    if (i > 0) EXPECT_LE(beam[i - 1].log_perplexity, beam[i].log_perplexity);
  }
}

TEST(TrajectoryExtract, QueryCountMatchesBeamSchedule) {
  // Step 1 queries the lone start sequence; each later step queries every
  // beam entry once: 1 + beam_width * (n - 2) when the vocabulary can fill
  // the beam.
  HashModel m;
  m.L = 60;
  TrajectoryExtractConfig cfg;
  cfg.beam_width = 36;
  cfg.target_length = 4;
  extract_trajectory(m, 0, 5, cfg);
  EXPECT_EQ(m.queries, 1 + 36 * (4 - 2));

  HashModel m2;
  m2.L = 60;
  cfg.target_length = 2;
  extract_trajectory(m2, 0, 5, cfg);
  EXPECT_EQ(m2.queries, 1);
}

TEST(TrajectoryExtract, BeamCappedByVocabulary) {
  HashModel m;
  m.L = 3;
  TrajectoryExtractConfig cfg;
  cfg.beam_width = 50;
  cfg.target_length = 3;
  const auto beam = extract_trajectory(m, 0, 1, cfg);
  EXPECT_EQ(beam.size(), 9u);  // 3^2 candidates exist in total
}

TEST(TrajectoryExtract, TieBreakIsLexicographic) {
  struct Flat {
    int num_locations() const { return 3; }
    QueryOutput query(int, std::span<const Visit> prefix) const {
      QueryOutput out;
      out.steps.resize(prefix.size());
      for (auto& s : out.steps) {
        s.logits = Eigen::VectorXd::Zero(3);
        s.probs = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
      }
      return out;
    }
  } m;
  TrajectoryExtractConfig cfg;
  cfg.beam_width = 9;
  cfg.target_length = 3;
  const auto beam = extract_trajectory(m, 0, 1, cfg);
  ASSERT_EQ(beam.size(), 9u);
  // All scores equal, so the beam must come back in lexicographic order.
  for (std::size_t i = 1; i < beam.size(); ++i) {
    EXPECT_LT(beam[i - 1].locs, beam[i].locs);
    EXPECT_DOUBLE_EQ(beam[i - 1].log_perplexity, beam[i].log_perplexity);
  }
  EXPECT_EQ(beam[0].locs, (std::vector<int>{1, 0, 0}));
}

TEST(TrajectoryExtract, RejectsInvalidConfig) {
  HashModel m;
  TrajectoryExtractConfig cfg;
  EXPECT_THROW(extract_trajectory(m, 0, -1, cfg), ValidationError);
  EXPECT_THROW(extract_trajectory(m, 0, 99, cfg), ValidationError);
  cfg.target_length = 1;
  EXPECT_THROW(extract_trajectory(m, 0, 0, cfg), ValidationError);
}

}  // namespace
}  // namespace poiaudit
