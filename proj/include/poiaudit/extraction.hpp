#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "poiaudit/common.hpp"
#include "poiaudit/model.hpp"

namespace poiaudit {

enum class Voting { kSoft, kHard };

inline const char* voting_name(Voting v) { return v == Voting::kSoft ? "soft" : "hard"; }

inline Voting voting_from_name(const std::string& s) {
  if (s == "soft") return Voting::kSoft;
  if (s == "hard") return Voting::kHard;
  throw ValidationError("unknown voting mode: " + s);
}

// What soft voting averages across queries.
enum class VoteDomain { kLogits, kProbs };

struct CommonLocationConfig {
  int query_budget = 50;   // number of single-check-in probe queries
  double query_time = 0.5;
  int top_k = 1;
  Voting voting = Voting::kSoft;
  VoteDomain domain = VoteDomain::kLogits;
  std::uint64_t seed = 1;
};

namespace detail {

inline int argmax_low(const Eigen::VectorXd& v, int limit) {
  int best = 0;
  for (int i = 1; i < limit; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Indices of the k largest entries of v[0..limit), ties to the lower index.
inline std::vector<int> top_k_low(const Eigen::VectorXd& v, int limit, int k) {
  std::vector<int> idx(static_cast<std::size_t>(limit));
  for (int i = 0; i < limit; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] > v[b]; });
  idx.resize(static_cast<std::size_t>(std::min(k, limit)));
  return idx;
}

}  // namespace detail

// Recovers a user's most frequently visited locations with nothing but
// query access: probes the model with random single-check-in prefixes and
// aggregates the next-location predictions across probes. Returns the k
// best candidates, strongest first.
template <QueryableModel M>
std::vector<int> extract_common_location(const M& model, int user,
                                         const CommonLocationConfig& cfg) {
  const int L = model.num_locations();
  require(L > 0, "model has no locations");
  require(cfg.query_budget >= 1, "query_budget must be at least 1");
  require(cfg.top_k >= 1, "top_k must be at least 1");
  require(cfg.query_time >= 0.0 && cfg.query_time <= 1.0, "query_time outside [0, 1]");

  Rng rng(mix64(cfg.seed ^ (static_cast<std::uint64_t>(user) * 0x9e3779b9ULL)));
  std::vector<int> probes;
  probes.reserve(static_cast<std::size_t>(cfg.query_budget));
  if (cfg.query_budget <= L) {
    // Distinct probe locations via partial Fisher-Yates.
    std::vector<int> all(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) all[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < cfg.query_budget; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.uniform_int(
                                            static_cast<std::uint64_t>(L - i)));
      std::swap(all[static_cast<std::size_t>(i)], all[j]);
      probes.push_back(all[static_cast<std::size_t>(i)]);
    }
  } else {
    for (int i = 0; i < cfg.query_budget; ++i) {
      probes.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(L))));
    }
  }

  Eigen::VectorXd tally = Eigen::VectorXd::Zero(L);
  for (int probe : probes) {
    const Visit v{probe, cfg.query_time};
    const QueryOutput out = model.query(user, std::span<const Visit>(&v, 1));
    const StepOutput& step = out.last();
    if (cfg.voting == Voting::kSoft) {
      const Eigen::VectorXd& src = cfg.domain == VoteDomain::kLogits ? step.logits : step.probs;
      tally += src.head(L);
    } else {
      tally[detail::argmax_low(step.logits, L)] += 1.0;
    }
  }
  if (cfg.voting == Voting::kSoft) tally /= static_cast<double>(cfg.query_budget);
  return detail::top_k_low(tally, L, cfg.top_k);
}

struct TrajectoryExtractConfig {
  int beam_width = 50;
  int target_length = 4;   // locations per extracted sequence, start included
  double query_time = 0.5;
  std::uint64_t seed = 1;
};

struct ScoredSequence {
  std::vector<int> locs;
  double log_perplexity = 0.0;

  bool operator<(const ScoredSequence& o) const {
    if (log_perplexity != o.log_perplexity) return log_perplexity < o.log_perplexity;
    return locs < o.locs;
  }
};

// Beam search for low-perplexity location sequences of the target length
// starting at start_loc, every step stamped with the same query time. The
// score is the cumulative negative log-probability of the continuation;
// ties break towards the lexicographically smaller sequence. Returns the
// final beam sorted best-first (at most beam_width entries).
template <QueryableModel M>
std::vector<ScoredSequence> extract_trajectory(const M& model, int user, int start_loc,
                                               const TrajectoryExtractConfig& cfg) {
  const int L = model.num_locations();
  require(start_loc >= 0 && start_loc < L, "start location out of range");
  require(cfg.beam_width >= 1, "beam_width must be at least 1");
  require(cfg.target_length >= 2, "target_length must be at least 2");
  require(cfg.query_time >= 0.0 && cfg.query_time <= 1.0, "query_time outside [0, 1]");

  std::vector<ScoredSequence> beam{{std::vector<int>{start_loc}, 0.0}};
  std::vector<ScoredSequence> candidates;
  std::vector<Visit> prefix;
  for (int step = 1; step < cfg.target_length; ++step) {
    candidates.clear();
    candidates.reserve(beam.size() * static_cast<std::size_t>(L));
    for (const ScoredSequence& entry : beam) {
      prefix.clear();
      for (int loc : entry.locs) prefix.push_back(Visit{loc, cfg.query_time});
      const QueryOutput out = model.query(user, std::span<const Visit>(prefix));
      const Eigen::VectorXd& probs = out.last().probs;
      for (int c = 0; c < L; ++c) {
        ScoredSequence child;
        child.locs = entry.locs;
        child.locs.push_back(c);
        child.log_perplexity =
            entry.log_perplexity - std::log(std::max(probs[c], kProbFloor));
        candidates.push_back(std::move(child));
      }
    }
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(cfg.beam_width));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep),
                      candidates.end());
    candidates.resize(keep);
    beam = candidates;
  }
  std::sort(beam.begin(), beam.end());
  return beam;
}

}  // namespace poiaudit
