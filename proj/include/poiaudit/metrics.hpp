#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "poiaudit/common.hpp"
#include "poiaudit/data.hpp"
#include "poiaudit/geo.hpp"

namespace poiaudit {

// ---------------------------------------------------------------------------
// Score-based attack evaluation (ROC, AUC, accuracy, TPR at fixed FPR).
// ---------------------------------------------------------------------------

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // point reached by predicting "positive" at score >= threshold
};

struct ScoreEval {
  double auc = 0.0;
  double best_accuracy = 0.0;
  std::vector<RocPoint> roc;  // from (0,0) to (1,1), thresholds descending

  // Largest TPR achievable with FPR <= level.
  double tpr_at_fpr(double level) const {
    double best = 0.0;
    for (const auto& p : roc) {
      if (p.fpr <= level + 1e-15) best = std::max(best, p.tpr);
    }
    return best;
  }
};

// Threshold sweep over the distinct score values (ties grouped), trapezoidal
// AUC. Requires at least one positive and one negative label; equal scores
// everywhere collapse the ROC to the diagonal and give AUC 0.5.
inline ScoreEval evaluate_scores(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "evaluate_scores: size mismatch");
  require(!scores.empty(), "evaluate_scores: empty input");
  long pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "evaluate_scores: labels must be 0/1");
    require(std::isfinite(scores[i]), "evaluate_scores: non-finite score");
    labels[i] == 1 ? ++pos : ++neg;
  }
  require(pos > 0 && neg > 0, "evaluate_scores: need both positive and negative labels");

  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  ScoreEval ev;
  ev.roc.push_back(RocPoint{0.0, 0.0, std::numeric_limits<double>::infinity()});
  long tp = 0, fp = 0;
  double auc = 0.0;
  double best_acc = static_cast<double>(neg) / static_cast<double>(pos + neg);  // predict all negative
  std::size_t i = 0;
  while (i < idx.size()) {
    const double v = scores[idx[i]];
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == v) {
      labels[idx[j]] == 1 ? ++tp : ++fp;
      ++j;
    }
    const RocPoint prev = ev.roc.back();
    RocPoint p;
    p.fpr = static_cast<double>(fp) / static_cast<double>(neg);
    p.tpr = static_cast<double>(tp) / static_cast<double>(pos);
    p.threshold = v;
    auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    best_acc = std::max(best_acc,
                        static_cast<double>(tp + (neg - fp)) / static_cast<double>(pos + neg));
    ev.roc.push_back(p);
    i = j;
  }
  ev.auc = auc;
  ev.best_accuracy = best_acc;
  return ev;
}

// ---------------------------------------------------------------------------
// Extraction ground truth and success rates.
// ---------------------------------------------------------------------------

// Per-user most frequent location in the given split (ties to the lower
// location id); -1 for users without check-ins there.
inline std::vector<int> empirical_common_locations(const MobilityDataset& ds,
                                                   Split split = Split::kTrain) {
  std::vector<std::map<int, long>> counts(static_cast<std::size_t>(ds.num_users()));
  for (const auto& tr : ds.trajectories) {
    if (tr.split != split) continue;
    for (const auto& v : tr.visits) counts[static_cast<std::size_t>(tr.user)][v.loc]++;
  }
  std::vector<int> out(static_cast<std::size_t>(ds.num_users()), -1);
  for (int u = 0; u < ds.num_users(); ++u) {
    long best = 0;
    for (const auto& [loc, c] : counts[static_cast<std::size_t>(u)]) {
      if (c > best) {
        best = c;
        out[static_cast<std::size_t>(u)] = loc;
      }
    }
  }
  return out;
}

// Fraction of users whose predicted top-k contains their true common
// location. Users without a defined truth (-1) are skipped.
inline double common_location_asr(const std::vector<std::vector<int>>& predictions,
                                  const std::vector<int>& truth) {
  require(predictions.size() == truth.size(), "common_location_asr: size mismatch");
  long hits = 0, total = 0;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (truth[u] < 0) continue;
    ++total;
    for (int p : predictions[u]) {
      if (p == truth[u]) {
        ++hits;
        break;
      }
    }
  }
  require(total > 0, "common_location_asr: no users with ground truth");
  return static_cast<double>(hits) / static_cast<double>(total);
}

// True when seq appears as a contiguous location subsequence of one of the
// user's trajectories in the split.
inline bool sequence_in_split(const MobilityDataset& ds, int user, const std::vector<int>& seq,
                              Split split = Split::kTrain) {
  if (seq.empty()) return false;
  for (const auto& tr : ds.trajectories) {
    if (tr.split != split || tr.user != user) continue;
    if (tr.visits.size() < seq.size()) continue;
    for (std::size_t start = 0; start + seq.size() <= tr.visits.size(); ++start) {
      bool match = true;
      for (std::size_t i = 0; i < seq.size(); ++i) {
        if (tr.visits[start + i].loc != seq[i]) {
          match = false;
          break;
        }
      }
      if (match) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Aggregate descriptive statistics used for vulnerability analysis.
// ---------------------------------------------------------------------------

struct UserAggregate {
  long checkins = 0;
  long unique_pois = 0;
  long trajectories = 0;
  double avg_traj_len = 0.0;
};

struct LocationAggregate {
  long visiting_users = 0;
  long nearby_checkins = 0;      // check-ins at POIs within 1 km, self included
  long sharing_trajectories = 0; // trajectories containing the POI
  double mean_visit_time = 0.0;
};

struct TrajectoryAggregate {
  long users_with_identical = 0;  // users owning an identical location sequence (self included)
  long nearby_checkins = 0;       // check-ins within 1 km of any member POI
  long intercepting = 0;          // other trajectories sharing at least one POI
  double mean_time = 0.0;
};

struct AggregateStats {
  std::vector<UserAggregate> users;
  std::vector<LocationAggregate> locations;
  std::vector<TrajectoryAggregate> trajectories;
};

inline AggregateStats compute_aggregate_stats(const MobilityDataset& ds) {
  const int U = ds.num_users();
  const int L = ds.num_locations();
  const long T = static_cast<long>(ds.trajectories.size());
  AggregateStats st;
  st.users.resize(static_cast<std::size_t>(U));
  st.locations.resize(static_cast<std::size_t>(L));
  st.trajectories.resize(static_cast<std::size_t>(T));

  std::vector<std::set<int>> user_pois(static_cast<std::size_t>(U));
  std::vector<std::set<int>> loc_users(static_cast<std::size_t>(L));
  std::vector<long> loc_checkins(static_cast<std::size_t>(L), 0);
  std::vector<double> loc_time_sum(static_cast<std::size_t>(L), 0.0);
  std::vector<std::vector<long>> loc_trajs(static_cast<std::size_t>(L));

  for (long ti = 0; ti < T; ++ti) {
    const auto& tr = ds.trajectories[static_cast<std::size_t>(ti)];
    auto& us = st.users[static_cast<std::size_t>(tr.user)];
    us.checkins += static_cast<long>(tr.visits.size());
    us.trajectories += 1;
    std::set<int> seen;
    double tsum = 0.0;
    for (const auto& v : tr.visits) {
      user_pois[static_cast<std::size_t>(tr.user)].insert(v.loc);
      loc_users[static_cast<std::size_t>(v.loc)].insert(tr.user);
      loc_checkins[static_cast<std::size_t>(v.loc)]++;
      loc_time_sum[static_cast<std::size_t>(v.loc)] += v.t;
      tsum += v.t;
      if (seen.insert(v.loc).second) {
        loc_trajs[static_cast<std::size_t>(v.loc)].push_back(ti);
      }
    }
    st.trajectories[static_cast<std::size_t>(ti)].mean_time =
        tsum / static_cast<double>(tr.visits.size());
  }

  for (int u = 0; u < U; ++u) {
    auto& us = st.users[static_cast<std::size_t>(u)];
    us.unique_pois = static_cast<long>(user_pois[static_cast<std::size_t>(u)].size());
    us.avg_traj_len = us.trajectories > 0
                          ? static_cast<double>(us.checkins) / static_cast<double>(us.trajectories)
                          : 0.0;
  }

  // 1 km POI neighbourhoods (includes the POI itself).
  std::vector<std::vector<int>> near(static_cast<std::size_t>(L));
  for (int a = 0; a < L; ++a) {
    for (int b = a; b < L; ++b) {
      const double d = geo::haversine_km(ds.locations[static_cast<std::size_t>(a)].lat,
                                         ds.locations[static_cast<std::size_t>(a)].lon,
                                         ds.locations[static_cast<std::size_t>(b)].lat,
                                         ds.locations[static_cast<std::size_t>(b)].lon);
      if (d <= 1.0) {
        near[static_cast<std::size_t>(a)].push_back(b);
        if (b != a) near[static_cast<std::size_t>(b)].push_back(a);
      }
    }
  }

  for (int l = 0; l < L; ++l) {
    auto& ls = st.locations[static_cast<std::size_t>(l)];
    ls.visiting_users = static_cast<long>(loc_users[static_cast<std::size_t>(l)].size());
    ls.sharing_trajectories = static_cast<long>(loc_trajs[static_cast<std::size_t>(l)].size());
    ls.mean_visit_time = loc_checkins[static_cast<std::size_t>(l)] > 0
                             ? loc_time_sum[static_cast<std::size_t>(l)] /
                                   static_cast<double>(loc_checkins[static_cast<std::size_t>(l)])
                             : 0.0;
    long nearby = 0;
    for (int n : near[static_cast<std::size_t>(l)]) {
      nearby += loc_checkins[static_cast<std::size_t>(n)];
    }
    ls.nearby_checkins = nearby;
  }

  // Identical location sequences across users.
  std::map<std::vector<int>, std::set<int>> seq_owners;
  std::vector<const std::set<int>*> seq_of_traj(static_cast<std::size_t>(T));
  {
    std::vector<std::vector<int>> seqs(static_cast<std::size_t>(T));
    for (long ti = 0; ti < T; ++ti) {
      const auto& tr = ds.trajectories[static_cast<std::size_t>(ti)];
      auto& s = seqs[static_cast<std::size_t>(ti)];
      s.reserve(tr.visits.size());
      for (const auto& v : tr.visits) s.push_back(v.loc);
      seq_owners[s].insert(tr.user);
    }
    for (long ti = 0; ti < T; ++ti) {
      seq_of_traj[static_cast<std::size_t>(ti)] = &seq_owners.at(seqs[static_cast<std::size_t>(ti)]);
    }
  }

  std::vector<long> stamp(static_cast<std::size_t>(T), -1);
  for (long ti = 0; ti < T; ++ti) {
    const auto& tr = ds.trajectories[static_cast<std::size_t>(ti)];
    auto& ts = st.trajectories[static_cast<std::size_t>(ti)];
    ts.users_with_identical = static_cast<long>(seq_of_traj[static_cast<std::size_t>(ti)]->size());

    std::set<int> member_pois, nearby_pois;
    for (const auto& v : tr.visits) member_pois.insert(v.loc);
    long intercept = 0;
    for (int l : member_pois) {
      for (int n : near[static_cast<std::size_t>(l)]) nearby_pois.insert(n);
      for (long other : loc_trajs[static_cast<std::size_t>(l)]) {
        if (other != ti && stamp[static_cast<std::size_t>(other)] != ti) {
          stamp[static_cast<std::size_t>(other)] = ti;
          ++intercept;
        }
      }
    }
    ts.intercepting = intercept;
    long nearby = 0;
    for (int n : nearby_pois) nearby += loc_checkins[static_cast<std::size_t>(n)];
    ts.nearby_checkins = nearby;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Vulnerability binning: quantile bins over a population statistic with the
// mean attack signal per bin.
// ---------------------------------------------------------------------------

struct VulnerabilityBins {
  std::vector<double> edges;        // n_bins + 1 value-quantile edges
  std::vector<long> population;     // entries per bin, sums to the input size
  std::vector<double> mean_signal;  // 0 for empty bins
};

inline VulnerabilityBins vulnerability_bins(const std::vector<double>& stat,
                                            const std::vector<double>& signal, int n_bins) {
  require(stat.size() == signal.size(), "vulnerability_bins: size mismatch");
  require(!stat.empty(), "vulnerability_bins: empty input");
  require(n_bins >= 1, "vulnerability_bins: n_bins must be at least 1");
  require(static_cast<std::size_t>(n_bins) <= stat.size(),
          "vulnerability_bins: more bins than entries");

  std::vector<double> sorted = stat;
  std::sort(sorted.begin(), sorted.end());
  VulnerabilityBins out;
  out.edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int b = 0; b <= n_bins; ++b) {
    const double q = static_cast<double>(b) / static_cast<double>(n_bins);
    const std::size_t r = std::min(
        sorted.size() - 1,
        static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())) - 1));
    out.edges[static_cast<std::size_t>(b)] = b == 0 ? sorted.front() : sorted[r];
  }
  out.edges.back() = sorted.back();

  out.population.assign(static_cast<std::size_t>(n_bins), 0);
  out.mean_signal.assign(static_cast<std::size_t>(n_bins), 0.0);
  for (std::size_t i = 0; i < stat.size(); ++i) {
    int bin = n_bins - 1;
    for (int b = 0; b < n_bins; ++b) {
      if (stat[i] < out.edges[static_cast<std::size_t>(b) + 1]) {
        bin = b;
        break;
      }
    }
    out.population[static_cast<std::size_t>(bin)]++;
    out.mean_signal[static_cast<std::size_t>(bin)] += signal[i];
  }
  for (int b = 0; b < n_bins; ++b) {
    if (out.population[static_cast<std::size_t>(b)] > 0) {
      out.mean_signal[static_cast<std::size_t>(b)] /=
          static_cast<double>(out.population[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

}  // namespace poiaudit
