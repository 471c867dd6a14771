#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "poiaudit/common.hpp"
#include "poiaudit/data.hpp"
#include "poiaudit/model.hpp"
#include "poiaudit/parallel.hpp"
#include "poiaudit/train.hpp"

namespace poiaudit {

struct SpaTemConfig {
  int n_t = 10;  // evenly spaced probe timestamps
  int n_l = 10;  // random-location probes per timestamp
  std::uint64_t seed = 1;
};

// Probability mass the model puts on `loc` for this user, probed with
// single random check-ins at n_t timestamps i/n_t; per-timestamp means are
// reduced with a max. High values indicate the model has tied the user to
// the location.
template <QueryableModel M>
double spa_tem_query(const M& model, int user, int loc, const SpaTemConfig& cfg) {
  const int L = model.num_locations();
  require(loc >= 0 && loc < L, "spa_tem_query: location out of range");
  require(cfg.n_t >= 1 && cfg.n_l >= 1, "spa_tem_query: n_t and n_l must be at least 1");
  Rng rng(mix64(cfg.seed ^ (static_cast<std::uint64_t>(user) * 0x51ed2701ULL) ^
                (static_cast<std::uint64_t>(loc) * 0x9e3779b9ULL)));
  double best = 0.0;
  for (int i = 0; i < cfg.n_t; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(cfg.n_t);
    double acc = 0.0;
    for (int j = 0; j < cfg.n_l; ++j) {
      const Visit v{static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(L))), t};
      const QueryOutput out = model.query(user, std::span<const Visit>(&v, 1));
      acc += out.last().probs[loc];
    }
    best = std::max(best, acc / cfg.n_l);
  }
  return best;
}

// Mean probability assigned to the true next location across the
// trajectory's prediction positions. Needs at least two visits.
template <QueryableModel M>
double trajectory_confidence(const M& model, int user, std::span<const Visit> traj) {
  require(traj.size() >= 2, "trajectory_confidence needs at least two visits");
  const QueryOutput q = model.query(user, traj);
  double acc = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    acc += q.steps[i - 1].probs[traj[i].loc];
  }
  return acc / static_cast<double>(traj.size() - 1);
}

// ---------------------------------------------------------------------------
// Likelihood-ratio membership test with a shared shadow-model ensemble.
// ---------------------------------------------------------------------------

struct MiaTarget {
  enum class Kind { kUserLocation, kTrajectory };
  Kind kind = Kind::kTrajectory;
  int user = 0;
  int loc = -1;               // kUserLocation
  std::vector<Visit> visits;  // kTrajectory: the candidate sequence
  bool member = false;        // evaluation label (member of the victim's training data)
};

enum class ScoreTransform { kLogit, kIdentity };

inline double apply_transform(double p, ScoreTransform t) {
  if (t == ScoreTransform::kIdentity) return p;
  const double c = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(c / (1.0 - c));
}

// Shared ensemble plan: 2N shadow slots, each trained on a seeded subsample
// of the pool with per-target membership forced through a carrier
// trajectory. Every target is IN for exactly N slots and OUT for the rest.
struct ShadowPlan {
  int n_pairs = 16;  // N; ensemble size is 2N
  std::uint64_t seed = 1;
  std::vector<std::vector<int>> slot_base;        // pool trajectory ids per slot
  std::vector<std::vector<std::uint8_t>> in_slot;  // [target][slot]
  std::vector<Trajectory> carriers;                // per target

  int n_slots() const { return 2 * n_pairs; }
};

// Builds the carrier that manipulates a target's membership in a shadow
// training set. For trajectory targets this is the sequence itself; for
// user-location targets it is a short synthetic visit sequence placing the
// user at the location between two popularity-sampled context stops.
inline Trajectory make_carrier(const MiaTarget& target, const MobilityDataset& pool,
                               double carrier_time, Rng& rng) {
  Trajectory tr;
  tr.user = target.user;
  tr.split = Split::kTrain;
  tr.day = -1;
  if (target.kind == MiaTarget::Kind::kTrajectory) {
    require(target.visits.size() >= 2, "trajectory target needs at least two visits");
    tr.visits = target.visits;
    return tr;
  }
  require(target.loc >= 0, "user-location target needs a location");
  // Popularity-weighted context sampling over pool check-ins.
  std::vector<long> counts(static_cast<std::size_t>(pool.num_locations()), 0);
  long total = 0;
  for (const auto& t : pool.trajectories) {
    for (const auto& v : t.visits) {
      ++counts[static_cast<std::size_t>(v.loc)];
      ++total;
    }
  }
  auto sample_context = [&]() -> int {
    if (total == 0) return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(pool.num_locations())));
    long pick = static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(total)));
    for (std::size_t i = 0; i < counts.size(); ++i) {
      pick -= counts[i];
      if (pick < 0) return static_cast<int>(i);
    }
    return static_cast<int>(counts.size()) - 1;
  };
  tr.visits = {Visit{sample_context(), carrier_time}, Visit{target.loc, carrier_time},
               Visit{sample_context(), carrier_time}};
  return tr;
}

inline ShadowPlan plan_shadows(const MobilityDataset& pool, const std::vector<MiaTarget>& targets,
                               int n_pairs, std::uint64_t seed, double subsample = 0.5,
                               double carrier_time = 0.5) {
  require(n_pairs >= 2, "n_pairs must be at least 2");
  require(subsample > 0.0 && subsample <= 1.0, "subsample fraction outside (0, 1]");
  require(!targets.empty(), "plan_shadows: no targets");

  ShadowPlan plan;
  plan.n_pairs = n_pairs;
  plan.seed = seed;
  const int slots = plan.n_slots();
  const long n_pool = static_cast<long>(pool.trajectories.size());
  Rng rng(mix64(seed ^ 0x5badef11ULL));

  plan.slot_base.resize(static_cast<std::size_t>(slots));
  for (int s = 0; s < slots; ++s) {
    Rng srng = rng.fork(static_cast<std::uint64_t>(s) + 1);
    std::vector<int> ids(static_cast<std::size_t>(n_pool));
    for (long i = 0; i < n_pool; ++i) ids[static_cast<std::size_t>(i)] = static_cast<int>(i);
    srng.shuffle(ids);
    const long keep = std::max<long>(1, static_cast<long>(std::floor(subsample * n_pool)));
    ids.resize(static_cast<std::size_t>(keep));
    std::sort(ids.begin(), ids.end());
    plan.slot_base[static_cast<std::size_t>(s)] = std::move(ids);
  }

  Rng crng = rng.fork(0xca221e2ULL);
  plan.in_slot.resize(targets.size());
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    plan.carriers.push_back(make_carrier(targets[ti], pool, carrier_time, crng));
    std::vector<int> order(static_cast<std::size_t>(slots));
    for (int s = 0; s < slots; ++s) order[static_cast<std::size_t>(s)] = s;
    Rng trng = rng.fork(0xbead0000ULL + ti);
    trng.shuffle(order);
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(slots), 0);
    for (int k = 0; k < n_pairs; ++k) flags[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
    plan.in_slot[ti] = std::move(flags);
  }
  return plan;
}

namespace detail {

inline bool same_sequence(const Trajectory& a, const Trajectory& b) {
  if (a.user != b.user || a.visits.size() != b.visits.size()) return false;
  for (std::size_t i = 0; i < a.visits.size(); ++i) {
    if (a.visits[i].loc != b.visits[i].loc || a.visits[i].t != b.visits[i].t) return false;
  }
  return true;
}

}  // namespace detail

// Training set for one shadow slot: the slot's base subsample, with each
// IN-assigned target's carrier added and, for OUT-assigned targets, any pool
// trajectory identical to the carrier removed. Everything is tagged TRAIN.
inline MobilityDataset shadow_slot_dataset(const MobilityDataset& pool, const ShadowPlan& plan,
                                           int slot) {
  MobilityDataset ds;
  ds.user_labels = pool.user_labels;
  ds.locations = pool.locations;
  for (int id : plan.slot_base[static_cast<std::size_t>(slot)]) {
    const Trajectory& tr = pool.trajectories[static_cast<std::size_t>(id)];
    bool removed = false;
    for (std::size_t ti = 0; ti < plan.carriers.size(); ++ti) {
      if (!plan.in_slot[ti][static_cast<std::size_t>(slot)] &&
          detail::same_sequence(tr, plan.carriers[ti])) {
        removed = true;
        break;
      }
    }
    if (removed) continue;
    Trajectory copy = tr;
    copy.split = Split::kTrain;
    ds.trajectories.push_back(std::move(copy));
  }
  for (std::size_t ti = 0; ti < plan.carriers.size(); ++ti) {
    if (!plan.in_slot[ti][static_cast<std::size_t>(slot)]) continue;
    bool present = false;
    for (const auto& tr : ds.trajectories) {
      if (detail::same_sequence(tr, plan.carriers[ti])) {
        present = true;
        break;
      }
    }
    if (!present) ds.trajectories.push_back(plan.carriers[ti]);
  }
  require(!ds.trajectories.empty(), "shadow slot dataset is empty");
  return ds;
}

inline std::vector<PoiModel> train_shadow_ensemble(const MobilityDataset& pool,
                                                   const ShadowPlan& plan,
                                                   const ModelConfig& arch,
                                                   const TrainConfig& train_cfg,
                                                   ThreadPool& threads) {
  const int slots = plan.n_slots();
  std::vector<PoiModel> models;
  models.reserve(static_cast<std::size_t>(slots));
  for (int s = 0; s < slots; ++s) {
    ModelConfig mc = arch;
    mc.seed = mix64(plan.seed ^ (0x50deb100ULL + static_cast<std::uint64_t>(s)));
    models.emplace_back(mc, pool.num_users(), pool.num_locations());
  }
  std::vector<std::string> errors(static_cast<std::size_t>(slots));
  parallel_for(threads, slots, [&](long s) {
    try {
      const MobilityDataset ds = shadow_slot_dataset(pool, plan, static_cast<int>(s));
      TrainConfig tc = train_cfg;
      tc.eval_every = 0;
      tc.early_stop_patience.reset();
      tc.seed = mix64(plan.seed ^ (0x7a17ULL + static_cast<std::uint64_t>(s)));
      train(models[static_cast<std::size_t>(s)], ds, tc);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(s)] = e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw RuntimeFailure("shadow training failed: " + e);
  }
  return models;
}

// Confidence signal of one target under one model.
template <QueryableModel M>
double target_confidence(const M& model, const MiaTarget& target, const SpaTemConfig& stq) {
  if (target.kind == MiaTarget::Kind::kUserLocation) {
    return spa_tem_query(model, target.user, target.loc, stq);
  }
  return trajectory_confidence(model, target.user, std::span<const Visit>(target.visits));
}

struct LiraResult {
  double conf_obs = 0.0;  // raw victim confidence
  double phi_obs = 0.0;   // transformed
  double mu_in = 0.0;
  double mu_out = 0.0;
  double var_in = 0.0;
  double var_out = 0.0;
  double log_lambda = 0.0;
  double lambda = 0.0;
  bool member_predicted = false;
};

constexpr double kVarianceFloor = 1e-12;

// Gaussian likelihood ratio of the observed confidence under the IN and OUT
// shadow score distributions. Scores are expected already transformed.
inline LiraResult lira_test(double phi_obs, const std::vector<double>& in_scores,
                            const std::vector<double>& out_scores) {
  require(!in_scores.empty() && !out_scores.empty(), "lira_test: empty score set");
  auto moments = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    if (xs.size() > 1) {
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= static_cast<double>(xs.size() - 1);
    }
    return std::pair<double, double>(mean, std::max(var, kVarianceFloor));
  };
  auto log_normal_pdf = [](double x, double mu, double var) {
    return -0.5 * std::log(2.0 * M_PI * var) - (x - mu) * (x - mu) / (2.0 * var);
  };
  LiraResult r;
  r.phi_obs = phi_obs;
  std::tie(r.mu_in, r.var_in) = moments(in_scores);
  std::tie(r.mu_out, r.var_out) = moments(out_scores);
  r.log_lambda = log_normal_pdf(phi_obs, r.mu_in, r.var_in) -
                 log_normal_pdf(phi_obs, r.mu_out, r.var_out);
  r.lambda = std::exp(std::clamp(r.log_lambda, -700.0, 700.0));
  r.member_predicted = r.log_lambda > 0.0;
  return r;
}

struct MiaConfig {
  int n_pairs = 64;  // N; the ensemble holds 2N models
  double subsample = 0.5;
  double carrier_time = 0.5;
  ScoreTransform transform = ScoreTransform::kLogit;
  SpaTemConfig stq;
  TrainConfig shadow_train;
  std::uint64_t seed = 1;

  MiaConfig() {
    shadow_train.epochs = 50;
    shadow_train.eval_every = 0;
  }
};

// Runs the full test against a victim model: per-target confidences under
// each shadow slot, Gaussian fits on the IN/OUT score sets, likelihood
// ratio on the victim's confidence. Shadow query randomness is shared
// across models of the same target so IN/OUT scores are paired.
template <QueryableModel V>
std::vector<LiraResult> lira_attack(const V& victim, const std::vector<MiaTarget>& targets,
                                    const std::vector<PoiModel>& shadows, const ShadowPlan& plan,
                                    const MiaConfig& cfg) {
  require(static_cast<int>(shadows.size()) == plan.n_slots(),
          "shadow ensemble does not match plan");
  require(targets.size() == plan.in_slot.size(), "targets do not match plan");
  std::vector<LiraResult> results;
  results.reserve(targets.size());
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    SpaTemConfig stq = cfg.stq;
    stq.seed = mix64(cfg.seed ^ (0x57e90000ULL + ti));
    std::vector<double> in_scores, out_scores;
    for (int s = 0; s < plan.n_slots(); ++s) {
      const double c =
          target_confidence(shadows[static_cast<std::size_t>(s)], targets[ti], stq);
      const double phi = apply_transform(c, cfg.transform);
      (plan.in_slot[ti][static_cast<std::size_t>(s)] ? in_scores : out_scores).push_back(phi);
    }
    const double conf = target_confidence(victim, targets[ti], stq);
    LiraResult r = lira_test(apply_transform(conf, cfg.transform), in_scores, out_scores);
    r.conf_obs = conf;
    results.push_back(r);
  }
  return results;
}

// Balanced member/non-member trajectory targets: members from the victim's
// TRAIN split, non-members from TEST, down-sampled to the smaller side (at
// most max_targets total, 0 = no cap). Each non-member is paired with a
// member from the same user whenever that user has unused TRAIN
// trajectories, so the two classes carry matching user composition; scores
// then compare trajectories rather than which users happen to appear in
// which split.
inline std::vector<MiaTarget> make_trajectory_targets(const MobilityDataset& ds, int max_targets,
                                                      std::uint64_t seed) {
  std::vector<int> train_pool, nonmembers;
  for (int i = 0; i < static_cast<int>(ds.trajectories.size()); ++i) {
    const auto& tr = ds.trajectories[static_cast<std::size_t>(i)];
    if (tr.visits.size() < 2) continue;
    if (tr.split == Split::kTrain) train_pool.push_back(i);
    if (tr.split == Split::kTest) nonmembers.push_back(i);
  }
  require(!train_pool.empty() && !nonmembers.empty(),
          "make_trajectory_targets: need both train and test trajectories");
  Rng rng(mix64(seed ^ 0x7a26e7ULL));
  rng.shuffle(train_pool);
  rng.shuffle(nonmembers);

  // Per-user queues of TRAIN candidates in shuffled order, plus the same
  // shuffled order as a global fallback when a user's queue runs dry.
  std::map<int, std::vector<int>> per_user;
  for (int idx : train_pool) {
    per_user[ds.trajectories[static_cast<std::size_t>(idx)].user].push_back(idx);
  }
  std::vector<char> taken(ds.trajectories.size(), 0);
  std::size_t fallback_cursor = 0;
  auto next_member_for = [&](int user) -> int {
    auto it = per_user.find(user);
    if (it != per_user.end()) {
      for (int idx : it->second) {
        if (!taken[static_cast<std::size_t>(idx)]) return idx;
      }
    }
    while (fallback_cursor < train_pool.size()) {
      const int idx = train_pool[fallback_cursor++];
      if (!taken[static_cast<std::size_t>(idx)]) return idx;
    }
    return -1;
  };

  std::size_t per_side = std::min(train_pool.size(), nonmembers.size());
  if (max_targets > 0) {
    per_side = std::min(per_side, static_cast<std::size_t>(max_targets) / 2);
  }
  require(per_side > 0, "make_trajectory_targets: target budget too small");
  std::vector<MiaTarget> targets;
  for (std::size_t i = 0; i < per_side; ++i) {
    const auto& non_tr = ds.trajectories[static_cast<std::size_t>(nonmembers[i])];
    const int member_idx = next_member_for(non_tr.user);
    require(member_idx >= 0, "make_trajectory_targets: train pool exhausted");
    taken[static_cast<std::size_t>(member_idx)] = 1;
    for (bool member : {true, false}) {
      const auto& tr =
          ds.trajectories[static_cast<std::size_t>(member ? member_idx : nonmembers[i])];
      MiaTarget t;
      t.kind = MiaTarget::Kind::kTrajectory;
      t.user = tr.user;
      t.visits = tr.visits;
      t.member = member;
      targets.push_back(std::move(t));
    }
  }
  return targets;
}

// Balanced user-location pair targets: member pairs appear in the user's
// TRAIN check-ins, non-member pairs in TEST check-ins only.
inline std::vector<MiaTarget> make_pair_targets(const MobilityDataset& ds, int max_targets,
                                                std::uint64_t seed) {
  std::set<std::pair<int, int>> train_pairs, test_pairs;
  for (const auto& tr : ds.trajectories) {
    for (const auto& v : tr.visits) {
      if (tr.split == Split::kTrain) train_pairs.insert({tr.user, v.loc});
      if (tr.split == Split::kTest) test_pairs.insert({tr.user, v.loc});
    }
  }
  // TEST pairs that also occur in TRAIN are members, so they are dropped
  // from the non-member side.
  std::vector<std::pair<int, int>> members(train_pairs.begin(), train_pairs.end());
  std::vector<std::pair<int, int>> nonmembers;
  for (const auto& p : test_pairs) {
    if (!train_pairs.count(p)) nonmembers.push_back(p);
  }
  require(!members.empty() && !nonmembers.empty(),
          "make_pair_targets: need both member and non-member pairs");
  Rng rng(mix64(seed ^ 0x9a12f7ULL));
  rng.shuffle(members);
  rng.shuffle(nonmembers);
  std::size_t per_side = std::min(members.size(), nonmembers.size());
  if (max_targets > 0) per_side = std::min(per_side, static_cast<std::size_t>(max_targets) / 2);
  require(per_side > 0, "make_pair_targets: target budget too small");
  std::vector<MiaTarget> targets;
  for (std::size_t i = 0; i < per_side; ++i) {
    for (bool member : {true, false}) {
      const auto& p = member ? members[i] : nonmembers[i];
      MiaTarget t;
      t.kind = MiaTarget::Kind::kUserLocation;
      t.user = p.first;
      t.loc = p.second;
      t.member = member;
      targets.push_back(std::move(t));
    }
  }
  return targets;
}

}  // namespace poiaudit
