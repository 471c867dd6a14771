#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "poiaudit/common.hpp"
#include "poiaudit/data.hpp"
#include "poiaudit/geo.hpp"
#include "poiaudit/model.hpp"
#include "poiaudit/train.hpp"

namespace poiaudit {

// ---------------------------------------------------------------------------
// Differentially private SGD.
// ---------------------------------------------------------------------------

struct DpSgdConfig {
  double epsilon = 1.0;
  double delta = 1e-3;
  double clip_norm = 10.0;
  std::uint64_t noise_seed = 1;
};

// Gaussian-mechanism noise multiplier for (epsilon, delta)-DP.
inline double dpsgd_sigma(double epsilon, double delta) {
  require(epsilon > 0.0, "dpsgd_sigma: epsilon must be positive");
  require(delta > 0.0 && delta < 1.0, "dpsgd_sigma: delta outside (0, 1)");
  return std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

// Batch hook implementing clip-average-noise: every per-example gradient is
// clipped to clip_norm in L2, the batch mean is taken, and isotropic
// Gaussian noise with per-coordinate standard deviation sigma * C / B is
// added. Captures its own RNG so repeated runs with the same seed match.
inline StepHook make_dpsgd_hook(const DpSgdConfig& cfg) {
  const double sigma = dpsgd_sigma(cfg.epsilon, cfg.delta);
  require(cfg.clip_norm > 0.0, "dpsgd: clip_norm must be positive");
  auto rng = std::make_shared<Rng>(mix64(cfg.noise_seed ^ 0xd95e11aULL));
  const double clip = cfg.clip_norm;
  return [rng, sigma, clip](const std::vector<Eigen::VectorXd>& per_example) {
    require(!per_example.empty(), "dpsgd hook: empty batch");
    const double b = static_cast<double>(per_example.size());
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(per_example.front().size());
    Eigen::VectorXd clipped;
    for (const auto& g : per_example) {
      if (g.norm() <= clip) {
        acc += g;
        continue;
      }
      clipped = (clip / g.norm()) * g;
      // Rounding in the scale can leave the norm a few ulp above the bound;
      // rescale until the clipped norm is truly <= clip.
      for (int i = 0; i < 4 && clipped.norm() > clip; ++i) {
        clipped *= clip / clipped.norm();
      }
      acc += clipped;
    }
    acc /= b;
    const double noise_sd = sigma * clip / b;
    for (long i = 0; i < acc.size(); ++i) acc[i] += rng->normal(0.0, noise_sd);
    return acc;
  };
}

// ---------------------------------------------------------------------------
// Protected items.
// ---------------------------------------------------------------------------

enum class ProtectKind {
  kCommonLocations,    // each user's most frequent training location
  kUserLocationPairs,  // every (user, location) pair in training data
  kSequences,          // whole training location sequences
  kTrajectories        // whole training trajectories
};

inline const char* protect_kind_name(ProtectKind k) {
  switch (k) {
    case ProtectKind::kCommonLocations: return "common-locations";
    case ProtectKind::kUserLocationPairs: return "user-location-pairs";
    case ProtectKind::kSequences: return "sequences";
    case ProtectKind::kTrajectories: return "trajectories";
  }
  return "?";
}

inline ProtectKind protect_kind_from_name(const std::string& s) {
  if (s == "common-locations") return ProtectKind::kCommonLocations;
  if (s == "user-location-pairs") return ProtectKind::kUserLocationPairs;
  if (s == "sequences") return ProtectKind::kSequences;
  if (s == "trajectories") return ProtectKind::kTrajectories;
  throw ValidationError("unknown protect kind: " + s);
}

// ALL protects every resolvable item; TARGETED protects a seeded random
// fraction of them.
struct ProtectScope {
  bool all = true;
  double fraction = 0.3;
  std::uint64_t seed = 1;
};

inline ProtectScope protect_scope_from_string(const std::string& s) {
  ProtectScope scope;
  if (s == "all") return scope;
  if (s.rfind("targeted", 0) == 0) {
    scope.all = false;
    const std::size_t colon = s.find(':');
    if (colon != std::string::npos) {
      try {
        scope.fraction = std::stod(s.substr(colon + 1));
      } catch (...) {
        throw ValidationError("bad protect scope: " + s);
      }
    }
    require(scope.fraction > 0.0 && scope.fraction <= 1.0,
            "protect fraction outside (0, 1]");
    return scope;
  }
  throw ValidationError("bad protect scope: " + s + " (expected all or targeted[:frac])");
}

struct ProtectedItems {
  ProtectKind kind = ProtectKind::kCommonLocations;
  std::vector<std::pair<int, int>> pairs;  // location kinds: (user, loc)
  std::vector<int> trajectory_ids;         // sequence/trajectory kinds

  bool empty() const { return pairs.empty() && trajectory_ids.empty(); }

  bool covers(int user, int loc) const {
    for (const auto& p : pairs) {
      if (p.first == user && p.second == loc) return true;
    }
    return false;
  }
};

// Resolves the protected set against the dataset's TRAIN split.
inline ProtectedItems resolve_protected(const MobilityDataset& ds, ProtectKind kind,
                                        const ProtectScope& scope) {
  ProtectedItems items;
  items.kind = kind;
  if (kind == ProtectKind::kCommonLocations || kind == ProtectKind::kUserLocationPairs) {
    if (kind == ProtectKind::kCommonLocations) {
      std::vector<std::map<int, long>> counts(static_cast<std::size_t>(ds.num_users()));
      for (const auto& tr : ds.trajectories) {
        if (tr.split != Split::kTrain) continue;
        for (const auto& v : tr.visits) counts[static_cast<std::size_t>(tr.user)][v.loc]++;
      }
      for (int u = 0; u < ds.num_users(); ++u) {
        long best = 0;
        int loc = -1;
        for (const auto& [l, c] : counts[static_cast<std::size_t>(u)]) {
          if (c > best) {
            best = c;
            loc = l;
          }
        }
        if (loc >= 0) items.pairs.emplace_back(u, loc);
      }
    } else {
      std::set<std::pair<int, int>> seen;
      for (const auto& tr : ds.trajectories) {
        if (tr.split != Split::kTrain) continue;
        for (const auto& v : tr.visits) seen.insert({tr.user, v.loc});
      }
      items.pairs.assign(seen.begin(), seen.end());
    }
  } else {
    // Sequence protection covers every training trajectory whose location
    // sequence is selected; plain trajectory protection selects trajectory
    // instances directly.
    for (int i = 0; i < static_cast<int>(ds.trajectories.size()); ++i) {
      if (ds.trajectories[static_cast<std::size_t>(i)].split == Split::kTrain) {
        items.trajectory_ids.push_back(i);
      }
    }
  }

  if (!scope.all) {
    Rng rng(mix64(scope.seed ^ 0x7a26ece0ULL));
    auto subsample = [&](auto& vec) {
      rng.shuffle(vec);
      const std::size_t keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(scope.fraction * static_cast<double>(vec.size()))));
      vec.resize(std::min(vec.size(), keep));
      std::sort(vec.begin(), vec.end());
    };
    if (!items.pairs.empty()) subsample(items.pairs);
    if (!items.trajectory_ids.empty()) subsample(items.trajectory_ids);
  }

  if (kind == ProtectKind::kSequences && !items.trajectory_ids.empty()) {
    // Extend the selection to every training trajectory sharing a selected
    // location sequence.
    std::set<std::pair<int, std::vector<int>>> protected_seqs;
    for (int id : items.trajectory_ids) {
      const auto& tr = ds.trajectories[static_cast<std::size_t>(id)];
      std::vector<int> seq;
      for (const auto& v : tr.visits) seq.push_back(v.loc);
      protected_seqs.insert({tr.user, std::move(seq)});
    }
    std::vector<int> extended;
    for (int i = 0; i < static_cast<int>(ds.trajectories.size()); ++i) {
      const auto& tr = ds.trajectories[static_cast<std::size_t>(i)];
      if (tr.split != Split::kTrain) continue;
      std::vector<int> seq;
      for (const auto& v : tr.visits) seq.push_back(v.loc);
      if (protected_seqs.count({tr.user, seq})) extended.push_back(i);
    }
    items.trajectory_ids = std::move(extended);
  }
  return items;
}

// ---------------------------------------------------------------------------
// Two-phase selective training: phase I on redacted data, phase II a
// differentially private fine-tune on the original data.
// ---------------------------------------------------------------------------

struct TwoPhaseConfig {
  TrainConfig phase1;
  TrainConfig phase2;  // epochs 0 skips the fine-tune
  DpSgdConfig dp;

  TwoPhaseConfig() {
    phase2.epochs = 20;
    phase2.learning_rate = 1e-3;
  }
};

// Copy of ds with protected items removed from the TRAIN split: visits of
// protected (user, loc) pairs are replaced by the mask id, protected
// trajectories are dropped. mask_used reports whether any visit was masked.
inline MobilityDataset redact_dataset(const MobilityDataset& ds, const ProtectedItems& items,
                                      int mask_id, bool* mask_used = nullptr) {
  MobilityDataset out;
  out.user_labels = ds.user_labels;
  out.locations = ds.locations;
  out.meta = ds.meta;
  std::set<std::pair<int, int>> pairs(items.pairs.begin(), items.pairs.end());
  std::set<int> drop(items.trajectory_ids.begin(), items.trajectory_ids.end());
  bool used = false;
  for (int i = 0; i < static_cast<int>(ds.trajectories.size()); ++i) {
    const auto& tr = ds.trajectories[static_cast<std::size_t>(i)];
    if (tr.split == Split::kTrain && drop.count(i)) continue;
    Trajectory copy = tr;
    if (tr.split == Split::kTrain && !pairs.empty()) {
      for (auto& v : copy.visits) {
        if (pairs.count({tr.user, v.loc})) {
          v.loc = mask_id;
          used = true;
        }
      }
    }
    out.trajectories.push_back(std::move(copy));
  }
  if (mask_used) *mask_used = used;
  return out;
}

// Exhaustively scans the TRAIN split of `scanned` for occurrences of the
// protected items; used to assert redaction completeness. Trajectory-kind
// item ids refer to `reference` (the dataset the items were resolved
// against) and are matched in `scanned` by user plus location sequence.
inline long count_protected_occurrences(const MobilityDataset& scanned,
                                        const ProtectedItems& items,
                                        const MobilityDataset& reference) {
  std::set<std::pair<int, int>> pairs(items.pairs.begin(), items.pairs.end());
  std::set<std::pair<int, std::vector<int>>> seqs;
  for (int id : items.trajectory_ids) {
    const auto& tr = reference.trajectories[static_cast<std::size_t>(id)];
    std::vector<int> s;
    for (const auto& v : tr.visits) s.push_back(v.loc);
    seqs.insert({tr.user, std::move(s)});
  }
  long found = 0;
  for (const auto& tr : scanned.trajectories) {
    if (tr.split != Split::kTrain) continue;
    for (const auto& v : tr.visits) {
      if (pairs.count({tr.user, v.loc})) ++found;
    }
    if (!seqs.empty()) {
      std::vector<int> s;
      for (const auto& v : tr.visits) s.push_back(v.loc);
      if (seqs.count({tr.user, s})) ++found;
    }
  }
  return found;
}

// Phase I trains on the redacted data (with a reserved mask location when
// check-ins were masked); phase II fine-tunes on the original data under
// DP-SGD. With an empty protected set and phase2.epochs == 0 this reduces
// to ordinary training.
inline PoiModel two_phase_train(const MobilityDataset& ds, const ProtectedItems& items,
                                const ModelConfig& arch, const TwoPhaseConfig& cfg) {
  bool mask_used = false;
  const MobilityDataset redacted = redact_dataset(ds, items, ds.num_locations(), &mask_used);
  bool any_train = false;
  for (const auto& tr : redacted.trajectories) {
    if (tr.split == Split::kTrain && tr.visits.size() >= 2) {
      any_train = true;
      break;
    }
  }
  require(any_train, "two_phase_train: redaction removed all training data");

  PoiModel model(arch, ds.num_users(), ds.num_locations(), mask_used);
  train(model, redacted, cfg.phase1);
  if (cfg.phase2.epochs > 0) {
    DpSgdConfig dp = cfg.dp;
    train(model, ds, cfg.phase2, make_dpsgd_hook(dp));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Geo-perturbation of protected check-ins.
// ---------------------------------------------------------------------------

struct GeoPerturbConfig {
  double epsilon = 0.01;  // per metre
  double radius_m = 400.0;
  std::uint64_t seed = 1;
};

// Replaces each protected TRAIN check-in's POI with the POI nearest to a
// planar-Laplace-displaced point, restricted to candidates within radius_m
// of the original POI (the original always qualifies at distance zero).
inline MobilityDataset geo_perturb(const MobilityDataset& ds, const ProtectedItems& items,
                                   const GeoPerturbConfig& cfg) {
  require(cfg.epsilon > 0.0, "geo_perturb: epsilon must be positive");
  require(cfg.radius_m >= 0.0, "geo_perturb: radius must be non-negative");
  const int L = ds.num_locations();

  std::vector<std::vector<int>> candidates(static_cast<std::size_t>(L));
  for (int a = 0; a < L; ++a) {
    for (int b = 0; b < L; ++b) {
      const double d = geo::haversine_km(ds.locations[static_cast<std::size_t>(a)].lat,
                                         ds.locations[static_cast<std::size_t>(a)].lon,
                                         ds.locations[static_cast<std::size_t>(b)].lat,
                                         ds.locations[static_cast<std::size_t>(b)].lon);
      if (d * 1000.0 <= cfg.radius_m) candidates[static_cast<std::size_t>(a)].push_back(b);
    }
  }

  std::set<std::pair<int, int>> pairs(items.pairs.begin(), items.pairs.end());
  std::set<int> traj_ids(items.trajectory_ids.begin(), items.trajectory_ids.end());
  Rng rng(mix64(cfg.seed ^ 0x6e0142dULL));

  MobilityDataset out;
  out.user_labels = ds.user_labels;
  out.locations = ds.locations;
  out.meta = ds.meta;
  for (int i = 0; i < static_cast<int>(ds.trajectories.size()); ++i) {
    Trajectory copy = ds.trajectories[static_cast<std::size_t>(i)];
    if (copy.split == Split::kTrain) {
      const bool whole = traj_ids.count(i) > 0;
      for (auto& v : copy.visits) {
        if (!whole && !pairs.count({copy.user, v.loc})) continue;
        const auto& src = ds.locations[static_cast<std::size_t>(v.loc)];
        const geo::PlanarOffset off = geo::planar_laplace_sample(cfg.epsilon, rng);
        const auto [plat, plon] = geo::offset_lat_lon(src.lat, src.lon, off.dx_m, off.dy_m);
        int best = v.loc;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c : candidates[static_cast<std::size_t>(v.loc)]) {
          const double d = geo::haversine_km(plat, plon, ds.locations[static_cast<std::size_t>(c)].lat,
                                             ds.locations[static_cast<std::size_t>(c)].lon);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        v.loc = best;
      }
    }
    out.trajectories.push_back(std::move(copy));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Defense dispatch.
// ---------------------------------------------------------------------------

enum class Mechanism { kNone, kEarlyStop, kL2, kDpSgd, kTwoPhase, kGeoPerturb };

inline const char* mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::kNone: return "none";
    case Mechanism::kEarlyStop: return "early-stop";
    case Mechanism::kL2: return "l2";
    case Mechanism::kDpSgd: return "dpsgd";
    case Mechanism::kTwoPhase: return "jft";
    case Mechanism::kGeoPerturb: return "geoind";
  }
  return "?";
}

inline Mechanism mechanism_from_name(const std::string& s) {
  if (s == "none") return Mechanism::kNone;
  if (s == "early-stop") return Mechanism::kEarlyStop;
  if (s == "l2") return Mechanism::kL2;
  if (s == "dpsgd") return Mechanism::kDpSgd;
  if (s == "jft") return Mechanism::kTwoPhase;
  if (s == "geoind") return Mechanism::kGeoPerturb;
  throw ValidationError("unknown defense mechanism: " + s);
}

struct DefenseSpec {
  std::string id = "defense";
  Mechanism mechanism = Mechanism::kNone;
  double l2_weight_decay = 1e-2;
  int early_stop_patience = 5;
  DpSgdConfig dp;
  GeoPerturbConfig geo;
  TwoPhaseConfig two_phase;
  ProtectKind protect_kind = ProtectKind::kCommonLocations;
  ProtectScope scope;
};

// Trains a defended model per spec.mechanism. Selective mechanisms resolve
// their protected set against ds; blanket mechanisms ignore it.
inline PoiModel train_defended(const MobilityDataset& ds, const ModelConfig& arch,
                               const TrainConfig& base, const DefenseSpec& spec,
                               ProtectedItems* resolved = nullptr) {
  ProtectedItems items;
  if (spec.mechanism == Mechanism::kTwoPhase || spec.mechanism == Mechanism::kGeoPerturb) {
    items = resolve_protected(ds, spec.protect_kind, spec.scope);
  }
  if (resolved) *resolved = items;

  switch (spec.mechanism) {
    case Mechanism::kNone: {
      PoiModel m(arch, ds.num_users(), ds.num_locations());
      train(m, ds, base);
      return m;
    }
    case Mechanism::kEarlyStop: {
      TrainConfig cfg = base;
      cfg.early_stop_patience = spec.early_stop_patience;
      cfg.eval_every = std::max(1, cfg.eval_every);
      PoiModel m(arch, ds.num_users(), ds.num_locations());
      train(m, ds, cfg);
      return m;
    }
    case Mechanism::kL2: {
      TrainConfig cfg = base;
      cfg.weight_decay = spec.l2_weight_decay;
      PoiModel m(arch, ds.num_users(), ds.num_locations());
      train(m, ds, cfg);
      return m;
    }
    case Mechanism::kDpSgd: {
      PoiModel m(arch, ds.num_users(), ds.num_locations());
      train(m, ds, base, make_dpsgd_hook(spec.dp));
      return m;
    }
    case Mechanism::kTwoPhase: {
      TwoPhaseConfig cfg = spec.two_phase;
      cfg.phase1 = base;
      return two_phase_train(ds, items, arch, cfg);
    }
    case Mechanism::kGeoPerturb: {
      const MobilityDataset perturbed = geo_perturb(ds, items, spec.geo);
      PoiModel m(arch, perturbed.num_users(), perturbed.num_locations());
      train(m, perturbed, base);
      return m;
    }
  }
  throw ValidationError("unhandled defense mechanism");
}

struct TradeoffRecord {
  std::string defense_id;
  std::string attack_id;
  double utility_top1 = 0.0;
  double utility_top10 = 0.0;
  std::string metric_name;
  double metric_all = 0.0;
  double metric_targeted = 0.0;  // restricted to protected items; 0 when none
};

}  // namespace poiaudit
