#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poiaudit/common.hpp"
#include "poiaudit/data.hpp"
#include "poiaudit/defense.hpp"
#include "poiaudit/extraction.hpp"
#include "poiaudit/membership.hpp"
#include "poiaudit/metrics.hpp"
#include "poiaudit/model.hpp"
#include "poiaudit/parallel.hpp"
#include "poiaudit/train.hpp"

namespace poiaudit {

// ---------------------------------------------------------------------------
// Config serialization. Every field has a default so partial configs load.
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const SplitRatios& c) {
  j = {{"train", c.train}, {"valid", c.valid}, {"test", c.test}};
}
inline void from_json(const nlohmann::json& j, SplitRatios& c) {
  SplitRatios d;
  c.train = j.value("train", d.train);
  c.valid = j.value("valid", d.valid);
  c.test = j.value("test", d.test);
}

inline void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  j = {{"min_occurrence", c.min_occurrence},
       {"segment_hours", c.segment_hours},
       {"min_traj_len", c.min_traj_len},
       {"split", c.split},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, PreprocessConfig& c) {
  PreprocessConfig d;
  c.min_occurrence = j.value("min_occurrence", d.min_occurrence);
  c.segment_hours = j.value("segment_hours", d.segment_hours);
  c.min_traj_len = j.value("min_traj_len", d.min_traj_len);
  c.split = j.value("split", d.split);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"n_users", c.n_users},
       {"n_locations", c.n_locations},
       {"n_days", c.n_days},
       {"zipf_exponent", c.zipf_exponent},
       {"p_common", c.p_common},
       {"geometric_p", c.geometric_p},
       {"min_traj_len", c.min_traj_len},
       {"beta_a", c.beta_a},
       {"beta_b", c.beta_b},
       {"activity_min", c.activity_min},
       {"activity_max", c.activity_max},
       {"mainstream_max", c.mainstream_max},
       {"p_explore", c.p_explore},
       {"center_lat", c.center_lat},
       {"center_lon", c.center_lon},
       {"extent_deg", c.extent_deg},
       {"split", c.split},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  SynthConfig d;
  c.n_users = j.value("n_users", d.n_users);
  c.n_locations = j.value("n_locations", d.n_locations);
  c.n_days = j.value("n_days", d.n_days);
  c.zipf_exponent = j.value("zipf_exponent", d.zipf_exponent);
  c.p_common = j.value("p_common", d.p_common);
  c.geometric_p = j.value("geometric_p", d.geometric_p);
  c.min_traj_len = j.value("min_traj_len", d.min_traj_len);
  c.beta_a = j.value("beta_a", d.beta_a);
  c.beta_b = j.value("beta_b", d.beta_b);
  c.activity_min = j.value("activity_min", d.activity_min);
  c.activity_max = j.value("activity_max", d.activity_max);
  c.mainstream_max = j.value("mainstream_max", d.mainstream_max);
  c.p_explore = j.value("p_explore", d.p_explore);
  c.center_lat = j.value("center_lat", d.center_lat);
  c.center_lon = j.value("center_lon", d.center_lon);
  c.extent_deg = j.value("extent_deg", d.extent_deg);
  c.split = j.value("split", d.split);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"user_embed_dim", c.user_embed_dim},
       {"loc_embed_dim", c.loc_embed_dim},
       {"hidden_dim", c.hidden_dim},
       {"time_encoding", time_encoding_name(c.time_encoding)},
       {"sinusoidal_k", c.sinusoidal_k},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.user_embed_dim = j.value("user_embed_dim", d.user_embed_dim);
  c.loc_embed_dim = j.value("loc_embed_dim", d.loc_embed_dim);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.time_encoding = time_encoding_from_name(
      j.value("time_encoding", std::string(time_encoding_name(d.time_encoding))));
  c.sinusoidal_k = j.value("sinusoidal_k", d.sinusoidal_k);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"optimizer", optimizer_name(c.optimizer)},
       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"early_stop_patience", c.early_stop_patience ? *c.early_stop_patience : -1},
       {"eval_every", c.eval_every},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.optimizer =
      optimizer_from_name(j.value("optimizer", std::string(optimizer_name(d.optimizer))));
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.momentum = j.value("momentum", d.momentum);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  const int patience = j.value("early_stop_patience", -1);
  c.early_stop_patience = patience >= 0 ? std::optional<int>(patience) : std::nullopt;
  c.eval_every = j.value("eval_every", d.eval_every);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const CommonLocationConfig& c) {
  j = {{"query_budget", c.query_budget},
       {"query_time", c.query_time},
       {"top_k", c.top_k},
       {"voting", voting_name(c.voting)},
       {"domain", c.domain == VoteDomain::kLogits ? "logits" : "probs"},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, CommonLocationConfig& c) {
  CommonLocationConfig d;
  c.query_budget = j.value("query_budget", d.query_budget);
  c.query_time = j.value("query_time", d.query_time);
  c.top_k = j.value("top_k", d.top_k);
  c.voting = voting_from_name(j.value("voting", std::string(voting_name(d.voting))));
  c.domain = j.value("domain", std::string("logits")) == "probs" ? VoteDomain::kProbs
                                                                 : VoteDomain::kLogits;
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const TrajectoryExtractConfig& c) {
  j = {{"beam_width", c.beam_width},
       {"target_length", c.target_length},
       {"query_time", c.query_time},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, TrajectoryExtractConfig& c) {
  TrajectoryExtractConfig d;
  c.beam_width = j.value("beam_width", d.beam_width);
  c.target_length = j.value("target_length", d.target_length);
  c.query_time = j.value("query_time", d.query_time);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const SpaTemConfig& c) {
  j = {{"n_t", c.n_t}, {"n_l", c.n_l}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, SpaTemConfig& c) {
  SpaTemConfig d;
  c.n_t = j.value("n_t", d.n_t);
  c.n_l = j.value("n_l", d.n_l);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const MiaConfig& c) {
  j = {{"n_pairs", c.n_pairs},
       {"subsample", c.subsample},
       {"carrier_time", c.carrier_time},
       {"transform", c.transform == ScoreTransform::kLogit ? "logit" : "identity"},
       {"stq", c.stq},
       {"shadow_train", c.shadow_train},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, MiaConfig& c) {
  MiaConfig d;
  c.n_pairs = j.value("n_pairs", d.n_pairs);
  c.subsample = j.value("subsample", d.subsample);
  c.carrier_time = j.value("carrier_time", d.carrier_time);
  c.transform = j.value("transform", std::string("logit")) == "identity"
                    ? ScoreTransform::kIdentity
                    : ScoreTransform::kLogit;
  c.stq = j.value("stq", d.stq);
  c.shadow_train = j.value("shadow_train", d.shadow_train);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const DpSgdConfig& c) {
  j = {{"epsilon", c.epsilon},
       {"delta", c.delta},
       {"clip_norm", c.clip_norm},
       {"noise_seed", c.noise_seed}};
}
inline void from_json(const nlohmann::json& j, DpSgdConfig& c) {
  DpSgdConfig d;
  c.epsilon = j.value("epsilon", d.epsilon);
  c.delta = j.value("delta", d.delta);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.noise_seed = j.value("noise_seed", d.noise_seed);
}

inline void to_json(nlohmann::json& j, const GeoPerturbConfig& c) {
  j = {{"epsilon", c.epsilon}, {"radius_m", c.radius_m}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, GeoPerturbConfig& c) {
  GeoPerturbConfig d;
  c.epsilon = j.value("epsilon", d.epsilon);
  c.radius_m = j.value("radius_m", d.radius_m);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const ProtectScope& c) {
  j = {{"all", c.all}, {"fraction", c.fraction}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, ProtectScope& c) {
  ProtectScope d;
  c.all = j.value("all", d.all);
  c.fraction = j.value("fraction", d.fraction);
  c.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const TwoPhaseConfig& c) {
  j = {{"phase1", c.phase1}, {"phase2", c.phase2}, {"dp", c.dp}};
}
inline void from_json(const nlohmann::json& j, TwoPhaseConfig& c) {
  TwoPhaseConfig d;
  c.phase1 = j.value("phase1", d.phase1);
  c.phase2 = j.value("phase2", d.phase2);
  c.dp = j.value("dp", d.dp);
}

inline void to_json(nlohmann::json& j, const DefenseSpec& c) {
  j = {{"id", c.id},
       {"mechanism", mechanism_name(c.mechanism)},
       {"l2_weight_decay", c.l2_weight_decay},
       {"early_stop_patience", c.early_stop_patience},
       {"dp", c.dp},
       {"geo", c.geo},
       {"two_phase", c.two_phase},
       {"protect_kind", protect_kind_name(c.protect_kind)},
       {"scope", c.scope}};
}
inline void from_json(const nlohmann::json& j, DefenseSpec& c) {
  DefenseSpec d;
  c.id = j.value("id", d.id);
  c.mechanism = mechanism_from_name(j.value("mechanism", std::string("none")));
  c.l2_weight_decay = j.value("l2_weight_decay", d.l2_weight_decay);
  c.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
  c.dp = j.value("dp", d.dp);
  c.geo = j.value("geo", d.geo);
  c.two_phase = j.value("two_phase", d.two_phase);
  c.protect_kind = protect_kind_from_name(
      j.value("protect_kind", std::string(protect_kind_name(d.protect_kind))));
  c.scope = j.value("scope", d.scope);
}

struct ExperimentConfig {
  std::string name = "experiment";
  int n_seeds = 5;
  std::uint64_t base_seed = 1;
  std::string raw_path;  // when set, load + preprocess instead of synthesis
  PreprocessConfig preprocess;
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  bool locextract = true;
  CommonLocationConfig locextract_cfg;
  bool trajextract = true;
  TrajectoryExtractConfig trajextract_cfg;
  bool locmia = false;
  MiaConfig locmia_cfg;
  int locmia_targets = 100;
  bool trajmia = false;
  MiaConfig trajmia_cfg;
  int trajmia_targets = 200;
  std::vector<DefenseSpec> defenses;
  int n_bins = 10;
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"name", c.name},
       {"n_seeds", c.n_seeds},
       {"base_seed", c.base_seed},
       {"raw_path", c.raw_path},
       {"preprocess", c.preprocess},
       {"synth", c.synth},
       {"model", c.model},
       {"train", c.train},
       {"locextract", c.locextract},
       {"locextract_cfg", c.locextract_cfg},
       {"trajextract", c.trajextract},
       {"trajextract_cfg", c.trajextract_cfg},
       {"locmia", c.locmia},
       {"locmia_cfg", c.locmia_cfg},
       {"locmia_targets", c.locmia_targets},
       {"trajmia", c.trajmia},
       {"trajmia_cfg", c.trajmia_cfg},
       {"trajmia_targets", c.trajmia_targets},
       {"defenses", c.defenses},
       {"n_bins", c.n_bins}};
}
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  ExperimentConfig d;
  c.name = j.value("name", d.name);
  c.n_seeds = j.value("n_seeds", d.n_seeds);
  c.base_seed = j.value("base_seed", d.base_seed);
  c.raw_path = j.value("raw_path", d.raw_path);
  c.preprocess = j.value("preprocess", d.preprocess);
  c.synth = j.value("synth", d.synth);
  c.model = j.value("model", d.model);
  c.train = j.value("train", d.train);
  c.locextract = j.value("locextract", d.locextract);
  c.locextract_cfg = j.value("locextract_cfg", d.locextract_cfg);
  c.trajextract = j.value("trajextract", d.trajextract);
  c.trajextract_cfg = j.value("trajextract_cfg", d.trajextract_cfg);
  c.locmia = j.value("locmia", d.locmia);
  c.locmia_cfg = j.value("locmia_cfg", d.locmia_cfg);
  c.locmia_targets = j.value("locmia_targets", d.locmia_targets);
  c.trajmia = j.value("trajmia", d.trajmia);
  c.trajmia_cfg = j.value("trajmia_cfg", d.trajmia_cfg);
  c.trajmia_targets = j.value("trajmia_targets", d.trajmia_targets);
  c.defenses = j.value("defenses", d.defenses);
  c.n_bins = j.value("n_bins", d.n_bins);
}

// Laptop-scale preset: small synthetic city, compact model, full attack
// surface exercised in minutes on one core.
inline ExperimentConfig desk_preset() {
  ExperimentConfig cfg;
  cfg.name = "desk";
  cfg.n_seeds = 5;
  cfg.synth.n_users = 200;
  cfg.synth.n_locations = 500;
  cfg.synth.n_days = 15;
  cfg.model.user_embed_dim = 16;
  cfg.model.loc_embed_dim = 16;
  cfg.model.hidden_dim = 32;
  cfg.train.epochs = 200;
  cfg.train.eval_every = 10;
  cfg.locmia_cfg.n_pairs = 16;
  cfg.trajmia_cfg.n_pairs = 16;
  cfg.locmia_cfg.shadow_train.epochs = 50;
  cfg.trajmia_cfg.shadow_train.epochs = 50;
  // Shadows compress the victim's 200-epoch schedule into 50 epochs; the
  // larger step size brings their final memorization level in line with the
  // victim's, which the likelihood-ratio calibration relies on.
  cfg.locmia_cfg.shadow_train.learning_rate = 4e-3;
  cfg.trajmia_cfg.shadow_train.learning_rate = 4e-3;
  return cfg;
}

// ---------------------------------------------------------------------------
// Artifact helpers.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string config_hash(const nlohmann::json& j) { return hex64(fnv1a64(j.dump())); }

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  save_text_atomic(path, out.str());
}

inline std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pipeline stages.
// ---------------------------------------------------------------------------

struct SeedReport {
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  std::vector<TradeoffRecord> tradeoffs;
};

struct PipelineResult {
  std::vector<SeedReport> seeds;
  std::map<std::string, double> mean_metrics;
};

namespace detail {

// Loads the cached dataset when its recorded hash matches, otherwise builds
// and saves it.
inline MobilityDataset stage_dataset(const ExperimentConfig& cfg, std::uint64_t seed,
                                     const std::filesystem::path& dir) {
  nlohmann::json key;
  if (!cfg.raw_path.empty()) {
    key = {{"raw_path", cfg.raw_path}, {"preprocess", cfg.preprocess}, {"seed", seed}};
  } else {
    key = {{"synth", cfg.synth}, {"seed", seed}};
  }
  const std::string hash = config_hash(key);
  const auto path = dir / "dataset.json";
  if (std::filesystem::exists(path)) {
    try {
      MobilityDataset ds = load_dataset(path);
      if (ds.meta.count("config_hash") && ds.meta.at("config_hash") == hash) return ds;
    } catch (const std::exception&) {
      // fall through to rebuild
    }
  }
  MobilityDataset ds;
  if (!cfg.raw_path.empty()) {
    PreprocessConfig pc = cfg.preprocess;
    pc.seed = seed;
    ds = preprocess(load_checkins(cfg.raw_path), pc);
  } else {
    SynthConfig sc = cfg.synth;
    sc.seed = seed;
    ds = synth_generate(sc).dataset;
  }
  ds.meta["config_hash"] = hash;
  save_dataset(path, ds);
  return ds;
}

struct VictimArtifact {
  PoiModel model;
  std::vector<EpochRecord> history;
};

inline VictimArtifact stage_victim(const ExperimentConfig& cfg, const MobilityDataset& ds,
                                   std::uint64_t seed, const std::filesystem::path& dir) {
  ModelConfig mc = cfg.model;
  mc.seed = mix64(seed ^ 0xc71ULL);
  TrainConfig tc = cfg.train;
  tc.seed = mix64(seed ^ 0x7a112ULL);
  nlohmann::json key = {{"model", mc}, {"train", tc},
                        {"dataset_hash", ds.meta.count("config_hash")
                                             ? ds.meta.at("config_hash")
                                             : std::string("unknown")}};
  const std::string hash = config_hash(key);
  const auto path = dir / "victim.json";
  if (std::filesystem::exists(path)) {
    try {
      const nlohmann::json j = nlohmann::json::parse(read_text(path));
      if (j.value("config_hash", "") == hash) {
        VictimArtifact art{PoiModel::from_json(j.at("model")), {}};
        for (const auto& h : j.value("history", nlohmann::json::array())) {
          art.history.push_back(EpochRecord{h.at("epoch").get<int>(),
                                            h.at("train_loss").get<double>(),
                                            h.at("val_top1").get<double>(),
                                            h.at("val_top10").get<double>()});
        }
        return art;
      }
    } catch (const std::exception&) {
    }
  }
  PoiModel model(mc, ds.num_users(), ds.num_locations());
  const TrainResult res = train(model, ds, tc);
  nlohmann::json j;
  j["kind"] = "victim_artifact";
  j["config_hash"] = hash;
  j["model"] = model.to_json();
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : res.history) {
    hist.push_back({{"epoch", h.epoch},
                    {"train_loss", h.train_loss},
                    {"val_top1", h.val_top1},
                    {"val_top10", h.val_top10}});
  }
  j["history"] = std::move(hist);
  save_text_atomic(path, j.dump(1));
  return VictimArtifact{std::move(model), res.history};
}

}  // namespace detail

// Runs extraction attacks against a model over all users with defined
// ground truth; returns (asr, per-user predictions).
template <QueryableModel M>
std::pair<double, std::vector<std::vector<int>>> run_common_location_attack(
    const M& model, const MobilityDataset& ds, const CommonLocationConfig& cfg) {
  const std::vector<int> truth = empirical_common_locations(ds, Split::kTrain);
  std::vector<std::vector<int>> preds(truth.size());
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (truth[u] < 0) continue;
    preds[u] = extract_common_location(model, static_cast<int>(u), cfg);
  }
  return {common_location_asr(preds, truth), std::move(preds)};
}

template <QueryableModel M>
std::pair<double, std::vector<ScoredSequence>> run_trajectory_extract_attack(
    const M& model, const MobilityDataset& ds, const TrajectoryExtractConfig& cfg) {
  const std::vector<int> truth = empirical_common_locations(ds, Split::kTrain);
  std::vector<ScoredSequence> top;
  long hits = 0, total = 0;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (truth[u] < 0) continue;
    const auto beam = extract_trajectory(model, static_cast<int>(u), truth[u], cfg);
    if (beam.empty()) continue;
    ++total;
    top.push_back(beam.front());
    if (sequence_in_split(ds, static_cast<int>(u), beam.front().locs, Split::kTrain)) ++hits;
  }
  require(total > 0, "trajectory extraction: no users with ground truth");
  return {static_cast<double>(hits) / static_cast<double>(total), std::move(top)};
}

struct MiaRun {
  std::vector<MiaTarget> targets;
  std::vector<LiraResult> results;
  ScoreEval eval;
};

template <QueryableModel V>
MiaRun run_mia(const V& victim, const MobilityDataset& shadow_data,
               std::vector<MiaTarget> targets, const MiaConfig& cfg, ThreadPool& threads) {
  const ShadowPlan plan =
      plan_shadows(shadow_data, targets, cfg.n_pairs, cfg.seed, cfg.subsample, cfg.carrier_time);
  ModelConfig arch;  // same architecture as the victim when it is a PoiModel
  if constexpr (std::is_same_v<V, PoiModel>) {
    arch = victim.config();
  }
  const std::vector<PoiModel> shadows =
      train_shadow_ensemble(shadow_data, plan, arch, cfg.shadow_train, threads);
  MiaRun run;
  run.results = lira_attack(victim, targets, shadows, plan, cfg);
  run.targets = std::move(targets);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < run.targets.size(); ++i) {
    scores.push_back(run.results[i].log_lambda);
    labels.push_back(run.targets[i].member ? 1 : 0);
  }
  run.eval = evaluate_scores(scores, labels);
  return run;
}

// ---------------------------------------------------------------------------
// Full experiment.
// ---------------------------------------------------------------------------

inline SeedReport run_seed(const ExperimentConfig& cfg, int seed_index,
                           const std::filesystem::path& out_dir, ThreadPool& threads) {
  const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(seed_index);
  const auto dir = out_dir / ("seed_" + std::to_string(seed_index));
  std::filesystem::create_directories(dir);

  SeedReport report;
  report.seed = seed;

  const MobilityDataset ds = detail::stage_dataset(cfg, seed, dir);
  const DatasetStats stats = dataset_stats(ds);
  report.metrics["data_users"] = stats.users;
  report.metrics["data_pois"] = stats.pois;
  report.metrics["data_checkins"] = static_cast<double>(stats.checkins);
  report.metrics["data_trajectories"] = static_cast<double>(stats.trajectories);
  report.metrics["data_avg_traj_len"] = stats.avg_traj_len;

  detail::VictimArtifact victim = detail::stage_victim(cfg, ds, seed, dir);
  {
    const auto acc = evaluate_topk(victim.model, ds, Split::kTest, {1, 10});
    report.metrics["victim_test_top1"] = acc.at(1);
    report.metrics["victim_test_top10"] = acc.at(10);
    if (!victim.history.empty()) {
      report.metrics["victim_train_loss"] = victim.history.back().train_loss;
    }
  }

  nlohmann::json attacks_json;
  if (cfg.locextract) {
    CommonLocationConfig ac = cfg.locextract_cfg;
    ac.seed = mix64(seed ^ 0x10cea7ULL);
    const auto [asr, preds] = run_common_location_attack(victim.model, ds, ac);
    report.metrics["locextract_asr"] = asr;
    nlohmann::json per_user = nlohmann::json::array();
    for (const auto& p : preds) per_user.push_back(p);
    attacks_json["locextract"] = {{"asr", asr}, {"config", ac}, {"predictions", per_user}};
  }
  if (cfg.trajextract) {
    TrajectoryExtractConfig tc = cfg.trajextract_cfg;
    tc.seed = mix64(seed ^ 0x77a6ULL);
    const auto [asr, top] = run_trajectory_extract_attack(victim.model, ds, tc);
    report.metrics["trajextract_asr"] = asr;
    nlohmann::json seqs = nlohmann::json::array();
    for (const auto& s : top) {
      seqs.push_back({{"locs", s.locs}, {"log_perplexity", s.log_perplexity}});
    }
    attacks_json["trajextract"] = {{"asr", asr}, {"config", tc}, {"sequences", seqs}};
  }
  auto mia_stage = [&](const char* label, bool enabled, MiaConfig mia_cfg, int n_targets,
                       MiaTarget::Kind kind) {
    if (!enabled) return;
    mia_cfg.seed = mix64(seed ^ fnv1a64(label));
    std::vector<MiaTarget> targets =
        kind == MiaTarget::Kind::kTrajectory
            ? make_trajectory_targets(ds, n_targets, mia_cfg.seed)
            : make_pair_targets(ds, n_targets, mia_cfg.seed);
    const MiaRun run = run_mia(victim.model, ds, std::move(targets), mia_cfg, threads);
    const std::string prefix = label;
    report.metrics[prefix + "_auc"] = run.eval.auc;
    report.metrics[prefix + "_acc"] = run.eval.best_accuracy;
    report.metrics[prefix + "_tpr_at_0.1fpr"] = run.eval.tpr_at_fpr(0.1);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < run.targets.size(); ++i) {
      rows.push_back({std::to_string(run.targets[i].user),
                      std::to_string(run.targets[i].loc),
                      run.targets[i].member ? "1" : "0", detail::fmt(run.results[i].conf_obs),
                      detail::fmt(run.results[i].log_lambda)});
    }
    detail::write_csv(dir / (prefix + "_targets.csv"),
                      {"user", "loc", "member", "confidence", "log_lambda"}, rows);
    attacks_json[prefix] = {{"auc", run.eval.auc},
                            {"acc", run.eval.best_accuracy},
                            {"tpr_at_0.1fpr", run.eval.tpr_at_fpr(0.1)},
                            {"config", mia_cfg}};
  };
  mia_stage("locmia", cfg.locmia, cfg.locmia_cfg, cfg.locmia_targets,
            MiaTarget::Kind::kUserLocation);
  mia_stage("trajmia", cfg.trajmia, cfg.trajmia_cfg, cfg.trajmia_targets,
            MiaTarget::Kind::kTrajectory);
  save_text_atomic(dir / "attacks.json", attacks_json.dump(1));

  // Defenses: utility plus the extraction attack surface on ALL users and
  // on users owning protected items.
  for (const DefenseSpec& spec : cfg.defenses) {
    DefenseSpec ds_spec = spec;
    ds_spec.dp.noise_seed = mix64(seed ^ fnv1a64(spec.id));
    ds_spec.geo.seed = mix64(seed ^ fnv1a64(spec.id) ^ 0x9e0ULL);
    ProtectedItems items;
    TrainConfig base = cfg.train;
    base.seed = mix64(seed ^ fnv1a64(spec.id) ^ 0x7a11ULL);
    ModelConfig arch = cfg.model;
    arch.seed = mix64(seed ^ fnv1a64(spec.id) ^ 0xa2c4ULL);
    PoiModel defended = train_defended(ds, arch, base, ds_spec, &items);
    defended.save(dir / ("defended_" + spec.id + ".json"));

    TradeoffRecord rec;
    rec.defense_id = spec.id;
    rec.attack_id = "locextract";
    rec.metric_name = "asr";
    const auto acc = evaluate_topk(defended, ds, Split::kTest, {1, 10});
    rec.utility_top1 = acc.at(1);
    rec.utility_top10 = acc.at(10);

    CommonLocationConfig ac = cfg.locextract_cfg;
    ac.seed = mix64(seed ^ 0x10cea7ULL);
    const std::vector<int> truth = empirical_common_locations(ds, Split::kTrain);
    std::vector<std::vector<int>> preds(truth.size());
    long hits_all = 0, n_all = 0, hits_t = 0, n_t = 0;
    for (std::size_t u = 0; u < truth.size(); ++u) {
      if (truth[u] < 0) continue;
      preds[u] = extract_common_location(defended, static_cast<int>(u), ac);
      bool hit = false;
      for (int p : preds[u]) hit = hit || p == truth[u];
      ++n_all;
      hits_all += hit;
      const bool targeted = items.covers(static_cast<int>(u), truth[u]);
      if (targeted) {
        ++n_t;
        hits_t += hit;
      }
    }
    rec.metric_all = n_all > 0 ? static_cast<double>(hits_all) / n_all : 0.0;
    rec.metric_targeted = n_t > 0 ? static_cast<double>(hits_t) / n_t : 0.0;
    report.tradeoffs.push_back(rec);
    report.metrics["defense_" + spec.id + "_top10"] = rec.utility_top10;
    report.metrics["defense_" + spec.id + "_locextract_asr"] = rec.metric_all;
  }

  // Analysis artifacts.
  const AggregateStats agg = compute_aggregate_stats(ds);
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t u = 0; u < agg.users.size(); ++u) {
      rows.push_back({std::to_string(u), std::to_string(agg.users[u].checkins),
                      std::to_string(agg.users[u].unique_pois),
                      std::to_string(agg.users[u].trajectories),
                      detail::fmt(agg.users[u].avg_traj_len)});
    }
    detail::write_csv(dir / "user_stats.csv",
                      {"user", "checkins", "unique_pois", "trajectories", "avg_traj_len"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t l = 0; l < agg.locations.size(); ++l) {
      rows.push_back({std::to_string(l), std::to_string(agg.locations[l].visiting_users),
                      std::to_string(agg.locations[l].nearby_checkins),
                      std::to_string(agg.locations[l].sharing_trajectories),
                      detail::fmt(agg.locations[l].mean_visit_time)});
    }
    detail::write_csv(
        dir / "location_stats.csv",
        {"location", "visiting_users", "nearby_checkins", "sharing_trajectories", "mean_time"},
        rows);
  }

  nlohmann::json rj;
  rj["seed"] = seed;
  rj["metrics"] = report.metrics;
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : report.tradeoffs) {
    tj.push_back({{"defense", t.defense_id},
                  {"attack", t.attack_id},
                  {"utility_top1", t.utility_top1},
                  {"utility_top10", t.utility_top10},
                  {"metric", t.metric_name},
                  {"all", t.metric_all},
                  {"targeted", t.metric_targeted}});
  }
  rj["tradeoffs"] = std::move(tj);
  save_text_atomic(dir / "report.json", rj.dump(1));
  return report;
}

inline PipelineResult run_pipeline(const ExperimentConfig& cfg,
                                   const std::filesystem::path& out_dir, ThreadPool& threads) {
  require(cfg.n_seeds >= 1, "n_seeds must be at least 1");
  std::filesystem::create_directories(out_dir);
  {
    nlohmann::json cj = cfg;
    save_text_atomic(out_dir / "experiment.json", cj.dump(1));
  }
  PipelineResult result;
  for (int k = 0; k < cfg.n_seeds; ++k) {
    result.seeds.push_back(run_seed(cfg, k, out_dir, threads));
  }
  std::map<std::string, std::pair<double, long>> acc;
  for (const auto& s : result.seeds) {
    for (const auto& [k, v] : s.metrics) {
      acc[k].first += v;
      acc[k].second += 1;
    }
  }
  for (const auto& [k, pv] : acc) {
    result.mean_metrics[k] = pv.first / static_cast<double>(pv.second);
  }
  nlohmann::json sj;
  sj["name"] = cfg.name;
  sj["n_seeds"] = cfg.n_seeds;
  sj["mean_metrics"] = result.mean_metrics;
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& s : result.seeds) per_seed.push_back({{"seed", s.seed}, {"metrics", s.metrics}});
  sj["seeds"] = std::move(per_seed);
  save_text_atomic(out_dir / "summary.json", sj.dump(1));

  std::vector<std::vector<std::string>> rows;
  for (const auto& [k, v] : result.mean_metrics) rows.push_back({k, detail::fmt(v)});
  detail::write_csv(out_dir / "summary.csv", {"metric", "mean"}, rows);
  return result;
}

// ---------------------------------------------------------------------------
// Ablation sweeps.
// ---------------------------------------------------------------------------

inline ExperimentConfig apply_axis(ExperimentConfig cfg, const std::string& axis,
                                   const std::string& value) {
  auto as_int = [&]() {
    try {
      return std::stoi(value);
    } catch (...) {
      throw ValidationError("sweep value for " + axis + " must be an integer: " + value);
    }
  };
  auto as_double = [&]() {
    try {
      return std::stod(value);
    } catch (...) {
      throw ValidationError("sweep value for " + axis + " must be a number: " + value);
    }
  };
  if (axis == "query_budget") {
    cfg.locextract_cfg.query_budget = as_int();
  } else if (axis == "query_timestamp") {
    const double t = as_double();
    cfg.locextract_cfg.query_time = t;
    cfg.trajextract_cfg.query_time = t;
  } else if (axis == "voting") {
    cfg.locextract_cfg.voting = voting_from_name(value);
  } else if (axis == "beam_width") {
    cfg.trajextract_cfg.beam_width = as_int();
  } else if (axis == "traj_length") {
    cfg.trajextract_cfg.target_length = as_int();
  } else if (axis == "shadow_count") {
    cfg.locmia_cfg.n_pairs = as_int();
    cfg.trajmia_cfg.n_pairs = as_int();
  } else if (axis == "nt") {
    cfg.locmia_cfg.stq.n_t = as_int();
  } else if (axis == "nl") {
    cfg.locmia_cfg.stq.n_l = as_int();
  } else if (axis == "epochs") {
    cfg.train.epochs = as_int();
  } else {
    throw ValidationError("unknown sweep axis: " + axis);
  }
  return cfg;
}

inline nlohmann::json ablation_sweep(const ExperimentConfig& base, const std::string& axis,
                                     const std::vector<std::string>& values,
                                     const std::filesystem::path& out_dir, ThreadPool& threads) {
  require(!values.empty(), "sweep needs at least one value");
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::vector<std::string>> csv_rows;
  std::set<std::string> metric_keys;
  std::vector<PipelineResult> results;
  for (const auto& v : values) {
    const ExperimentConfig cfg = apply_axis(base, axis, v);
    const auto dir = out_dir / ("sweep_" + axis) / v;
    results.push_back(run_pipeline(cfg, dir, threads));
    for (const auto& [k, _] : results.back().mean_metrics) metric_keys.insert(k);
  }
  std::vector<std::string> header{"axis", "value"};
  for (const auto& k : metric_keys) header.push_back(k);
  for (std::size_t i = 0; i < values.size(); ++i) {
    nlohmann::json row;
    row["axis"] = axis;
    row["value"] = values[i];
    std::vector<std::string> csv_row{axis, values[i]};
    for (const auto& k : metric_keys) {
      const auto it = results[i].mean_metrics.find(k);
      if (it != results[i].mean_metrics.end()) {
        row[k] = it->second;
        csv_row.push_back(detail::fmt(it->second));
      } else {
        csv_row.push_back("");
      }
    }
    rows.push_back(std::move(row));
    csv_rows.push_back(std::move(csv_row));
  }
  detail::write_csv(out_dir / ("sweep_" + axis + ".csv"), header, csv_rows);
  nlohmann::json out;
  out["axis"] = axis;
  out["rows"] = rows;
  save_text_atomic(out_dir / ("sweep_" + axis + ".json"), out.dump(1));
  return out;
}

}  // namespace poiaudit
