// Acceptance gate for the privacy auditing toolkit. Each numbered check
// exercises the library end to end at a fixed tolerance and prints exactly
// one PASS/FAIL line; the process exits 0 only when every requested check
// passes.
//
//   acceptance [--criterion N] [--cache-dir PATH]
//
// Desk-scale artifacts (datasets, victims, shadow ensembles) are cached on
// disk under the cache dir so repeated runs and later checks reuse them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "poiaudit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace poiaudit;

namespace {

fs::path g_cache = "acceptance_cache";

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      note << " [failed: " << what << "]";
    }
  }
};

std::string fmt3(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared desk-scale artifacts.
// ---------------------------------------------------------------------------

MobilityDataset desk_dataset(int seed_index, const std::string& tag = "seed") {
  const ExperimentConfig cfg = desk_preset();
  const fs::path dir = g_cache / ("dataset_" + tag + std::to_string(seed_index));
  fs::create_directories(dir);
  return detail::stage_dataset(cfg, cfg.base_seed + static_cast<std::uint64_t>(seed_index), dir);
}

detail::VictimArtifact desk_victim(const MobilityDataset& ds, int seed_index, int epochs,
                                   const std::string& tag = "seed") {
  ExperimentConfig cfg = desk_preset();
  cfg.train.epochs = epochs;
  const fs::path dir =
      g_cache / ("victim_e" + std::to_string(epochs) + "_" + tag + std::to_string(seed_index));
  fs::create_directories(dir);
  return detail::stage_victim(cfg, ds, cfg.base_seed + static_cast<std::uint64_t>(seed_index),
                              dir);
}

// Generic hash-checked single-model cache for models outside stage_victim
// (e.g. defended training).
PoiModel cached_model(const fs::path& dir, const std::string& hash,
                      const std::function<PoiModel()>& build) {
  fs::create_directories(dir);
  const fs::path path = dir / "model.json";
  if (fs::exists(path)) {
    try {
      const nlohmann::json j = nlohmann::json::parse(read_text(path));
      if (j.value("config_hash", "") == hash) return PoiModel::from_json(j.at("model"));
    } catch (const std::exception&) {
    }
  }
  PoiModel model = build();
  nlohmann::json j = {{"kind", "model_artifact"}, {"config_hash", hash}, {"model", model.to_json()}};
  save_text_atomic(path, j.dump(1));
  return model;
}

struct MiaBundle {
  MiaConfig cfg;
  std::vector<MiaTarget> targets;
  ShadowPlan plan;
  std::vector<PoiModel> shadows;
};

std::string targets_fingerprint(const std::vector<MiaTarget>& targets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : targets) {
    nlohmann::json visits = nlohmann::json::array();
    for (const auto& v : t.visits) visits.push_back({{"loc", v.loc}, {"t", v.t}});
    arr.push_back(
        {{"user", t.user}, {"loc", t.loc}, {"member", t.member}, {"visits", std::move(visits)}});
  }
  return hex64(fnv1a64(arr.dump()));
}

// Hash-keyed load-or-train for a bundle's 2N-slot shadow ensemble.
std::vector<PoiModel> cached_ensemble(const fs::path& dir, const MobilityDataset& ds,
                                      const MiaBundle& b, const ModelConfig& arch,
                                      ThreadPool& threads) {
  fs::create_directories(dir);
  const nlohmann::json key = {
      {"dataset", ds.meta.count("config_hash") ? ds.meta.at("config_hash") : std::string()},
      {"targets", targets_fingerprint(b.targets)},
      {"mia", b.cfg},
      {"arch", arch}};
  const std::string hash = detail::config_hash(key);
  const fs::path meta = dir / "meta.json";
  bool hit = false;
  if (fs::exists(meta)) {
    try {
      hit = nlohmann::json::parse(read_text(meta)).value("key", "") == hash;
    } catch (const std::exception&) {
    }
  }
  std::vector<PoiModel> shadows;
  if (hit) {
    try {
      for (int s = 0; s < b.plan.n_slots(); ++s) {
        shadows.push_back(PoiModel::load(dir / ("slot_" + std::to_string(s) + ".json")));
      }
      return shadows;
    } catch (const std::exception&) {
      shadows.clear();
    }
  }
  shadows = train_shadow_ensemble(ds, b.plan, arch, b.cfg.shadow_train, threads);
  for (int s = 0; s < b.plan.n_slots(); ++s) {
    shadows[static_cast<std::size_t>(s)].save(dir / ("slot_" + std::to_string(s) + ".json"));
  }
  save_text_atomic(meta, nlohmann::json{{"key", hash}, {"n_slots", b.plan.n_slots()}}.dump(1));
  return shadows;
}

// Trajectory-membership attack materials for one desk seed: every available
// balanced target, the shared shadow plan, and the trained 2N-slot ensemble
// (cached per dataset).
MiaBundle desk_trajmia_bundle(const MobilityDataset& ds, int seed_index, ThreadPool& threads) {
  const ExperimentConfig base = desk_preset();
  const std::uint64_t seed = base.base_seed + static_cast<std::uint64_t>(seed_index);
  MiaBundle b;
  b.cfg = base.trajmia_cfg;
  b.cfg.seed = mix64(seed ^ 0xa77accULL);
  b.targets = make_trajectory_targets(ds, 0, seed);
  b.plan =
      plan_shadows(ds, b.targets, b.cfg.n_pairs, b.cfg.seed, b.cfg.subsample, b.cfg.carrier_time);
  b.shadows = cached_ensemble(g_cache / ("trajmia_seed" + std::to_string(seed_index)), ds, b,
                              base.model, threads);
  return b;
}

ScoreEval lira_eval(const PoiModel& victim, const MiaBundle& b,
                    std::vector<LiraResult>* out_results = nullptr) {
  std::vector<LiraResult> results = lira_attack(victim, b.targets, b.shadows, b.plan, b.cfg);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < results.size(); ++i) {
    scores.push_back(results[i].log_lambda);
    labels.push_back(b.targets[i].member ? 1 : 0);
  }
  if (out_results) *out_results = std::move(results);
  return evaluate_scores(scores, labels);
}

// ---------------------------------------------------------------------------
// 1. Beam search equals exhaustive enumeration on |L|=6, n=3, beta=36.
// ---------------------------------------------------------------------------

Outcome criterion1(ThreadPool&) {
  Outcome o;
  SynthConfig sc;
  sc.n_users = 8;
  sc.n_locations = 6;
  sc.n_days = 10;
  sc.seed = 17;
  const MobilityDataset ds = synth_generate(sc).dataset;
  ModelConfig mc;
  mc.user_embed_dim = 6;
  mc.loc_embed_dim = 6;
  mc.hidden_dim = 10;
  mc.seed = 3;
  PoiModel model(mc, ds.num_users(), ds.num_locations());
  TrainConfig tc;
  tc.epochs = 15;
  tc.eval_every = 0;
  train(model, ds, tc);

  const auto t0 = std::chrono::steady_clock::now();
  TrajectoryExtractConfig cfg;
  cfg.beam_width = 36;
  cfg.target_length = 3;
  cfg.query_time = 0.5;
  const int user = 0, start = 2;
  const auto beam = extract_trajectory(model, user, start, cfg);

  // Exhaustive oracle: every one of 6^2 = 36 continuations scored by fresh
  // queries, ranked by log perplexity with lexicographic tie break.
  std::vector<ScoredSequence> all;
  const int L = ds.num_locations();
  for (int code = 0; code < L * L; ++code) {
    ScoredSequence s;
    s.locs = {start};
    std::vector<Visit> prefix{{start, cfg.query_time}};
    int rem = code;
    for (int step = 1; step < cfg.target_length; ++step) {
      const int c = rem % L;
      rem /= L;
      const QueryOutput out = model.query(user, prefix);
      s.log_perplexity -= std::log(std::max(out.last().probs[c], kProbFloor));
      s.locs.push_back(c);
      prefix.push_back(Visit{c, cfg.query_time});
    }
    all.push_back(std::move(s));
  }
  std::sort(all.begin(), all.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
    if (a.log_perplexity != b.log_perplexity) return a.log_perplexity < b.log_perplexity;
    return a.locs < b.locs;
  });
  const double elapsed = seconds_since(t0);

  o.expect(beam.size() == all.size(), "beam returns all 36 sequences");
  for (std::size_t i = 0; i < std::min(beam.size(), all.size()); ++i) {
    o.expect(beam[i].locs == all[i].locs, "sequence order at rank " + std::to_string(i));
    o.expect(std::abs(beam[i].log_perplexity - all[i].log_perplexity) < 1e-12,
             "log perplexity at rank " + std::to_string(i));
  }
  o.expect(elapsed < 1.0, "runtime under 1 s");
  o.note << "ranked output matches exhaustive enumeration over " << all.size() << " sequences in "
         << fmt3(elapsed) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients vs central finite differences, |L|=10, dims <= 8.
// ---------------------------------------------------------------------------

Outcome criterion2(ThreadPool&) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig mc;
  mc.user_embed_dim = 4;
  mc.loc_embed_dim = 6;
  mc.hidden_dim = 8;
  mc.time_encoding = TimeEncoding::kSinusoidal;
  mc.sinusoidal_k = 2;
  mc.seed = 11;
  PoiModel model(mc, 4, 10);
  Rng rng(99);
  for (long i = 0; i < model.params().size(); ++i) model.params()[i] += 0.1 * rng.normal();

  const std::vector<std::vector<Visit>> prefixes = {
      {{0, 0.10}},
      {{3, 0.20}, {7, 0.45}},
      {{9, 0.05}, {2, 0.33}, {5, 0.71}},
  };
  const std::vector<int> users = {0, 2, 3};
  const std::vector<int> targets = {4, 9, 1};

  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(model.params().size());
  for (std::size_t e = 0; e < prefixes.size(); ++e) {
    model.example_grad(users[e], std::span<const Visit>(prefixes[e]), targets[e], analytic);
  }
  Eigen::VectorXd numeric(model.params().size());
  const double eps = 1e-5;
  for (long i = 0; i < model.params().size(); ++i) {
    const double saved = model.params()[i];
    auto loss_sum = [&]() {
      double s = 0.0;
      for (std::size_t e = 0; e < prefixes.size(); ++e) {
        s += model.example_loss(users[e], std::span<const Visit>(prefixes[e]), targets[e]);
      }
      return s;
    };
    model.params()[i] = saved + eps;
    const double up = loss_sum();
    model.params()[i] = saved - eps;
    const double down = loss_sum();
    model.params()[i] = saved;
    numeric[i] = (up - down) / (2.0 * eps);
  }

  double worst = 0.0;
  std::string worst_group;
  for (const auto& g : model.groups()) {
    const auto a = analytic.segment(g.offset, g.size());
    const auto n = numeric.segment(g.offset, g.size());
    const double rel = (a - n).norm() / (n.norm() + 1e-300);
    if (rel > worst) {
      worst = rel;
      worst_group = g.name;
    }
    o.expect(rel < 1e-4, "relative error in group " + g.name + " = " + fmt3(rel));
  }
  const double elapsed = seconds_since(t0);
  o.expect(elapsed < 10.0, "runtime under 10 s");
  o.note << "worst group relative error " << fmt3(worst) << " (" << worst_group << ") across "
         << model.groups().size() << " groups in " << fmt3(elapsed) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Threshold-sweep AUC equals pairwise concordance on 100 random sets.
// ---------------------------------------------------------------------------

Outcome criterion3(ThreadPool&) {
  Outcome o;
  Rng rng(4242);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(49));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      // Coarse grid on half the trials so ties are common.
      scores[static_cast<std::size_t>(i)] =
          trial % 2 == 0 ? std::floor(rng.uniform() * 8.0) : rng.normal();
      labels[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;  // both classes always present
    labels[static_cast<std::size_t>(n - 1)] = 0;

    double concordant = 0.0;
    long pairs = 0;
    for (int i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] != 1) continue;
      for (int j = 0; j < n; ++j) {
        if (labels[static_cast<std::size_t>(j)] != 0) continue;
        ++pairs;
        if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(j)]) {
          concordant += 1.0;
        } else if (scores[static_cast<std::size_t>(i)] == scores[static_cast<std::size_t>(j)]) {
          concordant += 0.5;
        }
      }
    }
    const double oracle = concordant / static_cast<double>(pairs);
    const double auc = evaluate_scores(scores, labels).auc;
    worst = std::max(worst, std::abs(auc - oracle));
    o.expect(std::abs(auc - oracle) < 1e-9,
             "trial " + std::to_string(trial) + " auc vs concordance");
  }
  o.note << "max |sweep auc - concordance| = " << fmt3(worst) << " over 100 sets";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Common-location extraction beats 5x random guessing on the desk preset.
// ---------------------------------------------------------------------------

Outcome criterion4(ThreadPool&) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig base = desk_preset();
  double sum = 0.0;
  std::vector<double> per_seed;
  for (int k = 0; k < 5; ++k) {
    const MobilityDataset ds = desk_dataset(k);
    const detail::VictimArtifact victim = desk_victim(ds, k, base.train.epochs);
    CommonLocationConfig cfg = base.locextract_cfg;
    cfg.seed = base.base_seed + static_cast<std::uint64_t>(k);
    const double asr = run_common_location_attack(victim.model, ds, cfg).first;
    per_seed.push_back(asr);
    sum += asr;
  }
  const double mean = sum / 5.0;
  const double floor = 5.0 / 500.0;
  const double elapsed = seconds_since(t0);
  o.expect(mean >= floor, "mean top-1 asr >= " + fmt3(floor));
  o.expect(elapsed < 300.0, "runtime under 5 min");
  o.note << "mean top-1 asr " << fmt3(mean) << " over 5 seeds (floor " << fmt3(floor) << "; seeds";
  for (double a : per_seed) o.note << " " << fmt3(a);
  o.note << ") in " << fmt3(elapsed) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Trajectory MIA separates members (AUC >= 0.60) while victims trained on
//    disjoint data score at chance (AUC in [0.45, 0.55]).
// ---------------------------------------------------------------------------

Outcome criterion5(ThreadPool& threads) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig base = desk_preset();
  const MobilityDataset ds = desk_dataset(0);
  const detail::VictimArtifact victim = desk_victim(ds, 0, base.train.epochs);
  const MiaBundle b = desk_trajmia_bundle(ds, 0, threads);

  o.expect(b.targets.size() >= 200, "at least 200 targets");
  const ScoreEval vuln = lira_eval(victim.model, b);
  o.expect(vuln.auc >= 0.60, "vulnerable auc " + fmt3(vuln.auc) + " >= 0.60");

  // Null: victims trained on disjoint synthetic data, scored against the
  // same targets and shadow ensemble; three disjoint victims are pooled to
  // tighten the estimate.
  std::vector<double> scores;
  std::vector<int> labels;
  for (int nv = 0; nv < 3; ++nv) {
    const MobilityDataset nds = desk_dataset(1000 + nv, "null");
    const detail::VictimArtifact null_victim =
        desk_victim(nds, 1000 + nv, base.train.epochs, "null");
    const auto res = lira_attack(null_victim.model, b.targets, b.shadows, b.plan, b.cfg);
    for (std::size_t i = 0; i < res.size(); ++i) {
      scores.push_back(res[i].log_lambda);
      labels.push_back(b.targets[i].member ? 1 : 0);
    }
  }
  const double null_auc = evaluate_scores(scores, labels).auc;
  o.expect(null_auc >= 0.45 && null_auc <= 0.55,
           "null auc " + fmt3(null_auc) + " inside [0.45, 0.55]");
  const double elapsed = seconds_since(t0);
  o.expect(elapsed < 1200.0, "runtime under 20 min");
  o.note << "vulnerable auc " << fmt3(vuln.auc) << ", null auc " << fmt3(null_auc) << " over "
         << b.targets.size() << " targets x 3 disjoint victims in " << fmt3(elapsed) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 6. Longer training does not reduce membership leakage (epoch 200 vs 20).
// ---------------------------------------------------------------------------

Outcome criterion6(ThreadPool& threads) {
  Outcome o;
  double sum200 = 0.0, sum20 = 0.0;
  o.note << "auc per seed (200ep/20ep):";
  for (int k = 0; k < 3; ++k) {
    const MobilityDataset ds = desk_dataset(k);
    const MiaBundle b = desk_trajmia_bundle(ds, k, threads);
    const double auc200 = lira_eval(desk_victim(ds, k, 200).model, b).auc;
    const double auc20 = lira_eval(desk_victim(ds, k, 20).model, b).auc;
    sum200 += auc200;
    sum20 += auc20;
    o.note << " " << fmt3(auc200) << "/" << fmt3(auc20);
  }
  o.expect(sum200 / 3.0 >= sum20 / 3.0, "mean auc at 200 epochs >= mean auc at 20 epochs");
  o.note << "; means " << fmt3(sum200 / 3.0) << " vs " << fmt3(sum20 / 3.0);
  return o;
}

// ---------------------------------------------------------------------------
// 7. DP-SGD calibration: noise multiplier formula, exact clipping, empirical
//    noise standard deviation.
// ---------------------------------------------------------------------------

Outcome criterion7(ThreadPool&) {
  Outcome o;
  const double sigma = dpsgd_sigma(5.0, 1e-3);
  const double want = std::sqrt(2.0 * std::log(1250.0)) / 5.0;
  o.expect(std::abs(sigma - want) <= 1e-12, "sigma(5, 1e-3) within 1e-12 of formula");

  // Clipping bound, checked per example through single-example batches with
  // the noise scale driven to an exactly absorbed magnitude.
  DpSgdConfig quiet;
  quiet.epsilon = 1e300;
  quiet.delta = 1e-3;
  quiet.clip_norm = 3.0;
  quiet.noise_seed = 7;
  const StepHook clip_hook = make_dpsgd_hook(quiet);
  Rng rng(123);
  int clipped_count = 0;
  double max_norm = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd g(37);
    for (long i = 0; i < g.size(); ++i) g[i] = rng.normal();
    g *= std::exp(rng.uniform() * 8.0 - 4.0);  // norms from ~0.1 to ~300
    const Eigen::VectorXd out = clip_hook({g});
    const double n = out.norm();
    max_norm = std::max(max_norm, n);
    o.expect(n <= quiet.clip_norm, "post-clip norm " + fmt3(n) + " exceeds the bound");
    if (g.norm() > quiet.clip_norm) {
      ++clipped_count;
      o.expect(n >= quiet.clip_norm * (1.0 - 1e-12), "clipped example lands on the ball");
    } else {
      o.expect((out - g).norm() == 0.0, "short example passes through unchanged");
    }
  }
  o.expect(clipped_count > 100, "both branches exercised");

  // Noise: with zero gradients the hook output is pure Gaussian noise with
  // per-coordinate standard deviation sigma * C / B.
  DpSgdConfig noisy;
  noisy.epsilon = 5.0;
  noisy.delta = 1e-3;
  noisy.clip_norm = 10.0;
  noisy.noise_seed = 13;
  const StepHook noise_hook = make_dpsgd_hook(noisy);
  const int batch = 8, dim = 5000, rounds = 8;
  const double want_sd = dpsgd_sigma(noisy.epsilon, noisy.delta) * noisy.clip_norm /
                         static_cast<double>(batch);
  double sum = 0.0, sumsq = 0.0;
  long n_draws = 0;
  for (int round = 0; round < rounds; ++round) {
    const std::vector<Eigen::VectorXd> zeros(batch, Eigen::VectorXd::Zero(dim));
    const Eigen::VectorXd out = noise_hook(zeros);
    for (long i = 0; i < out.size(); ++i) {
      sum += out[i];
      sumsq += out[i] * out[i];
      ++n_draws;
    }
  }
  const double mean = sum / static_cast<double>(n_draws);
  const double sd = std::sqrt((sumsq - mean * sum) / static_cast<double>(n_draws - 1));
  o.expect(n_draws >= 10000, "at least 1e4 noise draws");
  o.expect(std::abs(sd - want_sd) / want_sd < 0.02, "noise sd within 2% of sigma*C/B");
  o.note << "sigma " << fmt3(sigma) << ", max post-clip norm " << std::setprecision(17) << max_norm
         << " (bound 3), noise sd " << fmt3(sd) << " vs " << fmt3(want_sd) << " over " << n_draws
         << " draws";
  return o;
}

// ---------------------------------------------------------------------------
// 8. DP-SGD collapses utility (>= 50% relative top-10 drop) and weakens the
//    common-location attack.
// ---------------------------------------------------------------------------

Outcome criterion8(ThreadPool&) {
  Outcome o;
  const ExperimentConfig base = desk_preset();
  double top10_plain = 0.0, top10_dp = 0.0, asr_plain = 0.0, asr_dp = 0.0;
  for (int k = 0; k < 3; ++k) {
    const MobilityDataset ds = desk_dataset(k);
    const std::uint64_t seed = base.base_seed + static_cast<std::uint64_t>(k);

    const detail::VictimArtifact plain = desk_victim(ds, k, base.train.epochs);
    CommonLocationConfig atk = base.locextract_cfg;
    atk.seed = seed;
    top10_plain += evaluate_topk(plain.model, ds, Split::kTest, {10}).at(10);
    asr_plain += run_common_location_attack(plain.model, ds, atk).first;

    DefenseSpec spec;
    spec.id = "dpsgd";
    spec.mechanism = Mechanism::kDpSgd;
    spec.dp.noise_seed = mix64(seed ^ 0xd0d0ULL);
    ModelConfig mc = base.model;
    mc.seed = mix64(seed ^ 0xc71ULL);
    TrainConfig tc = base.train;
    tc.seed = mix64(seed ^ 0x7a112ULL);
    const nlohmann::json key = {{"arch", mc},
                                {"train", tc},
                                {"spec", spec},
                                {"dataset", ds.meta.count("config_hash")
                                                ? ds.meta.at("config_hash")
                                                : std::string()}};
    const PoiModel defended =
        cached_model(g_cache / ("victim_dpsgd_seed" + std::to_string(k)),
                     detail::config_hash(key),
                     [&]() { return train_defended(ds, mc, tc, spec, nullptr); });
    top10_dp += evaluate_topk(defended, ds, Split::kTest, {10}).at(10);
    asr_dp += run_common_location_attack(defended, ds, atk).first;
  }
  top10_plain /= 3.0;
  top10_dp /= 3.0;
  asr_plain /= 3.0;
  asr_dp /= 3.0;
  o.expect(top10_plain > 0.0, "undefended top-10 accuracy is positive");
  o.expect(top10_dp <= 0.5 * top10_plain, "defended top-10 at least 50% lower relative");
  o.expect(asr_dp < asr_plain, "extraction asr drops under the defense");
  o.note << "top-10 " << fmt3(top10_plain) << " -> " << fmt3(top10_dp) << ", locextract asr "
         << fmt3(asr_plain) << " -> " << fmt3(asr_dp) << " (3-seed means, eps "
         << fmt3(DefenseSpec{}.dp.epsilon) << ", delta " << DefenseSpec{}.dp.delta << ")";
  return o;
}

// ---------------------------------------------------------------------------
// 9. Planar Laplace sampler: radial KS test and the output-distribution
//    ratio bound on nearby location pairs.
// ---------------------------------------------------------------------------

Outcome criterion9(ThreadPool&) {
  Outcome o;
  const double eps = 0.01;  // per metre
  Rng rng(20240);

  const int n = 100000;
  std::vector<double> radii(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const geo::PlanarOffset off = geo::planar_laplace_sample(eps, rng);
    radii[static_cast<std::size_t>(i)] = std::hypot(off.dx_m, off.dy_m);
  }
  std::sort(radii.begin(), radii.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = geo::planar_laplace_radial_cdf(eps, radii[static_cast<std::size_t>(i)]);
    const double hi = static_cast<double>(i + 1) / n - cdf;
    const double lo = cdf - static_cast<double>(i) / n;
    ks = std::max(ks, std::max(hi, lo));
  }
  o.expect(ks < 0.01, "ks statistic " + fmt3(ks) + " < 0.01 over 1e5 samples");

  // Ratio bound: for locations within 400 m the probability of landing in a
  // fixed region differs by at most a factor e^{eps * d}, checked by Monte
  // Carlo with a 3-sigma allowance on the log ratio.
  int checked = 0;
  double worst_margin = -1e300;
  for (int pair = 0; pair < 20; ++pair) {
    const double d = 50.0 + 350.0 * rng.uniform();
    const double ang = 2.0 * M_PI * rng.uniform();
    const double lx = d * std::cos(ang), ly = d * std::sin(ang);
    const double cz = 250.0 * rng.uniform(), az = 2.0 * M_PI * rng.uniform();
    const double zx = cz * std::cos(az), zy = cz * std::sin(az);
    const double zr = 150.0 + 150.0 * rng.uniform();

    const int draws = 40000;
    long hits_a = 0, hits_b = 0;
    for (int i = 0; i < draws; ++i) {
      const geo::PlanarOffset oa = geo::planar_laplace_sample(eps, rng);
      if (std::hypot(oa.dx_m - zx, oa.dy_m - zy) <= zr) ++hits_a;
      const geo::PlanarOffset ob = geo::planar_laplace_sample(eps, rng);
      if (std::hypot(lx + ob.dx_m - zx, ly + ob.dy_m - zy) <= zr) ++hits_b;
    }
    const double pa = static_cast<double>(hits_a) / draws;
    const double pb = static_cast<double>(hits_b) / draws;
    o.expect(pa > 0.0 && pb > 0.0, "regions are hit on both sides");
    if (pa == 0.0 || pb == 0.0) continue;
    const double log_ratio = std::abs(std::log(pa / pb));
    const double sd = std::sqrt((1.0 - pa) / (draws * pa) + (1.0 - pb) / (draws * pb));
    const double margin = log_ratio - (eps * d + 3.0 * sd);
    worst_margin = std::max(worst_margin, margin);
    o.expect(margin <= 0.0, "pair " + std::to_string(pair) + " log ratio " + fmt3(log_ratio) +
                                " exceeds eps*d + 3 sigma = " + fmt3(eps * d + 3.0 * sd));
    ++checked;
  }
  o.expect(checked == 20, "all 20 pairs evaluated");
  o.note << "ks " << fmt3(ks) << "; worst log-ratio margin " << fmt3(worst_margin)
         << " (<= 0 satisfies the bound) over 20 pairs within 400 m";
  return o;
}

// ---------------------------------------------------------------------------
// 10. Redaction removes every protected item from the training split.
// ---------------------------------------------------------------------------

Outcome criterion10(ThreadPool&) {
  Outcome o;
  const MobilityDataset ds = desk_dataset(0);
  ProtectScope scope;
  scope.all = false;
  scope.fraction = 0.3;
  scope.seed = 5;
  const ProtectedItems items = resolve_protected(ds, ProtectKind::kCommonLocations, scope);
  o.expect(!items.pairs.empty(), "targeted protected set is non-empty");

  const long before = count_protected_occurrences(ds, items, ds);
  o.expect(before > 0, "protected items occur in training data before redaction");

  // Phase I of the two-phase defense trains on exactly this redacted copy.
  bool mask_used = false;
  const MobilityDataset redacted = redact_dataset(ds, items, ds.num_locations(), &mask_used);
  o.expect(mask_used, "mask id substituted for protected check-ins");

  // Independent exhaustive scan over every training example.
  std::set<std::pair<int, int>> prot(items.pairs.begin(), items.pairs.end());
  long found = 0;
  long scanned = 0;
  for (const auto& tr : redacted.trajectories) {
    if (tr.split != Split::kTrain) continue;
    for (const auto& v : tr.visits) {
      ++scanned;
      if (prot.count({tr.user, v.loc})) ++found;
      o.expect(v.loc <= ds.num_locations(), "mask id is the only added location");
    }
  }
  o.expect(found == 0, "protected pairs remain after redaction");
  o.expect(count_protected_occurrences(redacted, items, ds) == 0, "library scan agrees");
  o.note << items.pairs.size() << " protected pairs, " << before
         << " occurrences before redaction, 0 of " << scanned << " scanned check-ins after";
  return o;
}

// ---------------------------------------------------------------------------
// 11. Preprocessing invariants on the packaged 500-row fixture; reruns are
//     byte-identical.
// ---------------------------------------------------------------------------

Outcome criterion11(ThreadPool&) {
  Outcome o;
  const fs::path raw_path = fs::path(POIAUDIT_FIXTURE_DIR) / "checkins_500.csv";
  const RawCheckins raw = load_checkins(raw_path);
  o.expect(raw.rows.size() == 500, "fixture has 500 records");

  PreprocessConfig cfg;
  const MobilityDataset ds = preprocess(raw, cfg);
  o.expect(ds.num_users() > 0 && ds.num_locations() > 0, "dataset is non-empty");

  std::vector<long> user_counts(static_cast<std::size_t>(ds.num_users()), 0);
  std::vector<long> loc_counts(static_cast<std::size_t>(ds.num_locations()), 0);
  bool times_ok = true, order_ok = true, len_ok = true;
  for (const auto& tr : ds.trajectories) {
    len_ok = len_ok && static_cast<int>(tr.visits.size()) >= cfg.min_traj_len;
    for (std::size_t i = 0; i < tr.visits.size(); ++i) {
      const Visit& v = tr.visits[i];
      user_counts[static_cast<std::size_t>(tr.user)]++;
      loc_counts[static_cast<std::size_t>(v.loc)]++;
      times_ok = times_ok && v.t >= 0.0 && v.t < 1.0;
      if (i > 0) order_ok = order_ok && tr.visits[i - 1].t <= v.t;
    }
  }
  o.expect(len_ok, "every trajectory has at least min_traj_len check-ins");
  o.expect(times_ok, "check-in times normalized to [0, 1)");
  o.expect(order_ok, "check-ins time-ordered within trajectories");
  o.expect(*std::min_element(user_counts.begin(), user_counts.end()) >= cfg.min_occurrence,
           "every user meets min_occurrence");
  o.expect(*std::min_element(loc_counts.begin(), loc_counts.end()) >= cfg.min_occurrence,
           "every POI meets min_occurrence");

  const auto counts = detail::split_counts(static_cast<long>(ds.trajectories.size()), cfg.split);
  o.expect(static_cast<long>(ds.split_indices(Split::kTrain).size()) == counts[0] &&
               static_cast<long>(ds.split_indices(Split::kValid).size()) == counts[1] &&
               static_cast<long>(ds.split_indices(Split::kTest).size()) == counts[2],
           "split sizes follow largest-remainder 8:1:1");

  const MobilityDataset again = preprocess(load_checkins(raw_path), cfg);
  const std::string bytes_a = dataset_to_json(ds).dump(1);
  const std::string bytes_b = dataset_to_json(again).dump(1);
  o.expect(bytes_a == bytes_b, "rerun serializes byte-identically");
  o.note << ds.num_users() << " users, " << ds.num_locations() << " POIs, "
         << ds.trajectories.size() << " trajectories (" << counts[0] << "/" << counts[1] << "/"
         << counts[2] << " split); rerun byte-identical: " << (bytes_a == bytes_b ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------------------
// 12. Users with the fewest check-ins are the most exposed: bottom decile
//     mean likelihood ratio exceeds the top decile.
// ---------------------------------------------------------------------------

// Member-only trajectory targets spread across the whole user population:
// the balanced attack eval set under-represents sparse users, but the
// vulnerability analysis needs every activity decile populated.
std::vector<MiaTarget> analysis_targets(const MobilityDataset& ds, std::size_t cap,
                                        std::uint64_t seed) {
  std::vector<int> train_idx;
  for (int i = 0; i < static_cast<int>(ds.trajectories.size()); ++i) {
    const auto& tr = ds.trajectories[static_cast<std::size_t>(i)];
    if (tr.split == Split::kTrain && tr.visits.size() >= 2) train_idx.push_back(i);
  }
  Rng rng(mix64(seed ^ 0x12a7a1ULL));
  rng.shuffle(train_idx);
  if (train_idx.size() > cap) train_idx.resize(cap);
  std::vector<MiaTarget> targets;
  for (int idx : train_idx) {
    const auto& tr = ds.trajectories[static_cast<std::size_t>(idx)];
    MiaTarget t;
    t.kind = MiaTarget::Kind::kTrajectory;
    t.user = tr.user;
    t.visits = tr.visits;
    t.member = true;
    targets.push_back(std::move(t));
  }
  return targets;
}

Outcome criterion12(ThreadPool& threads) {
  Outcome o;
  const ExperimentConfig base = desk_preset();
  std::vector<double> low_pool, high_pool;
  for (int k = 0; k < 5; ++k) {
    const MobilityDataset ds = desk_dataset(k);
    const detail::VictimArtifact victim = desk_victim(ds, k, 200);
    const std::uint64_t seed = base.base_seed + static_cast<std::uint64_t>(k);

    MiaBundle b;
    b.cfg = base.trajmia_cfg;
    b.cfg.seed = mix64(seed ^ 0xa12a77ULL);
    b.targets = analysis_targets(ds, 600, seed);
    b.plan = plan_shadows(ds, b.targets, b.cfg.n_pairs, b.cfg.seed, b.cfg.subsample,
                          b.cfg.carrier_time);
    b.shadows = cached_ensemble(g_cache / ("trajmia_analysis_seed" + std::to_string(k)), ds, b,
                                base.model, threads);
    const std::vector<LiraResult> results =
        lira_attack(victim.model, b.targets, b.shadows, b.plan, b.cfg);

    std::vector<long> checkins(static_cast<std::size_t>(ds.num_users()), 0);
    for (const auto& tr : ds.trajectories) {
      checkins[static_cast<std::size_t>(tr.user)] += static_cast<long>(tr.visits.size());
    }
    // Decile edges over the user population of this seed.
    std::vector<long> sorted = checkins;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t u = sorted.size();
    const long low_edge = sorted[(u + 9) / 10 - 1];   // 10% quantile
    const long high_edge = sorted[u - (u + 9) / 10];  // 90% quantile

    for (std::size_t i = 0; i < b.targets.size(); ++i) {
      const long c = checkins[static_cast<std::size_t>(b.targets[i].user)];
      if (c <= low_edge) low_pool.push_back(results[i].log_lambda);
      if (c >= high_edge) high_pool.push_back(results[i].log_lambda);
    }
  }
  o.expect(!low_pool.empty() && !high_pool.empty(), "both deciles contain member targets");
  const auto mean = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
  };
  // Likelihood ratios are compared as mean log-ratio per decile; an
  // arithmetic mean of the raw ratios reduces to each group's single
  // largest outlier at these score magnitudes.
  const double low_mean = mean(low_pool);
  const double high_mean = mean(high_pool);
  o.expect(low_mean > high_mean,
           "bottom-decile mean log likelihood ratio exceeds the top decile");
  o.note << "mean log ratio " << fmt3(low_mean) << " over " << low_pool.size()
         << " low-activity member targets vs " << fmt3(high_mean) << " over " << high_pool.size()
         << " high-activity ones (5 seeds pooled)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  int criterion = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      criterion = std::atoi(argv[++i]);
      if (criterion < 1 || criterion > 12) {
        std::cerr << "criterion must be 1..12\n";
        return 1;
      }
    } else if (a == "--cache-dir" && i + 1 < argc) {
      g_cache = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--criterion N] [--cache-dir PATH]\n";
      return 1;
    }
  }
  fs::create_directories(g_cache);

  const std::vector<std::function<Outcome(ThreadPool&)>> criteria = {
      criterion1, criterion2, criterion3, criterion4,  criterion5,  criterion6,
      criterion7, criterion8, criterion9, criterion10, criterion11, criterion12};

  ThreadPool threads(0);
  bool all_pass = true;
  for (int n = 1; n <= 12; ++n) {
    if (criterion != 0 && n != criterion) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)](threads);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << "exception: " << e.what();
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.note.str()
              << " [" << fmt3(seconds_since(t0)) << " s]" << std::endl;
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
