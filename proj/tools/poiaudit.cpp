// Command line front end for the privacy auditing toolkit: data synthesis
// and preprocessing, model training, extraction and membership attacks,
// defended training, dataset analysis, and experiment orchestration.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poiaudit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace poiaudit;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("POIAUDIT_OUT");
  return env && *env ? std::string(env) : std::string("out");
}

fs::path resolve_out(const std::string& explicit_path, const std::string& fallback_name) {
  if (!explicit_path.empty()) return explicit_path;
  return fs::path(default_out_dir()) / fallback_name;
}

struct ModelFlags {
  ModelConfig cfg;
  void attach(CLI::App* cmd) {
    cmd->add_option("--user-dim", cfg.user_embed_dim, "user embedding width");
    cmd->add_option("--loc-dim", cfg.loc_embed_dim, "location embedding width");
    cmd->add_option("--hidden-dim", cfg.hidden_dim, "recurrent state width");
    cmd->add_option_function<std::string>(
        "--time-encoding",
        [this](const std::string& v) { cfg.time_encoding = time_encoding_from_name(v); },
        "time encoding: scalar or sinusoidal");
    cmd->add_option("--sinusoidal-k", cfg.sinusoidal_k, "sinusoidal frequency count");
    cmd->add_option("--model-seed", cfg.seed, "parameter init seed");
  }
};

struct TrainFlags {
  TrainConfig cfg;
  int patience = -1;
  void attach(CLI::App* cmd) {
    cmd->add_option("--epochs", cfg.epochs, "training epochs");
    cmd->add_option("--batch-size", cfg.batch_size, "batch size");
    cmd->add_option_function<std::string>(
        "--optimizer", [this](const std::string& v) { cfg.optimizer = optimizer_from_name(v); },
        "adam or sgd");
    cmd->add_option("--lr", cfg.learning_rate, "learning rate");
    cmd->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay");
    cmd->add_option("--patience", patience, "early stopping patience (val top-10)");
    cmd->add_option("--eval-every", cfg.eval_every, "epochs between validation passes");
    cmd->add_option("--train-seed", cfg.seed, "shuffling seed");
  }
  TrainConfig resolve() const {
    TrainConfig out = cfg;
    if (patience >= 0) out.early_stop_patience = patience;
    return out;
  }
};

void save_history_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& h : history) {
    rows.push_back({std::to_string(h.epoch), detail::fmt(h.train_loss), detail::fmt(h.val_top1),
                    detail::fmt(h.val_top10)});
  }
  detail::write_csv(path, {"epoch", "train_loss", "val_top1", "val_top10"}, rows);
}

int run(int argc, char** argv) {
  CLI::App app{"privacy auditing toolkit for next-location models"};
  app.require_subcommand(1);
  unsigned n_threads = 0;
  app.add_option("--threads", n_threads, "worker threads (0 = hardware)");

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic check-in dataset");
  SynthConfig synth_cfg;
  std::string synth_out, synth_config;
  synth->add_option("--out", synth_out, "output dataset path");
  synth->add_option("--config", synth_config, "JSON file with generator settings");
  synth->add_option("--users", synth_cfg.n_users, "number of users");
  synth->add_option("--locations", synth_cfg.n_locations, "number of POIs");
  synth->add_option("--days", synth_cfg.n_days, "number of days");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");

  // --- preprocess ----------------------------------------------------------
  auto* prep = app.add_subcommand("preprocess", "build a dataset from raw check-in records");
  std::string prep_in, prep_out;
  PreprocessConfig prep_cfg;
  std::string prep_delim;
  prep->add_option("--input", prep_in, "raw check-in file (csv/tsv)")->required();
  prep->add_option("--out", prep_out, "output dataset path");
  prep->add_option("--min-occurrence", prep_cfg.min_occurrence,
                   "minimum user and POI check-in count");
  prep->add_option("--segment-hours", prep_cfg.segment_hours, "trajectory bucket width");
  prep->add_option("--min-traj-len", prep_cfg.min_traj_len, "minimum check-ins per trajectory");
  prep->add_option("--seed", prep_cfg.seed, "split shuffling seed");
  prep->add_option("--delimiter", prep_delim, "column delimiter (default: auto)");

  // --- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a next-location model");
  std::string train_ds, train_out;
  ModelFlags train_model;
  TrainFlags train_flags;
  train_cmd->add_option("--dataset", train_ds, "dataset path")->required();
  train_cmd->add_option("--out", train_out, "output model path");
  train_model.attach(train_cmd);
  train_flags.attach(train_cmd);

  // --- attack --------------------------------------------------------------
  auto* attack = app.add_subcommand("attack", "run a privacy attack against a model");
  attack->require_subcommand(1);
  std::string atk_model, atk_ds, atk_out;
  for (CLI::App* sub : {attack->add_subcommand("locextract", "recover common locations"),
                        attack->add_subcommand("trajextract", "reconstruct trajectories"),
                        attack->add_subcommand("locmia", "user-location membership test"),
                        attack->add_subcommand("trajmia", "trajectory membership test")}) {
    sub->add_option("--model", atk_model, "victim model path")->required();
    sub->add_option("--dataset", atk_ds, "dataset path")->required();
    sub->add_option("--out", atk_out, "output report path");
  }
  auto* locextract = attack->get_subcommand("locextract");
  CommonLocationConfig le_cfg;
  std::string le_voting = "soft";
  locextract->add_option("--q", le_cfg.query_budget, "query budget");
  locextract->add_option("--t", le_cfg.query_time, "query timestamp");
  locextract->add_option("--k", le_cfg.top_k, "prediction list size");
  locextract->add_option("--voting", le_voting, "soft or hard");
  locextract->add_option("--seed", le_cfg.seed, "probe sampling seed");

  auto* trajextract = attack->get_subcommand("trajextract");
  TrajectoryExtractConfig te_cfg;
  trajextract->add_option("--beta", te_cfg.beam_width, "beam width");
  trajextract->add_option("--n", te_cfg.target_length, "sequence length");
  trajextract->add_option("--t", te_cfg.query_time, "query timestamp");

  auto* locmia = attack->get_subcommand("locmia");
  MiaConfig locmia_cfg;
  int locmia_targets = 100;
  locmia->add_option("--n-shadow", locmia_cfg.n_pairs, "IN/OUT shadow models per side");
  locmia->add_option("--nt", locmia_cfg.stq.n_t, "probe timestamps");
  locmia->add_option("--nl", locmia_cfg.stq.n_l, "probe locations per timestamp");
  locmia->add_option("--targets", locmia_targets, "target pair budget");
  locmia->add_option("--shadow-epochs", locmia_cfg.shadow_train.epochs, "shadow training epochs");
  locmia->add_option("--seed", locmia_cfg.seed, "attack seed");

  auto* trajmia = attack->get_subcommand("trajmia");
  MiaConfig trajmia_cfg;
  int trajmia_targets = 200;
  trajmia->add_option("--n-shadow", trajmia_cfg.n_pairs, "IN/OUT shadow models per side");
  trajmia->add_option("--targets", trajmia_targets, "target trajectory budget");
  trajmia->add_option("--shadow-epochs", trajmia_cfg.shadow_train.epochs,
                      "shadow training epochs");
  trajmia->add_option("--seed", trajmia_cfg.seed, "attack seed");

  // --- defend --------------------------------------------------------------
  auto* defend = app.add_subcommand("defend", "train a model with a privacy defense");
  std::string def_ds, def_out, def_mechanism, def_protect = "all",
              def_protect_kind = "common-locations";
  DefenseSpec def_spec;
  ModelFlags def_model;
  TrainFlags def_train;
  int def_phase2_epochs = 20;
  defend->add_option("--dataset", def_ds, "dataset path")->required();
  defend->add_option("--out", def_out, "output model path");
  defend->add_option("--mechanism", def_mechanism, "l2, early-stop, dpsgd, jft, or geoind")
      ->required();
  defend->add_option("--eps", def_spec.dp.epsilon, "DP epsilon (dpsgd, jft phase 2)");
  defend->add_option("--delta", def_spec.dp.delta, "DP delta");
  defend->add_option("--clip", def_spec.dp.clip_norm, "per-example gradient clip norm");
  defend->add_option("--eps-g", def_spec.geo.epsilon, "geo-perturbation epsilon per metre");
  defend->add_option("--radius", def_spec.geo.radius_m, "snap candidate radius in metres");
  defend->add_option("--weight-decay-l2", def_spec.l2_weight_decay, "weight decay for l2");
  defend->add_option("--es-patience", def_spec.early_stop_patience,
                     "patience for early-stop defense");
  defend->add_option("--protect", def_protect, "all or targeted[:fraction]");
  defend->add_option("--protect-kind", def_protect_kind,
                     "common-locations, user-location-pairs, sequences, trajectories");
  defend->add_option("--phase2-epochs", def_phase2_epochs, "jft fine-tune epochs");
  def_model.attach(defend);
  def_train.attach(defend);

  // --- analyze -------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "aggregate dataset statistics");
  std::string an_ds, an_out;
  analyze->add_option("--dataset", an_ds, "dataset path")->required();
  analyze->add_option("--out-dir", an_out, "output directory");

  // --- sweep ---------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "ablation sweep over one experiment axis");
  std::string sw_config, sw_axis, sw_values, sw_out;
  bool sw_desk = false;
  sweep->add_option("--config", sw_config, "experiment JSON");
  sweep->add_flag("--preset-desk", sw_desk, "start from the desk preset");
  sweep->add_option("--axis", sw_axis, "axis name")->required();
  sweep->add_option("--values", sw_values, "comma separated values")->required();
  sweep->add_option("--out-dir", sw_out, "output directory");

  // --- report --------------------------------------------------------------
  auto* report = app.add_subcommand("report", "run a full experiment and write reports");
  std::string rp_config, rp_out;
  bool rp_desk = false;
  int rp_seeds = -1;
  report->add_option("--config", rp_config, "experiment JSON");
  report->add_flag("--preset-desk", rp_desk, "use the desk preset");
  report->add_option("--seeds", rp_seeds, "override seed count");
  report->add_option("--out-dir", rp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Map CLI11's exit codes onto the documented contract: 0 for --help,
    // 1 for every command line validation problem.
    return app.exit(e) == 0 ? 0 : 1;
  }

  ThreadPool threads(n_threads);

  if (synth->parsed()) {
    if (!synth_config.empty()) {
      // File settings form the base; explicit flags override.
      SynthConfig base =
          nlohmann::json::parse(read_text(synth_config)).get<SynthConfig>();
      if (synth->count("--users")) base.n_users = synth_cfg.n_users;
      if (synth->count("--locations")) base.n_locations = synth_cfg.n_locations;
      if (synth->count("--days")) base.n_days = synth_cfg.n_days;
      if (synth->count("--seed")) base.seed = synth_cfg.seed;
      synth_cfg = base;
    }
    const fs::path out = resolve_out(synth_out, "dataset.json");
    const SynthResult res = synth_generate(synth_cfg);
    save_dataset(out, res.dataset);
    const DatasetStats st = dataset_stats(res.dataset);
    std::cout << "wrote " << out.string() << ": " << st.users << " users, " << st.pois
              << " POIs, " << st.checkins << " check-ins, " << st.trajectories
              << " trajectories\n";
    return 0;
  }

  if (prep->parsed()) {
    LoadOptions opts;
    if (!prep_delim.empty()) {
      require(prep_delim.size() == 1 || prep_delim == "\\t",
              "delimiter must be a single character");
      opts.delimiter = prep_delim == "\\t" ? '\t' : prep_delim[0];
    }
    const MobilityDataset ds = preprocess(load_checkins(prep_in, opts), prep_cfg);
    const fs::path out = resolve_out(prep_out, "dataset.json");
    save_dataset(out, ds);
    const DatasetStats st = dataset_stats(ds);
    std::cout << "wrote " << out.string() << ": " << st.users << " users, " << st.pois
              << " POIs, " << st.checkins << " check-ins, " << st.trajectories
              << " trajectories\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    const MobilityDataset ds = load_dataset(train_ds);
    PoiModel model(train_model.cfg, ds.num_users(), ds.num_locations());
    const TrainResult res = train(model, ds, train_flags.resolve());
    const fs::path out = resolve_out(train_out, "model.json");
    model.save(out);
    save_history_csv(fs::path(out).replace_extension(".history.csv"), res.history);
    const auto acc = evaluate_topk(model, ds, Split::kTest, {1, 10});
    std::cout << "wrote " << out.string() << ": test top-1 " << acc.at(1) << ", top-10 "
              << acc.at(10) << "\n";
    return 0;
  }

  if (attack->parsed()) {
    const MobilityDataset ds = load_dataset(atk_ds);
    const PoiModel model = PoiModel::load(atk_model);
    require(model.num_users() == ds.num_users() && model.num_locations() == ds.num_locations(),
            "model and dataset disagree on user/location counts");
    nlohmann::json out_json;
    std::string fallback = "attack.json";
    if (locextract->parsed()) {
      le_cfg.voting = voting_from_name(le_voting);
      const auto [asr, preds] = run_common_location_attack(model, ds, le_cfg);
      out_json = {{"attack", "locextract"}, {"asr", asr}, {"config", le_cfg}};
      nlohmann::json per_user = nlohmann::json::array();
      for (const auto& p : preds) per_user.push_back(p);
      out_json["predictions"] = std::move(per_user);
      fallback = "attack_locextract.json";
      std::cout << "locextract asr " << asr << "\n";
    } else if (trajextract->parsed()) {
      const auto [asr, top] = run_trajectory_extract_attack(model, ds, te_cfg);
      out_json = {{"attack", "trajextract"}, {"asr", asr}, {"config", te_cfg}};
      nlohmann::json seqs = nlohmann::json::array();
      for (const auto& s : top) {
        seqs.push_back({{"locs", s.locs}, {"log_perplexity", s.log_perplexity}});
      }
      out_json["sequences"] = std::move(seqs);
      fallback = "attack_trajextract.json";
      std::cout << "trajextract asr " << asr << "\n";
    } else {
      const bool is_traj = trajmia->parsed();
      MiaConfig cfg = is_traj ? trajmia_cfg : locmia_cfg;
      const int budget = is_traj ? trajmia_targets : locmia_targets;
      std::vector<MiaTarget> targets =
          is_traj ? make_trajectory_targets(ds, budget, cfg.seed)
                  : make_pair_targets(ds, budget, cfg.seed);
      const MiaRun run = run_mia(model, ds, std::move(targets), cfg, threads);
      const char* name = is_traj ? "trajmia" : "locmia";
      out_json = {{"attack", name},
                  {"auc", run.eval.auc},
                  {"acc", run.eval.best_accuracy},
                  {"tpr_at_0.1fpr", run.eval.tpr_at_fpr(0.1)},
                  {"config", cfg},
                  {"n_targets", run.targets.size()}};
      nlohmann::json per_target = nlohmann::json::array();
      for (std::size_t i = 0; i < run.targets.size(); ++i) {
        per_target.push_back({{"user", run.targets[i].user},
                              {"loc", run.targets[i].loc},
                              {"member", run.targets[i].member},
                              {"confidence", run.results[i].conf_obs},
                              {"log_lambda", run.results[i].log_lambda}});
      }
      out_json["targets"] = std::move(per_target);
      fallback = std::string("attack_") + name + ".json";
      std::cout << name << " auc " << run.eval.auc << " acc " << run.eval.best_accuracy << "\n";
    }
    const fs::path out = resolve_out(atk_out, fallback);
    save_text_atomic(out, out_json.dump(1));
    std::cout << "wrote " << out.string() << "\n";
    return 0;
  }

  if (defend->parsed()) {
    const MobilityDataset ds = load_dataset(def_ds);
    def_spec.mechanism = mechanism_from_name(def_mechanism);
    def_spec.id = def_mechanism;
    def_spec.protect_kind = protect_kind_from_name(def_protect_kind);
    def_spec.scope = protect_scope_from_string(def_protect);
    def_spec.two_phase.phase2.epochs = def_phase2_epochs;
    def_spec.two_phase.dp = def_spec.dp;
    ProtectedItems items;
    PoiModel model = train_defended(ds, def_model.cfg, def_train.resolve(), def_spec, &items);
    const fs::path out = resolve_out(def_out, "defended.json");
    model.save(out);
    const auto acc = evaluate_topk(model, ds, Split::kTest, {1, 10});
    nlohmann::json rep = {{"mechanism", def_mechanism},
                          {"utility_top1", acc.at(1)},
                          {"utility_top10", acc.at(10)},
                          {"protected_pairs", items.pairs.size()},
                          {"protected_trajectories", items.trajectory_ids.size()},
                          {"epochs_trained", model.epochs_trained}};
    save_text_atomic(fs::path(out).replace_extension(".report.json"), rep.dump(1));
    std::cout << "wrote " << out.string() << ": test top-1 " << acc.at(1) << ", top-10 "
              << acc.at(10) << "\n";
    return 0;
  }

  if (analyze->parsed()) {
    const MobilityDataset ds = load_dataset(an_ds);
    const fs::path dir = an_out.empty() ? fs::path(default_out_dir()) / "analysis" : fs::path(an_out);
    const AggregateStats agg = compute_aggregate_stats(ds);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t u = 0; u < agg.users.size(); ++u) {
      rows.push_back({std::to_string(u), std::to_string(agg.users[u].checkins),
                      std::to_string(agg.users[u].unique_pois),
                      std::to_string(agg.users[u].trajectories),
                      detail::fmt(agg.users[u].avg_traj_len)});
    }
    detail::write_csv(dir / "user_stats.csv",
                      {"user", "checkins", "unique_pois", "trajectories", "avg_traj_len"}, rows);
    rows.clear();
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
    rows.clear();
    for (std::size_t t = 0; t < agg.trajectories.size(); ++t) {
      rows.push_back({std::to_string(t), std::to_string(agg.trajectories[t].users_with_identical),
                      std::to_string(agg.trajectories[t].nearby_checkins),
                      std::to_string(agg.trajectories[t].intercepting),
                      detail::fmt(agg.trajectories[t].mean_time)});
    }
    detail::write_csv(dir / "trajectory_stats.csv",
                      {"trajectory", "users_with_identical", "nearby_checkins", "intercepting",
                       "mean_time"},
                      rows);
    const DatasetStats st = dataset_stats(ds);
    nlohmann::json sj = {{"users", st.users},
                         {"pois", st.pois},
                         {"checkins", st.checkins},
                         {"trajectories", st.trajectories},
                         {"avg_traj_len", st.avg_traj_len}};
    save_text_atomic(dir / "dataset_stats.json", sj.dump(1));
    std::cout << "wrote analysis to " << dir.string() << "\n";
    return 0;
  }

  if (sweep->parsed() || report->parsed()) {
    const bool is_sweep = sweep->parsed();
    const std::string cfg_path = is_sweep ? sw_config : rp_config;
    const bool desk = is_sweep ? sw_desk : rp_desk;
    ExperimentConfig cfg = desk ? desk_preset() : ExperimentConfig{};
    if (!cfg_path.empty()) {
      nlohmann::json j = nlohmann::json::parse(read_text(cfg_path));
      if (desk) {
        nlohmann::json merged = nlohmann::json(desk_preset());
        merged.merge_patch(j);
        j = merged;
      }
      cfg = j.get<ExperimentConfig>();
    } else {
      require(desk, "either --config or --preset-desk is required");
    }
    if (is_sweep) {
      std::vector<std::string> values;
      std::size_t start = 0;
      while (start <= sw_values.size()) {
        const std::size_t comma = sw_values.find(',', start);
        values.push_back(sw_values.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      const fs::path dir = sw_out.empty() ? fs::path(default_out_dir()) : fs::path(sw_out);
      ablation_sweep(cfg, sw_axis, values, dir, threads);
      std::cout << "wrote sweep to " << dir.string() << "\n";
    } else {
      if (rp_seeds > 0) cfg.n_seeds = rp_seeds;
      const fs::path dir = rp_out.empty() ? fs::path(default_out_dir()) : fs::path(rp_out);
      const PipelineResult res = run_pipeline(cfg, dir, threads);
      std::cout << "wrote reports to " << dir.string() << "\n";
      for (const auto& [k, v] : res.mean_metrics) {
        std::cout << "  " << k << " = " << v << "\n";
      }
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}
