#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "poiaudit/common.hpp"
#include "poiaudit/data.hpp"
#include "poiaudit/model.hpp"

namespace poiaudit {

enum class Optimizer { kAdam, kSgdMomentum };

inline const char* optimizer_name(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "sgd";
}

inline Optimizer optimizer_from_name(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "sgd") return Optimizer::kSgdMomentum;
  throw ValidationError("unknown optimizer: " + s);
}

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  Optimizer optimizer = Optimizer::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;               // L2 coupled into the gradient
  std::optional<int> early_stop_patience;  // on validation top-10 accuracy
  int eval_every = 1;                      // 0 disables per-epoch evaluation
  std::uint64_t seed = 1;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double val_top10 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

// Receives the per-example gradients of one batch and returns the update
// direction actually applied (before weight decay and the optimizer).
using StepHook = std::function<Eigen::VectorXd(const std::vector<Eigen::VectorXd>&)>;

// Rank of `target` among the logits, counting ties in favour of lower ids:
// rank 0 means top-1.
inline int logit_rank(const Eigen::VectorXd& logits, int target) {
  int rank = 0;
  const double lt = logits[target];
  for (int j = 0; j < logits.size(); ++j) {
    if (logits[j] > lt || (logits[j] == lt && j < target)) ++rank;
  }
  return rank;
}

// Top-k next-location accuracy over every prediction position in the given
// split. Returns one accuracy per requested k.
template <QueryableModel M>
std::map<int, double> evaluate_topk(const M& model, const MobilityDataset& ds, Split split,
                                    const std::vector<int>& ks) {
  std::map<int, double> hits;
  for (int k : ks) {
    require(k >= 1, "evaluate_topk: k must be at least 1");
    hits[k] = 0.0;
  }
  long positions = 0;
  for (const auto& tr : ds.trajectories) {
    if (tr.split != split || tr.visits.size() < 2) continue;
    const QueryOutput q = model.query(tr.user, std::span<const Visit>(tr.visits));
    for (std::size_t i = 1; i < tr.visits.size(); ++i) {
      const int rank = logit_rank(q.steps[i - 1].logits, tr.visits[i].loc);
      for (int k : ks) {
        if (rank < k) hits[k] += 1.0;
      }
      ++positions;
    }
  }
  if (positions == 0) return hits;
  for (auto& [k, v] : hits) v /= static_cast<double>(positions);
  return hits;
}

namespace detail {

struct TrainExample {
  int traj = 0;
  int len = 0;  // prefix length; target is visits[len]
};

class OptimizerState {
 public:
  OptimizerState(const TrainConfig& cfg, long n) : cfg_(cfg) {
    if (cfg.optimizer == Optimizer::kAdam) {
      m_ = Eigen::VectorXd::Zero(n);
      v_ = Eigen::VectorXd::Zero(n);
    } else {
      m_ = Eigen::VectorXd::Zero(n);
    }
  }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (cfg_.optimizer == Optimizer::kAdam) {
      ++t_;
      m_ = cfg_.adam_beta1 * m_ + (1.0 - cfg_.adam_beta1) * grad;
      v_ = cfg_.adam_beta2 * v_ + (1.0 - cfg_.adam_beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
      const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
      params.array() -=
          cfg_.learning_rate * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.adam_eps);
    } else {
      m_ = cfg_.momentum * m_ + grad;
      params -= cfg_.learning_rate * m_;
    }
  }

 private:
  TrainConfig cfg_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

}  // namespace detail

// Trains the model in place on the TRAIN split (one example per prediction
// position) and returns the per-epoch history. When `hook` is set, the
// per-example gradients of each batch are handed to it and its return value
// is used as the batch gradient; otherwise the plain mean is used.
inline TrainResult train(PoiModel& model, const MobilityDataset& ds, const TrainConfig& cfg,
                         const StepHook& hook = nullptr) {
  require(cfg.epochs >= 0, "epochs must be non-negative");
  require(cfg.batch_size >= 1, "batch_size must be at least 1");
  require(cfg.learning_rate > 0.0, "learning_rate must be positive");
  require(cfg.weight_decay >= 0.0, "weight_decay must be non-negative");

  std::vector<detail::TrainExample> examples;
  for (int ti = 0; ti < static_cast<int>(ds.trajectories.size()); ++ti) {
    const auto& tr = ds.trajectories[static_cast<std::size_t>(ti)];
    if (tr.split != Split::kTrain) continue;
    for (int i = 1; i < static_cast<int>(tr.visits.size()); ++i) {
      examples.push_back(detail::TrainExample{ti, i});
    }
  }
  require(!examples.empty(), "train: no training examples in dataset");

  Rng rng(mix64(cfg.seed ^ 0x7ea1ULL));
  detail::OptimizerState opt(cfg, model.params().size());
  TrainResult result;

  Eigen::VectorXd batch_grad(model.params().size());
  std::vector<Eigen::VectorXd> per_example;

  double best_val = -1.0;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(examples);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(examples.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const long bsz = static_cast<long>(end - start);

      if (hook) {
        per_example.assign(static_cast<std::size_t>(bsz),
                           Eigen::VectorXd::Zero(model.params().size()));
        for (long b = 0; b < bsz; ++b) {
          const auto& ex = examples[start + static_cast<std::size_t>(b)];
          const auto& tr = ds.trajectories[static_cast<std::size_t>(ex.traj)];
          loss_sum += model.example_grad(
              tr.user,
              std::span<const Visit>(tr.visits.data(), static_cast<std::size_t>(ex.len)),
              tr.visits[static_cast<std::size_t>(ex.len)].loc,
              per_example[static_cast<std::size_t>(b)]);
        }
        batch_grad = hook(per_example);
        require(batch_grad.size() == model.params().size(),
                "step hook returned a gradient of the wrong size");
      } else {
        batch_grad.setZero();
        for (std::size_t i = start; i < end; ++i) {
          const auto& ex = examples[i];
          const auto& tr = ds.trajectories[static_cast<std::size_t>(ex.traj)];
          loss_sum += model.example_grad(
              tr.user,
              std::span<const Visit>(tr.visits.data(), static_cast<std::size_t>(ex.len)),
              tr.visits[static_cast<std::size_t>(ex.len)].loc, batch_grad);
        }
        batch_grad /= static_cast<double>(bsz);
      }

      if (cfg.weight_decay > 0.0) batch_grad += cfg.weight_decay * model.params();
      opt.step(model.params(), batch_grad);
      if (!model.params().allFinite()) {
        throw RuntimeFailure("train: non-finite parameters at epoch " + std::to_string(epoch));
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(examples.size());
    if (cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const auto acc = evaluate_topk(model, ds, Split::kValid, {1, 10});
      rec.val_top1 = acc.at(1);
      rec.val_top10 = acc.at(10);
    }
    result.history.push_back(rec);
    ++model.epochs_trained;

    if (cfg.early_stop_patience && cfg.eval_every > 0) {
      if (rec.val_top10 > best_val) {
        best_val = rec.val_top10;
        best_epoch = epoch;
      } else if (epoch - best_epoch > *cfg.early_stop_patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace poiaudit
