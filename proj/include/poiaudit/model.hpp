#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "poiaudit/common.hpp"
#include "poiaudit/data.hpp"

namespace poiaudit {

constexpr double kProbFloor = 1e-12;

enum class TimeEncoding { kScalarAppend, kSinusoidal };

inline const char* time_encoding_name(TimeEncoding e) {
  return e == TimeEncoding::kScalarAppend ? "scalar" : "sinusoidal";
}

inline TimeEncoding time_encoding_from_name(const std::string& s) {
  if (s == "scalar") return TimeEncoding::kScalarAppend;
  if (s == "sinusoidal") return TimeEncoding::kSinusoidal;
  throw ValidationError("unknown time encoding: " + s);
}

struct ModelConfig {
  int user_embed_dim = 32;
  int loc_embed_dim = 32;
  int hidden_dim = 64;
  TimeEncoding time_encoding = TimeEncoding::kScalarAppend;
  int sinusoidal_k = 4;
  std::uint64_t seed = 1;
};

// Distribution over the location vocabulary after consuming some prefix.
struct StepOutput {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

// Per-step outputs for a query prefix: steps[i] is the next-location
// distribution after consuming prefix[0..i], so steps.back() predicts the
// location following the full prefix.
struct QueryOutput {
  std::vector<StepOutput> steps;
  const StepOutput& last() const { return steps.back(); }
};

// Recurrent next-POI model: GRU over [location embedding; time encoding]
// inputs, hidden state initialised from a projection of the user embedding,
// linear softmax head over locations. Parameters live in one flat vector so
// per-example gradients, clipping, and noising are single-vector operations.
class PoiModel {
 public:
  enum Group {
    kUserEmbed,
    kLocEmbed,
    kWz,
    kUz,
    kBz,
    kWr,
    kUr,
    kBr,
    kWc,
    kUc,
    kBc,
    kUserProj,
    kOutW,
    kOutB,
    kGroupCount
  };

  struct GroupSpec {
    std::string name;
    long offset = 0;
    long rows = 0;
    long cols = 0;
    long size() const { return rows * cols; }
  };

  PoiModel(const ModelConfig& cfg, int n_users, int n_locations, bool reserve_mask = false)
      : cfg_(cfg), n_users_(n_users), n_locations_(n_locations), reserve_mask_(reserve_mask) {
    require(n_users > 0 && n_locations > 0, "model needs at least one user and location");
    require(cfg.user_embed_dim > 0 && cfg.loc_embed_dim > 0 && cfg.hidden_dim > 0,
            "model dimensions must be positive");
    if (cfg.time_encoding == TimeEncoding::kSinusoidal) {
      require(cfg.sinusoidal_k > 0, "sinusoidal_k must be positive");
    }
    build_groups();
    params_ = Eigen::VectorXd::Zero(total_size_);
    init_params();
  }

  const ModelConfig& config() const { return cfg_; }
  int num_users() const { return n_users_; }
  int num_locations() const { return n_locations_; }
  bool has_mask() const { return reserve_mask_; }
  int mask_id() const { return reserve_mask_ ? n_locations_ : -1; }
  int num_outputs() const { return n_locations_ + (reserve_mask_ ? 1 : 0); }
  int time_dim() const {
    return cfg_.time_encoding == TimeEncoding::kScalarAppend ? 1 : 2 * cfg_.sinusoidal_k;
  }
  int input_dim() const { return cfg_.loc_embed_dim + time_dim(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  const std::vector<GroupSpec>& groups() const { return groups_; }

  int epochs_trained = 0;

  QueryOutput query(int user, std::span<const Visit> prefix) const {
    check_query(user, prefix);
    QueryOutput out;
    out.steps.resize(prefix.size());
    Workspace& ws = workspace();
    run_forward(user, prefix, ws);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      out.steps[i].logits = head_logits(ws.hs.col(static_cast<long>(i) + 1));
      out.steps[i].probs = softmax(out.steps[i].logits);
    }
    return out;
  }

  // Final-step distribution only; cheaper than query() on long prefixes.
  StepOutput query_last(int user, std::span<const Visit> prefix) const {
    check_query(user, prefix);
    Workspace& ws = workspace();
    run_forward(user, prefix, ws);
    StepOutput out;
    out.logits = head_logits(ws.hs.col(static_cast<long>(prefix.size())));
    out.probs = softmax(out.logits);
    return out;
  }

  // Negative log-likelihood of target after the prefix, floored at
  // kProbFloor so the value stays finite.
  double example_loss(int user, std::span<const Visit> prefix, int target) const {
    check_query(user, prefix);
    require(target >= 0 && target < num_outputs(), "loss target out of range");
    Workspace& ws = workspace();
    run_forward(user, prefix, ws);
    const Eigen::VectorXd logits = head_logits(ws.hs.col(static_cast<long>(prefix.size())));
    const Eigen::VectorXd probs = softmax(logits);
    return -std::log(std::max(probs[target], kProbFloor));
  }

  // Adds the gradient of example_loss into grad (sized like params()).
  // Returns the example loss.
  double example_grad(int user, std::span<const Visit> prefix, int target,
                      Eigen::VectorXd& grad) const {
    check_query(user, prefix);
    require(target >= 0 && target < num_outputs(), "loss target out of range");
    require(grad.size() == params_.size(), "gradient buffer size mismatch");
    Workspace& ws = workspace();
    run_forward(user, prefix, ws);
    const long T = static_cast<long>(prefix.size());
    const int h = cfg_.hidden_dim;

    auto Wz = cmat(kWz), Uz = cmat(kUz), Wr = cmat(kWr), Ur = cmat(kUr), Wc = cmat(kWc),
         Uc = cmat(kUc), P = cmat(kUserProj), Wo = cmat(kOutW);
    auto gUe = mat_in(grad, kUserEmbed), gLe = mat_in(grad, kLocEmbed), gWz = mat_in(grad, kWz),
         gUz = mat_in(grad, kUz), gWr = mat_in(grad, kWr), gUr = mat_in(grad, kUr),
         gWc = mat_in(grad, kWc), gUc = mat_in(grad, kUc), gP = mat_in(grad, kUserProj),
         gWo = mat_in(grad, kOutW);
    auto gbz = vec_in(grad, kBz), gbr = vec_in(grad, kBr), gbc = vec_in(grad, kBc),
         gbo = vec_in(grad, kOutB);

    const Eigen::VectorXd logits = head_logits(ws.hs.col(T));
    Eigen::VectorXd dlogits = softmax(logits);
    const double loss = -std::log(std::max(dlogits[target], kProbFloor));
    dlogits[target] -= 1.0;

    gWo.noalias() += dlogits * ws.hs.col(T).transpose();
    gbo += dlogits;
    Eigen::VectorXd dh = Wo.transpose() * dlogits;

    Eigen::VectorXd dz(h), dr(h), dc(h), drh(h), dh_prev(h);
    for (long i = T - 1; i >= 0; --i) {
      const auto h_prev = ws.hs.col(i);
      const auto z = ws.zs.col(i);
      const auto r = ws.rs.col(i);
      const auto c = ws.cs.col(i);
      const auto x = ws.xs.col(i);

      dz = (dh.array() * (c - h_prev).array() * z.array() * (1.0 - z.array())).matrix();
      dc = (dh.array() * z.array() * (1.0 - c.array().square())).matrix();
      dh_prev = (dh.array() * (1.0 - z.array())).matrix();

      gWc.noalias() += dc * x.transpose();
      gUc.noalias() += dc * ws.rh.col(i).transpose();
      gbc += dc;
      drh.noalias() = Uc.transpose() * dc;
      dr = (drh.array() * h_prev.array() * r.array() * (1.0 - r.array())).matrix();
      dh_prev += drh.cwiseProduct(r);

      gWz.noalias() += dz * x.transpose();
      gUz.noalias() += dz * h_prev.transpose();
      gbz += dz;
      gWr.noalias() += dr * x.transpose();
      gUr.noalias() += dr * h_prev.transpose();
      gbr += dr;
      dh_prev.noalias() += Uz.transpose() * dz;
      dh_prev.noalias() += Ur.transpose() * dr;

      Eigen::VectorXd dx = Wz.transpose() * dz;
      dx.noalias() += Wr.transpose() * dr;
      dx.noalias() += Wc.transpose() * dc;
      gLe.col(prefix[static_cast<std::size_t>(i)].loc) += dx.head(cfg_.loc_embed_dim);

      dh = dh_prev;
    }
    gP.noalias() += dh * cmat(kUserEmbed).col(user).transpose();
    gUe.col(user).noalias() += P.transpose() * dh;
    return loss;
  }

  // Sum over positions i = 1..n-1 of -log Pr(l_i | l_0..l_{i-1}); needs a
  // trajectory of at least two visits.
  double log_perplexity(int user, std::span<const Visit> traj) const {
    require(traj.size() >= 2, "log_perplexity needs at least two visits");
    const QueryOutput q = query(user, traj);
    double acc = 0.0;
    for (std::size_t i = 1; i < traj.size(); ++i) {
      acc -= std::log(std::max(q.steps[i - 1].probs[traj[i].loc], kProbFloor));
    }
    return acc;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = "poi_model";
    j["version"] = 1;
    j["config"] = {{"user_embed_dim", cfg_.user_embed_dim},
                   {"loc_embed_dim", cfg_.loc_embed_dim},
                   {"hidden_dim", cfg_.hidden_dim},
                   {"time_encoding", time_encoding_name(cfg_.time_encoding)},
                   {"sinusoidal_k", cfg_.sinusoidal_k},
                   {"seed", cfg_.seed}};
    j["n_users"] = n_users_;
    j["n_locations"] = n_locations_;
    j["reserve_mask"] = reserve_mask_;
    j["epochs_trained"] = epochs_trained;
    nlohmann::json p;
    for (const auto& g : groups_) {
      std::vector<double> vals(params_.data() + g.offset, params_.data() + g.offset + g.size());
      p[g.name] = std::move(vals);
    }
    j["params"] = std::move(p);
    return j;
  }

  static PoiModel from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "poi_model") throw ValidationError("not a poi_model artifact");
    const auto& c = j.at("config");
    ModelConfig cfg;
    cfg.user_embed_dim = c.at("user_embed_dim").get<int>();
    cfg.loc_embed_dim = c.at("loc_embed_dim").get<int>();
    cfg.hidden_dim = c.at("hidden_dim").get<int>();
    cfg.time_encoding = time_encoding_from_name(c.at("time_encoding").get<std::string>());
    cfg.sinusoidal_k = c.at("sinusoidal_k").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    PoiModel m(cfg, j.at("n_users").get<int>(), j.at("n_locations").get<int>(),
               j.value("reserve_mask", false));
    m.epochs_trained = j.value("epochs_trained", 0);
    for (const auto& g : m.groups_) {
      const auto vals = j.at("params").at(g.name).get<std::vector<double>>();
      require(static_cast<long>(vals.size()) == g.size(),
              "checkpoint group size mismatch: " + g.name);
      std::copy(vals.begin(), vals.end(), m.params_.data() + g.offset);
    }
    return m;
  }

  void save(const std::filesystem::path& path) const { save_text_atomic(path, to_json().dump(1)); }

  static PoiModel load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text(path)));
  }

 private:
  struct Workspace {
    Eigen::MatrixXd xs, hs, zs, rs, cs, rh;
    Eigen::VectorXd pre;
  };

  static Workspace& workspace() {
    thread_local Workspace ws;
    return ws;
  }

  void check_query(int user, std::span<const Visit> prefix) const {
    require(user >= 0 && user < n_users_, "user id out of range");
    require(!prefix.empty(), "query prefix must be non-empty");
    for (const Visit& v : prefix) {
      require(v.loc >= 0 && v.loc < num_outputs(), "prefix location out of range");
      require(v.t >= 0.0 && v.t <= 1.0, "prefix time outside [0, 1]");
    }
  }

  void build_groups() {
    const int du = cfg_.user_embed_dim, dl = cfg_.loc_embed_dim, h = cfg_.hidden_dim;
    const int dx = input_dim();
    const int L = num_outputs();
    auto add = [&](const std::string& name, long rows, long cols) {
      groups_.push_back(GroupSpec{name, total_size_, rows, cols});
      total_size_ += rows * cols;
    };
    add("user_embed", du, n_users_);
    add("loc_embed", dl, L);
    add("w_z", h, dx);
    add("u_z", h, h);
    add("b_z", h, 1);
    add("w_r", h, dx);
    add("u_r", h, h);
    add("b_r", h, 1);
    add("w_c", h, dx);
    add("u_c", h, h);
    add("b_c", h, 1);
    add("user_proj", h, du);
    add("out_w", L, h);
    add("out_b", L, 1);
  }

  void init_params() {
    Rng rng(mix64(cfg_.seed ^ 0x90de1ULL));
    auto fill_normal = [&](Group g, double sd) {
      auto m = mat(g);
      for (long c = 0; c < m.cols(); ++c) {
        for (long r = 0; r < m.rows(); ++r) m(r, c) = rng.normal(0.0, sd);
      }
    };
    auto fill_uniform_fan = [&](Group g) {
      auto m = mat(g);
      const double a = 1.0 / std::sqrt(static_cast<double>(m.cols()));
      for (long c = 0; c < m.cols(); ++c) {
        for (long r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-a, a);
      }
    };
    fill_normal(kUserEmbed, 0.1);
    fill_normal(kLocEmbed, 0.1);
    for (Group g : {kWz, kUz, kWr, kUr, kWc, kUc, kUserProj}) fill_uniform_fan(g);
    // Gate biases and the output head start at zero: an untrained model
    // predicts the uniform distribution.
  }

  Eigen::Map<Eigen::MatrixXd> mat(Group g) {
    const GroupSpec& s = groups_[static_cast<std::size_t>(g)];
    return {params_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Eigen::MatrixXd> cmat(Group g) const {
    const GroupSpec& s = groups_[static_cast<std::size_t>(g)];
    return {params_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Eigen::VectorXd> cvec(Group g) const {
    const GroupSpec& s = groups_[static_cast<std::size_t>(g)];
    return {params_.data() + s.offset, s.size()};
  }
  Eigen::Map<Eigen::MatrixXd> mat_in(Eigen::VectorXd& v, Group g) const {
    const GroupSpec& s = groups_[static_cast<std::size_t>(g)];
    return {v.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<Eigen::VectorXd> vec_in(Eigen::VectorXd& v, Group g) const {
    const GroupSpec& s = groups_[static_cast<std::size_t>(g)];
    return {v.data() + s.offset, s.size()};
  }

  void time_code(double t, Eigen::Ref<Eigen::VectorXd> out) const {
    if (cfg_.time_encoding == TimeEncoding::kScalarAppend) {
      out[0] = t;
      return;
    }
    for (int j = 0; j < cfg_.sinusoidal_k; ++j) {
      const double w = 2.0 * M_PI * std::pow(2.0, j) * t;
      out[2 * j] = std::sin(w);
      out[2 * j + 1] = std::cos(w);
    }
  }

  // Fills ws.hs.col(0..T) plus per-step gate activations.
  void run_forward(int user, std::span<const Visit> prefix, Workspace& ws) const {
    const int h = cfg_.hidden_dim;
    const int dx = input_dim();
    const int dl = cfg_.loc_embed_dim;
    const long T = static_cast<long>(prefix.size());
    ws.xs.resize(dx, T);
    ws.hs.resize(h, T + 1);
    ws.zs.resize(h, T);
    ws.rs.resize(h, T);
    ws.cs.resize(h, T);
    ws.rh.resize(h, T);
    ws.pre.resize(h);

    auto Wz = cmat(kWz), Uz = cmat(kUz), Wr = cmat(kWr), Ur = cmat(kUr), Wc = cmat(kWc),
         Uc = cmat(kUc), P = cmat(kUserProj), Le = cmat(kLocEmbed);

    ws.hs.col(0).noalias() = P * cmat(kUserEmbed).col(user);
    for (long i = 0; i < T; ++i) {
      const Visit& v = prefix[static_cast<std::size_t>(i)];
      ws.xs.col(i).head(dl) = Le.col(v.loc);
      time_code(v.t, ws.xs.col(i).tail(dx - dl));

      const auto x = ws.xs.col(i);
      const auto h_prev = ws.hs.col(i);

      ws.pre.noalias() = Wz * x;
      ws.pre.noalias() += Uz * h_prev;
      ws.pre += cvec(kBz);
      ws.zs.col(i) = ws.pre.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });

      ws.pre.noalias() = Wr * x;
      ws.pre.noalias() += Ur * h_prev;
      ws.pre += cvec(kBr);
      ws.rs.col(i) = ws.pre.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });

      ws.rh.col(i) = ws.rs.col(i).cwiseProduct(h_prev);
      ws.pre.noalias() = Wc * x;
      ws.pre.noalias() += Uc * ws.rh.col(i);
      ws.pre += cvec(kBc);
      ws.cs.col(i) = ws.pre.array().tanh();

      ws.hs.col(i + 1) =
          ws.hs.col(i) + ws.zs.col(i).cwiseProduct(ws.cs.col(i) - ws.hs.col(i));
    }
  }

  Eigen::VectorXd head_logits(const Eigen::Ref<const Eigen::VectorXd>& hcol) const {
    Eigen::VectorXd logits = cvec(kOutB);
    logits.noalias() += cmat(kOutW) * hcol;
    return logits;
  }

  static Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - m).exp();
    p /= p.sum();
    return p;
  }

  ModelConfig cfg_;
  int n_users_;
  int n_locations_;
  bool reserve_mask_;
  std::vector<GroupSpec> groups_;
  long total_size_ = 0;
  Eigen::VectorXd params_;
};

// Model concept used by the attack surfaces: anything exposing a location
// vocabulary and per-prefix next-location distributions can be audited.
template <typename M>
concept QueryableModel = requires(const M& m, int user, std::span<const Visit> prefix) {
  { m.num_locations() } -> std::convertible_to<int>;
  { m.query(user, prefix) } -> std::convertible_to<QueryOutput>;
};

static_assert(QueryableModel<PoiModel>);

}  // namespace poiaudit
