#pragma once

// DDPG agent trained for a single UAV to chase and follow its virtual
// following target, with the adaptive-weight reward. Contains the MLP
// networks and their gradients, the Adam optimizer, the replay buffer, the
// training loop, and the fixed-weight baselines.

#include <array>
#include <fstream>

#include "formsim/dynamics.hpp"
#include "formsim/formation.hpp"
#include "formsim/numerics.hpp"
#include "json.hpp"

namespace formsim {

// ---------------------------------------------------------------------------
// Reward
// ---------------------------------------------------------------------------

enum class RewardMode { awpf, fwpf_dv_fixed, fwpf_d_only };

inline RewardMode reward_mode_from_string(std::string_view s) {
  if (s == "awpf") return RewardMode::awpf;
  if (s == "fwpf_dv_fixed") return RewardMode::fwpf_dv_fixed;
  if (s == "fwpf_d_only") return RewardMode::fwpf_d_only;
  throw ConfigError("unknown reward mode: " + std::string(s));
}

inline const char* to_string(RewardMode m) {
  switch (m) {
    case RewardMode::awpf: return "awpf";
    case RewardMode::fwpf_dv_fixed: return "fwpf_dv_fixed";
    default: return "fwpf_d_only";
  }
}

struct RewardWeights {
  double distance = 0.0;  // omega_1
  double velocity = 0.0;  // omega_2
};

// Adaptive schedule: (0.05, 0.95) once the distance error is within 3 m,
// otherwise (e_d, 40) / (e_d + 40).
inline RewardWeights adaptive_weights(double e_d) {
  if (e_d <= 3.0) return {0.05, 0.95};
  return {e_d / (e_d + 40.0), 40.0 / (e_d + 40.0)};
}

inline RewardWeights reward_weights(RewardMode mode, double e_d) {
  switch (mode) {
    case RewardMode::awpf: return adaptive_weights(e_d);
    case RewardMode::fwpf_dv_fixed: return {0.05, 0.95};
    default: return {1.0, 0.0};
  }
}

struct RewardResult {
  double value = 0.0;
  RewardWeights weights;
};

inline RewardResult reward(RewardMode mode, double e_d, double e_v) {
  if (e_d < 0.0 || e_v < 0.0) throw InvalidArgumentError("reward: errors must be nonnegative");
  RewardWeights w = reward_weights(mode, e_d);
  return {-w.distance * e_d - w.velocity * e_v, w};
}

inline RewardResult reward(double e_d, double e_v) { return reward(RewardMode::awpf, e_d, e_v); }

// ---------------------------------------------------------------------------
// Observation
// ---------------------------------------------------------------------------

inline constexpr int kObsDim = 13;
inline constexpr int kActDim = 3;
inline constexpr double kActionRadius = 78.0;  // m/s

// Raw physical state vector (x, y, z, chi, gamma, vx, vy, vz, xe, ye, ze,
// e_d, e_v) fed to the networks after normalization.
struct AgentObservation {
  std::array<double, kObsDim> raw{};

  // Positions / 1000 m, velocities / 78 m/s, angles / pi, e_d / 100 m,
  // e_v / 78 m/s.
  std::array<double, kObsDim> normalized() const {
    std::array<double, kObsDim> n{};
    for (int i = 0; i < 3; ++i) n[i] = raw[i] / 1000.0;
    n[3] = raw[3] / kPi;
    n[4] = raw[4] / kPi;
    for (int i = 5; i < 8; ++i) n[i] = raw[i] / kActionRadius;
    for (int i = 8; i < 11; ++i) n[i] = raw[i] / 1000.0;
    n[11] = raw[11] / 100.0;
    n[12] = raw[12] / kActionRadius;
    return n;
  }
};

inline AgentObservation make_observation(const UavState& uav, const Vec3& vft,
                                         const VirtualLeader& leader) {
  FollowErrors e = follow_errors(uav, vft, leader);
  AgentObservation o;
  o.raw = {uav.position.x, uav.position.y,  uav.position.z, uav.track_angle,
           uav.heading_angle, uav.velocity.x, uav.velocity.y, uav.velocity.z,
           vft.x,          vft.y,           vft.z,          e.distance,
           e.speed};
  return o;
}

// ---------------------------------------------------------------------------
// MLP with explicit gradients
// ---------------------------------------------------------------------------

namespace net {

struct Linear {
  int in = 0, out = 0;
  std::vector<double> w, b;    // w is out x in, row-major
  std::vector<double> gw, gb;  // accumulated gradients
  std::vector<double> mw, vw, mb, vb;  // Adam moments

  void init(int in_, int out_, Rng& rng) {
    in = in_;
    out = out_;
    w.resize(size_t(in) * out);
    b.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(double(in));
    for (double& x : w) x = rng.uniform(-bound, bound);
    gw.assign(w.size(), 0.0);
    gb.assign(out, 0.0);
    mw.assign(w.size(), 0.0);
    vw.assign(w.size(), 0.0);
    mb.assign(out, 0.0);
    vb.assign(out, 0.0);
  }
};

}  // namespace net

// Fully connected network, tanh on hidden layers; the output is either linear
// or squashed onto the ball of a given radius (|y| <= radius, smooth).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> widths, double ball_radius, Rng& rng) : radius_(ball_radius) {
    layers_.resize(widths.size() - 1);
    for (size_t i = 0; i + 1 < widths.size(); ++i)
      layers_[i].init(widths[i], widths[i + 1], rng);
    // A squashed output head starts near zero action so the untrained policy
    // does not fly off in an arbitrary fixed direction.
    if (radius_ > 0.0)
      for (double& w : layers_.back().w) w *= 0.1;
  }

  int input_dim() const { return layers_.front().in; }
  int output_dim() const { return layers_.back().out; }
  double ball_radius() const { return radius_; }

  // Batched forward pass; caches activations for backward().
  const std::vector<double>& forward(const std::vector<double>& x, int batch) {
    batch_ = batch;
    acts_.resize(layers_.size() + 1);
    acts_[0] = x;
    for (size_t l = 0; l < layers_.size(); ++l) {
      const net::Linear& L = layers_[l];
      std::vector<double>& y = acts_[l + 1];
      y.assign(size_t(batch) * L.out, 0.0);
      const std::vector<double>& a = acts_[l];
      for (int s = 0; s < batch; ++s) {
        const double* xi = &a[size_t(s) * L.in];
        double* yo = &y[size_t(s) * L.out];
        for (int o = 0; o < L.out; ++o) {
          const double* wr = &L.w[size_t(o) * L.in];
          double acc = L.b[o];
          for (int i = 0; i < L.in; ++i) acc += wr[i] * xi[i];
          yo[o] = acc;
        }
      }
      if (l + 1 < layers_.size())
        for (double& v : y) v = std::tanh(v);
    }
    if (radius_ > 0.0) {
      pre_squash_ = acts_.back();
      std::vector<double>& y = acts_.back();
      const int d = layers_.back().out;
      for (int s = 0; s < batch_; ++s) {
        double* ys = &y[size_t(s) * d];
        double n2 = 0.0;
        for (int i = 0; i < d; ++i) n2 += ys[i] * ys[i];
        double n = std::sqrt(n2);
        double scale = n < 1e-12 ? radius_ : radius_ * std::tanh(n) / n;
        for (int i = 0; i < d; ++i) ys[i] *= scale;
      }
    }
    return acts_.back();
  }

  // Cache-free single-sample evaluation; leaves training state untouched.
  std::vector<double> eval(std::span<const double> x) const {
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (size_t l = 0; l < layers_.size(); ++l) {
      const net::Linear& L = layers_[l];
      next.assign(L.out, 0.0);
      for (int o = 0; o < L.out; ++o) {
        const double* wr = &L.w[size_t(o) * L.in];
        double acc = L.b[o];
        for (int i = 0; i < L.in; ++i) acc += wr[i] * cur[i];
        next[o] = l + 1 < layers_.size() ? std::tanh(acc) : acc;
      }
      cur.swap(next);
    }
    if (radius_ > 0.0) {
      double n2 = 0.0;
      for (double v : cur) n2 += v * v;
      double n = std::sqrt(n2);
      double scale = n < 1e-12 ? radius_ : radius_ * std::tanh(n) / n;
      for (double& v : cur) v *= scale;
    }
    return cur;
  }

  // Backward pass for the most recent forward(); accumulates parameter
  // gradients and returns dL/dinput.
  std::vector<double> backward(std::vector<double> dout) {
    if (radius_ > 0.0) {
      const int d = layers_.back().out;
      for (int s = 0; s < batch_; ++s) {
        const double* ys = &pre_squash_[size_t(s) * d];
        double* ds = &dout[size_t(s) * d];
        double n2 = 0.0;
        for (int i = 0; i < d; ++i) n2 += ys[i] * ys[i];
        double n = std::sqrt(n2);
        if (n < 1e-12) {
          for (int i = 0; i < d; ++i) ds[i] *= radius_;
          continue;
        }
        // dy/dx = R [ tanh(n)/n (I - uu^T) + sech^2(n) uu^T ], u = x/n.
        double th = std::tanh(n);
        double sech2 = 1.0 - th * th;
        double udotd = 0.0;
        for (int i = 0; i < d; ++i) udotd += ys[i] / n * ds[i];
        for (int i = 0; i < d; ++i) {
          double u = ys[i] / n;
          ds[i] = radius_ * (th / n * (ds[i] - u * udotd) + sech2 * u * udotd);
        }
      }
    }
    for (int l = int(layers_.size()) - 1; l >= 0; --l) {
      net::Linear& L = layers_[l];
      if (size_t(l) + 1 < layers_.size()) {
        const std::vector<double>& y = acts_[l + 1];
        for (size_t i = 0; i < dout.size(); ++i) dout[i] *= (1.0 - y[i] * y[i]);
      }
      const std::vector<double>& a = acts_[l];
      std::vector<double> dx(size_t(batch_) * L.in, 0.0);
      for (int s = 0; s < batch_; ++s) {
        const double* xi = &a[size_t(s) * L.in];
        const double* dy = &dout[size_t(s) * L.out];
        double* dxi = &dx[size_t(s) * L.in];
        for (int o = 0; o < L.out; ++o) {
          const double g = dy[o];
          if (g == 0.0) continue;
          double* gw = &L.gw[size_t(o) * L.in];
          const double* wr = &L.w[size_t(o) * L.in];
          L.gb[o] += g;
          for (int i = 0; i < L.in; ++i) {
            gw[i] += g * xi[i];
            dxi[i] += g * wr[i];
          }
        }
      }
      dout = std::move(dx);
    }
    return dout;
  }

  void zero_grad() {
    for (net::Linear& L : layers_) {
      std::fill(L.gw.begin(), L.gw.end(), 0.0);
      std::fill(L.gb.begin(), L.gb.end(), 0.0);
    }
  }

  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    ++adam_t_;
    const double c1 = 1.0 - std::pow(beta1, adam_t_);
    const double c2 = 1.0 - std::pow(beta2, adam_t_);
    for (net::Linear& L : layers_) {
      for (size_t i = 0; i < L.w.size(); ++i) {
        L.mw[i] = beta1 * L.mw[i] + (1.0 - beta1) * L.gw[i];
        L.vw[i] = beta2 * L.vw[i] + (1.0 - beta2) * L.gw[i] * L.gw[i];
        L.w[i] -= lr * (L.mw[i] / c1) / (std::sqrt(L.vw[i] / c2) + eps);
      }
      for (size_t i = 0; i < L.b.size(); ++i) {
        L.mb[i] = beta1 * L.mb[i] + (1.0 - beta1) * L.gb[i];
        L.vb[i] = beta2 * L.vb[i] + (1.0 - beta2) * L.gb[i] * L.gb[i];
        L.b[i] -= lr * (L.mb[i] / c1) / (std::sqrt(L.vb[i] / c2) + eps);
      }
    }
  }

  void soft_update_from(const Mlp& online, double tau) {
    for (size_t l = 0; l < layers_.size(); ++l) {
      for (size_t i = 0; i < layers_[l].w.size(); ++i)
        layers_[l].w[i] = tau * online.layers_[l].w[i] + (1.0 - tau) * layers_[l].w[i];
      for (size_t i = 0; i < layers_[l].b.size(); ++i)
        layers_[l].b[i] = tau * online.layers_[l].b[i] + (1.0 - tau) * layers_[l].b[i];
    }
  }

  std::vector<double> flatten_params() const {
    std::vector<double> p;
    for (const net::Linear& L : layers_) {
      p.insert(p.end(), L.w.begin(), L.w.end());
      p.insert(p.end(), L.b.begin(), L.b.end());
    }
    return p;
  }

  void set_params(std::span<const double> p) {
    size_t k = 0;
    for (net::Linear& L : layers_) {
      for (double& x : L.w) x = p[k++];
      for (double& x : L.b) x = p[k++];
    }
  }

  std::vector<double> flatten_grads() const {
    std::vector<double> g;
    for (const net::Linear& L : layers_) {
      g.insert(g.end(), L.gw.begin(), L.gw.end());
      g.insert(g.end(), L.gb.begin(), L.gb.end());
    }
    return g;
  }

  bool finite() const {
    for (const net::Linear& L : layers_) {
      for (double x : L.w)
        if (!std::isfinite(x)) return false;
      for (double x : L.b)
        if (!std::isfinite(x)) return false;
    }
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const net::Linear& L : layers_)
      layers.push_back({{"in", L.in}, {"out", L.out}, {"w", L.w}, {"b", L.b}});
    return {{"radius", radius_}, {"layers", layers}};
  }

  static Mlp from_json(const nlohmann::json& j) {
    Mlp m;
    m.radius_ = j.at("radius").get<double>();
    for (const auto& lj : j.at("layers")) {
      net::Linear L;
      L.in = lj.at("in").get<int>();
      L.out = lj.at("out").get<int>();
      L.w = lj.at("w").get<std::vector<double>>();
      L.b = lj.at("b").get<std::vector<double>>();
      if (int(L.w.size()) != L.in * L.out || int(L.b.size()) != L.out)
        throw ConfigError("policy checkpoint: layer shape mismatch");
      L.gw.assign(L.w.size(), 0.0);
      L.gb.assign(L.b.size(), 0.0);
      L.mw.assign(L.w.size(), 0.0);
      L.vw.assign(L.w.size(), 0.0);
      L.mb.assign(L.b.size(), 0.0);
      L.vb.assign(L.b.size(), 0.0);
      m.layers_.push_back(std::move(L));
    }
    return m;
  }

 private:
  std::vector<net::Linear> layers_;
  double radius_ = 0.0;
  int batch_ = 0;
  std::vector<std::vector<double>> acts_;
  std::vector<double> pre_squash_;
  long adam_t_ = 0;
};

// ---------------------------------------------------------------------------
// Replay buffer
// ---------------------------------------------------------------------------

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 50000) : capacity_(capacity) {
    obs_.resize(size_t(capacity) * kObsDim);
    act_.resize(size_t(capacity) * kActDim);
    rew_.resize(capacity);
    next_.resize(size_t(capacity) * kObsDim);
  }

  int size() const { return size_; }
  int capacity() const { return capacity_; }

  void push(const std::array<double, kObsDim>& obs, const Vec3& act, double rew,
            const std::array<double, kObsDim>& next_obs) {
    const size_t i = cursor_;
    for (int k = 0; k < kObsDim; ++k) obs_[i * kObsDim + k] = obs[k];
    for (int k = 0; k < kActDim; ++k) act_[i * kActDim + k] = act[k];
    rew_[i] = rew;
    for (int k = 0; k < kObsDim; ++k) next_[i * kObsDim + k] = next_obs[k];
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }

  // Uniform sample with replacement from the filled region.
  void sample(Rng& rng, int batch, std::vector<double>& obs, std::vector<double>& act,
              std::vector<double>& rew, std::vector<double>& next_obs) const {
    obs.resize(size_t(batch) * kObsDim);
    act.resize(size_t(batch) * kActDim);
    rew.resize(batch);
    next_obs.resize(size_t(batch) * kObsDim);
    for (int s = 0; s < batch; ++s) {
      const size_t i = rng.below(size_);
      for (int k = 0; k < kObsDim; ++k) obs[size_t(s) * kObsDim + k] = obs_[i * kObsDim + k];
      for (int k = 0; k < kActDim; ++k) act[size_t(s) * kActDim + k] = act_[i * kActDim + k];
      rew[s] = rew_[i];
      for (int k = 0; k < kObsDim; ++k)
        next_obs[size_t(s) * kObsDim + k] = next_[i * kObsDim + k];
    }
  }

 private:
  int capacity_;
  int size_ = 0;
  size_t cursor_ = 0;
  std::vector<double> obs_, act_, rew_, next_;
};

// ---------------------------------------------------------------------------
// DDPG agent
// ---------------------------------------------------------------------------

struct DdpgConfig {
  int hidden = 64;
  double gamma = 0.99;
  double tau_soft = 0.01;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  int batch_size = 128;
  int buffer_capacity = 50000;
  // Rewards are scaled by this factor inside the critic so its targets stay
  // in a range the tanh trunk can represent; reward values stored in the
  // buffer and reported in traces are unscaled.
  double value_scale = 0.001;
};

struct TrainStepLosses {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

class DdpgAgent {
 public:
  DdpgAgent(const DdpgConfig& cfg, Rng init_rng) : cfg_(cfg) {
    Rng actor_rng = init_rng.substream("actor-init");
    Rng critic_rng = init_rng.substream("critic-init");
    actor_ = Mlp({kObsDim, cfg.hidden, cfg.hidden, kActDim}, kActionRadius, actor_rng);
    critic_ = Mlp({kObsDim + kActDim, cfg.hidden, cfg.hidden, 1}, 0.0, critic_rng);
    target_actor_ = actor_;
    target_critic_ = critic_;
  }

  const DdpgConfig& config() const { return cfg_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Mlp& target_actor() { return target_actor_; }
  Mlp& target_critic() { return target_critic_; }

  // Deterministic policy evaluation.
  Vec3 act(const AgentObservation& obs) const {
    auto n = obs.normalized();
    std::vector<double> y = actor_.eval(std::span<const double>(n));
    return {y[0], y[1], y[2]};
  }

  double critic_value(const AgentObservation& obs, const Vec3& action) const {
    std::vector<double> x = critic_input(obs.normalized(), action);
    return critic_.eval(x)[0] / cfg_.value_scale;
  }

  // One critic + actor + target update on a sampled mini-batch.
  TrainStepLosses train_step(const ReplayBuffer& buffer, Rng& sample_rng) {
    if (buffer.size() < cfg_.batch_size)
      throw NotReadyError("train_step: replay buffer under-filled");
    std::vector<double> obs, act, rew, next_obs;
    buffer.sample(sample_rng, cfg_.batch_size, obs, act, rew, next_obs);
    return train_on_batch(obs, act, rew, next_obs, cfg_.batch_size);
  }

  // Exposed for the gradient-check oracle.
  TrainStepLosses train_on_batch(const std::vector<double>& obs, const std::vector<double>& act,
                                 const std::vector<double>& rew,
                                 const std::vector<double>& next_obs, int batch) {
    // Targets y = scale r + gamma Q'(s', mu'(s')).
    const std::vector<double>& next_act = target_actor_.forward(next_obs, batch);
    std::vector<double> next_in = critic_input_batch(next_obs, next_act, batch);
    const std::vector<double>& next_q = target_critic_.forward(next_in, batch);
    std::vector<double> target(batch);
    for (int s = 0; s < batch; ++s)
      target[s] = cfg_.value_scale * rew[s] + cfg_.gamma * next_q[s];

    TrainStepLosses losses;
    losses.critic_loss = critic_update(obs, act, target, batch);
    losses.actor_objective = actor_update(obs, batch);
    target_actor_.soft_update_from(actor_, cfg_.tau_soft);
    target_critic_.soft_update_from(critic_, cfg_.tau_soft);
    return losses;
  }

  // Mean squared TD error and its gradient step (Adam, critic learning rate).
  double critic_update(const std::vector<double>& obs, const std::vector<double>& act,
                       const std::vector<double>& target, int batch) {
    std::vector<double> in = critic_input_batch(obs, act, batch);
    critic_.zero_grad();
    const std::vector<double>& q = critic_.forward(in, batch);
    std::vector<double> dq(batch);
    double loss = 0.0;
    for (int s = 0; s < batch; ++s) {
      const double err = q[s] - target[s];
      loss += err * err;
      dq[s] = 2.0 * err / batch;
    }
    critic_.backward(std::move(dq));
    critic_.adam_step(cfg_.lr_critic);
    return loss / batch;
  }

  // Ascends mean_s Q(s, mu(s)) through the frozen critic (Adam, actor rate).
  double actor_update(const std::vector<double>& obs, int batch) {
    actor_.zero_grad();
    const std::vector<double>& a = actor_.forward(obs, batch);
    std::vector<double> in = critic_input_batch(obs, a, batch);
    critic_.zero_grad();  // scratch accumulation, discarded
    const std::vector<double>& q = critic_.forward(in, batch);
    double objective = 0.0;
    for (int s = 0; s < batch; ++s) objective += q[s];
    objective /= batch;
    std::vector<double> dq(batch, -1.0 / batch);  // minimize -mean Q
    std::vector<double> din = critic_.backward(std::move(dq));
    std::vector<double> da(size_t(batch) * kActDim);
    for (int s = 0; s < batch; ++s)
      for (int k = 0; k < kActDim; ++k)
        da[size_t(s) * kActDim + k] =
            din[size_t(s) * (kObsDim + kActDim) + kObsDim + k] / kActionRadius;
    actor_.backward(std::move(da));
    actor_.adam_step(cfg_.lr_actor);
    critic_.zero_grad();
    return objective / cfg_.value_scale;
  }

  static std::vector<double> critic_input(const std::array<double, kObsDim>& norm_obs,
                                          const Vec3& action) {
    std::vector<double> x(kObsDim + kActDim);
    for (int i = 0; i < kObsDim; ++i) x[i] = norm_obs[i];
    for (int i = 0; i < kActDim; ++i) x[kObsDim + i] = action[i] / kActionRadius;
    return x;
  }

  static std::vector<double> critic_input_batch(const std::vector<double>& obs,
                                                const std::vector<double>& act, int batch) {
    std::vector<double> in(size_t(batch) * (kObsDim + kActDim));
    for (int s = 0; s < batch; ++s) {
      for (int i = 0; i < kObsDim; ++i)
        in[size_t(s) * (kObsDim + kActDim) + i] = obs[size_t(s) * kObsDim + i];
      for (int i = 0; i < kActDim; ++i)
        in[size_t(s) * (kObsDim + kActDim) + kObsDim + i] =
            act[size_t(s) * kActDim + i] / kActionRadius;
    }
    return in;
  }

  bool finite() const {
    return actor_.finite() && critic_.finite() && target_actor_.finite() &&
           target_critic_.finite();
  }

  void save(const std::string& path) const {
    nlohmann::json j{{"format", "formsim-policy"},
                     {"version", 1},
                     {"obs_dim", kObsDim},
                     {"act_dim", kActDim},
                     {"action_radius", kActionRadius},
                     {"hidden", cfg_.hidden},
                     {"actor", actor_.to_json()},
                     {"critic", critic_.to_json()},
                     {"target_actor", target_actor_.to_json()},
                     {"target_critic", target_critic_.to_json()}};
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write checkpoint: " + path);
    f << j.dump();
  }

  static DdpgAgent load(const std::string& path, DdpgConfig cfg = {}) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.value("format", "") != "formsim-policy")
      throw ConfigError("not a formsim policy checkpoint: " + path);
    if (j.value("version", 0) != 1) throw ConfigError("unsupported checkpoint version");
    Rng dummy(0);
    DdpgAgent a(cfg, dummy);
    a.actor_ = Mlp::from_json(j.at("actor"));
    a.critic_ = Mlp::from_json(j.at("critic"));
    a.target_actor_ = Mlp::from_json(j.at("target_actor"));
    a.target_critic_ = Mlp::from_json(j.at("target_critic"));
    return a;
  }

 private:
  DdpgConfig cfg_;
  Mlp actor_, critic_, target_actor_, target_critic_;
};

// ---------------------------------------------------------------------------
// Single-UAV training environment
// ---------------------------------------------------------------------------

// One UAV chasing a virtual following target on the formation circle of a
// serpentine leader. Episodes randomize the leader start, trajectory draw,
// and the circle angle beta.
struct TrainEnvConfig {
  double dt = 1.0;
  double v_max = kActionRadius;
  double formation_radius = 20.0;
  int steps_per_episode = 200;
  Vec3 leader_start{100.0, 100.0, 50.0};
  double start_jitter = 20.0;     // uniform cube half-width around leader_start
  double min_leader_speed = 1.0;  // m/s, base-line speed draw
  double max_leader_speed = 15.0;
  // Episodes end early past this error: a wandering exploratory policy
  // otherwise floods the replay buffer with saturated observations.
  double divergence_error = 400.0;  // m
};

class FollowerEnv {
 public:
  explicit FollowerEnv(const TrainEnvConfig& cfg = {}) : cfg_(cfg) {}

  const TrainEnvConfig& config() const { return cfg_; }

  AgentObservation reset(Rng& rng) {
    spec_ = SerpentineSpec{};
    spec_.start = cfg_.leader_start + Vec3{rng.uniform(-cfg_.start_jitter, cfg_.start_jitter),
                                           rng.uniform(-cfg_.start_jitter, cfg_.start_jitter),
                                           rng.uniform(-cfg_.start_jitter, cfg_.start_jitter)};
    const double speed = rng.uniform(cfg_.min_leader_speed, cfg_.max_leader_speed);
    const double az = rng.uniform(0.0, 2.0 * kPi);
    const double climb = rng.uniform(-0.25, 0.25);
    const double horiz = std::sqrt(1.0 - climb * climb);
    spec_.base_velocity = Vec3{horiz * std::cos(az), horiz * std::sin(az), climb} * speed;
    spec_.phase = rng.uniform(0.0, 2.0 * kPi);
    beta_ = rng.uniform(0.0, 2.0 * kPi);
    uav_ = make_uav_state(
        {rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0)}, {});
    step_ = 0;
    return observe();
  }

  struct StepResult {
    AgentObservation obs;
    double reward_value = 0.0;
    double e_d = 0.0;
    double e_v = 0.0;
    bool diverged = false;  // error beyond the training cutoff
  };

  // Applies the commanded velocity through the kinetic model and rewards the
  // post-step errors against the next-cycle target.
  StepResult step(const Vec3& action, RewardMode mode) {
    Vec3 accel = (action - uav_.velocity) / cfg_.dt;
    uav_ = integrate_uav(uav_, accel, cfg_.dt, cfg_.v_max);
    ++step_;
    StepResult r;
    r.obs = observe();
    r.e_d = r.obs.raw[11];
    r.e_v = r.obs.raw[12];
    r.reward_value = reward(mode, r.e_d, r.e_v).value;
    r.diverged = r.e_d > cfg_.divergence_error;
    return r;
  }

  VirtualLeader leader() const { return serpentine_leader(spec_, step_ * cfg_.dt); }

  Vec3 vft() const {
    VirtualLeader l = leader();
    const double bearing = std::atan2(l.position.y, l.position.x);
    return {l.position.x + cfg_.formation_radius * std::cos(bearing + beta_),
            l.position.y + cfg_.formation_radius * std::sin(bearing + beta_), l.position.z};
  }

  const UavState& uav() const { return uav_; }

 private:
  AgentObservation observe() const { return make_observation(uav_, vft(), leader()); }

  TrainEnvConfig cfg_;
  SerpentineSpec spec_;
  double beta_ = 0.0;
  UavState uav_;
  int step_ = 0;
};

// ---------------------------------------------------------------------------
// Training loop (Algorithm 1)
// ---------------------------------------------------------------------------

struct TrainSpec {
  int episodes = 300;
  int steps_per_episode = 200;
  RewardMode mode = RewardMode::awpf;
  DdpgConfig ddpg;
  TrainEnvConfig env;
  double noise_sd_start = 8.0;  // m/s, exploration noise decays linearly
  double noise_sd_end = 1.0;
  int warmup_transitions = 1000;  // buffer fill before updates begin
  int eval_episodes = 3;
  int eval_window = 50;  // trailing steps of each evaluation episode
};

struct TrainResult {
  std::vector<double> episode_mean_reward;
  double eval_mean_error = 0.0;      // mean e_d over the trailing eval window
  double eval_following_error = 0.0; // mean e_d over eval steps with e_d < 3 m
  int convergence_episode = 0;
};

// First episode whose smoothed mean reward enters the plateau band: within
// 5% of the final plateau, measured against the smoothed trace's full span.
inline int convergence_episode(const std::vector<double>& rewards, int window = 20) {
  const int n = int(rewards.size());
  if (n == 0) return 0;
  std::vector<double> smooth(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += rewards[i];
    if (i >= window) acc -= rewards[i - window];
    smooth[i] = acc / std::min(i + 1, window);
  }
  const int tail = std::max(1, n / 10);
  double plateau = 0.0;
  for (int i = n - tail; i < n; ++i) plateau += smooth[i];
  plateau /= tail;
  double lo = smooth[0], hi = smooth[0];
  for (double v : smooth) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double band = plateau - 0.05 * (hi - lo);
  for (int i = 0; i < n; ++i)
    if (smooth[i] >= band) return i;
  return n - 1;
}

inline TrainResult train(DdpgAgent& agent, const TrainSpec& spec, std::uint64_t seed) {
  Rng root(seed);
  Rng env_rng = root.substream("training-env");
  Rng explore_rng = root.substream("training-explore");
  Rng sample_rng = root.substream("training-sample");

  TrainEnvConfig env_cfg = spec.env;
  env_cfg.steps_per_episode = spec.steps_per_episode;
  FollowerEnv env(env_cfg);
  ReplayBuffer buffer(spec.ddpg.buffer_capacity);

  TrainResult result;
  result.episode_mean_reward.reserve(spec.episodes);
  for (int ep = 0; ep < spec.episodes; ++ep) {
    AgentObservation obs = env.reset(env_rng);
    const double frac = spec.episodes > 1 ? double(ep) / double(spec.episodes - 1) : 1.0;
    const double noise_sd = spec.noise_sd_start + frac * (spec.noise_sd_end - spec.noise_sd_start);
    double ep_reward = 0.0;
    int steps_taken = 0;
    for (int t = 0; t < spec.steps_per_episode; ++t) {
      Vec3 a = agent.act(obs);
      a += Vec3{explore_rng.gauss(0.0, noise_sd), explore_rng.gauss(0.0, noise_sd),
                explore_rng.gauss(0.0, noise_sd)};
      a = clip_norm(a, kActionRadius);
      FollowerEnv::StepResult sr = env.step(a, spec.mode);
      buffer.push(obs.normalized(), a, sr.reward_value, sr.obs.normalized());
      if (buffer.size() >= std::max(spec.ddpg.batch_size, spec.warmup_transitions))
        agent.train_step(buffer, sample_rng);
      obs = sr.obs;
      ep_reward += sr.reward_value;
      ++steps_taken;
      if (sr.diverged) break;
    }
    result.episode_mean_reward.push_back(ep_reward / steps_taken);
    if (!agent.finite())
      throw DivergenceError("train: network weights became non-finite at episode " +
                            std::to_string(ep));
  }
  result.convergence_episode = convergence_episode(result.episode_mean_reward);

  // Greedy evaluation on a fixed substream.
  Rng eval_rng = root.substream("training-eval");
  double tail_sum = 0.0;
  int tail_count = 0;
  double follow_sum = 0.0;
  int follow_count = 0;
  for (int ep = 0; ep < spec.eval_episodes; ++ep) {
    AgentObservation obs = env.reset(eval_rng);
    for (int t = 0; t < spec.steps_per_episode; ++t) {
      FollowerEnv::StepResult sr = env.step(agent.act(obs), spec.mode);
      obs = sr.obs;
      if (t >= spec.steps_per_episode - spec.eval_window) {
        tail_sum += sr.e_d;
        ++tail_count;
      }
      if (sr.e_d < 3.0) {
        follow_sum += sr.e_d;
        ++follow_count;
      }
    }
  }
  result.eval_mean_error = tail_count > 0 ? tail_sum / tail_count : 0.0;
  result.eval_following_error = follow_count > 0 ? follow_sum / follow_count
                                                 : result.eval_mean_error;
  return result;
}

}  // namespace formsim
