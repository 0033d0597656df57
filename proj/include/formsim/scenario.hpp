#pragma once

// Scenario configuration: JSON schema, validation (every violated field is
// reported), and defaults reproducing the five-UAV reference scenario.

#include <fstream>
#include <optional>
#include <string>

#include "formsim/awpf.hpp"
#include "formsim/formation.hpp"
#include "formsim/isac.hpp"
#include "formsim/nsb.hpp"
#include "json.hpp"

namespace formsim {

struct ObstacleEvent {
  Vec3 position;            // state at appear time
  Vec3 velocity;
  double appear = 0.0;      // s, inclusive
  double disappear = 0.0;   // s, exclusive
  double process_noise_sd = 0.0;  // per-axis accel sd, m/s^2
};

struct LeaderSpec {
  std::string generator = "serpentine";
  SerpentineSpec serpentine;
  std::vector<std::pair<double, Vec3>> waypoints;  // (t, position), piecewise linear

  VirtualLeader at(double t) const {
    if (generator == "serpentine") return serpentine_leader(serpentine, t);
    // Piecewise-linear waypoint track.
    if (waypoints.size() < 2) throw ConfigError("leader: need at least two waypoints");
    size_t seg = 0;
    while (seg + 2 < waypoints.size() && t >= waypoints[seg + 1].first) ++seg;
    const auto& [t0, p0] = waypoints[seg];
    const auto& [t1, p1] = waypoints[seg + 1];
    const double span = t1 - t0;
    const double a = std::clamp((t - t0) / span, 0.0, 1.0);
    return {p0 + (p1 - p0) * a, (p1 - p0) / span};
  }
};

struct TrainConfig {
  int episodes = 300;
  int steps_per_episode = 200;
  RewardMode mode = RewardMode::awpf;
  DdpgConfig ddpg;
  TrainEnvConfig env;
  double noise_sd_start = 8.0;
  double noise_sd_end = 1.0;
};

struct ScenarioConfig {
  double duration = 400.0;  // s
  double dt = 1.0;          // s
  std::uint64_t seed = 1;
  double v_max = 78.0;      // m/s

  FormationConfig formation = FormationConfig::even(5, 20.0, 5.0, 5.0);
  LeaderSpec leader;
  std::vector<UavState> uav_initial;
  std::vector<ObstacleEvent> obstacles;

  DmrsPattern dmrs = DmrsPattern::table1();
  double snr_db = 20.0;
  double attenuation = 1.0;

  std::string checkpoint_path;
  std::optional<TrainConfig> train;

  FusionGains gains;
  double crlb_threshold = 0.5;      // zeta, m
  double detection_radius = 200.0;  // m

  bool sensing_enabled = true;
  bool vfeo_enabled = true;
  bool avoidance_enabled = true;
  bool avoid_on_estimate = true;

  double snr_linear() const { return std::pow(10.0, snr_db / 10.0); }

  // Reference initial states: the five initial positions on the x+y=20 line
  // with zero velocity.
  static std::vector<UavState> default_uavs() {
    return {make_uav_state({0, 20, 0}, {}),  make_uav_state({20, 0, 0}, {}),
            make_uav_state({10, 10, 0}, {}), make_uav_state({15, 5, 0}, {}),
            make_uav_state({5, 15, 0}, {})};
  }
};

namespace detail {

inline Vec3 vec3_of(const nlohmann::json& j, const std::string& field,
                    std::vector<std::string>& errors) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number()) {
    errors.push_back(field + ": expected an array of three numbers");
    return {};
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

// Parses and validates a scenario; every violated field is enumerated in the
// thrown ConfigError message.
inline ScenarioConfig parse_scenario(const nlohmann::json& j) {
  std::vector<std::string> errors;
  ScenarioConfig cfg;

  cfg.duration = j.value("duration_s", cfg.duration);
  cfg.dt = j.value("dt_s", cfg.dt);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.v_max = j.value("v_max_mps", cfg.v_max);
  if (cfg.duration <= 0.0) errors.push_back("duration_s: must be positive");
  if (cfg.dt <= 0.0) errors.push_back("dt_s: must be positive");
  if (cfg.v_max <= 0.0) errors.push_back("v_max_mps: must be positive");

  if (j.contains("formation")) {
    const auto& f = j.at("formation");
    int count = f.value("count", 5);
    double radius = f.value("radius_m", 20.0);
    double min_sep = f.value("min_separation_m", 5.0);
    double min_clear = f.value("min_obstacle_clearance_m", 5.0);
    try {
      cfg.formation = FormationConfig::even(count, radius, min_sep, min_clear);
      if (f.contains("betas_rad")) {
        auto betas = f.at("betas_rad").get<std::vector<double>>();
        if (int(betas.size()) != count)
          errors.push_back("formation.betas_rad: size must equal formation.count");
        else
          cfg.formation.betas = betas;
      }
    } catch (const ConfigError& e) {
      errors.push_back(std::string("formation: ") + e.what());
    }
  }

  if (j.contains("leader")) {
    const auto& l = j.at("leader");
    cfg.leader.generator = l.value("generator", "serpentine");
    if (cfg.leader.generator == "serpentine") {
      SerpentineSpec& s = cfg.leader.serpentine;
      if (l.contains("start")) s.start = detail::vec3_of(l.at("start"), "leader.start", errors);
      if (l.contains("base_velocity"))
        s.base_velocity = detail::vec3_of(l.at("base_velocity"), "leader.base_velocity", errors);
      s.lateral_amplitude = l.value("lateral_amplitude_m", s.lateral_amplitude);
      s.lateral_period = l.value("lateral_period_s", s.lateral_period);
      s.vertical_amplitude = l.value("vertical_amplitude_m", s.vertical_amplitude);
      s.vertical_period = l.value("vertical_period_s", s.vertical_period);
      s.phase = l.value("phase_rad", s.phase);
      if (s.lateral_period <= 0.0) errors.push_back("leader.lateral_period_s: must be positive");
      if (s.vertical_period <= 0.0) errors.push_back("leader.vertical_period_s: must be positive");
    } else if (cfg.leader.generator == "waypoints") {
      if (!l.contains("points") || !l.at("points").is_array() || l.at("points").size() < 2) {
        errors.push_back("leader.points: need at least two [t, x, y, z] entries");
      } else {
        double prev_t = -1.0;
        for (const auto& p : l.at("points")) {
          if (!p.is_array() || p.size() != 4) {
            errors.push_back("leader.points: entries must be [t, x, y, z]");
            break;
          }
          double t = p[0].get<double>();
          if (t <= prev_t) {
            errors.push_back("leader.points: times must be strictly increasing");
            break;
          }
          prev_t = t;
          cfg.leader.waypoints.push_back(
              {t, {p[1].get<double>(), p[2].get<double>(), p[3].get<double>()}});
        }
      }
    } else {
      errors.push_back("leader.generator: unknown generator '" + cfg.leader.generator + "'");
    }
  }

  if (j.contains("uavs")) {
    for (size_t i = 0; i < j.at("uavs").size(); ++i) {
      const auto& u = j.at("uavs")[i];
      const std::string field = "uavs[" + std::to_string(i) + "]";
      Vec3 pos = detail::vec3_of(u.value("position", nlohmann::json::array({0, 0, 0})),
                                 field + ".position", errors);
      Vec3 vel = detail::vec3_of(u.value("velocity", nlohmann::json::array({0, 0, 0})),
                                 field + ".velocity", errors);
      cfg.uav_initial.push_back(make_uav_state(pos, vel, u.value("mass_kg", 1.0)));
    }
  } else {
    cfg.uav_initial = ScenarioConfig::default_uavs();
  }
  if (int(cfg.uav_initial.size()) != cfg.formation.count)
    errors.push_back("uavs: count must equal formation.count");

  if (j.contains("obstacles")) {
    for (size_t i = 0; i < j.at("obstacles").size(); ++i) {
      const auto& o = j.at("obstacles")[i];
      const std::string field = "obstacles[" + std::to_string(i) + "]";
      ObstacleEvent ev;
      ev.position = detail::vec3_of(o.value("position", nlohmann::json::array({0, 0, 0})),
                                    field + ".position", errors);
      ev.velocity = detail::vec3_of(o.value("velocity", nlohmann::json::array({0, 0, 0})),
                                    field + ".velocity", errors);
      ev.appear = o.value("appear_s", 0.0);
      ev.disappear = o.value("disappear_s", cfg.duration);
      ev.process_noise_sd = o.value("process_noise_sd", 0.0);
      if (ev.appear < 0.0 || ev.appear >= cfg.duration)
        errors.push_back(field + ".appear_s: must lie within the scenario duration");
      if (ev.disappear <= ev.appear)
        errors.push_back(field + ".disappear_s: must exceed appear_s");
      if (ev.process_noise_sd < 0.0)
        errors.push_back(field + ".process_noise_sd: must be nonnegative");
      cfg.obstacles.push_back(ev);
    }
    for (size_t i = 1; i < cfg.obstacles.size(); ++i)
      if (cfg.obstacles[i].appear < cfg.obstacles[i - 1].disappear)
        errors.push_back("obstacles: event windows must not overlap (one obstacle at a time)");
  }

  if (j.contains("dmrs")) {
    const auto& d = j.at("dmrs");
    DmrsPattern p;
    p.n_total = d.value("n_total", 256);
    p.m_total = d.value("m_total", 140);
    p.delta_f = d.value("delta_f_hz", 120e3);
    p.symbol_time = d.value("t_s_s", 8.92e-6);
    p.carrier_freq = d.value("f_c_hz", 24e9);
    if (d.contains("q_indices")) {
      p.q_indices = d.at("q_indices").get<std::vector<int>>();
    } else {
      int comb = d.value("q_comb", 2);
      int count = d.value("q_count", 128);
      for (int n = 0; n < count; ++n) p.q_indices.push_back(comb * n);
    }
    if (d.contains("w_indices")) {
      p.w_indices = d.at("w_indices").get<std::vector<int>>();
    } else {
      int count = d.value("w_count", 40);
      for (int m = 0; m < count; ++m) p.w_indices.push_back((m * p.m_total) / count);
    }
    try {
      p.validate();
      cfg.dmrs = p;
    } catch (const ConfigError& e) {
      errors.push_back(std::string("dmrs: ") + e.what());
    }
  }

  cfg.snr_db = j.value("snr_db", cfg.snr_db);
  cfg.attenuation = j.value("attenuation", cfg.attenuation);
  if (cfg.attenuation <= 0.0) errors.push_back("attenuation: must be positive");

  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    if (p.contains("checkpoint")) cfg.checkpoint_path = p.at("checkpoint").get<std::string>();
    if (p.contains("train")) {
      const auto& t = p.at("train");
      TrainConfig tc;
      tc.episodes = t.value("episodes", tc.episodes);
      tc.steps_per_episode = t.value("steps_per_episode", tc.steps_per_episode);
      try {
        tc.mode = reward_mode_from_string(t.value("mode", "awpf"));
      } catch (const ConfigError& e) {
        errors.push_back(std::string("policy.train.mode: ") + e.what());
      }
      tc.ddpg.hidden = t.value("hidden", tc.ddpg.hidden);
      tc.ddpg.gamma = t.value("discount", tc.ddpg.gamma);
      tc.ddpg.tau_soft = t.value("soft_replacement", tc.ddpg.tau_soft);
      tc.ddpg.lr_actor = t.value("lr_actor", tc.ddpg.lr_actor);
      tc.ddpg.lr_critic = t.value("lr_critic", tc.ddpg.lr_critic);
      tc.ddpg.batch_size = t.value("batch_size", tc.ddpg.batch_size);
      tc.ddpg.buffer_capacity = t.value("memory_capacity", tc.ddpg.buffer_capacity);
      tc.noise_sd_start = t.value("noise_sd_start", tc.noise_sd_start);
      tc.noise_sd_end = t.value("noise_sd_end", tc.noise_sd_end);
      if (tc.episodes < 0) errors.push_back("policy.train.episodes: must be nonnegative");
      if (tc.steps_per_episode <= 0)
        errors.push_back("policy.train.steps_per_episode: must be positive");
      cfg.train = tc;
    }
  }

  if (j.contains("gains")) {
    const auto& g = j.at("gains");
    cfg.gains.k1 = g.value("k1", cfg.gains.k1);
    cfg.gains.k2 = g.value("k2", cfg.gains.k2);
    cfg.gains.lambda1 = g.value("lambda1", cfg.gains.lambda1);
    if (cfg.gains.k1 < 0.0 || cfg.gains.k2 < 0.0 || cfg.gains.lambda1 < 0.0)
      errors.push_back("gains: k1, k2, lambda1 must be nonnegative");
  }

  cfg.crlb_threshold = j.value("crlb_threshold_m", cfg.crlb_threshold);
  cfg.detection_radius = j.value("detection_radius_m", cfg.detection_radius);
  cfg.sensing_enabled = j.value("sensing_enabled", cfg.sensing_enabled);
  cfg.vfeo_enabled = j.value("vfeo_enabled", cfg.vfeo_enabled);
  cfg.avoidance_enabled = j.value("avoidance_enabled", cfg.avoidance_enabled);
  cfg.avoid_on_estimate = j.value("avoid_on_estimate", cfg.avoid_on_estimate);
  if (cfg.crlb_threshold <= 0.0) errors.push_back("crlb_threshold_m: must be positive");
  if (cfg.detection_radius <= 0.0) errors.push_back("detection_radius_m: must be positive");
  if (cfg.sensing_enabled && cfg.formation.count < 5)
    errors.push_back("formation.count: sensing requires at least five UAVs");

  if (!errors.empty()) {
    std::string msg = "invalid scenario configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read scenario config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario config is not valid JSON: " + std::string(e.what()));
  }
  return parse_scenario(j);
}

}  // namespace formsim
