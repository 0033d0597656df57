#pragma once

// Scenario orchestration: the per-cycle wiring of path-following, sensing,
// variable-formation enhancement, avoidance, and fusion; metric records and
// persistence; Monte Carlo CRLB validation; baseline training comparison.

#include <algorithm>
#include <filesystem>

#include "formsim/awpf.hpp"
#include "formsim/csv.hpp"
#include "formsim/dynamics.hpp"
#include "formsim/formation.hpp"
#include "formsim/fusion.hpp"
#include "formsim/isac.hpp"
#include "formsim/nsb.hpp"
#include "formsim/scenario.hpp"
#include "formsim/vfeo.hpp"

namespace formsim {

struct StepRecord {
  double t = 0.0;
  VirtualLeader leader;
  std::vector<UavPV> uavs;
  std::vector<FollowErrors> errors;
  std::vector<bool> avoidance_active;
  bool obstacle_present = false;
  ObstacleState obstacle_truth;
  bool sensed = false;
  ObstacleEstimate estimate;
  double estimate_error = 0.0;  // |est - truth| position, m
  double eps_p = 0.0;
  double eps_v = 0.0;
  bool vfeo_triggered = false;
  double vfeo_eps_before = 0.0;
  double vfeo_eps_after = 0.0;
  int vfeo_iterations = 0;
  bool maneuver_active = false;  // VFT override in force this cycle
  SafetyReport safety;
};

struct RunSummary {
  int cycles = 0;
  double mean_following_error = 0.0;    // mean e_d over all UAVs and cycles
  double following_phase_error = 0.0;   // mean e_d once the formation has caught up
  double transition_time = -1.0;        // first t with max e_d < 3 m
  double min_obstacle_distance = std::numeric_limits<double>::infinity();
  int safety_violations = 0;            // cycles with distance < 0.5 r_s
  int vfeo_triggers = 0;
  int sensing_cycles = 0;
  int sensing_failures = 0;
  int avoidance_cycles = 0;
};

struct RunResult {
  std::vector<StepRecord> records;
  RunSummary summary;
};

namespace detail {

inline bool obstacle_event_active(const ObstacleEvent& ev, double t) {
  return t >= ev.appear && t < ev.disappear;
}

}  // namespace detail

inline RunResult run_scenario(const ScenarioConfig& cfg, const DdpgAgent& policy) {
  const int p = cfg.formation.count;
  const int cycles = int(std::llround(cfg.duration / cfg.dt));
  Rng root(cfg.seed);
  Rng sensing_rng = root.substream("noise");
  Rng obstacle_rng = root.substream("obstacle");

  std::vector<UavState> uavs = cfg.uav_initial;
  const LinkCrlb link_crlb = crlb_link(cfg.dmrs, cfg.attenuation, cfg.snr_linear());

  std::optional<ObstacleState> obstacle;
  int active_event = -1;
  std::optional<std::vector<Vec3>> override_vfts;

  RunResult out;
  out.records.reserve(cycles);
  RunSummary& sum = out.summary;
  double e_d_acc = 0.0;
  double follow_acc = 0.0;
  int follow_count = 0;

  for (int k = 0; k < cycles; ++k) {
    const double t = k * cfg.dt;
    StepRecord rec;
    rec.t = t;
    rec.leader = cfg.leader.at(t);
    const VirtualLeader leader_next = cfg.leader.at(t + cfg.dt);

    // Obstacle lifecycle: reset on entry into an event window, drop on exit.
    for (size_t e = 0; e < cfg.obstacles.size(); ++e) {
      if (int(e) != active_event && detail::obstacle_event_active(cfg.obstacles[e], t)) {
        obstacle = ObstacleState{cfg.obstacles[e].position, cfg.obstacles[e].velocity};
        active_event = int(e);
      }
    }
    if (active_event >= 0 && !detail::obstacle_event_active(cfg.obstacles[active_event], t)) {
      obstacle.reset();
      active_event = -1;
    }
    rec.obstacle_present = obstacle.has_value();
    if (obstacle) rec.obstacle_truth = *obstacle;

    // Targets for this cycle: the pending maneuver override or the formula.
    rec.maneuver_active = override_vfts.has_value();
    std::vector<Vec3> vfts = assign_vfts(rec.leader, cfg.formation, override_vfts);
    override_vfts.reset();

    rec.uavs.resize(p);
    rec.errors.resize(p);
    rec.avoidance_active.assign(p, false);
    std::vector<Vec3> v3(p);
    double max_e_d = 0.0;
    for (int i = 0; i < p; ++i) {
      rec.uavs[i] = {uavs[i].position, uavs[i].velocity};
      AgentObservation obs = make_observation(uavs[i], vfts[i], rec.leader);
      rec.errors[i] = {obs.raw[11], obs.raw[12]};
      v3[i] = policy.act(obs);
      e_d_acc += rec.errors[i].distance;
      max_e_d = std::max(max_e_d, rec.errors[i].distance);
    }
    if (sum.transition_time < 0.0 && max_e_d < 3.0) sum.transition_time = t;
    if (sum.transition_time >= 0.0) {
      for (int i = 0; i < p; ++i) follow_acc += rec.errors[i].distance;
      follow_count += p;
    }

    // Cooperative sensing while the obstacle is inside the detection radius.
    std::optional<ObstacleEstimate> estimate;
    if (cfg.sensing_enabled && obstacle && p >= 5) {
      double min_range = std::numeric_limits<double>::infinity();
      double max_range = 0.0, max_rate = 0.0;
      std::vector<LinkMeasurement> truth(p);
      bool degenerate = false;
      for (int i = 0; i < p && !degenerate; ++i) {
        try {
          truth[i] = true_link(rec.uavs[i], *obstacle);
        } catch (const DegenerateGeometryError&) {
          degenerate = true;
        }
        min_range = std::min(min_range, truth[i].range);
        max_range = std::max(max_range, truth[i].range);
        max_rate = std::max(max_rate, std::abs(truth[i].range_rate));
      }
      const bool in_range = !degenerate && min_range <= cfg.detection_radius &&
                            max_range < cfg.dmrs.unambiguous_range() &&
                            max_rate < cfg.dmrs.unambiguous_velocity() - cfg.dmrs.velocity_bin();
      if (in_range) {
        ++sum.sensing_cycles;
        try {
          std::vector<LinkMeasurement> links(p);
          for (int i = 0; i < p; ++i) {
            ChannelGrid grid =
                synthesize_channel(cfg.dmrs, truth[i].range, truth[i].range_rate,
                                   cfg.attenuation, cfg.snr_linear(), &sensing_rng);
            RangeVelocityEstimate rv = estimate_range_velocity(grid);
            links[i] = {rv.range, rv.velocity, link_crlb.range_var, link_crlb.velocity_var};
          }
          MeasurementSet meas = build_measurements(links);
          ObstacleEstimate est = twls_estimate(meas, rec.uavs);
          estimate = est;
          rec.sensed = true;
          rec.estimate = est;
          rec.estimate_error = (est.position - obstacle->position).norm();
          ObstacleState ref{est.position, est.velocity};
          FormationCrlb fc = crlb_formation(rec.uavs, ref, meas.covariance);
          rec.eps_p = fc.pos_error;
          rec.eps_v = fc.vel_error;

          // Variable-formation check for the next cycle.
          if (cfg.vfeo_enabled) {
            VfeoContext ctx;
            for (const UavPV& u : rec.uavs) ctx.current_positions.push_back(u.position);
            ctx.leader_next = leader_next;
            ObstacleModel model(cfg.dt);
            ctx.predicted_obstacle = obstacle_step(ref, model);
            ctx.candidate_vfts = assign_vfts(leader_next, cfg.formation);
            ctx.formation_velocity = leader_next.velocity;
            ctx.covariance = meas.covariance;
            ctx.radius = cfg.formation.radius;
            ctx.min_separation = cfg.formation.min_separation;
            ctx.min_obstacle_clearance = cfg.formation.min_obstacle_clearance;
            ctx.v_max = cfg.v_max;
            ctx.dt = cfg.dt;
            ctx.crlb_threshold = cfg.crlb_threshold;
            VfeoResult vr = optimize(ctx);
            rec.vfeo_eps_before = vr.initial_pos_error;
            if (vr.triggered) {
              rec.vfeo_triggered = true;
              rec.vfeo_eps_after = vr.achieved_pos_error;
              rec.vfeo_iterations = vr.iterations;
              override_vfts = vr.positions;
              ++sum.vfeo_triggers;
            }
          }
        } catch (const SimError&) {
          ++sum.sensing_failures;
        }
      }
    }

    // Avoidance, fusion, integration.
    std::optional<Vec3> avoid_target;
    if (cfg.avoidance_enabled && obstacle) {
      avoid_target = (cfg.avoid_on_estimate && estimate) ? estimate->position
                                                         : obstacle->position;
    }
    for (int i = 0; i < p; ++i) {
      SubtaskVelocities sub;
      sub.path_following = v3[i];
      if (avoid_target) {
        AvoidanceCommand cmd =
            avoidance_velocity(uavs[i].position, *avoid_target,
                               cfg.formation.min_obstacle_clearance, cfg.gains.lambda1);
        sub.avoidance = cmd.velocity;
        sub.avoidance_active = cmd.active;
        rec.avoidance_active[i] = cmd.active;
      }
      Vec3 commanded = fuse(sub, cfg.gains, uavs[i].position, avoid_target, cfg.v_max);
      Vec3 accel = (commanded - uavs[i].velocity) / cfg.dt;
      uavs[i] = integrate_uav(uavs[i], accel, cfg.dt, cfg.v_max);
      if (!uavs[i].position.finite() || !uavs[i].velocity.finite())
        throw DivergenceError("run_scenario: UAV state diverged at t = " + std::to_string(t));
    }
    for (int i = 0; i < p; ++i)
      if (rec.avoidance_active[i]) {
        ++sum.avoidance_cycles;
        break;
      }

    std::vector<Vec3> positions;
    for (const UavPV& u : rec.uavs) positions.push_back(u.position);
    rec.safety = safety_report(positions, obstacle ? std::optional<Vec3>(obstacle->position)
                                                   : std::nullopt,
                               cfg.formation);
    if (obstacle) {
      sum.min_obstacle_distance =
          std::min(sum.min_obstacle_distance, rec.safety.min_obstacle_distance);
      if (rec.safety.min_obstacle_distance < 0.5 * cfg.formation.min_obstacle_clearance)
        ++sum.safety_violations;
    }

    // Advance the true obstacle to the next cycle.
    if (obstacle && active_event >= 0) {
      Mat sigma(3, 3);
      const double sd = cfg.obstacles[active_event].process_noise_sd;
      for (int i = 0; i < 3; ++i) sigma(i, i) = sd * sd;
      ObstacleModel model(cfg.dt, sigma);
      obstacle = obstacle_step(*obstacle, model, sd > 0.0 ? &obstacle_rng : nullptr);
    }

    out.records.push_back(std::move(rec));
  }

  sum.cycles = cycles;
  sum.mean_following_error = cycles > 0 ? e_d_acc / (double(cycles) * p) : 0.0;
  sum.following_phase_error = follow_count > 0 ? follow_acc / follow_count : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline std::vector<std::string> record_columns(int p) {
  std::vector<std::string> cols{"t",         "leader_x",  "leader_y",  "leader_z",
                                "leader_vx", "leader_vy", "leader_vz"};
  for (int i = 1; i <= p; ++i) {
    const std::string u = "u" + std::to_string(i) + "_";
    for (const char* f : {"x", "y", "z", "vx", "vy", "vz", "ed", "ev", "avoid"})
      cols.push_back(u + f);
  }
  for (const char* f : {"obstacle_present", "obs_x", "obs_y", "obs_z", "obs_vx", "obs_vy",
                        "obs_vz", "sensed", "est_x", "est_y", "est_z", "est_vx", "est_vy",
                        "est_vz", "est_pos_err", "eps_p", "eps_v", "vfeo_triggered",
                        "vfeo_eps_before", "vfeo_eps_after", "vfeo_iterations",
                        "maneuver_active", "min_pair_dist", "min_obs_dist"})
    cols.push_back(f);
  return cols;
}

inline CsvWriter records_to_csv(const RunResult& run, int p) {
  CsvWriter w(record_columns(p));
  for (const StepRecord& r : run.records) {
    std::vector<double> row{r.t,
                            r.leader.position.x,
                            r.leader.position.y,
                            r.leader.position.z,
                            r.leader.velocity.x,
                            r.leader.velocity.y,
                            r.leader.velocity.z};
    for (int i = 0; i < p; ++i) {
      row.insert(row.end(),
                 {r.uavs[i].position.x, r.uavs[i].position.y, r.uavs[i].position.z,
                  r.uavs[i].velocity.x, r.uavs[i].velocity.y, r.uavs[i].velocity.z,
                  r.errors[i].distance, r.errors[i].speed,
                  r.avoidance_active[i] ? 1.0 : 0.0});
    }
    row.insert(row.end(),
               {r.obstacle_present ? 1.0 : 0.0, r.obstacle_truth.position.x,
                r.obstacle_truth.position.y, r.obstacle_truth.position.z,
                r.obstacle_truth.velocity.x, r.obstacle_truth.velocity.y,
                r.obstacle_truth.velocity.z, r.sensed ? 1.0 : 0.0, r.estimate.position.x,
                r.estimate.position.y, r.estimate.position.z, r.estimate.velocity.x,
                r.estimate.velocity.y, r.estimate.velocity.z, r.estimate_error, r.eps_p,
                r.eps_v, r.vfeo_triggered ? 1.0 : 0.0, r.vfeo_eps_before, r.vfeo_eps_after,
                double(r.vfeo_iterations), r.maneuver_active ? 1.0 : 0.0,
                r.safety.min_pair_distance,
                std::isfinite(r.safety.min_obstacle_distance)
                    ? r.safety.min_obstacle_distance
                    : -1.0});
    w.add_row(row);
  }
  return w;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  return {{"cycles", s.cycles},
          {"mean_following_error_m", s.mean_following_error},
          {"following_phase_error_m", s.following_phase_error},
          {"transition_time_s", s.transition_time},
          {"min_obstacle_distance_m",
           std::isfinite(s.min_obstacle_distance) ? s.min_obstacle_distance : -1.0},
          {"safety_violations", s.safety_violations},
          {"vfeo_triggers", s.vfeo_triggers},
          {"sensing_cycles", s.sensing_cycles},
          {"sensing_failures", s.sensing_failures},
          {"avoidance_cycles", s.avoidance_cycles}};
}

// ---------------------------------------------------------------------------
// Monte Carlo CRLB validation
// ---------------------------------------------------------------------------

enum class McModel {
  crlb_gauss,     // per-link errors drawn from the link CRLBs
  isac_pipeline,  // full synthesize -> 2D-FFT estimate path
};

struct McReport {
  int trials = 0;
  double rmse_pos = 0.0;
  double rmse_vel = 0.0;
  double eps_p = 0.0;
  double eps_v = 0.0;
  double ratio_pos = 0.0;
  double ratio_vel = 0.0;
  int stage2_fallbacks = 0;
  std::string model;
};

// Frozen-geometry repetition of measure -> difference -> TWLS with fresh
// noise. The default model draws per-link errors from the link CRLBs, which
// is the regime the formation CRLB bounds; the pipeline model exercises the
// bin-quantized FFT estimator instead (its RMSE is quantization-dominated).
inline McReport monte_carlo_crlb(const ScenarioConfig& cfg, int trials,
                                 McModel model = McModel::crlb_gauss,
                                 std::uint64_t seed_override = 0) {
  if (trials < 1) throw InvalidArgumentError("monte_carlo_crlb: need at least one trial");
  if (cfg.obstacles.empty())
    throw ConfigError("monte_carlo_crlb: scenario defines no obstacle event");
  Rng root(seed_override != 0 ? seed_override : cfg.seed);
  Rng geom_rng = root.substream("mc-geometry");
  Rng noise_rng = root.substream("mc-noise");

  // Frozen flight-state geometry: formation-circle targets around the leader
  // start plus sub-meter station-keeping offsets.
  VirtualLeader leader = cfg.leader.at(0.0);
  auto vfts = assign_vfts(leader, cfg.formation);
  std::vector<UavPV> uavs(cfg.formation.count);
  for (int i = 0; i < cfg.formation.count; ++i) {
    uavs[i].position = vfts[i] + Vec3{geom_rng.uniform(-0.8, 0.8), geom_rng.uniform(-0.8, 0.8),
                                      geom_rng.uniform(-0.8, 0.8)};
    uavs[i].velocity = leader.velocity + Vec3{geom_rng.uniform(-0.3, 0.3),
                                              geom_rng.uniform(-0.3, 0.3),
                                              geom_rng.uniform(-0.3, 0.3)};
  }
  ObstacleState obstacle{cfg.obstacles[0].position, cfg.obstacles[0].velocity};

  const LinkCrlb lc = crlb_link(cfg.dmrs, cfg.attenuation, cfg.snr_linear());
  std::vector<LinkMeasurement> truth(uavs.size());
  for (size_t i = 0; i < uavs.size(); ++i) {
    truth[i] = true_link(uavs[i], obstacle);
    truth[i].range_var = lc.range_var;
    truth[i].rate_var = lc.velocity_var;
  }
  FormationCrlb fc =
      crlb_formation(uavs, obstacle, build_measurements(truth).covariance);

  McReport rep;
  rep.trials = trials;
  rep.eps_p = fc.pos_error;
  rep.eps_v = fc.vel_error;
  rep.model = model == McModel::crlb_gauss ? "crlb_gauss" : "isac_pipeline";
  double pos_sq = 0.0, vel_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<LinkMeasurement> links = truth;
    if (model == McModel::crlb_gauss) {
      for (auto& l : links) {
        l.range += noise_rng.gauss(0.0, std::sqrt(lc.range_var));
        l.range_rate += noise_rng.gauss(0.0, std::sqrt(lc.velocity_var));
      }
    } else {
      for (size_t i = 0; i < links.size(); ++i) {
        ChannelGrid grid = synthesize_channel(cfg.dmrs, truth[i].range, truth[i].range_rate,
                                              cfg.attenuation, cfg.snr_linear(), &noise_rng);
        RangeVelocityEstimate rv = estimate_range_velocity(grid);
        links[i].range = rv.range;
        links[i].range_rate = rv.velocity;
      }
    }
    ObstacleEstimate est = twls_estimate(build_measurements(links), uavs);
    if (!est.stage2_ok) ++rep.stage2_fallbacks;
    pos_sq += (est.position - obstacle.position).norm_sq();
    vel_sq += (est.velocity - obstacle.velocity).norm_sq();
  }
  rep.rmse_pos = std::sqrt(pos_sq / trials);
  rep.rmse_vel = std::sqrt(vel_sq / trials);
  rep.ratio_pos = rep.rmse_pos / rep.eps_p;
  rep.ratio_vel = rep.rmse_vel / rep.eps_v;
  return rep;
}

inline nlohmann::json mc_report_to_json(const McReport& r) {
  return {{"trials", r.trials},
          {"model", r.model},
          {"rmse_pos_m", r.rmse_pos},
          {"rmse_vel_mps", r.rmse_vel},
          {"eps_p_m", r.eps_p},
          {"eps_v_mps", r.eps_v},
          {"ratio_pos", r.ratio_pos},
          {"ratio_vel", r.ratio_vel},
          {"stage2_fallbacks", r.stage2_fallbacks}};
}

// ---------------------------------------------------------------------------
// Baseline comparison
// ---------------------------------------------------------------------------

struct TrainOutput {
  DdpgAgent agent;
  TrainResult result;
};

inline TrainOutput train_policy(const TrainConfig& tc, std::uint64_t seed) {
  Rng init(seed);
  DdpgAgent agent(tc.ddpg, init.substream("net-init"));
  TrainSpec spec;
  spec.episodes = tc.episodes;
  spec.steps_per_episode = tc.steps_per_episode;
  spec.mode = tc.mode;
  spec.ddpg = tc.ddpg;
  spec.env = tc.env;
  spec.noise_sd_start = tc.noise_sd_start;
  spec.noise_sd_end = tc.noise_sd_end;
  TrainResult result = train(agent, spec, seed);
  return {std::move(agent), std::move(result)};
}

struct BaselineRow {
  std::string mode;
  std::uint64_t seed = 0;
  double eval_mean_error = 0.0;       // trailing-window mean e_d, greedy policy
  double eval_following_error = 0.0;  // mean e_d over eval steps below 3 m
  int convergence_episode = 0;
  double final_mean_reward = 0.0;
};

struct BaselineReport {
  std::vector<BaselineRow> rows;

  double median_metric(const std::string& mode, double BaselineRow::* field) const {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.mode == mode) v.push_back(r.*field);
    if (v.empty()) throw InvalidArgumentError("median_metric: no rows for mode " + mode);
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  }

  double median_convergence(const std::string& mode) const {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.mode == mode) v.push_back(double(r.convergence_episode));
    if (v.empty()) throw InvalidArgumentError("median_convergence: no rows for mode " + mode);
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  }
};

// Trains every (mode, seed) cell with the same budget and reports per-cell
// following accuracy and convergence; divergence is recorded per cell.
inline BaselineReport compare_baselines(const TrainConfig& base,
                                        std::span<const RewardMode> modes,
                                        std::span<const std::uint64_t> seeds) {
  if (modes.size() < 2) throw InvalidArgumentError("compare_baselines: need at least two modes");
  BaselineReport rep;
  for (RewardMode mode : modes) {
    for (std::uint64_t seed : seeds) {
      TrainConfig tc = base;
      tc.mode = mode;
      BaselineRow row;
      row.mode = to_string(mode);
      row.seed = seed;
      try {
        TrainOutput out = train_policy(tc, seed);
        row.eval_mean_error = out.result.eval_mean_error;
        row.eval_following_error = out.result.eval_following_error;
        row.convergence_episode = out.result.convergence_episode;
        row.final_mean_reward = out.result.episode_mean_reward.empty()
                                    ? 0.0
                                    : out.result.episode_mean_reward.back();
      } catch (const DivergenceError&) {
        row.eval_mean_error = std::numeric_limits<double>::infinity();
        row.eval_following_error = std::numeric_limits<double>::infinity();
        row.convergence_episode = tc.episodes;
        row.final_mean_reward = -std::numeric_limits<double>::infinity();
      }
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

}  // namespace formsim
