#pragma once

// Virtual-leader representation, virtual-following-target assignment on the
// formation circle, following errors, and safety-distance predicates.

#include <limits>
#include <optional>

#include "formsim/dynamics.hpp"
#include "formsim/numerics.hpp"

namespace formsim {

struct VirtualLeader {
  Vec3 position;  // m
  Vec3 velocity;  // m/s
};

struct FormationConfig {
  int count = 0;                        // P
  double radius = 0.0;                  // r_f, m
  double min_separation = 0.0;          // r_min, m
  double min_obstacle_clearance = 0.0;  // r_s, m
  std::vector<double> betas;            // rad, one per UAV (index 0 = MUAV)

  // Evenly distributed formation: beta_i = 2 pi (i-1) / P.
  static FormationConfig even(int count, double radius, double min_separation,
                              double min_obstacle_clearance) {
    FormationConfig c;
    c.count = count;
    c.radius = radius;
    c.min_separation = min_separation;
    c.min_obstacle_clearance = min_obstacle_clearance;
    c.betas.resize(count);
    for (int i = 0; i < count; ++i) c.betas[i] = 2.0 * kPi * double(i) / double(count);
    c.validate();
    return c;
  }

  void validate() const {
    if (count < 1) throw ConfigError("formation: count must be >= 1");
    if (radius <= 0.0) throw ConfigError("formation: radius must be positive");
    if (min_separation <= 0.0) throw ConfigError("formation: min_separation must be positive");
    if (min_obstacle_clearance <= 0.0)
      throw ConfigError("formation: min_obstacle_clearance must be positive");
    if (int(betas.size()) != count) throw ConfigError("formation: betas size must equal count");
  }
};

// VFT_i = (x_l + r_f cos(atan2(y_l, x_l) + beta_i),
//          y_l + r_f sin(atan2(y_l, x_l) + beta_i), z_l).
// Overrides (from the variable-formation optimizer) bypass the formula and
// are returned verbatim.
inline std::vector<Vec3> assign_vfts(const VirtualLeader& leader, const FormationConfig& cfg,
                                     const std::optional<std::vector<Vec3>>& overrides = {}) {
  cfg.validate();
  if (overrides) {
    if (int(overrides->size()) != cfg.count)
      throw InvalidArgumentError("assign_vfts: override count mismatch");
    return *overrides;
  }
  const Vec3& p = leader.position;
  if (p.x == 0.0 && p.y == 0.0)
    throw DegenerateGeometryError("assign_vfts: leader bearing undefined at the origin");
  const double bearing = std::atan2(p.y, p.x);
  std::vector<Vec3> vfts(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    vfts[i] = {p.x + cfg.radius * std::cos(bearing + cfg.betas[i]),
               p.y + cfg.radius * std::sin(bearing + cfg.betas[i]), p.z};
  }
  return vfts;
}

struct FollowErrors {
  double distance = 0.0;  // e_d, m
  double speed = 0.0;     // e_v, m/s
};

inline FollowErrors follow_errors(const UavState& uav, const Vec3& vft,
                                  const VirtualLeader& leader) {
  return {(vft - uav.position).norm(), (leader.velocity - uav.velocity).norm()};
}

struct SafetyReport {
  double min_pair_distance = std::numeric_limits<double>::infinity();
  double min_obstacle_distance = std::numeric_limits<double>::infinity();
  bool separation_ok = true;  // r_ij >= r_min for all pairs
  bool clearance_ok = true;   // r_i >= r_s for all UAVs
};

inline SafetyReport safety_report(std::span<const Vec3> positions,
                                  const std::optional<Vec3>& obstacle,
                                  const FormationConfig& cfg) {
  if (int(positions.size()) != cfg.count)
    throw InvalidArgumentError("safety_report: position count mismatch");
  SafetyReport r;
  for (size_t i = 0; i < positions.size(); ++i)
    for (size_t j = i + 1; j < positions.size(); ++j)
      r.min_pair_distance = std::min(r.min_pair_distance, (positions[i] - positions[j]).norm());
  if (obstacle) {
    for (const Vec3& p : positions)
      r.min_obstacle_distance = std::min(r.min_obstacle_distance, (p - *obstacle).norm());
  }
  r.separation_ok = positions.size() < 2 || r.min_pair_distance >= cfg.min_separation;
  r.clearance_ok = !obstacle || r.min_obstacle_distance >= cfg.min_obstacle_clearance;
  return r;
}

// ---------------------------------------------------------------------------
// Leader trajectory generator
// ---------------------------------------------------------------------------

// Constant-speed 3D serpentine: a straight base line plus sinusoidal lateral
// and vertical deviations. The values it produces are artifact regression
// data, not reconstructed ground truth from elsewhere.
struct SerpentineSpec {
  Vec3 start{100.0, 100.0, 50.0};
  Vec3 base_velocity{0.10, 0.20, 0.21};  // m/s
  double lateral_amplitude = 8.0;        // m
  double lateral_period = 80.0;          // s
  double vertical_amplitude = 4.0;       // m
  double vertical_period = 120.0;        // s
  double phase = 0.0;                    // rad
};

inline VirtualLeader serpentine_leader(const SerpentineSpec& s, double t) {
  // Lateral direction: horizontal unit vector orthogonal to the base line.
  Vec3 dir = s.base_velocity;
  double h = std::sqrt(dir.x * dir.x + dir.y * dir.y);
  Vec3 lat = h > 0.0 ? Vec3{-dir.y / h, dir.x / h, 0.0} : Vec3{1.0, 0.0, 0.0};
  const double wl = 2.0 * kPi / s.lateral_period;
  const double wv = 2.0 * kPi / s.vertical_period;
  VirtualLeader l;
  l.position = s.start + dir * t + lat * (s.lateral_amplitude * std::sin(wl * t + s.phase)) +
               Vec3{0.0, 0.0, s.vertical_amplitude * std::sin(wv * t + s.phase)};
  l.velocity = dir + lat * (s.lateral_amplitude * wl * std::cos(wl * t + s.phase)) +
               Vec3{0.0, 0.0, s.vertical_amplitude * wv * std::cos(wv * t + s.phase)};
  return l;
}

}  // namespace formsim
