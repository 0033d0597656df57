#pragma once

// Online obstacle-avoidance velocity, null-space projector along the
// UAV-obstacle line of sight, and the hierarchical subtask fusion producing
// each UAV's commanded velocity.

#include <optional>

#include "formsim/numerics.hpp"

namespace formsim {

struct FusionGains {
  double k1 = 1.0;       // avoidance weight
  double k2 = 1.0;       // sensing-maneuver weight
  double lambda1 = 1.0;  // avoidance gain, 1/s
};

struct SubtaskVelocities {
  Vec3 avoidance;        // v1
  Vec3 sensing;          // v2
  Vec3 path_following;   // v3
  bool avoidance_active = false;
  bool sensing_active = false;
};

struct AvoidanceCommand {
  Vec3 velocity;
  bool active = false;
};

// v1 = (u - s)/r * lambda1 (r_s - r) when r < r_s; zero and inactive
// otherwise (strict inequality at the boundary).
inline AvoidanceCommand avoidance_velocity(const Vec3& uav, const Vec3& obstacle,
                                           double min_clearance, double lambda1) {
  Vec3 d = uav - obstacle;
  double r = d.norm();
  if (r <= 0.0) throw DegenerateGeometryError("avoidance_velocity: UAV at the obstacle");
  if (r >= min_clearance) return {Vec3{}, false};
  return {d * (lambda1 * (min_clearance - r) / r), true};
}

// I - J1^+ J1 with J1 the unit line-of-sight row: the projector onto the
// plane orthogonal to the UAV-obstacle direction.
inline Mat3 null_projector(const Vec3& uav, const Vec3& obstacle) {
  Vec3 d = uav - obstacle;
  double r = d.norm();
  if (r <= 0.0) throw DegenerateGeometryError("null_projector: UAV at the obstacle");
  Vec3 j = d / r;
  Vec3 jp = pinv_row(j);
  return Mat3::identity() - Mat3::outer(jp, j);
}

// Hierarchical fusion: with avoidance active the path-following velocity is
// projected out of the line of sight; otherwise the projector collapses to
// identity. Output is clipped to the speed limit.
inline Vec3 fuse(const SubtaskVelocities& v, const FusionGains& gains, const Vec3& uav,
                 const std::optional<Vec3>& obstacle, double v_max) {
  Vec3 out;
  if (v.avoidance_active) {
    if (!obstacle)
      throw InvalidArgumentError("fuse: avoidance active without an obstacle position");
    Mat3 proj = null_projector(uav, *obstacle);
    out = v.avoidance * gains.k1 + v.sensing * gains.k2 + proj.mul(v.path_following);
  } else {
    out = v.sensing * gains.k2 + v.path_following;
  }
  return clip_norm(out, v_max);
}

}  // namespace formsim
