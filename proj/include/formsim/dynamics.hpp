#pragma once

// Point-mass UAV kinetics with virtual-control integration, conversion of
// virtual accelerations to (bank angle, load factor, thrust), and the
// constant-velocity Markov obstacle model.

#include "formsim/numerics.hpp"

namespace formsim {

struct UavState {
  Vec3 position;               // m
  Vec3 velocity;               // m/s
  double track_angle = 0.0;    // chi, rad, atan2(vy, vx)
  double heading_angle = 0.0;  // gamma, rad, atan2(vz, |v_xy|)
  double mass = 1.0;           // kg
};

inline double track_angle_of(const Vec3& v) { return std::atan2(v.y, v.x); }

inline double heading_angle_of(const Vec3& v) {
  return std::atan2(v.z, std::sqrt(v.x * v.x + v.y * v.y));
}

inline UavState make_uav_state(Vec3 position, Vec3 velocity, double mass = 1.0) {
  UavState s;
  s.position = position;
  s.velocity = velocity;
  s.mass = mass;
  if (velocity.norm() > 0.0) {
    s.track_angle = track_angle_of(velocity);
    s.heading_angle = heading_angle_of(velocity);
  }
  return s;
}

// Semi-implicit Euler step of the virtual-control model: velocity first
// (norm-clipped to v_max), then position with the new velocity. Angles are
// recomputed from the new velocity; at zero speed they keep their old values.
inline UavState integrate_uav(const UavState& s, const Vec3& accel, double dt, double v_max) {
  if (!accel.finite()) throw InvalidArgumentError("integrate_uav: non-finite acceleration");
  if (dt <= 0.0) throw InvalidArgumentError("integrate_uav: dt must be positive");
  UavState n = s;
  n.velocity = clip_norm(s.velocity + accel * dt, v_max);
  n.position = s.position + n.velocity * dt;
  if (n.velocity.norm() > 0.0) {
    n.track_angle = track_angle_of(n.velocity);
    n.heading_angle = heading_angle_of(n.velocity);
  }
  return n;
}

struct ActualControls {
  double bank_angle = 0.0;   // phi, rad
  double load_factor = 0.0;  // n, dimensionless
  double thrust = 0.0;       // T, N
};

// Converts a virtual acceleration into the actual control variables.
// Drag is an input (default 0); no aerodynamic model is assumed.
inline ActualControls virtual_to_actual(const UavState& s, const Vec3& accel,
                                        double gravity = kGravity, double drag = 0.0) {
  const double speed = s.velocity.norm();
  if (speed <= 0.0) throw DegenerateGeometryError("virtual_to_actual: zero speed");
  const double chi = s.track_angle;
  const double gamma = s.heading_angle;
  const double along = accel.x * std::cos(chi) + accel.y * std::sin(chi);
  const double cross = accel.y * std::cos(chi) - accel.x * std::sin(chi);
  const double denom = std::cos(gamma) * (accel.z + gravity) - std::sin(gamma) * along;
  ActualControls c;
  if (std::abs(denom) < 1e-12) {
    // Unloaded lift (pure ballistic/vertical attitude): no bank can produce a
    // cross acceleration, so demanding one is singular; demanding none is a
    // zero-load-factor state with zero bank.
    if (std::abs(cross) >= 1e-12)
      throw DegenerateGeometryError("virtual_to_actual: singular attitude");
    c.bank_angle = 0.0;
  } else {
    c.bank_angle = std::atan(cross / denom);
  }
  c.load_factor = denom / (gravity * std::cos(c.bank_angle));
  c.thrust = (std::sin(gamma) * (accel.z + gravity) + std::cos(gamma) * along) * s.mass + drag;
  return c;
}

struct ObstacleState {
  Vec3 position;  // m
  Vec3 velocity;  // m/s
};

struct ObstacleModel {
  double dt = 1.0;      // s
  Mat sigma_v;          // 3x3 covariance of the perturbing acceleration
  ObstacleModel() : sigma_v(3, 3) {}
  explicit ObstacleModel(double dt_, Mat sigma = Mat(3, 3)) : dt(dt_), sigma_v(std::move(sigma)) {
    if (dt <= 0.0) throw InvalidArgumentError("ObstacleModel: dt must be positive");
    if (sigma_v.rows() != 3 || sigma_v.cols() != 3)
      throw InvalidArgumentError("ObstacleModel: sigma_v must be 3x3");
  }
};

// o' = Phi o + Gamma v, with Phi = [[I, dt I], [0, I]] and
// Gamma = [0.5 dt^2 I; dt I]. A null rng gives the noiseless step.
inline ObstacleState obstacle_step(const ObstacleState& o, const ObstacleModel& model,
                                   Rng* rng = nullptr) {
  Vec3 accel;
  if (rng != nullptr) {
    Mat l = cholesky_psd(model.sigma_v);
    double u[3] = {rng->gauss(0.0, 1.0), rng->gauss(0.0, 1.0), rng->gauss(0.0, 1.0)};
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int j = 0; j <= i; ++j) s += l(i, j) * u[j];
      accel[i] = s;
    }
  }
  ObstacleState n;
  n.position = o.position + o.velocity * model.dt + accel * (0.5 * model.dt * model.dt);
  n.velocity = o.velocity + accel * model.dt;
  return n;
}

}  // namespace formsim
