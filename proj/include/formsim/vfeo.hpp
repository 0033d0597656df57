#pragma once

// Variable-formation enhanced obstacle position estimation: when the
// predicted formation CRLB exceeds its threshold, finds next-cycle UAV
// positions minimizing eps_P under the circle, altitude, speed, separation,
// and clearance constraints via an exterior penalty and steepest descent.
//
// The default parameterization is one circle angle per UAV, which satisfies
// the circle and altitude equalities by construction; the full Cartesian
// penalty remains available for fidelity checks.

#include "formsim/formation.hpp"
#include "formsim/fusion.hpp"
#include "formsim/numerics.hpp"

namespace formsim {

struct VfeoContext {
  std::vector<Vec3> current_positions;  // u(k)
  VirtualLeader leader_next;            // p_l(k+1), pdot_l(k+1)
  ObstacleState predicted_obstacle;     // model-propagated estimate at k+1
  std::vector<Vec3> candidate_vfts;     // formula VFTs at k+1 (starting point)
  Vec3 formation_velocity;              // nominal UAV velocity for the rate rows
  Mat covariance;                       // Q from the per-link CRLBs
  double radius = 20.0;                 // r_f
  double min_separation = 5.0;          // r_min
  double min_obstacle_clearance = 5.0;  // r_s
  double v_max = 78.0;
  double dt = 1.0;
  double crlb_threshold = 0.5;  // zeta, m

  int count() const { return int(current_positions.size()); }

  void validate() const {
    if (current_positions.empty() || current_positions.size() != candidate_vfts.size())
      throw InvalidArgumentError("vfeo: position/candidate count mismatch");
    if (crlb_threshold <= 0.0) throw InvalidArgumentError("vfeo: threshold must be positive");
    if (radius <= 0.0 || dt <= 0.0 || v_max <= 0.0)
      throw InvalidArgumentError("vfeo: geometry parameters must be positive");
  }
};

namespace detail {

inline std::vector<UavPV> with_formation_velocity(std::span<const Vec3> positions,
                                                  const Vec3& velocity) {
  std::vector<UavPV> uavs(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) uavs[i] = {positions[i], velocity};
  return uavs;
}

}  // namespace detail

// eps_P of the formation CRLB at the given candidate positions.
inline double vfeo_position_error(std::span<const Vec3> positions, const VfeoContext& ctx) {
  auto uavs = detail::with_formation_velocity(positions, ctx.formation_velocity);
  return crlb_formation(uavs, ctx.predicted_obstacle, ctx.covariance).pos_error;
}

inline std::pair<bool, double> should_trigger(const VfeoContext& ctx) {
  ctx.validate();
  double eps = vfeo_position_error(ctx.candidate_vfts, ctx);
  return {eps > ctx.crlb_threshold, eps};
}

// Exterior penalty of the constrained problem: the objective plus mu times
// squared equality residuals (circle, altitude) and squared inequality
// violations (speed, pairwise separation, obstacle clearance).
inline double penalty(std::span<const Vec3> candidate, const VfeoContext& ctx, double mu) {
  if (mu <= 0.0) throw InvalidArgumentError("penalty: mu must be positive");
  const int p = ctx.count();
  double q = vfeo_position_error(candidate, ctx);
  double acc = 0.0;
  for (int i = 0; i < p; ++i) {
    const Vec3& u = candidate[i];
    const double circle = (ctx.leader_next.position - u).norm() - ctx.radius;
    const double altitude = ctx.leader_next.position.z - u.z;
    acc += circle * circle + altitude * altitude;
    const double speed_violation =
        std::max(0.0, (u - ctx.current_positions[i]).norm() - ctx.v_max * ctx.dt);
    acc += speed_violation * speed_violation;
    const double clearance_violation =
        std::max(0.0, ctx.min_obstacle_clearance - (ctx.predicted_obstacle.position - u).norm());
    acc += clearance_violation * clearance_violation;
    for (int j = i + 1; j < p; ++j) {
      const double sep_violation =
          std::max(0.0, ctx.min_separation - (u - candidate[j]).norm());
      acc += sep_violation * sep_violation;
    }
  }
  return q + mu * acc;
}

// Analytic gradient of penalty() w.r.t. the Cartesian candidate positions.
inline std::vector<Vec3> penalty_gradient(std::span<const Vec3> candidate,
                                          const VfeoContext& ctx, double mu) {
  const int p = ctx.count();
  auto uavs = detail::with_formation_velocity(candidate, ctx.formation_velocity);
  std::vector<Vec3> grad =
      crlb_formation_position_gradient(uavs, ctx.predicted_obstacle, ctx.covariance);
  for (int i = 0; i < p; ++i) {
    const Vec3& u = candidate[i];
    Vec3 radial = u - ctx.leader_next.position;
    const double rn = radial.norm();
    if (rn > 0.0) grad[i] += radial * (2.0 * mu * (rn - ctx.radius) / rn);
    grad[i].z += 2.0 * mu * (u.z - ctx.leader_next.position.z);
    Vec3 disp = u - ctx.current_positions[i];
    const double dn = disp.norm();
    const double speed_violation = std::max(0.0, dn - ctx.v_max * ctx.dt);
    if (speed_violation > 0.0 && dn > 0.0) grad[i] += disp * (2.0 * mu * speed_violation / dn);
    Vec3 from_obstacle = u - ctx.predicted_obstacle.position;
    const double on = from_obstacle.norm();
    const double clearance_violation = std::max(0.0, ctx.min_obstacle_clearance - on);
    if (clearance_violation > 0.0 && on > 0.0)
      grad[i] -= from_obstacle * (2.0 * mu * clearance_violation / on);
    for (int j = 0; j < p; ++j) {
      if (j == i) continue;
      Vec3 d = u - candidate[j];
      const double sn = d.norm();
      const double sep_violation = std::max(0.0, ctx.min_separation - sn);
      if (sep_violation > 0.0 && sn > 0.0) grad[i] -= d * (2.0 * mu * sep_violation / sn);
    }
  }
  return grad;
}

struct VfeoResult {
  std::vector<Vec3> positions;       // u*(k+1)
  double achieved_pos_error = 0.0;   // eps_P at the returned positions
  double initial_pos_error = 0.0;    // eps_P at the formula VFTs
  int iterations = 0;
  bool triggered = false;
  std::string diagnostic;
};

// Largest violation of the speed, separation, and clearance inequalities.
inline double max_inequality_violation(std::span<const Vec3> positions,
                                       const VfeoContext& ctx) {
  double v = 0.0;
  for (size_t i = 0; i < positions.size(); ++i) {
    v = std::max(v, (positions[i] - ctx.current_positions[i]).norm() - ctx.v_max * ctx.dt);
    v = std::max(v, ctx.min_obstacle_clearance -
                        (ctx.predicted_obstacle.position - positions[i]).norm());
    for (size_t j = i + 1; j < positions.size(); ++j)
      v = std::max(v, ctx.min_separation - (positions[i] - positions[j]).norm());
  }
  return v;
}

namespace detail {

inline Vec3 position_from_angle(const VfeoContext& ctx, double angle) {
  return ctx.leader_next.position + Vec3{ctx.radius * std::cos(angle),
                                         ctx.radius * std::sin(angle), 0.0};
}

inline std::vector<Vec3> positions_from_angles(const VfeoContext& ctx,
                                               std::span<const double> angles) {
  std::vector<Vec3> u(angles.size());
  for (size_t i = 0; i < angles.size(); ++i) u[i] = position_from_angle(ctx, angles[i]);
  return u;
}

inline std::vector<double> angle_gradient(const VfeoContext& ctx,
                                          std::span<const double> angles, double mu) {
  std::vector<Vec3> u = positions_from_angles(ctx, angles);
  std::vector<Vec3> gu = penalty_gradient(u, ctx, mu);
  std::vector<double> g(angles.size());
  for (size_t i = 0; i < angles.size(); ++i) {
    Vec3 du{-ctx.radius * std::sin(angles[i]), ctx.radius * std::cos(angles[i]), 0.0};
    g[i] = du.dot(gu[i]);
  }
  return g;
}

// Snap Cartesian iterates exactly onto the circle at leader altitude.
inline std::vector<Vec3> project_to_circle(const VfeoContext& ctx,
                                           std::span<const Vec3> candidate) {
  std::vector<Vec3> out(candidate.size());
  for (size_t i = 0; i < candidate.size(); ++i) {
    Vec3 radial = candidate[i] - ctx.leader_next.position;
    double h = std::sqrt(radial.x * radial.x + radial.y * radial.y);
    Vec3 unit = h > 0.0 ? Vec3{radial.x / h, radial.y / h, 0.0} : Vec3{1.0, 0.0, 0.0};
    out[i] = ctx.leader_next.position + unit * ctx.radius;
  }
  return out;
}

struct DescentOutcome {
  std::vector<double> x;
  int iterations = 0;
  bool any_accepted = false;
  bool line_search_failed = false;
};

// Steepest descent along -grad with a safeguarded line search. The trial
// step starts from a Barzilai-Borwein secant estimate (unit step on the
// first iteration), expands by doubling while the sufficient-decrease bound
// keeps improving, and halves otherwise; accepted objective values are
// monotone by construction.
template <class F, class G>
DescentOutcome steepest_descent(std::vector<double> x, F&& f, G&& g, double tolerance,
                                int max_iters) {
  DescentOutcome out;
  double fx = f(x);
  std::vector<double> trial(x.size());
  std::vector<double> prev_x, prev_grad;
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> grad = g(x);
    double gnorm2 = 0.0;
    for (double v : grad) gnorm2 += v * v;
    if (std::sqrt(gnorm2) < tolerance) break;

    double t = 1.0;
    if (!prev_x.empty()) {
      double sy = 0.0, yy = 0.0;
      for (size_t i = 0; i < x.size(); ++i) {
        const double s = x[i] - prev_x[i];
        const double y = grad[i] - prev_grad[i];
        sy += s * y;
        yy += y * y;
      }
      if (sy > 0.0 && yy > 0.0) t = std::clamp(sy / yy, 1e-12, 1e12);
    }

    auto value_at = [&](double tt) {
      for (size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - tt * grad[i];
      return f(trial);
    };
    double ft = value_at(t);
    bool accepted = ft <= fx - 1e-4 * t * gnorm2;
    if (accepted) {
      for (int doublings = 0; doublings < 20; ++doublings) {
        const double t2 = 2.0 * t;
        const double ft2 = value_at(t2);
        if (!(ft2 <= fx - 1e-4 * t2 * gnorm2) || ft2 >= ft) break;
        t = t2;
        ft = ft2;
      }
    } else {
      for (int halvings = 0; halvings < 60 && !accepted; ++halvings) {
        t *= 0.5;
        ft = value_at(t);
        accepted = ft <= fx - 1e-4 * t * gnorm2;
      }
    }
    ++out.iterations;
    if (!accepted) {
      out.line_search_failed = true;
      break;
    }
    prev_x = x;
    prev_grad = std::move(grad);
    for (size_t i = 0; i < x.size(); ++i) x[i] = prev_x[i] - t * prev_grad[i];
    fx = ft;
    out.any_accepted = true;
  }
  out.x = std::move(x);
  return out;
}

}  // namespace detail

inline std::vector<double> default_mu_schedule() { return {1e2, 1e4, 1e6}; }

// Minimizes the penalty by steepest descent with escalating mu, warm-starting
// each stage from the previous iterate. Angle parameterization keeps the
// equalities exact; with use_cartesian the full penalty of the constrained
// problem is descended and the result snapped onto the circle at the end.
inline VfeoResult optimize(const VfeoContext& ctx,
                           std::span<const double> mu_schedule_in = {},
                           double tolerance = 1e-3, int max_iters = 500,
                           bool use_cartesian = false) {
  ctx.validate();
  std::vector<double> schedule(mu_schedule_in.begin(), mu_schedule_in.end());
  if (schedule.empty()) schedule = default_mu_schedule();

  auto [fires, eps0] = should_trigger(ctx);
  VfeoResult result;
  result.initial_pos_error = eps0;
  if (!fires) {
    result.positions = ctx.candidate_vfts;
    result.achieved_pos_error = eps0;
    result.triggered = false;
    return result;
  }

  // Exterior penalties leave O(grad/mu) inequality violations behind; the
  // schedule is extended until the active constraints settle within
  // tolerance.
  std::vector<double> restoration = schedule;
  for (int extra = 0; extra < 3; ++extra)
    restoration.push_back(restoration.back() * 100.0);

  int total_iterations = 0;
  bool failed_cold = false;
  std::vector<Vec3> final_positions;

  if (!use_cartesian) {
    std::vector<double> angles(ctx.count());
    for (int i = 0; i < ctx.count(); ++i) {
      Vec3 radial = ctx.candidate_vfts[i] - ctx.leader_next.position;
      angles[i] = std::atan2(radial.y, radial.x);
    }
    bool any_progress = false;
    for (size_t stage = 0; stage < restoration.size(); ++stage) {
      const double mu = restoration[stage];
      auto outcome = detail::steepest_descent(
          angles,
          [&](const std::vector<double>& a) {
            return penalty(detail::positions_from_angles(ctx, a), ctx, mu);
          },
          [&](const std::vector<double>& a) { return detail::angle_gradient(ctx, a, mu); },
          tolerance, max_iters);
      angles = outcome.x;
      total_iterations += outcome.iterations;
      any_progress = any_progress || outcome.any_accepted;
      if (outcome.line_search_failed && stage == 0 && !any_progress) failed_cold = true;
      if (stage + 1 >= schedule.size() &&
          max_inequality_violation(detail::positions_from_angles(ctx, angles), ctx) <= 1e-7)
        break;
    }
    final_positions = detail::positions_from_angles(ctx, angles);
    (void)any_progress;
  } else {
    std::vector<double> x(size_t(ctx.count()) * 3);
    for (int i = 0; i < ctx.count(); ++i)
      for (int c = 0; c < 3; ++c) x[size_t(i) * 3 + c] = ctx.candidate_vfts[i][c];
    auto unpack = [&](const std::vector<double>& v) {
      std::vector<Vec3> u(ctx.count());
      for (int i = 0; i < ctx.count(); ++i) u[i] = {v[size_t(i) * 3], v[size_t(i) * 3 + 1],
                                                    v[size_t(i) * 3 + 2]};
      return u;
    };
    bool any_progress = false;
    for (size_t stage = 0; stage < restoration.size(); ++stage) {
      const double mu = restoration[stage];
      auto outcome = detail::steepest_descent(
          x, [&](const std::vector<double>& v) { return penalty(unpack(v), ctx, mu); },
          [&](const std::vector<double>& v) {
            std::vector<Vec3> gu = penalty_gradient(unpack(v), ctx, mu);
            std::vector<double> g(v.size());
            for (int i = 0; i < ctx.count(); ++i)
              for (int c = 0; c < 3; ++c) g[size_t(i) * 3 + c] = gu[i][c];
            return g;
          },
          tolerance, max_iters);
      x = outcome.x;
      total_iterations += outcome.iterations;
      any_progress = any_progress || outcome.any_accepted;
      if (outcome.line_search_failed && stage == 0 && !any_progress) failed_cold = true;
      // Re-solve the next stage from the projected iterate so the stiff
      // equality terms do not dominate the descent direction.
      std::vector<Vec3> snapped = detail::project_to_circle(ctx, unpack(x));
      for (int i = 0; i < ctx.count(); ++i)
        for (int c = 0; c < 3; ++c) x[size_t(i) * 3 + c] = snapped[i][c];
      if (stage + 1 >= schedule.size() &&
          max_inequality_violation(snapped, ctx) <= 1e-7)
        break;
    }
    final_positions = detail::project_to_circle(ctx, unpack(x));
  }

  if (failed_cold) {
    result.positions = ctx.candidate_vfts;
    result.achieved_pos_error = eps0;
    result.triggered = false;
    result.diagnostic = "line search failed at the smallest mu; formula VFTs kept";
    return result;
  }

  double eps_final = vfeo_position_error(final_positions, ctx);
  result.iterations = total_iterations;
  result.triggered = true;
  if (eps_final <= eps0) {
    result.positions = std::move(final_positions);
    result.achieved_pos_error = eps_final;
  } else {
    // The incumbent never worsens: keep the formula layout.
    result.positions = ctx.candidate_vfts;
    result.achieved_pos_error = eps0;
    result.diagnostic = "optimizer did not improve on the uniform layout";
  }
  return result;
}

// v2_i = clip-to-norm((target_i - current_i) / dt, v_max).
inline std::vector<Vec3> positions_to_velocity(std::span<const Vec3> current,
                                               std::span<const Vec3> target, double dt,
                                               double v_max) {
  if (current.size() != target.size())
    throw InvalidArgumentError("positions_to_velocity: shape mismatch");
  if (dt <= 0.0) throw InvalidArgumentError("positions_to_velocity: dt must be positive");
  std::vector<Vec3> v(current.size());
  for (size_t i = 0; i < current.size(); ++i)
    v[i] = clip_norm((target[i] - current[i]) / dt, v_max);
  return v;
}

}  // namespace formsim
