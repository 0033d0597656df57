#pragma once

// Information-level fusion at the master UAV: range/rate-difference
// measurement construction, two-step weighted least squares (TWLS) solution
// for obstacle position and velocity, and the formation-level joint CRLB
// (eps_P, eps_V) with its analytic gradient w.r.t. UAV positions.

#include "formsim/dynamics.hpp"
#include "formsim/numerics.hpp"

namespace formsim {

struct UavPV {
  Vec3 position;
  Vec3 velocity;
};

struct LinkMeasurement {
  double range = 0.0;       // r_i, m
  double range_rate = 0.0;  // rdot_i, m/s (positive = receding)
  double range_var = 0.0;   // sigma_{r,i}^2, m^2
  double rate_var = 0.0;    // sigma_{v,i}^2, (m/s)^2
};

// Exact per-link range and range rate for a given UAV state and obstacle.
inline LinkMeasurement true_link(const UavPV& uav, const ObstacleState& obstacle) {
  Vec3 d = obstacle.position - uav.position;
  double r = d.norm();
  if (r <= 0.0) throw DegenerateGeometryError("true_link: obstacle co-located with UAV");
  LinkMeasurement m;
  m.range = r;
  m.range_rate = d.dot(obstacle.velocity - uav.velocity) / r;
  return m;
}

struct MeasurementSet {
  std::vector<double> range_diffs;  // r_i - r_1, i = 2..P
  std::vector<double> rate_diffs;   // rdot_i - rdot_1
  Mat covariance;                   // Q = diag(Q_r, Q_v), 2(P-1) square
};

// Differences referenced to link 0 (the MUAV) and the diag-plus-rank-one
// covariance blocks Q_r, Q_v built from the per-link variances.
inline MeasurementSet build_measurements(std::span<const LinkMeasurement> links) {
  const int p = int(links.size());
  if (p < 2) throw NotReadyError("build_measurements: need at least two links");
  const int k = p - 1;
  MeasurementSet ms;
  ms.range_diffs.resize(k);
  ms.rate_diffs.resize(k);
  ms.covariance = Mat(2 * k, 2 * k);
  for (int i = 1; i < p; ++i) {
    ms.range_diffs[i - 1] = links[i].range - links[0].range;
    ms.rate_diffs[i - 1] = links[i].range_rate - links[0].range_rate;
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      ms.covariance(i, j) = links[0].range_var + (i == j ? links[i + 1].range_var : 0.0);
      ms.covariance(k + i, k + j) = links[0].rate_var + (i == j ? links[i + 1].rate_var : 0.0);
    }
  }
  return ms;
}

struct ObstacleEstimate {
  Vec3 position;
  Vec3 velocity;
  bool stage2_ok = true;  // false: stage-2 refinement failed, stage-1 returned
};

namespace detail {

struct StageOne {
  Vec3 s, sdot;
  double r1 = 0.0, r1dot = 0.0;
  Mat covariance{8, 8};
};

inline StageOne solve_stage_one(const MeasurementSet& meas, std::span<const UavPV> uavs,
                                const Mat& weight) {
  const int p = int(uavs.size());
  const int k = p - 1;
  Mat g(2 * k, 8);
  std::vector<double> h(2 * k);
  for (int i = 1; i < p; ++i) {
    const Vec3 du = uavs[i].position - uavs[0].position;
    const Vec3 dv = uavs[i].velocity - uavs[0].velocity;
    const double rd = meas.range_diffs[i - 1];
    const double vd = meas.rate_diffs[i - 1];
    const int rr = i - 1;      // range row
    const int vr = k + i - 1;  // rate row
    for (int c = 0; c < 3; ++c) {
      g(rr, c) = 2.0 * du[c];
      g(vr, c) = 2.0 * dv[c];
      g(vr, 4 + c) = 2.0 * du[c];
    }
    g(rr, 3) = 2.0 * rd;
    g(vr, 3) = 2.0 * vd;
    g(vr, 7) = 2.0 * rd;
    h[rr] = uavs[i].position.norm_sq() - uavs[0].position.norm_sq() - rd * rd;
    h[vr] = 2.0 * (uavs[i].velocity.dot(uavs[i].position) -
                   uavs[0].velocity.dot(uavs[0].position)) -
            2.0 * rd * vd;
  }
  Mat gt = g.transpose();
  Mat gtw = gt * weight;
  Mat normal = gtw * g;
  std::vector<double> rhs = gtw.mul(h);
  std::vector<double> zeta;
  try {
    zeta = solve_spd(normal, rhs);
  } catch (const SingularMatrixError&) {
    throw DegenerateGeometryError("twls_estimate: rank-deficient stage-1 geometry");
  }
  StageOne out;
  out.s = {zeta[0], zeta[1], zeta[2]};
  out.r1 = zeta[3];
  out.sdot = {zeta[4], zeta[5], zeta[6]};
  out.r1dot = zeta[7];
  try {
    out.covariance = inverse_spd(normal);
  } catch (const SingularMatrixError&) {
    throw DegenerateGeometryError("twls_estimate: singular stage-1 covariance");
  }
  return out;
}

}  // namespace detail

// Two-step weighted least squares: a linearized WLS pass with weight Q^{-1},
// one reweighting pass with the standard diagonal scaling built from the
// stage-1 ranges, then the squared-variable refinement stage. A failed
// refinement (negative squared coordinate or singular scaling) falls back to
// the stage-1 estimate with stage2_ok = false.
inline ObstacleEstimate twls_estimate(const MeasurementSet& meas, std::span<const UavPV> uavs) {
  const int p = int(uavs.size());
  if (2 * (p - 1) < 8)
    throw NotReadyError("twls_estimate: need at least five UAVs for 8 stage-1 unknowns");
  if (int(meas.range_diffs.size()) != p - 1 || int(meas.rate_diffs.size()) != p - 1)
    throw InvalidArgumentError("twls_estimate: measurement count mismatch");
  const int k = p - 1;

  Mat w0;
  try {
    w0 = inverse_spd(meas.covariance);
  } catch (const SingularMatrixError&) {
    throw InvalidArgumentError("twls_estimate: covariance not positive definite");
  }
  detail::StageOne first = detail::solve_stage_one(meas, uavs, w0);

  // Reweight with B1 Q B1^T, B1 built from the stage-1 geometry.
  Mat b1(2 * k, 2 * k);
  for (int i = 1; i < p; ++i) {
    Vec3 d = first.s - uavs[i].position;
    double ri = d.norm();
    if (ri <= 0.0) throw DegenerateGeometryError("twls_estimate: obstacle co-located with UAV");
    double ridot = d.dot(first.sdot - uavs[i].velocity) / ri;
    b1(i - 1, i - 1) = 2.0 * ri;
    b1(k + i - 1, i - 1) = 2.0 * ridot;
    b1(k + i - 1, k + i - 1) = 2.0 * ri;
  }
  detail::StageOne stage1 = first;
  try {
    Mat w1 = inverse_spd(b1 * meas.covariance * b1.transpose());
    stage1 = detail::solve_stage_one(meas, uavs, w1);
  } catch (const SingularMatrixError&) {
    // Keep the first-pass solution when the reweighting scaling is singular.
  }

  if (!(stage1.r1 > 0.0))
    throw DegenerateGeometryError("twls_estimate: nonpositive reference range");

  const Vec3 d = stage1.s - uavs[0].position;
  const Vec3 ddot = stage1.sdot - uavs[0].velocity;

  ObstacleEstimate fallback{stage1.s, stage1.sdot, false};

  // Stage 2: squared-variable system zeta_2 = [d o d; ddot o d].
  Mat g2(8, 6);
  std::vector<double> h2(8);
  for (int j = 0; j < 3; ++j) {
    g2(j, j) = 1.0;
    h2[j] = d[j] * d[j];
    g2(4 + j, 3 + j) = 1.0;
    h2[4 + j] = d[j] * ddot[j];
  }
  for (int j = 0; j < 3; ++j) {
    g2(3, j) = 1.0;
    g2(7, 3 + j) = 1.0;
  }
  h2[3] = stage1.r1 * stage1.r1;
  h2[7] = stage1.r1 * stage1.r1dot;

  Mat b2(8, 8);
  for (int j = 0; j < 3; ++j) {
    b2(j, j) = 2.0 * d[j];
    b2(4 + j, j) = ddot[j];
    b2(4 + j, 4 + j) = d[j];
  }
  b2(3, 3) = 2.0 * stage1.r1;
  b2(7, 3) = stage1.r1dot;
  b2(7, 7) = stage1.r1;

  std::vector<double> zeta2;
  try {
    Mat w2 = inverse_spd(b2 * stage1.covariance * b2.transpose());
    Mat g2t = g2.transpose();
    Mat g2tw = g2t * w2;
    zeta2 = solve_spd(g2tw * g2, g2tw.mul(h2));
  } catch (const SingularMatrixError&) {
    return fallback;
  }
  for (int j = 0; j < 3; ++j)
    if (!(zeta2[j] > 0.0)) return fallback;

  ObstacleEstimate est;
  est.stage2_ok = true;
  for (int j = 0; j < 3; ++j) {
    const double sign = d[j] < 0.0 ? -1.0 : 1.0;
    const double root = std::sqrt(zeta2[j]);
    est.position[j] = uavs[0].position[j] + sign * root;
    est.velocity[j] = uavs[0].velocity[j] + sign * (zeta2[3 + j] / root);
  }
  return est;
}

struct FormationCrlb {
  Mat crlb_pv{6, 6};
  double pos_error = 0.0;  // eps_P = sqrt(tr CRLB[0:3, 0:3]), m
  double vel_error = 0.0;  // eps_V = sqrt(tr CRLB[3:6, 3:6]), m/s
};

namespace detail {

struct CrlbGeometry {
  std::vector<Vec3> a;     // (s - u_i) / r_i
  std::vector<Vec3> b;     // velocity rows
  std::vector<Vec3> d;     // s - u_i
  std::vector<Vec3> ddot;  // sdot - udot_i
  std::vector<double> r;
  std::vector<double> rdot;
};

inline CrlbGeometry crlb_geometry(std::span<const UavPV> uavs, const ObstacleState& ref) {
  const int p = int(uavs.size());
  CrlbGeometry g;
  g.a.resize(p);
  g.b.resize(p);
  g.d.resize(p);
  g.ddot.resize(p);
  g.r.resize(p);
  g.rdot.resize(p);
  for (int i = 0; i < p; ++i) {
    g.d[i] = ref.position - uavs[i].position;
    g.ddot[i] = ref.velocity - uavs[i].velocity;
    g.r[i] = g.d[i].norm();
    if (g.r[i] <= 0.0)
      throw DegenerateGeometryError("crlb_formation: reference co-located with UAV");
    g.a[i] = g.d[i] / g.r[i];
    g.rdot[i] = g.a[i].dot(g.ddot[i]);
    g.b[i] = g.ddot[i] / g.r[i] - g.d[i] * (g.rdot[i] / (g.r[i] * g.r[i]));
  }
  return g;
}

// dr/dgamma = [[A, 0], [B, A]] over the 6 obstacle unknowns.
inline Mat crlb_design(const CrlbGeometry& g) {
  const int p = int(g.a.size());
  const int k = p - 1;
  Mat dmat(2 * k, 6);
  for (int i = 1; i < p; ++i) {
    Vec3 arow = g.a[i] - g.a[0];
    Vec3 brow = g.b[i] - g.b[0];
    for (int c = 0; c < 3; ++c) {
      dmat(i - 1, c) = arow[c];
      dmat(k + i - 1, c) = brow[c];
      dmat(k + i - 1, 3 + c) = arow[c];
    }
  }
  return dmat;
}

}  // namespace detail

// 6x6 obstacle-block CRLB of the fused range/rate-difference measurement
// model, evaluated at the given linearization point.
inline FormationCrlb crlb_formation(std::span<const UavPV> uavs, const ObstacleState& ref,
                                    const Mat& covariance) {
  if (uavs.size() < 2) throw NotReadyError("crlb_formation: need at least two UAVs");
  detail::CrlbGeometry geom = detail::crlb_geometry(uavs, ref);
  Mat dmat = detail::crlb_design(geom);
  Mat qinv;
  try {
    qinv = inverse_spd(covariance);
  } catch (const SingularMatrixError&) {
    throw InvalidArgumentError("crlb_formation: covariance not positive definite");
  }
  Mat j = dmat.transpose() * qinv * dmat;
  FormationCrlb out;
  try {
    out.crlb_pv = inverse_spd(j);
  } catch (const SingularMatrixError&) {
    throw UnobservableError("crlb_formation: singular Fisher information for the geometry");
  }
  out.pos_error = std::sqrt(out.crlb_pv.trace(0, 3));
  out.vel_error = std::sqrt(out.crlb_pv.trace(3, 6));
  return out;
}

// Analytic gradient of eps_P with respect to every UAV position, holding UAV
// velocities and the linearization point fixed. Used by the variable-formation
// optimizer; validated against central differences in the test suite.
inline std::vector<Vec3> crlb_formation_position_gradient(std::span<const UavPV> uavs,
                                                          const ObstacleState& ref,
                                                          const Mat& covariance) {
  const int p = int(uavs.size());
  detail::CrlbGeometry geom = detail::crlb_geometry(uavs, ref);
  Mat dmat = detail::crlb_design(geom);
  Mat qinv = inverse_spd(covariance);
  Mat j = dmat.transpose() * qinv * dmat;
  Mat jinv;
  try {
    jinv = inverse_spd(j);
  } catch (const SingularMatrixError&) {
    throw UnobservableError("crlb_formation_position_gradient: singular information matrix");
  }
  const double eps_p = std::sqrt(jinv.trace(0, 3));

  // T = tr(S J^{-1}); dT = -2 sum_rc (Q^{-1} D J^{-1} S J^{-1})_rc dD_rc.
  const int k = p - 1;
  Mat m(6, 6);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += jinv(a, c) * jinv(c, b);
      m(a, b) = s;
    }
  Mat kmat = qinv * dmat * m;  // 2k x 6

  std::vector<Mat3> pa(p), rb(p);
  for (int i = 0; i < p; ++i) {
    const double r = geom.r[i];
    pa[i] = (Mat3::outer(geom.a[i], geom.a[i]) - Mat3::identity()) * (1.0 / r);
    rb[i] = (Mat3::outer(geom.ddot[i], geom.a[i]) + Mat3::outer(geom.d[i], geom.b[i]) +
             (Mat3::identity() - Mat3::outer(geom.a[i], geom.a[i]) * 2.0) * geom.rdot[i]) *
            (1.0 / (r * r));
  }

  std::vector<Vec3> grad(p);
  for (int i = 1; i < p; ++i) {
    const int rr = i - 1;
    const int vr = k + i - 1;
    Vec3 sa{kmat(rr, 0) + kmat(vr, 3), kmat(rr, 1) + kmat(vr, 4), kmat(rr, 2) + kmat(vr, 5)};
    Vec3 sb{kmat(vr, 0), kmat(vr, 1), kmat(vr, 2)};
    grad[i] += pa[i].mul_left(sa) + rb[i].mul_left(sb);
    grad[0] -= pa[0].mul_left(sa) + rb[0].mul_left(sb);
  }
  const double scale = -2.0 / (2.0 * eps_p);
  for (Vec3& g : grad) g = g * scale;
  return grad;
}

}  // namespace formsim
