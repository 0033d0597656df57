#include <catch2/catch_amalgamated.hpp>

#include "formsim/formation.hpp"

using namespace formsim;

TEST_CASE("assign_vfts places targets on the circle at leader altitude") {
  VirtualLeader leader{{100, 100, 50}, {2, 0, 0}};
  FormationConfig cfg = FormationConfig::even(5, 20.0, 5.0, 5.0);
  auto vfts = assign_vfts(leader, cfg);
  REQUIRE(vfts.size() == 5);
  for (const Vec3& v : vfts) {
    CHECK((v - leader.position).norm() == Catch::Approx(20.0));
    CHECK(v.z == 50.0);
  }
  // beta = 0 with bearing pi/4.
  CHECK(vfts[0].x == Catch::Approx(114.1421356237).margin(1e-4));
  CHECK(vfts[0].y == Catch::Approx(114.1421356237).margin(1e-4));
}

TEST_CASE("assign_vfts antipodal target for beta = pi") {
  VirtualLeader leader{{100, 100, 50}, {}};
  FormationConfig cfg = FormationConfig::even(1, 20.0, 5.0, 5.0);
  cfg.betas[0] = kPi;
  auto vfts = assign_vfts(leader, cfg);
  CHECK(vfts[0].x == Catch::Approx(85.8578643763).margin(1e-4));
  CHECK(vfts[0].y == Catch::Approx(85.8578643763).margin(1e-4));
  CHECK(vfts[0].z == 50.0);
}

TEST_CASE("assign_vfts is invariant under adding 2 pi to a beta") {
  VirtualLeader leader{{-40, 70, 12}, {}};
  FormationConfig cfg = FormationConfig::even(3, 15.0, 5.0, 5.0);
  auto base = assign_vfts(leader, cfg);
  cfg.betas[1] += 2.0 * kPi;
  auto shifted = assign_vfts(leader, cfg);
  for (int i = 0; i < 3; ++i) CHECK((base[i] - shifted[i]).norm() < 1e-9);
}

TEST_CASE("assign_vfts honours overrides and rejects the origin") {
  VirtualLeader leader{{100, 100, 50}, {}};
  FormationConfig cfg = FormationConfig::even(2, 20.0, 5.0, 5.0);
  std::vector<Vec3> ovr{{1, 2, 3}, {4, 5, 6}};
  auto vfts = assign_vfts(leader, cfg, ovr);
  CHECK(vfts[0].x == 1.0);
  CHECK(vfts[1].z == 6.0);

  VirtualLeader origin{{0, 0, 10}, {}};
  CHECK_THROWS_AS(assign_vfts(origin, cfg), DegenerateGeometryError);
}

TEST_CASE("follow_errors basics") {
  VirtualLeader leader{{100, 100, 50}, {2, 0, 0}};
  UavState at_target = make_uav_state({114.1421356237, 114.1421356237, 50}, {2, 0, 0});
  FollowErrors zero = follow_errors(at_target, {114.1421356237, 114.1421356237, 50}, leader);
  CHECK(zero.distance == 0.0);
  CHECK(zero.speed == 0.0);

  UavState off = make_uav_state({0, 0, 0}, {0, 0, 0});
  CHECK(follow_errors(off, {3, 4, 0}, leader).distance == Catch::Approx(5.0));

  UavState scenario = make_uav_state({100, 100, 50}, {1, 0, 0});
  FollowErrors e = follow_errors(scenario, {114.1421356237, 114.1421356237, 50}, leader);
  CHECK(e.distance == Catch::Approx(20.0).margin(1e-6));
  CHECK(e.speed == Catch::Approx(1.0));
}

TEST_CASE("follow_errors is translation invariant") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    Vec3 shift{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100)};
    Vec3 pos{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    Vec3 vft{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    VirtualLeader leader{{rng.uniform(-10, 10), 0, 0}, {1, 2, 3}};
    UavState u = make_uav_state(pos, {0.5, -0.5, 0});
    FollowErrors a = follow_errors(u, vft, leader);
    VirtualLeader moved{leader.position + shift, leader.velocity};
    UavState u2 = make_uav_state(pos + shift, u.velocity);
    FollowErrors b = follow_errors(u2, vft + shift, moved);
    CHECK(a.distance == Catch::Approx(b.distance).margin(1e-9));
    CHECK(a.speed == b.speed);
  }
}

TEST_CASE("safety_report boundary semantics and pentagon chord") {
  FormationConfig cfg = FormationConfig::even(2, 20.0, 5.0, 5.0);
  std::vector<Vec3> pair{{0, 0, 0}, {5, 0, 0}};
  SafetyReport r = safety_report(pair, std::nullopt, cfg);
  CHECK(r.min_pair_distance == Catch::Approx(5.0));
  CHECK(r.separation_ok);  // Eq is non-strict

  SafetyReport obs = safety_report(pair, Vec3{0, 4.9, 0}, cfg);
  CHECK_FALSE(obs.clearance_ok);

  FormationConfig penta = FormationConfig::even(5, 20.0, 5.0, 5.0);
  VirtualLeader leader{{100, 100, 50}, {}};
  auto vfts = assign_vfts(leader, penta);
  SafetyReport pr = safety_report(vfts, std::nullopt, penta);
  CHECK(pr.min_pair_distance == Catch::Approx(2.0 * 20.0 * std::sin(kPi / 5.0)).margin(1e-9));
  CHECK(pr.separation_ok);
}

TEST_CASE("safety_report flags are monotone in the thresholds") {
  FormationConfig cfg = FormationConfig::even(3, 20.0, 10.0, 10.0);
  std::vector<Vec3> pos{{0, 0, 0}, {12, 0, 0}, {0, 12, 0}};
  Vec3 obstacle{30, 0, 0};
  SafetyReport tight = safety_report(pos, obstacle, cfg);
  FormationConfig loose = cfg;
  loose.min_separation = 5.0;
  loose.min_obstacle_clearance = 5.0;
  SafetyReport relaxed = safety_report(pos, obstacle, loose);
  CHECK((int(relaxed.separation_ok) >= int(tight.separation_ok)));
  CHECK((int(relaxed.clearance_ok) >= int(tight.clearance_ok)));
}
