#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hyperco/manifold.hpp"
#include "hyperco/rng.hpp"

using namespace hyperco;

namespace {

TangentAtOriginD random_tangent(Rng& rng, int dim, double max_norm) {
  TangentAtOriginD v;
  v.space.resize(static_cast<std::size_t>(dim));
  double n2 = 0.0;
  for (double& x : v.space) {
    x = rng.normal();
    n2 += x * x;
  }
  const double target = rng.uniform(0.0, max_norm);
  const double scale = n2 > 0.0 ? target / std::sqrt(n2) : 0.0;
  for (double& x : v.space) x *= scale;
  return v;
}

double tangent_norm(const TangentAtOriginD& v) {
  double n2 = 0.0;
  for (double x : v.space) n2 += x * x;
  return std::sqrt(n2);
}

}  // namespace

TEST_CASE("lorentz_inner definition and symmetry") {
  const Curvature c1(1.0);
  const auto o = origin_point(1, c1);
  CHECK(lorentz_inner(o, o) == -1.0);

  // sinh(1)^2 - cosh(1)^2 = -1
  LorentzPointD x{{1.1752012}, 1.5430806};
  CHECK_THAT(lorentz_inner(x, x), Catch::Matchers::WithinAbs(-1.0, 1e-6));

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    auto a = exp_map_origin(random_tangent(rng, 4, 3.0), c1);
    auto b = exp_map_origin(random_tangent(rng, 4, 3.0), c1);
    CHECK(lorentz_inner(a, b) == lorentz_inner(b, a));
  }

  LorentzPointD y{{1.0, 2.0}, 3.0};
  CHECK_THROWS_AS(lorentz_inner(x, y), std::invalid_argument);

  // Ambient-vector form, time coordinate last.
  std::vector<double> xa{1.1752012, 1.5430806};
  CHECK_THAT(lorentz_inner(std::span<const double>(xa), std::span<const double>(xa)),
             Catch::Matchers::WithinAbs(-1.0, 1e-6));
}

TEST_CASE("lift_spatial completes points onto the sheet") {
  const Curvature c1(1.0);
  auto p = lift_spatial<double>({0.0}, c1);
  CHECK(p.space[0] == 0.0);
  CHECK(p.time == 1.0);

  auto q = lift_spatial<double>({3.0, 4.0}, c1);
  CHECK_THAT(q.time, Catch::Matchers::WithinAbs(std::sqrt(26.0), 1e-12));
  CHECK(is_on_hyperboloid(q, c1));

  auto r = lift_spatial<double>({0.6}, Curvature(4.0));
  CHECK_THAT(r.time, Catch::Matchers::WithinAbs(0.7810249675906654, 1e-12));
  CHECK(is_on_hyperboloid(r, Curvature(4.0)));

  CHECK_THROWS_AS(lift_spatial<double>({std::nan("")}, c1), std::invalid_argument);
}

TEST_CASE("exp_map_origin matches the closed form") {
  const Curvature c1(1.0);
  auto at_zero = exp_map_origin(TangentAtOriginD{{0.0, 0.0}}, c1);
  CHECK(at_zero.space[0] == 0.0);
  CHECK(at_zero.space[1] == 0.0);
  CHECK(at_zero.time == 1.0);

  auto unit = exp_map_origin(TangentAtOriginD{{1.0, 0.0}}, c1);
  CHECK_THAT(unit.space[0], Catch::Matchers::WithinAbs(1.1752011936438014, 1e-12));
  CHECK(unit.space[1] == 0.0);
  CHECK_THAT(unit.time, Catch::Matchers::WithinAbs(1.5430806348152437, 1e-12));

  auto p = exp_map_origin(TangentAtOriginD{{0.3, 0.4}}, c1);
  CHECK_THAT(radial_distance(p, c1), Catch::Matchers::WithinAbs(0.5, 1e-9));

  CHECK_THROWS_AS(exp_map_origin(TangentAtOriginD{{1.0, std::nan("")}}, c1),
                  std::invalid_argument);
}

TEST_CASE("geodesic distance examples") {
  const Curvature c1(1.0);
  const auto o = origin_point(2, c1);
  CHECK(geodesic_distance(o, o, c1) == 0.0);

  auto unit = exp_map_origin(TangentAtOriginD{{1.0, 0.0}}, c1);
  CHECK_THAT(geodesic_distance(o, unit, c1), Catch::Matchers::WithinAbs(1.0, 1e-9));

  const Curvature c4(4.0);
  auto v = TangentAtOriginD{{0.15, 0.2}};  // norm 0.25
  auto p = exp_map_origin(v, c4);
  CHECK_THAT(geodesic_distance(origin_point(2, c4), p, c4),
             Catch::Matchers::WithinAbs(0.25, 1e-9));

  LorentzPointD off{{1.0, 1.0}, 1.0};  // far from the sheet
  CHECK_THROWS_AS(geodesic_distance(off, unit, c1), std::domain_error);
}

TEST_CASE("radial distance examples") {
  const Curvature c1(1.0);
  CHECK(radial_distance(origin_point(3, c1), c1) == 0.0);

  auto unit = exp_map_origin(TangentAtOriginD{{1.0}}, c1);
  CHECK_THAT(radial_distance(unit, c1), Catch::Matchers::WithinAbs(1.0, 1e-9));

  // Monotone in the spatial norm at fixed curvature.
  double prev = -1.0;
  for (double s : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const double r = radial_distance(lift_spatial<double>({s, 0.0}, c1), c1);
    CHECK(r > prev);
    prev = r;
  }

  // Agrees with the two-point distance to the origin.
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Curvature cv(i % 2 == 0 ? 1.0 : 4.0);
    auto p = exp_map_origin(random_tangent(rng, 3, 5.0), cv);
    CHECK_THAT(radial_distance(p, cv),
               Catch::Matchers::WithinAbs(geodesic_distance(p, origin_point(3, cv), cv), 1e-12));
  }
}

TEST_CASE("geodesic_point_from_origin walks the radial segment") {
  const Curvature c1(1.0);
  auto target = exp_map_origin(TangentAtOriginD{{1.0, 0.0}}, c1);

  auto start = geodesic_point_from_origin(target, 0.0, c1);
  CHECK(start.space[0] == 0.0);
  CHECK(start.time == 1.0);

  auto end = geodesic_point_from_origin(target, 1.0, c1);
  CHECK_THAT(end.space[0], Catch::Matchers::WithinAbs(target.space[0], 1e-6));
  CHECK_THAT(end.time, Catch::Matchers::WithinAbs(target.time, 1e-6));

  auto far = exp_map_origin(TangentAtOriginD{{2.0, 0.0}}, c1);  // radius 2
  auto mid = geodesic_point_from_origin(far, 0.5, c1);
  CHECK_THAT(radial_distance(mid, c1), Catch::Matchers::WithinAbs(1.0, 1e-6));

  CHECK_THROWS_AS(geodesic_point_from_origin(target, -0.1, c1), std::domain_error);
  CHECK_THROWS_AS(geodesic_point_from_origin(target, 1.1, c1), std::domain_error);
}

TEST_CASE("hyperboloid closure and radial isometry over random tangents") {
  for (const double c : {1.0, 4.0}) {
    const Curvature cv(c);
    Rng rng(7);
    // Absolute closure at 1e-9 is representable while sqrt(c)*|v| stays
    // moderate; the full |v| <= 10 range is covered by the scaled check
    // below and by the radial isometry bound.
    const double tight_norm = 7.0 / cv.sqrt_c();
    for (int i = 0; i < 2000; ++i) {
      auto v = random_tangent(rng, 8, tight_norm);
      auto p = exp_map_origin(v, cv);
      CHECK(closure_residual(p, cv) <= 1e-9);
    }
    for (int i = 0; i < 2000; ++i) {
      auto v = random_tangent(rng, 8, 10.0);
      auto p = exp_map_origin(v, cv);
      const double t = p.time;
      CHECK(closure_residual(p, cv) <= 1e-9 * std::max(1.0, c * t * t));
      CHECK(is_on_hyperboloid(p, cv));
      CHECK_THAT(radial_distance(p, cv), Catch::Matchers::WithinAbs(tangent_norm(v), 1e-9));
    }
  }
}

TEST_CASE("triangle inequality on random triples") {
  Rng rng(9);
  for (const double c : {1.0, 4.0}) {
    const Curvature cv(c);
    for (int i = 0; i < 1000; ++i) {
      auto x = exp_map_origin(random_tangent(rng, 4, 10.0), cv);
      auto y = exp_map_origin(random_tangent(rng, 4, 10.0), cv);
      auto z = exp_map_origin(random_tangent(rng, 4, 10.0), cv);
      CHECK(geodesic_distance(x, z, cv) <=
            geodesic_distance(x, y, cv) + geodesic_distance(y, z, cv) + 1e-9);
    }
  }
}

TEST_CASE("exp map is continuous down to denormal norms") {
  const Curvature c1(1.0);
  const auto o = origin_point(2, c1);
  for (double eps = 1.0; eps >= 1e-300; eps *= 1e-30) {
    auto p = exp_map_origin(TangentAtOriginD{{eps, eps}}, c1);
    REQUIRE(std::isfinite(p.time));
    REQUIRE(std::isfinite(p.space[0]));
    CHECK(geodesic_distance(p, o, c1) <= 2.0 * eps + 1e-12);
  }
}

TEST_CASE("log map inverts exp map") {
  Rng rng(13);
  for (const double c : {1.0, 2.5}) {
    const Curvature cv(c);
    for (int i = 0; i < 200; ++i) {
      auto v = random_tangent(rng, 5, 4.0);
      auto back = log_map_origin(exp_map_origin(v, cv), cv);
      for (std::size_t k = 0; k < v.space.size(); ++k)
        CHECK_THAT(back.space[k], Catch::Matchers::WithinAbs(v.space[k], 1e-9));
    }
  }
}
