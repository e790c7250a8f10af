#include "tensortomo/geodesic.hpp"

#include <doctest.h>

#include <cmath>

using namespace tensortomo;

namespace {

Metric conformal01() { return Metric::conformal({0.1, 1.0, Vec2::Zero()}); }

Vec2 unit_at(const Metric& m, const Vec2& x, double angle) {
  const auto e = orthonormal_frame(m.g(x));
  return std::cos(angle) * e[0] + std::sin(angle) * e[1];
}

}  // namespace

TEST_CASE("euclidean chords are exact") {
  const Domain d;
  const Metric m = Metric::euclidean();
  for (double beta : {-1.2, -0.4, 0.0, 0.7, 1.4}) {
    const Vec2 x(1.0, 0.0);
    const Vec2 omega(-std::cos(beta), std::sin(beta));
    const GeodesicPath p = trace(m, d, x, omega, Boundary::M);
    CHECK(std::abs(p.exit_time - 2.0 * std::cos(beta)) < 1e-8);
    CHECK(std::abs(p.exit_point.norm() - 1.0) < 1e-8);
    CHECK((p.exit_point - (x + p.exit_time * omega)).norm() < 1e-8);
    CHECK((p.exit_direction - omega).norm() < 1e-10);
  }
}

TEST_CASE("flow keeps unit speed") {
  const Metric m = Metric::perturbed(conformal01(), 0.4, TensorBump{}, 1.0);
  FlowState s{Vec2(0.1, 0.2), unit_at(m, Vec2(0.1, 0.2), 0.3)};
  for (int i = 0; i < 200; ++i) s = flow_step(m, s, 5e-3);
  CHECK(norm_g(m.g(s.x), s.v) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("conformal geodesics self-converge at fourth order") {
  // Position after unit arclength; the estimate approaches 4 from below.
  for (double amp : {0.1, 0.5}) {
    const Metric m = Metric::conformal({amp, 1.0, Vec2::Zero()});
    const Vec2 x(1.0, 0.0);
    std::vector<Vec2> end;
    for (double h : {0.05, 0.025, 0.0125}) {
      FlowState s{x, unit_at(m, x, M_PI - 0.5)};
      for (int i = 0; i < std::lround(1.0 / h); ++i) s = flow_step(m, s, h);
      end.push_back(s.x);
    }
    const double order = std::log2((end[0] - end[1]).norm() / (end[1] - end[2]).norm());
    CHECK(order >= 3.95);
    CHECK(order <= 4.2);
  }
}

TEST_CASE("reversed geodesics return to the start") {
  const Domain d;
  const Metric m = conformal01();
  for (double a : {0.8, 1.5, 2.3}) {
    const Vec2 x(0.0, -1.0);
    const Vec2 omega = unit_at(m, x, a);
    const GeodesicPath fwd = trace(m, d, x, omega, Boundary::M);
    const GeodesicPath back = trace(m, d, fwd.exit_point, -fwd.exit_direction, Boundary::M);
    CHECK((back.exit_point - x).norm() <= 1e-5);
    CHECK(back.exit_time == doctest::Approx(fwd.exit_time).epsilon(1e-6));
  }
}

TEST_CASE("walk reports exits and escapes") {
  const Metric m = Metric::euclidean();
  int steps = 0;
  const WalkEnd e = walk(m, FlowState{Vec2(0.0, 0.0), Vec2(1.0, 0.0)}, WalkBounds{0.0, 0.5}, 0.01, 10.0,
                         [&](const FlowState&, const FlowState&, double) { ++steps; });
  CHECK(e.exited);
  CHECK(e.state.x[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(steps == 50);
  const WalkEnd c = walk(m, FlowState{Vec2(0.0, 0.0), Vec2(1.0, 0.0)}, WalkBounds{0.0, 0.5}, 0.01, 0.2,
                         [](const FlowState&, const FlowState&, double) {});
  CHECK_FALSE(c.exited);
  CHECK_THROWS_AS(trace(m, Domain(), Vec2(0.0, 0.0), Vec2(2.0, 0.0), Boundary::M), Error);
}

TEST_CASE("integrate_along is exact for polynomial integrands on chords") {
  const Metric m = Metric::euclidean();
  const double v = integrate_along<double>(m, FlowState{Vec2(-1.0, 0.0), Vec2(1.0, 0.0)},
                                           WalkBounds{0.0, 1.0 + 1e-12}, 0.05, 10.0,
                                           [](const Vec2& x, const Vec2&) { return x[0] * x[0]; });
  CHECK(v == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("boundary fan measures") {
  const Domain d;
  for (const Metric& m : {Metric::euclidean(), conformal01()}) {
    const BoundaryFan fan = boundary_fan(m, d, Boundary::M, 64, 32);
    CHECK(fan.entries.size() == 64u * 32u);
    const double length = CircleArclength(m, 1.0).length();
    CHECK(fan.total_sigma() == doctest::Approx(M_PI * length).epsilon(1e-12));
    // integral of cos(beta) over (-pi/2, pi/2) by the midpoint rule
    CHECK(fan.total_mu() == doctest::Approx(2.0 * length).epsilon(1e-3));
    for (const FanEntry& e : fan.entries) {
      CHECK(norm_g(m.g(e.x), e.omega) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(e.omega.dot(e.x) < 0.0);
    }
  }
  CHECK(CircleArclength(Metric::euclidean(), 1.0).length() == doctest::Approx(2.0 * M_PI));
}

TEST_CASE("circle arclength inverts") {
  const CircleArclength c(conformal01(), 1.3);
  for (double s : {0.0, 0.7, 3.1, 6.0}) CHECK(c.arclength_at(c.angle_at(s)) == doctest::Approx(s).epsilon(1e-9));
}

TEST_CASE("two-point shooting") {
  const Metric e = Metric::euclidean();
  const TwoPointSolution s = two_point(e, Vec2(-0.3, 0.1), Vec2(0.4, 0.5));
  CHECK(s.converged);
  CHECK(s.rho == doctest::Approx(std::hypot(0.7, 0.4)).epsilon(1e-10));
  CHECK_THROWS_AS(two_point(e, Vec2(0.2, 0.2), Vec2(0.2, 0.2)), Error);

  const Metric m = conformal01();
  const Vec2 x(-0.5, 0.2), y(0.6, -0.3);
  const TwoPointSolution t = two_point(m, x, y);
  REQUIRE(t.converged);
  const GeodesicPath p = trace(m, Domain(), x, t.initial_direction, Boundary::M1);
  double best = 1e9;
  for (const auto& q : p.samples) best = std::min(best, (q.x - y).norm());
  CHECK(best < 2e-3);
  CHECK(t.hessian_mixed_det == doctest::Approx(mixed_hessian_det_fd(m, x, y)).epsilon(1e-4));
}
