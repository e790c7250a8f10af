#include "tensortomo/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tensortomo {

namespace {

// Second fundamental form of the centered circle through x in the direction of
// its unit tangent: Hess_g r (tau, tau) / |grad r|_g.
double circle_convexity(const Metric& metric, const Vec2& x) {
  const MetricAt m = metric.eval(x);
  const Christoffel gam = christoffel(m);
  const double r = x.norm();
  const Vec2 dr = x / r;
  Mat2 hess = (Mat2::Identity() - dr * dr.transpose()) / r;
  hess -= dr[0] * gam[0] + dr[1] * gam[1];
  const double grad_norm = std::sqrt(dr.dot(m.ginv * dr));
  const Vec2 tau = circle_frame(metric, x).tangent;
  return tau.dot(hess * tau) / grad_norm;
}

}  // namespace

SimplicityReport certify_simple(const Metric& metric, const Domain& domain,
                                const SimplicitySampling& sampling) {
  SimplicityReport rep;
  rep.boundary_convexity_min = std::numeric_limits<double>::infinity();
  for (const double radius : {domain.radius_M(), domain.radius_M1()}) {
    const int n = std::max(sampling.n_points, 8) * 4;
    for (int i = 0; i < n; ++i) {
      const double phi = 2.0 * M_PI * i / n;
      const Vec2 x(radius * std::cos(phi), radius * std::sin(phi));
      rep.boundary_convexity_min = std::min(rep.boundary_convexity_min, circle_convexity(metric, x));
    }
  }

  // Sturm separation: a conjugate pair anywhere on a maximal geodesic forces a
  // second zero of the Jacobi field started at its entry point.
  const double r1 = domain.radius_M1();
  const BoundaryFan fan =
      boundary_fan(metric, domain, Boundary::M1, sampling.n_points, sampling.n_dirs);
  rep.min_jacobi = std::numeric_limits<double>::infinity();
  for (const auto& e : fan.entries) {
    FlowState s0{e.x, e.omega, 0.0, 1.0};
    double t = 0.0;
    const WalkEnd end = walk(
        metric, s0, {0.0, r1}, sampling.step, default_cap(metric, e.x, r1),
        [&](const FlowState&, const FlowState& b, double s) {
          t += s;
          if (t > sampling.t_min) {
            rep.min_jacobi = std::min(rep.min_jacobi, std::abs(b.jac));
            if (b.jac <= 0.0) rep.conjugate_point_found = true;
          }
        },
        true);
    if (!end.exited) rep.escaped = false;
  }

  if (rep.boundary_convexity_min > 0.0 && !rep.conjugate_point_found && rep.escaped) {
    // Shoot between deterministic point pairs and check the endpoint residual.
    TwoPointOptions opts;
    opts.step = sampling.step;
    for (int k = 0; k < sampling.n_pairs; ++k) {
      const double a = 2.0 * M_PI * k / sampling.n_pairs;
      const double rx = 0.85 * r1 * (0.3 + 0.7 * ((k * 7) % 11) / 10.0);
      const Vec2 x(rx * std::cos(a), rx * std::sin(a));
      const Vec2 y(0.8 * r1 * std::cos(a + 2.3), 0.8 * r1 * std::sin(a + 2.3));
      try {
        const TwoPointSolution sol = two_point(metric, x, y, opts);
        GeodesicPath p;
        FlowState s0{x, sol.initial_direction};
        const WalkEnd end = walk(metric, s0, {0.0, std::numeric_limits<double>::infinity()},
                                 opts.step, sol.rho, [](const FlowState&, const FlowState&, double) {});
        rep.max_diffeo_residual = std::max(rep.max_diffeo_residual, (end.state.x - y).norm());
      } catch (const Error&) {
        rep.max_diffeo_residual = std::numeric_limits<double>::infinity();
      }
    }
  }
  return rep;
}

}  // namespace tensortomo
