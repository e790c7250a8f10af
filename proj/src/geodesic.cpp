#include "tensortomo/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tensortomo {

namespace {

struct Deriv {
  Vec2 dx;
  Vec2 dv;
  double dj = 0.0;
  double ddj = 0.0;
};

Deriv rhs(const Metric& metric, const FlowState& s, bool with_jacobi) {
  Deriv d;
  d.dx = s.v;
  if (metric.is_euclidean()) {
    d.dv.setZero();
    d.dj = s.djac;
    d.ddj = 0.0;
    return d;
  }
  const Christoffel gam = christoffel(metric, s.x);
  d.dv = Vec2(-s.v.dot(gam[0] * s.v), -s.v.dot(gam[1] * s.v));
  if (with_jacobi) {
    d.dj = s.djac;
    d.ddj = -gauss_curvature(metric, s.x) * s.jac;
  }
  return d;
}

FlowState advance(const FlowState& s, const Deriv& d, double h) {
  FlowState out;
  out.x = s.x + h * d.dx;
  out.v = s.v + h * d.dv;
  out.jac = s.jac + h * d.dj;
  out.djac = s.djac + h * d.ddj;
  return out;
}

Vec2 rotate_quarter(const Mat2& g, const Vec2& v) {
  Vec2 w(-v[1], v[0]);
  w -= dot_g(g, w, v) / dot_g(g, v, v) * v;
  return w / norm_g(g, w);
}

}  // namespace

FlowState flow_step(const Metric& metric, const FlowState& s0, double s, bool with_jacobi) {
  const Deriv k1 = rhs(metric, s0, with_jacobi);
  const Deriv k2 = rhs(metric, advance(s0, k1, 0.5 * s), with_jacobi);
  const Deriv k3 = rhs(metric, advance(s0, k2, 0.5 * s), with_jacobi);
  const Deriv k4 = rhs(metric, advance(s0, k3, s), with_jacobi);
  FlowState out;
  out.x = s0.x + s / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  out.v = s0.v + s / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.jac = s0.jac + s / 6.0 * (k1.dj + 2.0 * k2.dj + 2.0 * k3.dj + k4.dj);
  out.djac = s0.djac + s / 6.0 * (k1.ddj + 2.0 * k2.ddj + 2.0 * k3.ddj + k4.ddj);
  if (!metric.is_euclidean()) {
    out.v /= norm_g(metric.g(out.x), out.v);
  }
  return out;
}

FlowState hermite_midpoint(const Metric& metric, const FlowState& a, const FlowState& b, double s) {
  FlowState m;
  m.x = 0.5 * (a.x + b.x) + (s / 8.0) * (a.v - b.v);
  m.v = 1.5 * (b.x - a.x) / s - 0.25 * (a.v + b.v);
  m.v /= metric.is_euclidean() ? m.v.norm() : norm_g(metric.g(m.x), m.v);
  return m;
}

double default_cap(const Metric& metric, const Vec2& x0, double radius) {
  double scale = 1.0;
  for (const Vec2& p : {x0, Vec2(0.0, 0.0), Vec2(radius, 0.0), Vec2(0.0, radius)}) {
    const Eigen::SelfAdjointEigenSolver<Mat2> es(metric.g(p));
    scale = std::max(scale, std::sqrt(es.eigenvalues().maxCoeff()));
  }
  return 10.0 * 2.0 * radius * scale;
}

GeodesicPath trace(const Metric& metric, const Domain& domain, const Vec2& x, const Vec2& omega,
                   Boundary terminate_at, double step) {
  const double radius = boundary_radius(domain, terminate_at);
  const Mat2 g = metric.g(x);
  if (std::abs(norm_g(g, omega) - 1.0) > 1e-6) {
    throw Error(ErrorCode::NonUnitDirection, "direction is not g-unit at the start point");
  }
  if (x.norm() > radius + 1e-12) {
    throw Error(ErrorCode::RangeError, "start point outside the terminating circle");
  }
  GeodesicPath path;
  FlowState s0{x, omega};
  path.samples.push_back({0.0, x, omega});
  double t = 0.0;
  const WalkEnd end = walk(metric, s0, {0.0, radius}, step, default_cap(metric, x, radius),
                           [&](const FlowState&, const FlowState& b, double s) {
                             t += s;
                             path.samples.push_back({t, b.x, b.v});
                           });
  if (!end.exited) {
    throw Error(ErrorCode::EscapeFailure, "geodesic did not reach the boundary within the cap");
  }
  path.exit_time = end.t;
  path.exit_point = end.state.x;
  path.exit_direction = end.state.v;
  return path;
}

CircleArclength::CircleArclength(const Metric& metric, double radius, int resolution)
    : radius_(radius) {
  cumulative_.resize(resolution + 1);
  cumulative_[0] = 0.0;
  const double dphi = 2.0 * M_PI / resolution;
  auto speed = [&](double phi) {
    const Vec2 p(radius * std::cos(phi), radius * std::sin(phi));
    const Vec2 tangent(-radius * std::sin(phi), radius * std::cos(phi));
    return norm_g(metric.g(p), tangent);
  };
  double prev = speed(0.0);
  for (int i = 1; i <= resolution; ++i) {
    // Simpson on each cell; the speed is smooth and periodic.
    const double mid = speed((i - 0.5) * dphi);
    const double next = speed(i * dphi);
    cumulative_[i] = cumulative_[i - 1] + dphi / 6.0 * (prev + 4.0 * mid + next);
    prev = next;
  }
  length_ = cumulative_.back();
}

double CircleArclength::angle_at(double s) const {
  const int n = static_cast<int>(cumulative_.size()) - 1;
  s = std::fmod(s, length_);
  if (s < 0) s += length_;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const int i = std::clamp(static_cast<int>(it - cumulative_.begin()) - 1, 0, n - 1);
  const double frac = (s - cumulative_[i]) / (cumulative_[i + 1] - cumulative_[i]);
  return (i + frac) * 2.0 * M_PI / n;
}

double CircleArclength::arclength_at(double phi) const {
  const int n = static_cast<int>(cumulative_.size()) - 1;
  phi = std::fmod(phi, 2.0 * M_PI);
  if (phi < 0) phi += 2.0 * M_PI;
  const double u = phi / (2.0 * M_PI) * n;
  const int i = std::clamp(static_cast<int>(u), 0, n - 1);
  return cumulative_[i] + (u - i) * (cumulative_[i + 1] - cumulative_[i]);
}

double BoundaryFan::total_sigma() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.weight_sigma;
  return s;
}

double BoundaryFan::total_mu() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.weight_mu;
  return s;
}

BoundaryFan boundary_fan(const Metric& metric, const Domain& domain, Boundary circle, int n_points,
                         int n_dirs) {
  if (n_points < 4 || n_dirs < 4) {
    throw Error(ErrorCode::RangeError, "boundary fan needs at least 4 points and 4 directions");
  }
  BoundaryFan fan;
  fan.circle = circle;
  fan.radius = boundary_radius(domain, circle);
  fan.n_points = n_points;
  fan.n_dirs = n_dirs;
  const CircleArclength arc(metric, fan.radius);
  const double ds = arc.length() / n_points;
  const double dbeta = M_PI / n_dirs;
  fan.entries.reserve(static_cast<size_t>(n_points) * n_dirs);
  for (int i = 0; i < n_points; ++i) {
    const double phi = arc.angle_at(i * ds);
    const Vec2 x(fan.radius * std::cos(phi), fan.radius * std::sin(phi));
    const CircleFrame frame = circle_frame(metric, x);
    for (int j = 0; j < n_dirs; ++j) {
      const double beta = -0.5 * M_PI + (j + 0.5) * dbeta;
      FanEntry e;
      e.x = x;
      e.omega = -std::cos(beta) * frame.normal + std::sin(beta) * frame.tangent;
      e.weight_sigma = ds * dbeta;
      e.weight_mu = std::cos(beta) * e.weight_sigma;
      fan.entries.push_back(e);
    }
  }
  return fan;
}

namespace {

// Geodesic of g-length `length` from (x, omega), with the normal Jacobi field.
FlowState shoot(const Metric& metric, const Vec2& x, const Vec2& omega, double length, double step) {
  FlowState s0{x, omega, 0.0, 1.0};
  const WalkEnd end = walk(metric, s0, {0.0, std::numeric_limits<double>::infinity()}, step, length,
                           [](const FlowState&, const FlowState&, double) {}, true);
  return end.state;
}

}  // namespace

TwoPointSolution two_point(const Metric& metric, const Vec2& x, const Vec2& y,
                           const TwoPointOptions& opts) {
  if ((x - y).norm() < 1e-14) {
    throw Error(ErrorCode::CoincidentPoints, "two-point problem needs distinct points");
  }
  TwoPointSolution sol;
  if (metric.is_euclidean()) {
    const Vec2 d = y - x;
    sol.rho = d.norm();
    sol.final_direction = sol.initial_direction = d / sol.rho;
    sol.initial_angle = std::atan2(d[1], d[0]);
    sol.grad_y = sol.final_direction;
    sol.grad_x = -sol.initial_direction;
    sol.hessian_mixed_det = 1.0;
    sol.jacobi_end = sol.rho;
    sol.converged = true;
    return sol;
  }

  const MetricAt mx = metric.eval(x);
  const auto frame = orthonormal_frame(mx.g);
  // Initial guess: straight chord, measured at the midpoint metric.
  const Vec2 d = y - x;
  double length = norm_g(metric.g(0.5 * (x + y)), d);
  const Vec2 dir0 = d / norm_g(mx.g, d);
  double theta = std::atan2(dot_g(mx.g, dir0, frame[1]), dot_g(mx.g, dir0, frame[0]));
  if (opts.guess && (*opts.guess)[0] > 0.0) {
    length = (*opts.guess)[0];
    theta = (*opts.guess)[1];
  }

  const double scale = std::max(1.0, d.norm());
  FlowState end;
  Vec2 omega;
  for (int it = 0; it < opts.max_iter; ++it) {
    omega = std::cos(theta) * frame[0] + std::sin(theta) * frame[1];
    end = shoot(metric, x, omega, length, opts.step);
    const Vec2 residual = end.x - y;
    sol.iterations = it + 1;
    if (residual.norm() < opts.tol * scale) {
      sol.converged = true;
      break;
    }
    const Mat2 gy = metric.g(end.x);
    const Vec2 normal = rotate_quarter(gy, end.v);
    Mat2 jac;
    jac.col(0) = end.v;
    jac.col(1) = end.jac * normal;
    if (std::abs(jac.determinant()) < 1e-300) break;
    Vec2 delta = -jac.fullPivLu().solve(residual);
    // Damping keeps the length positive and the angle update modest.
    double damp = 1.0;
    if (std::abs(delta[0]) > 0.5 * length) damp = std::min(damp, 0.5 * length / std::abs(delta[0]));
    if (std::abs(delta[1]) > 0.5) damp = std::min(damp, 0.5 / std::abs(delta[1]));
    length += damp * delta[0];
    theta += damp * delta[1];
  }
  if (!sol.converged) {
    throw Error(ErrorCode::NoConvergence, "two-point shooting did not converge");
  }
  const MetricAt my = metric.eval(end.x);
  sol.rho = length;
  sol.initial_direction = omega;
  sol.initial_angle = theta;
  sol.final_direction = end.v;
  sol.grad_x = -(mx.g * omega);
  sol.grad_y = my.g * end.v;
  sol.jacobi_end = end.jac;
  sol.hessian_mixed_det = mx.sqrt_det * my.sqrt_det * length / std::abs(end.jac);
  return sol;
}

double mixed_hessian_det_fd(const Metric& metric, const Vec2& x, const Vec2& y, double fd_step,
                            const TwoPointOptions& opts) {
  Mat2 m;
  for (int c = 0; c < 2; ++c) {
    Vec2 dx = Vec2::Zero();
    dx[c] = fd_step;
    const TwoPointSolution p = two_point(metric, x + dx, y, opts);
    const TwoPointSolution q = two_point(metric, x - dx, y, opts);
    const Vec2 diff = (p.rho * p.grad_y - q.rho * q.grad_y) / (2.0 * fd_step);
    m.row(c) = diff.transpose();
  }
  return std::abs(m.determinant());
}

}  // namespace tensortomo
