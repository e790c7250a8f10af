#pragma once

#include "tensortomo/manifold.hpp"

#include <cmath>
#include <optional>
#include <type_traits>
#include <vector>

namespace tensortomo {

enum class Boundary { M, M1 };

inline double boundary_radius(const Domain& domain, Boundary b) {
  return b == Boundary::M ? domain.radius_M() : domain.radius_M1();
}

/// Position, unit velocity and (optionally used) normal Jacobi field along a
/// unit-speed geodesic. The Jacobi field solves J'' + K J = 0.
struct FlowState {
  Vec2 x;
  Vec2 v;
  double jac = 0.0;
  double djac = 1.0;
};

/// One classical RK4 step of length s of the geodesic equation (and of the
/// scalar Jacobi equation when with_jacobi is set); the velocity is
/// renormalized to g-unit length afterwards.
FlowState flow_step(const Metric& metric, const FlowState& s0, double s, bool with_jacobi = false);

/// Open annulus inner < |x| < outer in which a walk continues; inner = 0
/// disables the inner circle.
struct WalkBounds {
  double inner = 0.0;
  double outer = 1.0;
};

struct WalkEnd {
  FlowState state;
  double t = 0.0;
  bool exited = false;       // crossed a bound before the arclength cap
  bool hit_inner = false;
};

/// Integrates from s0 with fixed step until the path leaves `bounds` or the
/// arclength reaches `cap`. The crossing step is shortened by bisection so the
/// end point lies on the circle. `on_step(a, b, s)` sees every accepted step.
template <typename OnStep>
WalkEnd walk(const Metric& metric, FlowState s0, WalkBounds bounds, double step, double cap,
             OnStep&& on_step, bool with_jacobi = false) {
  auto outside = [&](const Vec2& x) {
    const double r = x.norm();
    return r >= bounds.outer || (bounds.inner > 0.0 && r <= bounds.inner);
  };
  WalkEnd end;
  FlowState cur = s0;
  double t = 0.0;
  while (t < cap) {
    const double s = std::min(step, cap - t);
    FlowState next = flow_step(metric, cur, s, with_jacobi);
    if (outside(next.x)) {
      const bool inner_hit = bounds.inner > 0.0 && next.x.norm() <= bounds.inner;
      const double target = inner_hit ? bounds.inner : bounds.outer;
      // Safeguarded Newton on r(sigma) = target, dr/dsigma = x.v / r.
      double lo = 0.0;
      double hi = s;
      double sig = s;
      FlowState trial = next;
      for (int it = 0; it < 100; ++it) {
        const double r = trial.x.norm();
        const double gap = r - target;
        if (std::abs(gap) < 1e-13) break;
        const bool crossed = inner_hit ? r <= target : r >= target;
        (crossed ? hi : lo) = sig;
        if (hi - lo < 1e-15) break;
        const double rate = trial.x.dot(trial.v) / r;
        double cand = rate != 0.0 ? sig - gap / rate : 0.5 * (lo + hi);
        if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
        sig = cand;
        trial = flow_step(metric, cur, sig, with_jacobi);
      }
      hi = sig;
      next = trial;
      on_step(cur, next, hi);
      end.state = next;
      end.t = t + hi;
      end.exited = true;
      end.hit_inner = inner_hit;
      return end;
    }
    on_step(cur, next, s);
    cur = next;
    t += s;
  }
  end.state = cur;
  end.t = t;
  return end;
}

/// Cubic Hermite midpoint of a step, velocity renormalized to unit g-length.
FlowState hermite_midpoint(const Metric& metric, const FlowState& a, const FlowState& b, double s);

template <typename T>
T zero_value() {
  if constexpr (std::is_arithmetic_v<T>) {
    return T(0);
  } else {
    return T::Zero();
  }
}

/// Hermite-Simpson quadrature of integrand(x, v) along a walk. Returns the
/// integral and reports the end of the walk through `end`.
template <typename T, typename Integrand>
T integrate_along(const Metric& metric, const FlowState& s0, WalkBounds bounds, double step,
                  double cap, Integrand&& integrand, WalkEnd* end = nullptr) {
  T total = zero_value<T>();
  bool first = true;
  T fa = zero_value<T>();
  const WalkEnd e = walk(metric, s0, bounds, step, cap,
                         [&](const FlowState& a, const FlowState& b, double s) {
                           if (first) {
                             fa = integrand(a.x, a.v);
                             first = false;
                           }
                           const FlowState m = hermite_midpoint(metric, a, b, s);
                           const T fm = integrand(m.x, m.v);
                           const T fb = integrand(b.x, b.v);
                           total += (s / 6.0) * (fa + 4.0 * fm + fb);
                           fa = fb;
                         });
  if (end) *end = e;
  return total;
}

/// Default arclength cap for a walk from x0: ten diameters of the bounding
/// circle, inflated by the local metric scale.
double default_cap(const Metric& metric, const Vec2& x0, double radius);

struct GeodesicSample {
  double t = 0.0;
  Vec2 x;
  Vec2 v;
};

struct GeodesicPath {
  std::vector<GeodesicSample> samples;
  double exit_time = 0.0;
  Vec2 exit_point;
  Vec2 exit_direction;
};

/// Unit-speed geodesic from (x, omega) up to the first crossing of the
/// requested boundary circle.
GeodesicPath trace(const Metric& metric, const Domain& domain, const Vec2& x, const Vec2& omega,
                   Boundary terminate_at, double step = 1e-3);

struct FanEntry {
  Vec2 x;
  Vec2 omega;
  double weight_sigma = 0.0;
  double weight_mu = 0.0;
};

/// Product quadrature over the inward unit vectors at a boundary circle:
/// points equispaced in g-arclength, directions at midpoints of n_dirs equal
/// g-angle cells of the inward half circle.
struct BoundaryFan {
  Boundary circle = Boundary::M;
  double radius = 1.0;
  int n_points = 0;
  int n_dirs = 0;
  std::vector<FanEntry> entries;

  double total_sigma() const;
  double total_mu() const;
};

BoundaryFan boundary_fan(const Metric& metric, const Domain& domain, Boundary circle, int n_points,
                         int n_dirs);

/// Point on a centered circle at parameter s of g-arclength, s in [0, L).
struct CircleArclength {
  CircleArclength(const Metric& metric, double radius, int resolution = 4096);
  double length() const { return length_; }
  double angle_at(double s) const;
  /// Inverse of angle_at: arclength from polar angle 0 to phi (counterclockwise).
  double arclength_at(double phi) const;

 private:
  double radius_;
  double length_;
  std::vector<double> cumulative_;
};

struct TwoPointSolution {
  double rho = 0.0;
  Vec2 grad_x;
  Vec2 grad_y;
  double hessian_mixed_det = 0.0;
  bool converged = false;
  double initial_angle = 0.0;  // angle of initial_direction in orthonormal_frame(g(x))
  Vec2 initial_direction;   // unit tangent at x
  Vec2 final_direction;     // unit tangent at y
  double jacobi_end = 0.0;  // normal Jacobi field J(rho), J(0)=0, J'(0)=1
  int iterations = 0;
};

struct TwoPointOptions {
  double step = 1e-3;
  double tol = 1e-12;
  int max_iter = 50;
  /// Optional Newton start (length, angle in orthonormal_frame(g(x))); the
  /// straight chord is used otherwise.
  std::optional<Vec2> guess;
};

/// Geodesic connecting x to y by damped Newton shooting on the exponential
/// map, with the Jacobian supplied by the Jacobi field along the trial path.
/// The mixed Hessian determinant uses the Jacobi identity
///   |det d^2(rho^2/2)/dx dy| = sqrt(det g(x)) sqrt(det g(y)) rho / |J(rho)|.
TwoPointSolution two_point(const Metric& metric, const Vec2& x, const Vec2& y,
                           const TwoPointOptions& opts = {});

/// Independent evaluation of det d^2(rho^2/2)/dx dy by central differences in x
/// of rho * grad_y (the y-gradient of rho^2/2).
double mixed_hessian_det_fd(const Metric& metric, const Vec2& x, const Vec2& y,
                            double fd_step = 1e-4, const TwoPointOptions& opts = {});

}  // namespace tensortomo
