#pragma once

#include "tensortomo/types.hpp"

#include <string>
#include <vector>

namespace tensortomo {

enum class Region { Interior, Annulus, Exterior };

/// Concentric discs M (radius_M) inside M1 (radius_M1) covered by a Cartesian
/// grid of spacing h, centered at the origin so that the node set is symmetric
/// under x -> -x.
class Domain {
 public:
  Domain(double radius_M = 1.0, double radius_M1 = 1.3, double h = 1.0 / 64.0);

  double radius_M() const { return radius_M_; }
  double radius_M1() const { return radius_M1_; }
  double h() const { return h_; }

  /// Nodes run over ix, iy in [-half_width, half_width].
  int half_width() const { return half_; }
  int side() const { return 2 * half_ + 1; }
  int node_count() const { return side() * side(); }

  int index(int ix, int iy) const { return (iy + half_) * side() + (ix + half_); }
  int ix_of(int idx) const { return idx % side() - half_; }
  int iy_of(int idx) const { return idx / side() - half_; }
  bool valid(int ix, int iy) const {
    return ix >= -half_ && ix <= half_ && iy >= -half_ && iy <= half_;
  }

  Vec2 position(int idx) const { return {ix_of(idx) * h_, iy_of(idx) * h_}; }
  Vec2 position(int ix, int iy) const { return {ix * h_, iy * h_}; }

  Region region(int idx) const { return region_[idx]; }

  /// Node lies strictly inside the disc of the given radius.
  bool inside(int idx, double radius) const { return position(idx).norm() < radius; }

 private:
  double radius_M_;
  double radius_M1_;
  double h_;
  int half_;
  std::vector<Region> region_;
};

/// Closed-form conformal exponent lambda(x) = amplitude * exp(-width * |x - center|^2).
struct ConformalBump {
  double amplitude = 0.0;
  double width = 1.0;
  Vec2 center = Vec2::Zero();
};

/// Symmetric-matrix-valued bump B * exp(-|x - center|^2 / sigma^2).
struct TensorBump {
  Mat2 coefficients = sym_from(1.0, 0.5, -0.3);
  Vec2 center = Vec2(0.2, -0.1);
  double sigma = 0.6;
};

/// Metric and its coordinate derivatives at one point.
struct MetricAt {
  Mat2 g;
  Mat2 ginv;
  double det = 1.0;
  double sqrt_det = 1.0;
  std::array<Mat2, 2> dg;                    // dg[k] = d_k g
  std::array<std::array<Mat2, 2>, 2> d2g;    // d2g[k][l] = d_k d_l g
};

/// A Riemannian metric on the planar chart, given in closed form:
///   g = exp(2 lambda) I + eps * scale * bump.
/// Euclidean is lambda = 0, eps = 0.
class Metric {
 public:
  enum class Kind { Euclidean, Conformal, Perturbed };

  static Metric euclidean();
  static Metric conformal(const ConformalBump& bump);
  /// g = base + eps * scale * bump; pass scale = 1 / ||bump||_{C^3} to make the
  /// C^3 size of the perturbation equal to eps.
  static Metric perturbed(const Metric& base, double eps, const TensorBump& bump, double scale);

  Kind kind() const { return kind_; }
  bool is_euclidean() const;
  const ConformalBump& conformal_part() const { return conf_; }
  double eps() const { return eps_; }
  const TensorBump& bump() const { return bump_; }
  double bump_scale() const { return scale_; }

  /// Value and derivatives; second derivatives are left zero unless requested.
  MetricAt eval(const Vec2& x, bool with_second = true) const;
  Mat2 g(const Vec2& x) const;

  /// Perturbation term alone (without eps and scale) with derivatives.
  MetricAt eval_bump(const Vec2& x, bool with_second = true) const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::Euclidean;
  ConformalBump conf_;
  double eps_ = 0.0;
  TensorBump bump_;
  double scale_ = 1.0;
};

Christoffel christoffel(const MetricAt& m);
Christoffel christoffel(const Metric& metric, const Vec2& x);

double gauss_curvature(const Metric& metric, const Vec2& x);

/// g-inner product and norm of vectors at a point.
inline double dot_g(const Mat2& g, const Vec2& a, const Vec2& b) { return a.dot(g * b); }
inline double norm_g(const Mat2& g, const Vec2& a) { return std::sqrt(dot_g(g, a, a)); }

/// Orthonormal frame (e1, e2) at x: e1 along the first coordinate axis,
/// e2 completing a positively oriented g-orthonormal pair.
std::array<Vec2, 2> orthonormal_frame(const Mat2& g);

/// Outward g-unit normal and counterclockwise g-unit tangent of the centered
/// circle passing through x.
struct CircleFrame {
  Vec2 normal;
  Vec2 tangent;
};
CircleFrame circle_frame(const Metric& metric, const Vec2& x);

/// Discrete C^3 distance: max over nodes of M of all components of the
/// difference and its derivatives up to order three (third by central
/// differences of the Hessians).
double c3_distance(const Metric& a, const Metric& b, const Domain& domain);

/// C^3 size of a tensor bump over nodes of M (same convention).
double c3_norm(const TensorBump& bump, const Domain& domain);

struct SimplicitySampling {
  int n_points = 32;
  int n_dirs = 16;
  double step = 5e-3;
  double t_min = 1e-2;
  int n_pairs = 16;
};

struct SimplicityReport {
  double boundary_convexity_min = 0.0;
  bool conjugate_point_found = false;
  double min_jacobi = 0.0;
  double max_diffeo_residual = 0.0;
  bool escaped = true;

  bool simple() const {
    return boundary_convexity_min > 0.0 && !conjugate_point_found && escaped;
  }
};

SimplicityReport certify_simple(const Metric& metric, const Domain& domain,
                                const SimplicitySampling& sampling = {});

}  // namespace tensortomo
