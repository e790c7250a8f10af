#pragma once

#include "tensortomo/ray_transform.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <vector>

namespace tensortomo {

/// (Nf)_kl(x) by the angular integral: 2 times the integral over the unit
/// circle of S_xM of omega^i omega^j times the integral of f along the
/// geodesic from (x, omega) to the outer circle. Trapezoid rule in g-angle over
/// n_dirs directions. Indices are lowered with g(x).
Mat2 normal_compose(const Metric& metric, const SymTensorField& f, const Vec2& x, int n_dirs,
                    double step = 1e-3);

struct KernelOptions {
  double subtraction_radius = 0.25;  // capped so the disc stays inside the support
  int correction_angles = 256;
  TwoPointOptions shooting{5e-3, 1e-12, 50, {}};
};

/// (Nf)_kl(x) from the explicit kernel
///   (2/sqrt(det g(x))) int f^ij(y) rho^{-1} d_{y^i}rho d_{y^j}rho d_{x^k}rho d_{x^l}rho
///                          |det d^2(rho^2/2)/dx dy| dy
/// as a node sum over the support of f. Near x the frozen-coefficient flat kernel
/// applied to f(x), times a smooth cutoff, is subtracted from the sum and its
/// exact integral added back, so the summed integrand stays bounded.
Mat2 normal_kernel(const Metric& metric, const SymTensorField& f, const Vec2& x,
                   const KernelOptions& opts = {});

/// Rank-4 tensor s^{ijkl}, symmetric in (ij), (kl) and under (ij) <-> (kl).
class SymbolTensor {
 public:
  double operator()(int i, int j, int k, int l) const { return s_[((i * 2 + j) * 2 + k) * 2 + l]; }
  double& at(int i, int j, int k, int l) { return s_[((i * 2 + j) * 2 + k) * 2 + l]; }
  /// s^{ijkl} a_kl.
  Mat2 apply(const Mat2& a) const;
  /// s^{ijkl} a_ij b_kl.
  double pair(const Mat2& a, const Mat2& b) const;
  /// Components over index pairs (11, 12, 22) x (11, 12, 22), row-major.
  std::array<double, 9> independent() const;
  double max_abs() const;

 private:
  std::array<double, 16> s_{};
};

enum class SymbolMethod { Mollified, ExactCrossing };

/// 2 pi times the integral over the g-unit circle at x of omega^i omega^j
/// omega^k omega^l delta(xi . omega). Mollified: delta replaced by a Gaussian of
/// standard deviation `width` radians of g-angle (scaled by |xi|_g so the
/// result stays homogeneous of order -1). Exact: sum over the two g-unit
/// directions annihilated by xi, each weighted by 1/|xi|_g.
SymbolTensor principal_symbol(const Metric& metric, const Vec2& x, const Vec2& xi,
                              SymbolMethod method = SymbolMethod::Mollified, double width = 0.05,
                              int n_angles = 8192);

/// Largest |s^{ijkl} 1/2 (xi_k v_l + xi_l v_k)| over v in the coordinate basis,
/// relative to |s| |xi|.
double potential_contraction(const SymbolTensor& s, const Vec2& xi);

/// s(eps eps, eps eps) with eps the g-unit covector orthogonal to xi; the
/// solenoidal ellipticity constant at (x, xi).
double solenoidal_ellipticity(const Metric& metric, const SymbolTensor& s, const Vec2& x,
                              const Vec2& xi);

/// CSV: x1,x2,xi1,xi2 then the nine pair components.
void write_symbol_csv(std::ostream& os, const std::vector<Vec2>& xs, const std::vector<Vec2>& xis,
                      const std::vector<SymbolTensor>& symbols);

struct NormalGridOptions {
  int fan_points = 512;
  int fan_dirs = 128;
  int n_theta = 128;   // directions per node over a half circle
  double step = 0.0;   // ray quadrature step; 0 means h / 2
  double map_step = 5e-2;
};

/// Nf on every node of M1 at once: the ray transform is sampled once on a fan
/// at the outer circle, and each node integrates the interpolated sinogram
/// over the geodesics through it. The output is covariant with support M1.
class NormalGrid {
 public:
  NormalGrid(const Metric& metric, std::shared_ptr<const Domain> domain,
             NormalGridOptions opts = {});

  const BoundaryFan& fan() const { return fan_; }
  const Metric& metric() const { return metric_; }
  const Domain& domain() const { return *domain_; }
  double step() const { return step_; }

  RayData sinogram(const SymTensorField& f) const;
  SymTensorField backproject(const RayData& data) const;
  SymTensorField apply(const SymTensorField& f) const { return backproject(sinogram(f)); }

  /// Sinogram value at fan coordinates (arclength s, angle beta from the
  /// inward normal), bilinear with zero at grazing angles.
  double lookup(const RayData& data, double s, double beta) const;

 private:
  struct Entry {
    float s;
    float beta;
  };
  Entry entry_of(int node, int m) const;

  Metric metric_;
  std::shared_ptr<const Domain> domain_;
  NormalGridOptions opts_;
  double step_;
  BoundaryFan fan_;
  CircleArclength arc_;
  std::vector<int> nodes_;          // nodes of M1
  std::vector<Entry> map_;          // per (node, theta) for non-Euclidean metrics
};

struct OrderProbeRow {
  double k = 0.0;
  double solenoidal_ratio = 0.0;
  double potential_ratio = 0.0;
};

struct OrderProbe {
  std::vector<OrderProbeRow> rows;
  double solenoidal_slope = 0.0;
  double potential_slope = 0.0;
};

/// ||N f_k||_{L2(M1)} / ||f_k||_{L2(M)} for f_k = chi sin(k x1) e2 (x) e2 and for
/// the potential family d(chi sin(k x1) dx1 / k). Throws UnresolvedFrequency when
/// k h > 1/4.
OrderProbe symbol_order_probe(const NormalGrid& ng, const std::vector<double>& ks);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tensortomo
