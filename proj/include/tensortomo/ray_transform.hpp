#pragma once

#include "tensortomo/fields.hpp"
#include "tensortomo/geodesic.hpp"

#include <Eigen/Sparse>

#include <iosfwd>
#include <vector>

namespace tensortomo {

/// Values If(gamma_{x_k, omega_k}) for every entry of a boundary fan.
struct RayData {
  const BoundaryFan* fan = nullptr;
  std::vector<double> values;
};

/// Integral of f_ij gamma'^i gamma'^j along the geodesic from (x, omega) until
/// it leaves the disc of the given radius. Throws EscapeFailure.
double ray_integral(const Metric& metric, const TensorFunction& f, const Vec2& x, const Vec2& omega,
                    double radius, double step);
double ray_integral(const Metric& metric, const TensorSampler& f, const Vec2& x, const Vec2& omega,
                    double radius, double step);

RayData transform(const Metric& metric, const SymTensorField& f, const BoundaryFan& fan,
                  double step = 1e-3);
RayData transform(const Metric& metric, const TensorFunction& f, const BoundaryFan& fan,
                  double step = 1e-3);

/// sum_k a_k b_k weight_mu(k). Throws FanMismatch.
double inner_mu(const RayData& a, const RayData& b);
/// sqrt(inner_mu(a, a)).
double norm_mu(const RayData& a);

/// CSV with columns x1,x2,omega1,omega2,weight_sigma,weight_mu,value.
void write_ray_csv(std::ostream& os, const RayData& data);

/// Discretized I acting on nodal tensor fields that vanish outside `region`:
/// row k holds the quadrature weights of ray k against the unknowns
/// (3 * node + component), with bilinear interpolation of the nodal values
/// and zero outside the region's circle. Off-diagonal components carry the
/// factor 2 of f_12 gamma'^1 gamma'^2 + f_21 gamma'^2 gamma'^1.
class RayMatrix {
 public:
  RayMatrix(const Metric& metric, std::shared_ptr<const Domain> domain, Support region,
            const BoundaryFan& fan, double step);

  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return a_; }
  Eigen::VectorXd apply(const SymTensorField& f) const;
  Support region() const { return region_; }
  const Domain& domain() const { return *domain_; }
  std::shared_ptr<const Domain> domain_ptr() const { return domain_; }

  /// Flattening used for the unknowns.
  static Eigen::VectorXd flatten(const SymTensorField& f);
  static SymTensorField unflatten(std::shared_ptr<const Domain> domain, Support region,
                                  const Eigen::VectorXd& x);

 private:
  std::shared_ptr<const Domain> domain_;
  Support region_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> a_;
};

}  // namespace tensortomo
