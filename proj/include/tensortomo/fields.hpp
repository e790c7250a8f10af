#pragma once

#include "tensortomo/manifold.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace tensortomo {

/// Set of nodes on which a field may be nonzero. Outside it the field is
/// exactly zero (extension by zero).
enum class Support { M, M1, Annulus };

const char* support_name(Support s);
Support parse_support(const std::string& name);

bool in_support(const Domain& domain, Support s, const Vec2& x);
bool in_support(const Domain& domain, Support s, int idx);

using TensorFunction = std::function<Mat2(const Vec2&)>;
using OneFormFunction = std::function<Vec2(const Vec2&)>;

/// Metric data cached per grid node: g, g^{-1}, sqrt(det g), Christoffels.
class MetricGrid {
 public:
  MetricGrid(const Metric& metric, std::shared_ptr<const Domain> domain);

  const Metric& metric() const { return metric_; }
  const Domain& domain() const { return *domain_; }
  std::shared_ptr<const Domain> domain_ptr() const { return domain_; }

  const Mat2& g(int idx) const { return g_[idx]; }
  const Mat2& ginv(int idx) const { return ginv_[idx]; }
  double sqrt_det(int idx) const { return sqrt_det_[idx]; }
  const Christoffel& gamma(int idx) const { return gamma_[idx]; }

 private:
  Metric metric_;
  std::shared_ptr<const Domain> domain_;
  std::vector<Mat2> g_;
  std::vector<Mat2> ginv_;
  std::vector<double> sqrt_det_;
  std::vector<Christoffel> gamma_;
};

/// Symmetric covariant 2-tensor per node, stored as (f11, f12, f22).
class SymTensorField {
 public:
  SymTensorField(std::shared_ptr<const Domain> domain, Support support);

  static SymTensorField sample(std::shared_ptr<const Domain> domain, Support support,
                               const TensorFunction& fn);

  const Domain& domain() const { return *domain_; }
  std::shared_ptr<const Domain> domain_ptr() const { return domain_; }
  Support support() const { return support_; }

  Mat2 at(int idx) const { return sym_from(c_(idx, 0), c_(idx, 1), c_(idx, 2)); }
  /// Writes the symmetric part; nodes outside the support stay zero.
  void set(int idx, const Mat2& m);
  double component(int idx, int c) const { return c_(idx, c); }

  const Eigen::MatrixX3d& data() const { return c_; }
  Eigen::MatrixX3d& data() { return c_; }
  /// Zeroes every node outside the support.
  void mask();

  SymTensorField& operator+=(const SymTensorField& o);
  SymTensorField& operator-=(const SymTensorField& o);
  SymTensorField& operator*=(double s);

 private:
  std::shared_ptr<const Domain> domain_;
  Support support_;
  Eigen::MatrixX3d c_;
};

SymTensorField operator+(SymTensorField a, const SymTensorField& b);
SymTensorField operator-(SymTensorField a, const SymTensorField& b);
SymTensorField operator*(double s, SymTensorField a);

/// Covector samples on a centered circle, periodic linear interpolation in
/// the polar angle.
struct BoundaryTrace {
  double radius = 1.0;
  std::vector<double> angles;  // increasing in [0, 2pi)
  std::vector<Vec2> values;

  Vec2 at_angle(double phi) const;
  /// Value at the polar angle of x (radius ignored).
  Vec2 operator()(const Vec2& x) const;
};

/// Covector v_i per node.
class OneFormField {
 public:
  OneFormField(std::shared_ptr<const Domain> domain, Support support);

  static OneFormField sample(std::shared_ptr<const Domain> domain, Support support,
                             const OneFormFunction& fn);

  const Domain& domain() const { return *domain_; }
  std::shared_ptr<const Domain> domain_ptr() const { return domain_; }
  Support support() const { return support_; }

  Vec2 at(int idx) const { return c_.row(idx).transpose(); }
  void set(int idx, const Vec2& v);
  const Eigen::MatrixX2d& data() const { return c_; }
  Eigen::MatrixX2d& data() { return c_; }
  void mask();

  /// Optional boundary trace; `trace_error` is the largest mismatch between
  /// table values and grid interpolation recorded when it was attached.
  const BoundaryTrace* trace() const { return trace_ ? &*trace_ : nullptr; }
  double trace_error() const { return trace_error_; }
  void attach_trace(BoundaryTrace trace);

  Vec2 interpolate(const Vec2& x) const;

 private:
  std::shared_ptr<const Domain> domain_;
  Support support_;
  Eigen::MatrixX2d c_;
  std::shared_ptr<BoundaryTrace> trace_;
  double trace_error_ = 0.0;
};

/// Bilinear point evaluation of a nodal tensor field. Zero outside the
/// support circle(s); nodes just outside the support get ghost values
/// extrapolated from inside so the jump sits on the circle itself.
class TensorSampler {
 public:
  explicit TensorSampler(const SymTensorField& field);
  Mat2 operator()(const Vec2& x) const;
  /// Value of v^i v^j f_ij.
  double along(const Vec2& x, const Vec2& v) const;

 private:
  std::shared_ptr<const Domain> domain_;
  Support support_;
  Eigen::MatrixX3d filled_;
  bool nonzero_ = true;
};

/// Symmetrized covariant derivative (dv)_ij = 1/2 (d_i v_j + d_j v_i) - Gamma^k_ij v_k,
/// central differences, one-sided at the edge of the support.
SymTensorField sym_d(const MetricGrid& mg, const OneFormField& v);

/// (delta f)_j = g^{ik} (d_k f_ij - Gamma^l_ki f_lj - Gamma^l_kj f_il).
OneFormField divergence(const MetricGrid& mg, const SymTensorField& f);

/// Discrete L2 norms: sqrt(sum over nodes of the region of |f|_g^2 sqrt(det g) h^2).
double norm_L2(const MetricGrid& mg, const SymTensorField& f, Support region);
double norm_L2(const MetricGrid& mg, const OneFormField& v, Support region);
/// H1: the L2 norm plus the L2 norms of the first differences along each axis
/// (central, one-sided at the region edge), components contracted with g.
double norm_H1(const MetricGrid& mg, const SymTensorField& f, Support region);
double norm_H1(const MetricGrid& mg, const OneFormField& v, Support region);

/// Discrete L2 inner product over the region.
double inner_L2(const MetricGrid& mg, const SymTensorField& a, const SymTensorField& b,
                Support region);

/// w -> ||w||_{H1} / (||dw||_{L2} + ||w||_{L2}) over the region.
double korn_ratio(const MetricGrid& mg, const OneFormField& w, Support region);

/// Curl-curl tensor of a stream function psi given by its Hessian:
/// f_11 = d2d2 psi, f_12 = -d1d2 psi, f_22 = d1d1 psi. Divergence free for the
/// Euclidean metric.
TensorFunction curl_curl(std::function<Mat2(const Vec2&)> hessian_of_psi);

/// Hessian of psi = exp(-a |x - c|^2) (1 - |x|^2)^4 inside the unit disc, zero
/// outside; psi vanishes to fourth order on the circle.
Mat2 gaussian_stream_hessian(const Vec2& x, double a, const Vec2& c);

/// FIELD v1 text format.
void write_field(std::ostream& os, const SymTensorField& f);
void write_field(std::ostream& os, const OneFormField& v);
SymTensorField read_tensor_field(std::istream& is);
OneFormField read_oneform_field(std::istream& is);

}  // namespace tensortomo
