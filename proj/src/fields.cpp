#include "tensortomo/fields.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace tensortomo {

const char* support_name(Support s) {
  switch (s) {
    case Support::M: return "M";
    case Support::M1: return "M1";
    case Support::Annulus: return "annulus";
  }
  return "?";
}

Support parse_support(const std::string& name) {
  if (name == "M") return Support::M;
  if (name == "M1") return Support::M1;
  if (name == "annulus") return Support::Annulus;
  throw Error(ErrorCode::ParseError, "unknown support '" + name + "'");
}

bool in_support(const Domain& domain, Support s, const Vec2& x) {
  const double r = x.norm();
  switch (s) {
    case Support::M: return r < domain.radius_M();
    case Support::M1: return r < domain.radius_M1();
    case Support::Annulus: return r >= domain.radius_M() && r < domain.radius_M1();
  }
  return false;
}

bool in_support(const Domain& domain, Support s, int idx) {
  const Region r = domain.region(idx);
  switch (s) {
    case Support::M: return r == Region::Interior;
    case Support::M1: return r != Region::Exterior;
    case Support::Annulus: return r == Region::Annulus;
  }
  return false;
}

MetricGrid::MetricGrid(const Metric& metric, std::shared_ptr<const Domain> domain)
    : metric_(metric), domain_(std::move(domain)) {
  const int n = domain_->node_count();
  g_.resize(n);
  ginv_.resize(n);
  sqrt_det_.resize(n);
  gamma_.resize(n);
  for (int idx = 0; idx < n; ++idx) {
    const MetricAt m = metric_.eval(domain_->position(idx));
    g_[idx] = m.g;
    ginv_[idx] = m.ginv;
    sqrt_det_[idx] = m.sqrt_det;
    gamma_[idx] = christoffel(m);
  }
}

// ---------------------------------------------------------------------------

SymTensorField::SymTensorField(std::shared_ptr<const Domain> domain, Support support)
    : domain_(std::move(domain)), support_(support),
      c_(Eigen::MatrixX3d::Zero(domain_->node_count(), 3)) {}

SymTensorField SymTensorField::sample(std::shared_ptr<const Domain> domain, Support support,
                                      const TensorFunction& fn) {
  SymTensorField f(domain, support);
  for (int idx = 0; idx < domain->node_count(); ++idx) {
    if (in_support(*domain, support, idx)) f.set(idx, fn(domain->position(idx)));
  }
  return f;
}

void SymTensorField::set(int idx, const Mat2& m) {
  if (!in_support(*domain_, support_, idx)) return;
  c_(idx, 0) = m(0, 0);
  c_(idx, 1) = 0.5 * (m(0, 1) + m(1, 0));
  c_(idx, 2) = m(1, 1);
}

void SymTensorField::mask() {
  for (int idx = 0; idx < domain_->node_count(); ++idx) {
    if (!in_support(*domain_, support_, idx)) c_.row(idx).setZero();
  }
}

SymTensorField& SymTensorField::operator+=(const SymTensorField& o) {
  c_ += o.c_;
  mask();
  return *this;
}

SymTensorField& SymTensorField::operator-=(const SymTensorField& o) {
  c_ -= o.c_;
  mask();
  return *this;
}

SymTensorField& SymTensorField::operator*=(double s) {
  c_ *= s;
  return *this;
}

SymTensorField operator+(SymTensorField a, const SymTensorField& b) { return a += b; }
SymTensorField operator-(SymTensorField a, const SymTensorField& b) { return a -= b; }
SymTensorField operator*(double s, SymTensorField a) { return a *= s; }

// ---------------------------------------------------------------------------

Vec2 BoundaryTrace::at_angle(double phi) const {
  const int n = static_cast<int>(angles.size());
  if (n == 0) return Vec2::Zero();
  if (n == 1) return values[0];
  phi = std::fmod(phi, 2.0 * M_PI);
  if (phi < 0) phi += 2.0 * M_PI;
  const auto it = std::upper_bound(angles.begin(), angles.end(), phi);
  const int hi = static_cast<int>(it - angles.begin()) % n;
  const int lo = (hi - 1 + n) % n;
  double a0 = angles[lo];
  double a1 = angles[hi];
  if (a1 <= a0) a1 += 2.0 * M_PI;
  double p = phi;
  if (p < a0) p += 2.0 * M_PI;
  const double t = (p - a0) / (a1 - a0);
  return (1.0 - t) * values[lo] + t * values[hi];
}

Vec2 BoundaryTrace::operator()(const Vec2& x) const { return at_angle(std::atan2(x[1], x[0])); }

OneFormField::OneFormField(std::shared_ptr<const Domain> domain, Support support)
    : domain_(std::move(domain)), support_(support),
      c_(Eigen::MatrixX2d::Zero(domain_->node_count(), 2)) {}

OneFormField OneFormField::sample(std::shared_ptr<const Domain> domain, Support support,
                                  const OneFormFunction& fn) {
  OneFormField v(domain, support);
  for (int idx = 0; idx < domain->node_count(); ++idx) {
    if (in_support(*domain, support, idx)) v.set(idx, fn(domain->position(idx)));
  }
  return v;
}

void OneFormField::set(int idx, const Vec2& v) {
  if (!in_support(*domain_, support_, idx)) return;
  c_.row(idx) = v.transpose();
}

void OneFormField::mask() {
  for (int idx = 0; idx < domain_->node_count(); ++idx) {
    if (!in_support(*domain_, support_, idx)) c_.row(idx).setZero();
  }
}

Vec2 OneFormField::interpolate(const Vec2& x) const {
  const Domain& d = *domain_;
  const double h = d.h();
  const int i = static_cast<int>(std::floor(x[0] / h));
  const int j = static_cast<int>(std::floor(x[1] / h));
  if (!d.valid(i, j) || !d.valid(i + 1, j + 1)) return Vec2::Zero();
  const double fx = x[0] / h - i;
  const double fy = x[1] / h - j;
  return (1 - fx) * (1 - fy) * at(d.index(i, j)) + fx * (1 - fy) * at(d.index(i + 1, j)) +
         (1 - fx) * fy * at(d.index(i, j + 1)) + fx * fy * at(d.index(i + 1, j + 1));
}

void OneFormField::attach_trace(BoundaryTrace trace) {
  trace_error_ = 0.0;
  for (size_t k = 0; k < trace.angles.size(); ++k) {
    const Vec2 p = trace.radius * Vec2(std::cos(trace.angles[k]), std::sin(trace.angles[k]));
    trace_error_ = std::max(trace_error_, (interpolate(p) - trace.values[k]).norm());
  }
  trace_ = std::make_shared<BoundaryTrace>(std::move(trace));
}

// ---------------------------------------------------------------------------

TensorSampler::TensorSampler(const SymTensorField& field)
    : domain_(field.domain_ptr()), support_(field.support()), filled_(field.data()) {
  const Domain& d = *domain_;
  nonzero_ = filled_.cwiseAbs().maxCoeff() > 0.0;
  if (!nonzero_) return;
  std::vector<char> known(d.node_count());
  for (int idx = 0; idx < d.node_count(); ++idx) known[idx] = in_support(d, support_, idx);
  const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const int diag[4][2] = {{1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
  for (int layer = 0; layer < 2; ++layer) {
    std::vector<int> fresh;
    Eigen::MatrixX3d next = filled_;
    for (int idx = 0; idx < d.node_count(); ++idx) {
      if (known[idx]) continue;
      const int ix = d.ix_of(idx);
      const int iy = d.iy_of(idx);
      Eigen::RowVector3d acc = Eigen::RowVector3d::Zero();
      int count = 0;
      // Linear extrapolation along axis directions where two known nodes exist.
      for (const auto& dd : dirs) {
        const int ax = ix + dd[0], ay = iy + dd[1];
        const int bx = ix + 2 * dd[0], by = iy + 2 * dd[1];
        if (!d.valid(bx, by) || !d.valid(ax, ay)) continue;
        const int a = d.index(ax, ay), b = d.index(bx, by);
        if (known[a] && known[b]) {
          acc += 2.0 * filled_.row(a) - filled_.row(b);
          ++count;
        }
      }
      if (count == 0) {
        for (const auto* set : {dirs, diag}) {
          for (int k = 0; k < 4; ++k) {
            const int ax = ix + set[k][0], ay = iy + set[k][1];
            if (!d.valid(ax, ay)) continue;
            const int a = d.index(ax, ay);
            if (known[a]) {
              acc += filled_.row(a);
              ++count;
            }
          }
          if (count > 0) break;
        }
      }
      if (count > 0) {
        next.row(idx) = acc / count;
        fresh.push_back(idx);
      }
    }
    filled_ = std::move(next);
    for (int idx : fresh) known[idx] = 1;
  }
}

Mat2 TensorSampler::operator()(const Vec2& x) const {
  if (!nonzero_ || !in_support(*domain_, support_, x)) return Mat2::Zero();
  const Domain& d = *domain_;
  const double h = d.h();
  const int i = static_cast<int>(std::floor(x[0] / h));
  const int j = static_cast<int>(std::floor(x[1] / h));
  if (!d.valid(i, j) || !d.valid(i + 1, j + 1)) return Mat2::Zero();
  const double fx = x[0] / h - i;
  const double fy = x[1] / h - j;
  const Eigen::RowVector3d c = (1 - fx) * (1 - fy) * filled_.row(d.index(i, j)) +
                               fx * (1 - fy) * filled_.row(d.index(i + 1, j)) +
                               (1 - fx) * fy * filled_.row(d.index(i, j + 1)) +
                               fx * fy * filled_.row(d.index(i + 1, j + 1));
  return sym_from(c[0], c[1], c[2]);
}

double TensorSampler::along(const Vec2& x, const Vec2& v) const {
  const Mat2 f = (*this)(x);
  return v.dot(f * v);
}

// ---------------------------------------------------------------------------

namespace {

// Difference quotient of column data along axis k at node idx, restricted to
// nodes of the region: central where possible, one-sided at the edge.
template <typename Mat>
Eigen::RowVectorXd axis_diff(const Domain& d, Support region, const Mat& data, int idx, int k) {
  const int ix = d.ix_of(idx), iy = d.iy_of(idx);
  const int px = ix + (k == 0), py = iy + (k == 1);
  const int mx = ix - (k == 0), my = iy - (k == 1);
  const bool hp = d.valid(px, py) && in_support(d, region, d.index(px, py));
  const bool hm = d.valid(mx, my) && in_support(d, region, d.index(mx, my));
  const double h = d.h();
  if (hp && hm) return (data.row(d.index(px, py)) - data.row(d.index(mx, my))) / (2.0 * h);
  if (hp) return (data.row(d.index(px, py)) - data.row(idx)) / h;
  if (hm) return (data.row(idx) - data.row(d.index(mx, my))) / h;
  return Eigen::RowVectorXd::Zero(data.cols());
}

SymTensorField sym_d_region(const MetricGrid& mg, const OneFormField& v, Support region) {
  const Domain& d = mg.domain();
  SymTensorField out(mg.domain_ptr(), region);
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (!in_support(d, region, idx)) continue;
    const Eigen::RowVectorXd d0 = axis_diff(d, region, v.data(), idx, 0);  // d_1 v_j
    const Eigen::RowVectorXd d1 = axis_diff(d, region, v.data(), idx, 1);  // d_2 v_j
    Mat2 grad;  // grad(i, j) = d_i v_j
    grad << d0[0], d0[1], d1[0], d1[1];
    const Vec2 vv = v.at(idx);
    const Christoffel& gam = mg.gamma(idx);
    const Mat2 dv = 0.5 * (grad + grad.transpose()) - vv[0] * gam[0] - vv[1] * gam[1];
    out.set(idx, dv);
  }
  return out;
}

double tensor_sq(const Mat2& ginv, const Eigen::RowVectorXd& c) {
  const Mat2 m = sym_from(c[0], c[1], c[2]);
  return contract_cov(ginv, m, m);
}

double oneform_sq(const Mat2& ginv, const Eigen::RowVectorXd& c) {
  const Vec2 v(c[0], c[1]);
  return v.dot(ginv * v);
}

template <typename Mat, typename Sq>
double l2_sq(const MetricGrid& mg, const Mat& data, Support region, Sq sq) {
  const Domain& d = mg.domain();
  double s = 0.0;
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (!in_support(d, region, idx)) continue;
    s += sq(mg.ginv(idx), data.row(idx)) * mg.sqrt_det(idx);
  }
  return s * d.h() * d.h();
}

template <typename Mat, typename Sq>
double h1_sq(const MetricGrid& mg, const Mat& data, Support region, Sq sq) {
  const Domain& d = mg.domain();
  double s = 0.0;
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (!in_support(d, region, idx)) continue;
    double local = sq(mg.ginv(idx), data.row(idx));
    for (int k = 0; k < 2; ++k) local += sq(mg.ginv(idx), axis_diff(d, region, data, idx, k));
    s += local * mg.sqrt_det(idx);
  }
  return s * d.h() * d.h();
}

}  // namespace

SymTensorField sym_d(const MetricGrid& mg, const OneFormField& v) {
  return sym_d_region(mg, v, v.support());
}

OneFormField divergence(const MetricGrid& mg, const SymTensorField& f) {
  const Domain& d = mg.domain();
  const Support region = f.support();
  OneFormField out(mg.domain_ptr(), region);
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (!in_support(d, region, idx)) continue;
    std::array<Mat2, 2> df;  // df[k] = d_k f
    for (int k = 0; k < 2; ++k) {
      const Eigen::RowVectorXd c = axis_diff(d, region, f.data(), idx, k);
      df[k] = sym_from(c[0], c[1], c[2]);
    }
    const Mat2 fm = f.at(idx);
    const Mat2& ginv = mg.ginv(idx);
    const Christoffel& gam = mg.gamma(idx);
    Vec2 div = Vec2::Zero();
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int i = 0; i < 2; ++i) {
        for (int k = 0; k < 2; ++k) {
          double cov = df[k](i, j);
          for (int l = 0; l < 2; ++l) cov -= gam[l](k, i) * fm(l, j) + gam[l](k, j) * fm(i, l);
          s += ginv(i, k) * cov;
        }
      }
      div[j] = s;
    }
    out.set(idx, div);
  }
  return out;
}

double norm_L2(const MetricGrid& mg, const SymTensorField& f, Support region) {
  return std::sqrt(l2_sq(mg, f.data(), region, tensor_sq));
}

double norm_L2(const MetricGrid& mg, const OneFormField& v, Support region) {
  return std::sqrt(l2_sq(mg, v.data(), region, oneform_sq));
}

double norm_H1(const MetricGrid& mg, const SymTensorField& f, Support region) {
  return std::sqrt(h1_sq(mg, f.data(), region, tensor_sq));
}

double norm_H1(const MetricGrid& mg, const OneFormField& v, Support region) {
  return std::sqrt(h1_sq(mg, v.data(), region, oneform_sq));
}

double inner_L2(const MetricGrid& mg, const SymTensorField& a, const SymTensorField& b,
                Support region) {
  const Domain& d = mg.domain();
  double s = 0.0;
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (!in_support(d, region, idx)) continue;
    s += contract_cov(mg.ginv(idx), a.at(idx), b.at(idx)) * mg.sqrt_det(idx);
  }
  return s * d.h() * d.h();
}

double korn_ratio(const MetricGrid& mg, const OneFormField& w, Support region) {
  const double l2 = norm_L2(mg, w, region);
  if (l2 == 0.0) throw Error(ErrorCode::ZeroField, "korn ratio of a zero field");
  const SymTensorField dw = sym_d_region(mg, w, region);
  return norm_H1(mg, w, region) / (norm_L2(mg, dw, region) + l2);
}

// ---------------------------------------------------------------------------

namespace {

int region_code(Region r) {
  switch (r) {
    case Region::Interior: return 0;
    case Region::Annulus: return 1;
    case Region::Exterior: return 2;
  }
  return 2;
}

void write_header(std::ostream& os, const std::string& kind, const Domain& d) {
  os << std::setprecision(17);
  os << "FIELD v1 " << kind << ' ' << d.side() << ' ' << d.side() << ' ' << d.h() << ' '
     << d.radius_M() << ' ' << d.radius_M1() << '\n';
}

struct Header {
  std::string kind;
  std::shared_ptr<const Domain> domain;
};

Header read_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "empty field file");
  std::istringstream ls(line);
  std::string magic, version, kind;
  int nx = 0, ny = 0;
  double h = 0, rm = 0, rm1 = 0;
  ls >> magic >> version >> kind >> nx >> ny >> h >> rm >> rm1;
  if (!ls || magic != "FIELD" || version != "v1") {
    throw Error(ErrorCode::ParseError, "bad FIELD header: " + line);
  }
  auto domain = std::make_shared<const Domain>(rm, rm1, h);
  if (domain->side() != nx || domain->side() != ny) {
    throw Error(ErrorCode::ParseError, "FIELD grid size does not match its spacing and radii");
  }
  return {kind, domain};
}

template <typename Field>
void read_body(std::istream& is, Field& f, int ncomp) {
  const Domain& d = f.domain();
  for (int n = 0; n < d.node_count(); ++n) {
    int ix = 0, iy = 0, region = 0;
    double c[3] = {0, 0, 0};
    is >> ix >> iy >> region;
    for (int k = 0; k < ncomp; ++k) is >> c[k];
    if (!is || !d.valid(ix, iy)) {
      throw Error(ErrorCode::ParseError, "bad FIELD record " + std::to_string(n + 2));
    }
    for (int k = 0; k < ncomp; ++k) f.data()(d.index(ix, iy), k) = c[k];
  }
}

std::pair<std::string, Support> split_kind(const std::string& kind) {
  const auto dot = kind.find('.');
  if (dot == std::string::npos) return {kind, Support::M1};
  return {kind.substr(0, dot), parse_support(kind.substr(dot + 1))};
}

}  // namespace

void write_field(std::ostream& os, const SymTensorField& f) {
  const Domain& d = f.domain();
  write_header(os, std::string("tensor.") + support_name(f.support()), d);
  for (int idx = 0; idx < d.node_count(); ++idx) {
    os << d.ix_of(idx) << ' ' << d.iy_of(idx) << ' ' << region_code(d.region(idx)) << ' '
       << f.component(idx, 0) << ' ' << f.component(idx, 1) << ' ' << f.component(idx, 2) << '\n';
  }
}

void write_field(std::ostream& os, const OneFormField& v) {
  const Domain& d = v.domain();
  write_header(os, std::string("oneform.") + support_name(v.support()), d);
  for (int idx = 0; idx < d.node_count(); ++idx) {
    const Vec2 c = v.at(idx);
    os << d.ix_of(idx) << ' ' << d.iy_of(idx) << ' ' << region_code(d.region(idx)) << ' ' << c[0]
       << ' ' << c[1] << '\n';
  }
}

SymTensorField read_tensor_field(std::istream& is) {
  const Header hd = read_header(is);
  const auto [kind, support] = split_kind(hd.kind);
  if (kind != "tensor") throw Error(ErrorCode::ParseError, "expected a tensor field");
  SymTensorField f(hd.domain, support);
  read_body(is, f, 3);
  return f;
}

OneFormField read_oneform_field(std::istream& is) {
  const Header hd = read_header(is);
  const auto [kind, support] = split_kind(hd.kind);
  if (kind != "oneform") throw Error(ErrorCode::ParseError, "expected a one-form field");
  OneFormField v(hd.domain, support);
  read_body(is, v, 2);
  return v;
}

TensorFunction curl_curl(std::function<Mat2(const Vec2&)> hessian_of_psi) {
  return [hess = std::move(hessian_of_psi)](const Vec2& x) {
    const Mat2 h = hess(x);
    return sym_from(h(1, 1), -h(0, 1), h(0, 0));
  };
}

Mat2 gaussian_stream_hessian(const Vec2& x, double a, const Vec2& c) {
  const double q = x.squaredNorm();
  if (q >= 1.0) return Mat2::Zero();
  const Vec2 d = x - c;
  const double g = std::exp(-a * d.squaredNorm());
  const Vec2 dg = -2.0 * a * g * d;
  const Mat2 hg = (4.0 * a * a * d * d.transpose() - 2.0 * a * Mat2::Identity()) * g;
  const double u = 1.0 - q;
  const double b = u * u * u * u;
  const Vec2 db = -8.0 * u * u * u * x;
  const Mat2 hb = -8.0 * u * u * u * Mat2::Identity() + 48.0 * u * u * x * x.transpose();
  return hg * b + dg * db.transpose() + db * dg.transpose() + g * hb;
}

}  // namespace tensortomo
