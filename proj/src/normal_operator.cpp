#include "tensortomo/normal_operator.hpp"

#include "tensortomo/parallel.hpp"

#include <iomanip>
#include <ostream>

namespace tensortomo {

namespace {

Mat2 lower(const Mat2& g, const Mat2& up) { return g * up * g; }

}  // namespace

Mat2 normal_compose(const Metric& metric, const SymTensorField& f, const Vec2& x, int n_dirs,
                    double step) {
  if (n_dirs < 4) throw Error(ErrorCode::RangeError, "normal_compose needs at least 4 directions");
  if (f.data().cwiseAbs().maxCoeff() == 0.0) return Mat2::Zero();
  const TensorSampler sampler(f);
  const double outer = f.domain().radius_M1();
  const Mat2 g = metric.g(x);
  const auto frame = orthonormal_frame(g);
  Mat2 up = Mat2::Zero();
  for (int m = 0; m < n_dirs; ++m) {
    const double th = 2.0 * M_PI * m / n_dirs;
    const Vec2 w = std::cos(th) * frame[0] + std::sin(th) * frame[1];
    up += w * w.transpose() * ray_integral(metric, sampler, x, w, outer, step);
  }
  return lower(g, 2.0 * (2.0 * M_PI / n_dirs) * up);
}

Mat2 normal_kernel(const Metric& metric, const SymTensorField& f, const Vec2& x,
                   const KernelOptions& opts) {
  if (f.data().cwiseAbs().maxCoeff() == 0.0) return Mat2::Zero();
  const Domain& d = f.domain();
  const double h = d.h();
  const MetricAt mx = metric.eval(x);
  const Mat2 f0 = TensorSampler(f)(x);

  // Singularity subtraction: the frozen kernel times a C^2 cutoff (1 - r^2/R^2)^3
  // on B_R(x). A sharp cutoff would leave an O(h) lattice error on the circle.
  // B_R must lie inside the support so every node of the disc is summed.
  double outer = 0.0;
  if (f.support() == Support::M) outer = d.radius_M();
  if (f.support() == Support::M1) outer = d.radius_M1();
  const double radius = std::max(0.0, std::min(opts.subtraction_radius, 0.5 * (outer - x.norm())));

  // Frozen-coefficient flat kernel at y = x + r u, in the units of the result.
  auto frozen = [&](const Vec2& u, double r) -> Mat2 {
    const double q = norm_g(mx.g, u);
    const Vec2 w = u / q;
    const Vec2 gw = mx.g * w;
    return (2.0 * mx.sqrt_det * w.dot(f0 * w) / (q * r)) * gw * gw.transpose();
  };

  // Rows are independent; within a row each solve starts from its left
  // neighbour's solution.
  const int half = d.half_width();
  std::vector<Mat2> row_sum(d.side(), Mat2::Zero());
  std::vector<Mat2> row_frozen(d.side(), Mat2::Zero());
  parallel_for(d.side(), [&](int jrow) {
    const int iy = jrow - half;
    std::optional<Vec2> prev;
    Vec2 prev_y = Vec2::Zero();
    for (int ix = -half; ix <= half; ++ix) {
      const int idx = d.index(ix, iy);
      if (!in_support(d, f.support(), idx)) {
        prev.reset();
        continue;
      }
      const Vec2 y = d.position(idx);
      const double r = (y - x).norm();
      // The subtracted integrand is bounded, so the node at x can be dropped.
      if (r < 0.5 * h) {
        prev.reset();
        continue;
      }
      if (r < radius) {
        const double c = 1.0 - (r / radius) * (r / radius);
        row_frozen[jrow] += (c * c * c) * frozen((y - x) / r, r);
      }
      const Mat2 fy = f.at(idx);
      if (fy.cwiseAbs().maxCoeff() == 0.0) {
        prev.reset();
        continue;
      }
      TwoPointOptions o = opts.shooting;
      if (prev && r > 0.1 && (y - prev_y).norm() < 1.5 * h) o.guess = prev;
      const TwoPointSolution sol = two_point(metric, x, y, o);
      prev = Vec2(sol.rho, sol.initial_angle);
      prev_y = y;
      // f^ij d_{y^i}rho d_{y^j}rho = f_ij gamma'^i gamma'^j at y.
      const double fvv = sol.final_direction.dot(fy * sol.final_direction);
      const Vec2 gx = sol.grad_x;
      const double weight = fvv / sol.rho * sol.hessian_mixed_det;
      row_sum[jrow] += weight * gx * gx.transpose();
    }
  });
  Mat2 total = Mat2::Zero();
  Mat2 subtracted = Mat2::Zero();
  for (int j = 0; j < d.side(); ++j) {
    total += row_sum[j];
    subtracted += row_frozen[j];
  }
  total *= 2.0 / mx.sqrt_det * h * h;
  total -= subtracted * h * h;

  // Exact integral of the subtracted term: the 1/r cancels the area element,
  // and int_0^1 (1 - s^2)^3 ds = 16/35.
  if (radius > 0.0) {
    const int n = opts.correction_angles;
    Mat2 ang = Mat2::Zero();
    for (int m = 0; m < n; ++m) {
      const double th = 2.0 * M_PI * m / n;
      ang += frozen(Vec2(std::cos(th), std::sin(th)), 1.0);
    }
    total += (16.0 / 35.0) * radius * (2.0 * M_PI / n) * ang;
  }
  return total;
}

// ---------------------------------------------------------------------------

Mat2 SymbolTensor::apply(const Mat2& a) const {
  Mat2 out = Mat2::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out(i, j) += (*this)(i, j, k, l) * a(k, l);
  return out;
}

double SymbolTensor::pair(const Mat2& a, const Mat2& b) const {
  return apply(b).cwiseProduct(a).sum();
}

std::array<double, 9> SymbolTensor::independent() const {
  const int pairs[3][2] = {{0, 0}, {0, 1}, {1, 1}};
  std::array<double, 9> out{};
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      out[3 * p + q] = (*this)(pairs[p][0], pairs[p][1], pairs[q][0], pairs[q][1]);
  return out;
}

double SymbolTensor::max_abs() const {
  double m = 0.0;
  for (double v : s_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

void add_fourth_power(SymbolTensor& s, const Vec2& w, double weight) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) s.at(i, j, k, l) += weight * w[i] * w[j] * w[k] * w[l];
}

}  // namespace

SymbolTensor principal_symbol(const Metric& metric, const Vec2& x, const Vec2& xi,
                              SymbolMethod method, double width, int n_angles) {
  if (xi.norm() == 0.0) throw Error(ErrorCode::ZeroCovector, "principal symbol at xi = 0");
  const auto frame = orthonormal_frame(metric.g(x));
  const double a = xi.dot(frame[0]);
  const double b = xi.dot(frame[1]);
  const double norm = std::hypot(a, b);
  SymbolTensor s;
  if (method == SymbolMethod::ExactCrossing) {
    const double th0 = std::atan2(b, a);
    for (double sign : {-1.0, 1.0}) {
      const double th = th0 + sign * 0.5 * M_PI;
      const Vec2 w = std::cos(th) * frame[0] + std::sin(th) * frame[1];
      add_fourth_power(s, w, 2.0 * M_PI / norm);
    }
    return s;
  }
  const double sd = width * norm;
  const double dth = 2.0 * M_PI / n_angles;
  for (int m = 0; m < n_angles; ++m) {
    const double th = m * dth;
    const Vec2 w = std::cos(th) * frame[0] + std::sin(th) * frame[1];
    const double arg = xi.dot(w) / sd;
    if (std::abs(arg) > 40.0) continue;
    const double delta = std::exp(-0.5 * arg * arg) / (std::sqrt(2.0 * M_PI) * sd);
    add_fourth_power(s, w, 2.0 * M_PI * dth * delta);
  }
  return s;
}

double potential_contraction(const SymbolTensor& s, const Vec2& xi) {
  double worst = 0.0;
  for (int c = 0; c < 2; ++c) {
    Vec2 v = Vec2::Zero();
    v[c] = 1.0;
    const Mat2 a = 0.5 * (xi * v.transpose() + v * xi.transpose());
    worst = std::max(worst, s.apply(a).cwiseAbs().maxCoeff());
  }
  const double scale = s.max_abs() * xi.norm();
  return scale > 0.0 ? worst / scale : 0.0;
}

double solenoidal_ellipticity(const Metric& metric, const SymbolTensor& s, const Vec2& x,
                              const Vec2& xi) {
  const Mat2 g = metric.g(x);
  // g-unit vector annihilated by xi, then lowered.
  Vec2 e(-xi[1], xi[0]);
  e /= norm_g(g, e);
  const Vec2 ec = g * e;
  const Mat2 fhat = ec * ec.transpose();
  return s.pair(fhat, fhat);
}

void write_symbol_csv(std::ostream& os, const std::vector<Vec2>& xs, const std::vector<Vec2>& xis,
                      const std::vector<SymbolTensor>& symbols) {
  os << "x1,x2,xi1,xi2,s1111,s1112,s1122,s1211,s1212,s1222,s2211,s2212,s2222\n";
  os << std::setprecision(17);
  for (size_t k = 0; k < symbols.size(); ++k) {
    os << xs[k][0] << ',' << xs[k][1] << ',' << xis[k][0] << ',' << xis[k][1];
    for (double v : symbols[k].independent()) os << ',' << v;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

NormalGrid::NormalGrid(const Metric& metric, std::shared_ptr<const Domain> domain,
                       NormalGridOptions opts)
    : metric_(metric),
      domain_(std::move(domain)),
      opts_(opts),
      step_(opts.step > 0.0 ? opts.step : 0.5 * domain_->h()),
      fan_(boundary_fan(metric, *domain_, Boundary::M1, opts.fan_points, opts.fan_dirs)),
      arc_(metric, domain_->radius_M1()) {
  if (opts_.n_theta < 4) throw Error(ErrorCode::RangeError, "NormalGrid needs n_theta >= 4");
  const Domain& d = *domain_;
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (in_support(d, Support::M1, idx)) nodes_.push_back(idx);
  }
  if (metric_.is_euclidean()) return;
  const int nt = opts_.n_theta;
  map_.resize(nodes_.size() * nt);
  const double outer = d.radius_M1();
  parallel_for(static_cast<int>(nodes_.size()), [&](int n) {
    const Vec2 x = d.position(nodes_[n]);
    const auto frame = orthonormal_frame(metric_.g(x));
    const double cap = default_cap(metric_, x, outer);
    for (int m = 0; m < nt; ++m) {
      const double th = M_PI * m / nt;
      const Vec2 w = std::cos(th) * frame[0] + std::sin(th) * frame[1];
      const WalkEnd end = walk(metric_, FlowState{x, -w}, WalkBounds{0.0, outer}, opts_.map_step,
                               cap, [](const FlowState&, const FlowState&, double) {});
      if (!end.exited) {
        throw Error(ErrorCode::EscapeFailure, "backward geodesic did not reach the outer circle");
      }
      const Vec2 y = end.state.x;
      const Vec2 w_in = -end.state.v;
      const CircleFrame cf = circle_frame(metric_, y);
      const Mat2 gy = metric_.g(y);
      const double beta = std::atan2(dot_g(gy, w_in, cf.tangent), -dot_g(gy, w_in, cf.normal));
      map_[n * nt + m] = {static_cast<float>(arc_.arclength_at(std::atan2(y[1], y[0]))),
                          static_cast<float>(beta)};
    }
  });
}

NormalGrid::Entry NormalGrid::entry_of(int node, int m) const {
  const Vec2 x = domain_->position(nodes_[node]);
  const double th = M_PI * m / opts_.n_theta;
  const Vec2 w(std::cos(th), std::sin(th));
  const double outer = domain_->radius_M1();
  const double xw = x.dot(w);
  const double t = xw + std::sqrt(std::max(0.0, xw * xw - x.squaredNorm() + outer * outer));
  const Vec2 y = x - t * w;
  const Vec2 nu = y / outer;
  const Vec2 tau(-nu[1], nu[0]);
  return {static_cast<float>(arc_.arclength_at(std::atan2(y[1], y[0]))),
          static_cast<float>(std::atan2(w.dot(tau), -w.dot(nu)))};
}

RayData NormalGrid::sinogram(const SymTensorField& f) const {
  return transform(metric_, f, fan_, step_);
}

double NormalGrid::lookup(const RayData& data, double s, double beta) const {
  const int np = fan_.n_points, nd = fan_.n_dirs;
  const double ds = arc_.length() / np;
  double u = s / ds;
  u -= np * std::floor(u / np);
  int i0 = static_cast<int>(std::floor(u));
  const double fu = u - i0;
  i0 %= np;
  const int i1 = (i0 + 1) % np;
  const double b = (beta + 0.5 * M_PI) / (M_PI / nd) - 0.5;
  auto column = [&](int i) {
    const double* v = data.values.data() + static_cast<size_t>(i) * nd;
    if (b <= -0.5 || b >= nd - 0.5) return 0.0;
    if (b < 0.0) return (b + 0.5) / 0.5 * v[0];
    if (b > nd - 1) return (nd - 0.5 - b) / 0.5 * v[nd - 1];
    const int j0 = std::min(static_cast<int>(b), nd - 2);
    const double fb = b - j0;
    return (1.0 - fb) * v[j0] + fb * v[j0 + 1];
  };
  return (1.0 - fu) * column(i0) + fu * column(i1);
}

SymTensorField NormalGrid::backproject(const RayData& data) const {
  if (data.fan != &fan_) throw Error(ErrorCode::FanMismatch, "sinogram from another fan");
  const Domain& d = *domain_;
  SymTensorField out(domain_, Support::M1);
  const int nt = opts_.n_theta;
  const bool flat = metric_.is_euclidean();
  parallel_for(static_cast<int>(nodes_.size()), [&](int n) {
    const Vec2 x = d.position(nodes_[n]);
    const Mat2 g = metric_.g(x);
    const auto frame = orthonormal_frame(g);
    Mat2 up = Mat2::Zero();
    for (int m = 0; m < nt; ++m) {
      const double th = M_PI * m / nt;
      const Vec2 w = std::cos(th) * frame[0] + std::sin(th) * frame[1];
      const Entry e = flat ? entry_of(n, m) : map_[static_cast<size_t>(n) * nt + m];
      up += w * w.transpose() * lookup(data, e.s, e.beta);
    }
    out.set(nodes_[n], lower(g, 2.0 * (M_PI / nt) * up));
  });
  return out;
}

// ---------------------------------------------------------------------------

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  return den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
}

OrderProbe symbol_order_probe(const NormalGrid& ng, const std::vector<double>& ks) {
  const Domain& d = ng.domain();
  for (double k : ks) {
    if (k * d.h() > 0.25 + 1e-12) {
      throw Error(ErrorCode::UnresolvedFrequency,
                  "frequency " + std::to_string(k) + " is not resolved at h = " +
                      std::to_string(d.h()));
    }
  }
  auto dom = std::make_shared<const Domain>(d);
  const MetricGrid mg(ng.metric(), dom);
  auto chi = [](const Vec2& x) {
    const double r2 = x.squaredNorm() / 0.64;
    return r2 < 1.0 ? std::pow(1.0 - r2, 4) : 0.0;
  };
  OrderProbe probe;
  std::vector<double> kk, sol, pot;
  for (double k : ks) {
    const SymTensorField fs = SymTensorField::sample(dom, Support::M, [&](const Vec2& x) {
      return sym_from(0.0, 0.0, chi(x) * std::sin(k * x[0]));
    });
    const OneFormField v = OneFormField::sample(
        dom, Support::M, [&](const Vec2& x) { return Vec2(chi(x) * std::sin(k * x[0]) / k, 0.0); });
    const SymTensorField fp = sym_d(mg, v);
    OrderProbeRow row;
    row.k = k;
    row.solenoidal_ratio = norm_L2(mg, ng.apply(fs), Support::M1) / norm_L2(mg, fs, Support::M);
    row.potential_ratio = norm_L2(mg, ng.apply(fp), Support::M1) / norm_L2(mg, fp, Support::M);
    probe.rows.push_back(row);
    kk.push_back(k);
    sol.push_back(row.solenoidal_ratio);
    pot.push_back(row.potential_ratio);
  }
  probe.solenoidal_slope = loglog_slope(kk, sol);
  probe.potential_slope = loglog_slope(kk, pot);
  return probe;
}

}  // namespace tensortomo
