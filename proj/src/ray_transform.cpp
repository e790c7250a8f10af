#include "tensortomo/ray_transform.hpp"

#include "tensortomo/parallel.hpp"

#include <iomanip>
#include <ostream>

namespace tensortomo {

namespace {

template <typename Along>
double integrate_ray(const Metric& metric, Along&& along, const Vec2& x, const Vec2& omega,
                     double radius, double step) {
  WalkEnd end;
  const double cap = default_cap(metric, x, radius);
  const double value = integrate_along<double>(metric, FlowState{x, omega}, WalkBounds{0.0, radius},
                                               step, cap, along, &end);
  if (!end.exited) {
    throw Error(ErrorCode::EscapeFailure, "geodesic did not leave the disc within the length cap");
  }
  return value;
}

}  // namespace

double ray_integral(const Metric& metric, const TensorFunction& f, const Vec2& x, const Vec2& omega,
                    double radius, double step) {
  return integrate_ray(
      metric, [&](const Vec2& p, const Vec2& v) { return v.dot(f(p) * v); }, x, omega, radius, step);
}

double ray_integral(const Metric& metric, const TensorSampler& f, const Vec2& x, const Vec2& omega,
                    double radius, double step) {
  return integrate_ray(
      metric, [&](const Vec2& p, const Vec2& v) { return f.along(p, v); }, x, omega, radius, step);
}

RayData transform(const Metric& metric, const SymTensorField& f, const BoundaryFan& fan,
                  double step) {
  RayData out{&fan, std::vector<double>(fan.entries.size(), 0.0)};
  if (f.data().cwiseAbs().maxCoeff() == 0.0) return out;
  const TensorSampler sampler(f);
  parallel_for(static_cast<int>(fan.entries.size()), [&](int k) {
    const FanEntry& e = fan.entries[k];
    out.values[k] = ray_integral(metric, sampler, e.x, e.omega, fan.radius, step);
  });
  return out;
}

RayData transform(const Metric& metric, const TensorFunction& f, const BoundaryFan& fan,
                  double step) {
  RayData out{&fan, std::vector<double>(fan.entries.size(), 0.0)};
  parallel_for(static_cast<int>(fan.entries.size()), [&](int k) {
    const FanEntry& e = fan.entries[k];
    out.values[k] = ray_integral(metric, f, e.x, e.omega, fan.radius, step);
  });
  return out;
}

double inner_mu(const RayData& a, const RayData& b) {
  if (!a.fan || a.fan != b.fan || a.values.size() != b.values.size() ||
      a.values.size() != a.fan->entries.size()) {
    throw Error(ErrorCode::FanMismatch, "ray data live on different fans");
  }
  double s = 0.0;
  for (size_t k = 0; k < a.values.size(); ++k) {
    s += a.values[k] * b.values[k] * a.fan->entries[k].weight_mu;
  }
  return s;
}

double norm_mu(const RayData& a) { return std::sqrt(std::max(0.0, inner_mu(a, a))); }

void write_ray_csv(std::ostream& os, const RayData& data) {
  os << "x1,x2,omega1,omega2,weight_sigma,weight_mu,value\n";
  os << std::setprecision(17);
  for (size_t k = 0; k < data.values.size(); ++k) {
    const FanEntry& e = data.fan->entries[k];
    os << e.x[0] << ',' << e.x[1] << ',' << e.omega[0] << ',' << e.omega[1] << ','
       << e.weight_sigma << ',' << e.weight_mu << ',' << data.values[k] << '\n';
  }
}

// ---------------------------------------------------------------------------

RayMatrix::RayMatrix(const Metric& metric, std::shared_ptr<const Domain> domain, Support region,
                     const BoundaryFan& fan, double step)
    : domain_(std::move(domain)), region_(region) {
  const Domain& d = *domain_;
  const int n_rays = static_cast<int>(fan.entries.size());
  std::vector<std::vector<std::pair<int, double>>> rows(n_rays);

  parallel_for(n_rays, [&](int k) {
    const FanEntry& e = fan.entries[k];
    std::vector<double> dense(3 * d.node_count(), 0.0);
    std::vector<char> seen(3 * d.node_count(), 0);
    std::vector<int> touched;
    auto deposit = [&](const Vec2& x, const Vec2& v, double w) {
      if (w == 0.0 || !in_support(d, region_, x)) return;
      const double h = d.h();
      const int i = static_cast<int>(std::floor(x[0] / h));
      const int j = static_cast<int>(std::floor(x[1] / h));
      if (!d.valid(i, j) || !d.valid(i + 1, j + 1)) return;
      const double fx = x[0] / h - i, fy = x[1] / h - j;
      const int nodes[4] = {d.index(i, j), d.index(i + 1, j), d.index(i, j + 1),
                            d.index(i + 1, j + 1)};
      const double bl[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const double comp[3] = {v[0] * v[0], 2.0 * v[0] * v[1], v[1] * v[1]};
      for (int a = 0; a < 4; ++a) {
        if (bl[a] == 0.0 || !in_support(d, region_, nodes[a])) continue;
        for (int c = 0; c < 3; ++c) {
          const int col = 3 * nodes[a] + c;
          if (!seen[col]) {
            seen[col] = 1;
            touched.push_back(col);
          }
          dense[col] += w * bl[a] * comp[c];
        }
      }
    };
    const double cap = default_cap(metric, e.x, fan.radius);
    const WalkEnd end = walk(metric, FlowState{e.x, e.omega}, WalkBounds{0.0, fan.radius}, step,
                             cap, [&](const FlowState& a, const FlowState& b, double s) {
                               const FlowState m = hermite_midpoint(metric, a, b, s);
                               deposit(a.x, a.v, s / 6.0);
                               deposit(m.x, m.v, 4.0 * s / 6.0);
                               deposit(b.x, b.v, s / 6.0);
                             });
    if (!end.exited) {
      throw Error(ErrorCode::EscapeFailure, "geodesic did not leave the disc within the length cap");
    }
    std::sort(touched.begin(), touched.end());
    rows[k].reserve(touched.size());
    for (int col : touched) rows[k].emplace_back(col, dense[col]);
  });

  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < n_rays; ++k) {
    for (const auto& [col, val] : rows[k]) trip.emplace_back(k, col, val);
  }
  a_.resize(n_rays, 3 * d.node_count());
  a_.setFromTriplets(trip.begin(), trip.end());
}

Eigen::VectorXd RayMatrix::flatten(const SymTensorField& f) {
  const Eigen::MatrixX3d& c = f.data();
  Eigen::VectorXd x(3 * c.rows());
  for (Eigen::Index n = 0; n < c.rows(); ++n) x.segment<3>(3 * n) = c.row(n).transpose();
  return x;
}

SymTensorField RayMatrix::unflatten(std::shared_ptr<const Domain> domain, Support region,
                                    const Eigen::VectorXd& x) {
  SymTensorField f(domain, region);
  for (Eigen::Index n = 0; n < f.data().rows(); ++n) f.data().row(n) = x.segment<3>(3 * n).transpose();
  f.mask();
  return f;
}

Eigen::VectorXd RayMatrix::apply(const SymTensorField& f) const { return a_ * flatten(f); }

}  // namespace tensortomo
