#include "tensortomo/manifold.hpp"

#include <cmath>
#include <sstream>

namespace tensortomo {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonUnitDirection: return "NonUnitDirection";
    case ErrorCode::EscapeFailure: return "EscapeFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ZeroField: return "ZeroField";
    case ErrorCode::ZeroCovector: return "ZeroCovector";
    case ErrorCode::UnresolvedFrequency: return "UnresolvedFrequency";
    case ErrorCode::FanMismatch: return "FanMismatch";
    case ErrorCode::GeodesicEntersM: return "GeodesicEntersM";
    case ErrorCode::IllConditionedPair: return "IllConditionedPair";
    case ErrorCode::EnsembleDegenerate: return "EnsembleDegenerate";
    case ErrorCode::CertificationFailure: return "CertificationFailure";
    case ErrorCode::Stagnation: return "Stagnation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::RangeError: return "RangeError";
  }
  return "Unknown";
}

Domain::Domain(double radius_M, double radius_M1, double h)
    : radius_M_(radius_M), radius_M1_(radius_M1), h_(h) {
  if (!(radius_M > 0.0) || !(radius_M1 > radius_M) || !(h > 0.0)) {
    throw Error(ErrorCode::RangeError, "domain needs 0 < radius_M < radius_M1 and h > 0");
  }
  half_ = static_cast<int>(std::ceil(radius_M1 / h)) + 1;
  region_.resize(node_count());
  for (int idx = 0; idx < node_count(); ++idx) {
    const double r = position(idx).norm();
    region_[idx] = r < radius_M ? Region::Interior
                 : r < radius_M1 ? Region::Annulus
                                 : Region::Exterior;
  }
}

Metric Metric::euclidean() { return Metric{}; }

Metric Metric::conformal(const ConformalBump& bump) {
  Metric m;
  m.kind_ = Kind::Conformal;
  m.conf_ = bump;
  return m;
}

Metric Metric::perturbed(const Metric& base, double eps, const TensorBump& bump, double scale) {
  Metric m = base;
  m.kind_ = Kind::Perturbed;
  m.eps_ = eps;
  m.bump_ = bump;
  m.scale_ = scale;
  return m;
}

bool Metric::is_euclidean() const { return conf_.amplitude == 0.0 && eps_ == 0.0; }

namespace {

MetricAt zeroed() {
  MetricAt m;
  m.g.setZero();
  for (int k = 0; k < 2; ++k) {
    m.dg[k].setZero();
    for (int l = 0; l < 2; ++l) m.d2g[k][l].setZero();
  }
  return m;
}

}  // namespace

MetricAt Metric::eval_bump(const Vec2& x, bool with_second) const {
  MetricAt m = zeroed();
  const Vec2 d = x - bump_.center;
  const double s2 = bump_.sigma * bump_.sigma;
  const double e = std::exp(-d.squaredNorm() / s2);
  const Mat2& b = bump_.coefficients;
  m.g = b * e;
  for (int k = 0; k < 2; ++k) {
    m.dg[k] = b * (-2.0 * d[k] / s2 * e);
    for (int l = 0; l < 2 && with_second; ++l) {
      const double hess = (4.0 * d[k] * d[l] / (s2 * s2) - (k == l ? 2.0 / s2 : 0.0)) * e;
      m.d2g[k][l] = b * hess;
    }
  }
  return m;
}

MetricAt Metric::eval(const Vec2& x, bool with_second) const {
  MetricAt m = zeroed();
  const Mat2 id = Mat2::Identity();
  if (conf_.amplitude != 0.0) {
    const Vec2 d = x - conf_.center;
    const double w = conf_.width;
    const double lam = conf_.amplitude * std::exp(-w * d.squaredNorm());
    const Vec2 grad = -2.0 * w * lam * d;
    const double e2 = std::exp(2.0 * lam);
    m.g = e2 * id;
    for (int k = 0; k < 2; ++k) {
      m.dg[k] = 2.0 * grad[k] * e2 * id;
      for (int l = 0; l < 2 && with_second; ++l) {
        const double hess = 4.0 * w * w * lam * d[k] * d[l] - (k == l ? 2.0 * w * lam : 0.0);
        m.d2g[k][l] = (4.0 * grad[k] * grad[l] + 2.0 * hess) * e2 * id;
      }
    }
  } else {
    m.g = id;
  }
  if (eps_ != 0.0) {
    const MetricAt p = eval_bump(x, with_second);
    const double c = eps_ * scale_;
    m.g += c * p.g;
    for (int k = 0; k < 2; ++k) {
      m.dg[k] += c * p.dg[k];
      for (int l = 0; l < 2 && with_second; ++l) m.d2g[k][l] += c * p.d2g[k][l];
    }
  }
  m.det = m.g.determinant();
  m.sqrt_det = std::sqrt(m.det);
  m.ginv = m.g.inverse();
  return m;
}

Mat2 Metric::g(const Vec2& x) const {
  Mat2 g = Mat2::Identity();
  if (conf_.amplitude != 0.0) {
    const double lam = conf_.amplitude * std::exp(-conf_.width * (x - conf_.center).squaredNorm());
    g *= std::exp(2.0 * lam);
  }
  if (eps_ != 0.0) {
    const double s2 = bump_.sigma * bump_.sigma;
    g += eps_ * scale_ * std::exp(-(x - bump_.center).squaredNorm() / s2) * bump_.coefficients;
  }
  return g;
}

std::string Metric::describe() const {
  std::ostringstream os;
  os.precision(6);
  switch (kind_) {
    case Kind::Euclidean: os << "euclidean"; break;
    case Kind::Conformal:
      os << "conformal(a=" << conf_.amplitude << ",w=" << conf_.width << ")";
      break;
    case Kind::Perturbed:
      os << "perturbed(a=" << conf_.amplitude << ",eps=" << eps_ << ")";
      break;
  }
  return os.str();
}

Christoffel christoffel(const MetricAt& m) {
  // Gamma_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij), then raise l.
  Christoffel first;
  for (int l = 0; l < 2; ++l) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        first[l](i, j) = 0.5 * (m.dg[i](j, l) + m.dg[j](i, l) - m.dg[l](i, j));
      }
    }
  }
  Christoffel gamma;
  for (int k = 0; k < 2; ++k) gamma[k] = m.ginv(k, 0) * first[0] + m.ginv(k, 1) * first[1];
  return gamma;
}

Christoffel christoffel(const Metric& metric, const Vec2& x) {
  return christoffel(metric.eval(x, false));
}

double gauss_curvature(const Metric& metric, const Vec2& x) {
  const MetricAt m = metric.eval(x);
  const Christoffel gam = christoffel(m);

  // d_c Gamma^a_ij from the product rule, with d_c g^{-1} = -g^{-1} (d_c g) g^{-1}.
  std::array<Christoffel, 2> dgam;
  for (int c = 0; c < 2; ++c) {
    Christoffel dfirst;
    for (int l = 0; l < 2; ++l) {
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          dfirst[l](i, j) =
              0.5 * (m.d2g[c][i](j, l) + m.d2g[c][j](i, l) - m.d2g[c][l](i, j));
        }
      }
    }
    Christoffel first;
    for (int l = 0; l < 2; ++l) {
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          first[l](i, j) = 0.5 * (m.dg[i](j, l) + m.dg[j](i, l) - m.dg[l](i, j));
        }
      }
    }
    const Mat2 dginv = -m.ginv * m.dg[c] * m.ginv;
    for (int a = 0; a < 2; ++a) {
      dgam[c][a] = dginv(a, 0) * first[0] + dginv(a, 1) * first[1] +
                   m.ginv(a, 0) * dfirst[0] + m.ginv(a, 1) * dfirst[1];
    }
  }

  // R^a_{212} = d_1 Gamma^a_{22} - d_2 Gamma^a_{12}
  //           + Gamma^a_{1e} Gamma^e_{22} - Gamma^a_{2e} Gamma^e_{12}
  Vec2 r;
  for (int a = 0; a < 2; ++a) {
    double v = dgam[0][a](1, 1) - dgam[1][a](0, 1);
    for (int e = 0; e < 2; ++e) {
      v += gam[a](0, e) * gam[e](1, 1) - gam[a](1, e) * gam[e](0, 1);
    }
    r[a] = v;
  }
  const double r1212 = m.g(0, 0) * r[0] + m.g(0, 1) * r[1];
  return r1212 / m.det;
}

std::array<Vec2, 2> orthonormal_frame(const Mat2& g) {
  Vec2 e1(1.0, 0.0);
  e1 /= norm_g(g, e1);
  Vec2 e2(0.0, 1.0);
  e2 -= dot_g(g, e1, e2) * e1;
  e2 /= norm_g(g, e2);
  return {e1, e2};
}

CircleFrame circle_frame(const Metric& metric, const Vec2& x) {
  const MetricAt m = metric.eval(x);
  const double r = x.norm();
  // Outward normal is the g-gradient of |x|, normalized.
  const Vec2 dr = x / r;
  Vec2 nu = m.ginv * dr;
  nu /= norm_g(m.g, nu);
  Vec2 tau(-x[1], x[0]);
  tau /= norm_g(m.g, tau);
  return {nu, tau};
}

namespace {

// Max abs over all components of value and derivatives up to order three of a
// metric-like field given by `eval`; third derivatives by central differences
// of the closed-form Hessian.
template <typename Eval>
double c3_sup(const Eval& eval, const Domain& domain) {
  const double step = 1e-4;
  double best = 0.0;
  for (int idx = 0; idx < domain.node_count(); ++idx) {
    if (domain.region(idx) != Region::Interior) continue;
    const Vec2 x = domain.position(idx);
    const MetricAt m = eval(x);
    best = std::max(best, m.g.cwiseAbs().maxCoeff());
    for (int k = 0; k < 2; ++k) {
      best = std::max(best, m.dg[k].cwiseAbs().maxCoeff());
      for (int l = 0; l < 2; ++l) best = std::max(best, m.d2g[k][l].cwiseAbs().maxCoeff());
    }
    for (int c = 0; c < 2; ++c) {
      Vec2 dx = Vec2::Zero();
      dx[c] = step;
      const MetricAt p = eval(x + dx);
      const MetricAt q = eval(x - dx);
      for (int k = 0; k < 2; ++k) {
        for (int l = 0; l < 2; ++l) {
          const Mat2 third = (p.d2g[k][l] - q.d2g[k][l]) / (2.0 * step);
          best = std::max(best, third.cwiseAbs().maxCoeff());
        }
      }
    }
  }
  return best;
}

}  // namespace

double c3_distance(const Metric& a, const Metric& b, const Domain& domain) {
  return c3_sup(
      [&](const Vec2& x) {
        MetricAt pa = a.eval(x);
        const MetricAt pb = b.eval(x);
        pa.g -= pb.g;
        for (int k = 0; k < 2; ++k) {
          pa.dg[k] -= pb.dg[k];
          for (int l = 0; l < 2; ++l) pa.d2g[k][l] -= pb.d2g[k][l];
        }
        return pa;
      },
      domain);
}

double c3_norm(const TensorBump& bump, const Domain& domain) {
  const Metric m = Metric::perturbed(Metric::euclidean(), 1.0, bump, 1.0);
  return c3_sup([&](const Vec2& x) { return m.eval_bump(x); }, domain);
}

}  // namespace tensortomo
