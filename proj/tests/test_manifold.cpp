#include "tensortomo/manifold.hpp"

#include <doctest.h>

using namespace tensortomo;

namespace {

Metric conformal01() { return Metric::conformal({0.1, 1.0, Vec2::Zero()}); }

}  // namespace

TEST_CASE("euclidean metric is the identity with vanishing derivatives") {
  const MetricAt m = Metric::euclidean().eval(Vec2(0.3, -0.7));
  CHECK((m.g - Mat2::Identity()).norm() == 0.0);
  CHECK(m.det == 1.0);
  for (int k = 0; k < 2; ++k) {
    CHECK(m.dg[k].norm() == 0.0);
    for (int l = 0; l < 2; ++l) CHECK(m.d2g[k][l].norm() == 0.0);
  }
}

TEST_CASE("perturbation with eps = 0 reduces to the base metric") {
  const Metric p = Metric::perturbed(Metric::euclidean(), 0.0, TensorBump{}, 1.0);
  const MetricAt m = p.eval(Vec2(0.1, 0.2));
  CHECK((m.g - Mat2::Identity()).norm() == 0.0);
  CHECK(m.dg[0].norm() + m.dg[1].norm() == 0.0);
  CHECK(p.is_euclidean());
}

TEST_CASE("metric derivatives match finite differences") {
  const Metric g = Metric::perturbed(conformal01(), 0.3, TensorBump{}, 1.0);
  const Vec2 x(0.25, -0.4);
  const double e = 1e-5;
  const MetricAt m = g.eval(x);
  for (int k = 0; k < 2; ++k) {
    Vec2 dx = Vec2::Zero();
    dx[k] = e;
    const MetricAt p = g.eval(x + dx), q = g.eval(x - dx);
    CHECK(((p.g - q.g) / (2 * e) - m.dg[k]).norm() < 1e-8);
    for (int l = 0; l < 2; ++l) {
      CHECK(((p.dg[l] - q.dg[l]) / (2 * e) - m.d2g[k][l]).norm() < 1e-8);
    }
  }
  CHECK((g.g(x) - m.g).norm() < 1e-15);
  CHECK((m.ginv * m.g - Mat2::Identity()).norm() < 1e-14);
}

TEST_CASE("gauss curvature") {
  CHECK(gauss_curvature(Metric::euclidean(), Vec2(0.2, 0.1)) == doctest::Approx(0.0));
  // K = -exp(-2 lambda) Laplacian(lambda) for g = exp(2 lambda) I.
  const Vec2 x(0.3, -0.2);
  const double a = 0.1, w = 1.0;
  const double r2 = x.squaredNorm();
  const double lam = a * std::exp(-w * r2);
  const double lap = lam * (4.0 * w * w * r2 - 4.0 * w);
  CHECK(gauss_curvature(conformal01(), x) == doctest::Approx(-std::exp(-2 * lam) * lap).epsilon(1e-10));
}

TEST_CASE("christoffel symbols of a conformal metric") {
  const Vec2 x(0.4, 0.1);
  const Christoffel gam = christoffel(conformal01(), x);
  // Gamma^k_ij = delta_ik d_j lambda + delta_jk d_i lambda - delta_ij d_k lambda.
  const double lam = 0.1 * std::exp(-x.squaredNorm());
  const Vec2 d = -2.0 * lam * x;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double expect = (i == k) * d[j] + (j == k) * d[i] - (i == j) * d[k];
        CHECK(gam[k](i, j) == doctest::Approx(expect).epsilon(1e-12));
      }
}

TEST_CASE("domain layout") {
  const Domain d(1.0, 1.3, 1.0 / 16);
  CHECK(d.side() == 2 * d.half_width() + 1);
  CHECK(d.position(d.index(0, 0)).norm() == 0.0);
  for (int idx = 0; idx < d.node_count(); ++idx) {
    const int mirror = d.index(-d.ix_of(idx), -d.iy_of(idx));
    CHECK((d.position(idx) + d.position(mirror)).norm() == 0.0);
    CHECK(d.region(idx) == d.region(mirror));
  }
  CHECK_THROWS_AS(Domain(1.0, 0.9, 0.1), Error);
  CHECK_THROWS_AS(Domain(1.0, 1.3, -0.1), Error);
}

TEST_CASE("frames are orthonormal") {
  const Metric g = Metric::perturbed(conformal01(), 0.5, TensorBump{}, 1.0);
  const Vec2 x(0.6, -0.5);
  const auto e = orthonormal_frame(g.g(x));
  CHECK(dot_g(g.g(x), e[0], e[0]) == doctest::Approx(1.0));
  CHECK(dot_g(g.g(x), e[1], e[1]) == doctest::Approx(1.0));
  CHECK(std::abs(dot_g(g.g(x), e[0], e[1])) < 1e-14);
  const CircleFrame f = circle_frame(g, x);
  CHECK(std::abs(dot_g(g.g(x), f.normal, f.tangent)) < 1e-14);
  CHECK(f.normal.dot(x) > 0.0);
}

TEST_CASE("c3 distance and scaled bumps") {
  const Domain d(1.0, 1.3, 1.0 / 32);
  CHECK(c3_distance(conformal01(), conformal01(), d) == 0.0);
  const TensorBump b;
  const double scale = 1.0 / c3_norm(b, d);
  const Metric p = Metric::perturbed(Metric::euclidean(), 0.05, b, scale);
  CHECK(c3_distance(p, Metric::euclidean(), d) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("simplicity certification") {
  const Domain d;
  CHECK(certify_simple(Metric::euclidean(), d).simple());
  const SimplicityReport c = certify_simple(conformal01(), d);
  CHECK(c.simple());
  CHECK_FALSE(c.conjugate_point_found);
  const TensorBump b;
  const Metric big = Metric::perturbed(Metric::euclidean(), 20.0, b, 1.0 / c3_norm(b, d));
  CHECK_FALSE(certify_simple(big, d).simple());
}

TEST_CASE("error names") {
  CHECK(std::string(error_name(ErrorCode::EscapeFailure)) == "EscapeFailure");
  const Error e(ErrorCode::RangeError, "x");
  CHECK(e.code() == ErrorCode::RangeError);
  CHECK(std::string(e.what()).rfind("RangeError", 0) == 0);
}
