#include "tensortomo/elliptic.hpp"
#include "tensortomo/fields.hpp"

#include <doctest.h>

#include <sstream>

using namespace tensortomo;

namespace {

std::shared_ptr<const Domain> domain(double h = 1.0 / 32) {
  return std::make_shared<const Domain>(1.0, 1.3, h);
}

Vec2 bump_oneform(const Vec2& x) {
  const Vec2 c(0.1, -0.2);
  const double q = (x - c).squaredNorm() / 0.49;
  if (q >= 1.0) return Vec2::Zero();
  return Vec2(1.0, -2.0) * std::pow(1.0 - q, 4);
}

}  // namespace

TEST_CASE("supports") {
  CHECK(parse_support("annulus") == Support::Annulus);
  CHECK(std::string(support_name(Support::M1)) == "M1");
  CHECK_THROWS_AS(parse_support("disc"), Error);
  const Domain d;
  CHECK(in_support(d, Support::M, Vec2(0.5, 0.5)));
  CHECK_FALSE(in_support(d, Support::M, Vec2(1.1, 0.0)));
  CHECK(in_support(d, Support::Annulus, Vec2(1.1, 0.0)));
}

TEST_CASE("fields are masked to their support") {
  const auto d = domain();
  const SymTensorField f =
      SymTensorField::sample(d, Support::M, [](const Vec2&) { return Mat2(Mat2::Identity()); });
  for (int idx = 0; idx < d->node_count(); ++idx) {
    CHECK(f.at(idx).norm() == (in_support(*d, Support::M, idx) ? std::sqrt(2.0) : 0.0));
  }
}

TEST_CASE("L2 norm of the identity tensor") {
  const auto d = domain(1.0 / 64);
  const MetricGrid mg(Metric::euclidean(), d);
  const SymTensorField f =
      SymTensorField::sample(d, Support::M, [](const Vec2&) { return Mat2(Mat2::Identity()); });
  CHECK(norm_L2(mg, f, Support::M) == doctest::Approx(std::sqrt(2.0 * M_PI)).epsilon(1e-2));
  CHECK(inner_L2(mg, f, f, Support::M) == doctest::Approx(std::pow(norm_L2(mg, f, Support::M), 2)));
}

TEST_CASE("killing fields have zero symmetric derivative") {
  const auto d = domain();
  const MetricGrid mg(Metric::euclidean(), d);
  const OneFormField rot =
      OneFormField::sample(d, Support::M1, [](const Vec2& x) { return Vec2(-x[1], x[0]); });
  CHECK(sym_d(mg, rot).data().cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("curl-curl tensors are divergence free") {
  const auto d = domain(1.0 / 64);
  const MetricGrid mg(Metric::euclidean(), d);
  const Vec2 c(0.1, 0.0);
  const TensorFunction fn = curl_curl([&](const Vec2& x) { return gaussian_stream_hessian(x, 6.0, c); });
  const SymTensorField f = SymTensorField::sample(d, Support::M, fn);
  const OneFormField div = divergence(mg, f);
  double inner = 0.0, scale = 0.0;
  for (int idx = 0; idx < d->node_count(); ++idx) {
    if (d->position(idx).norm() < 0.8) inner = std::max(inner, div.at(idx).norm());
    scale = std::max(scale, f.at(idx).norm());
  }
  CHECK(inner < 1e-2 * scale);
}

TEST_CASE("FIELD files round-trip") {
  const auto d = domain(1.0 / 16);
  const SymTensorField f = SymTensorField::sample(
      d, Support::M, [](const Vec2& x) { return sym_from(x[0], x[0] * x[1], 1.0 / 3.0); });
  std::stringstream ss;
  write_field(ss, f);
  const SymTensorField g = read_tensor_field(ss);
  CHECK((g.data() - f.data()).cwiseAbs().maxCoeff() == 0.0);
  std::stringstream bad("FIELD v2 tensor\n");
  CHECK_THROWS_AS(read_tensor_field(bad), Error);
}

TEST_CASE("boundary trace interpolation") {
  BoundaryTrace t;
  for (int k = 0; k < 8; ++k) {
    t.angles.push_back(2 * M_PI * k / 8);
    t.values.push_back(Vec2(k, 0));
  }
  CHECK(t.at_angle(2 * M_PI / 16)[0] == doctest::Approx(0.5));
  CHECK(t.at_angle(2 * M_PI - 2 * M_PI / 16)[0] == doctest::Approx(3.5));
}

TEST_CASE("dirichlet solve reproduces a smooth solution") {
  const auto d = domain(1.0 / 32);
  const Metric m = Metric::euclidean();
  auto space = std::make_shared<const FemSpace>(m, d, 1.0);
  // w = (x1^2, x1 x2): dw is affine so the exact solution satisfies delta d w = delta F with F = dw.
  const OneFormFunction w = [](const Vec2& x) { return Vec2(x[0] * x[0], x[0] * x[1]); };
  const TensorFunction dw = [](const Vec2& x) { return sym_from(2 * x[0], 0.5 * x[1], x[0]); };
  const P1OneForm u = solve_dirichlet(space, DivergenceSource::of(dw), w);
  double err = 0.0;
  for (int idx = 0; idx < d->node_count(); ++idx) {
    if (space->free_slot(idx) >= 0) err = std::max(err, (u.nodal().row(idx).transpose() - w(d->position(idx))).norm());
  }
  CHECK(err < 1e-10);
}

TEST_CASE("solenoidal projection") {
  const auto d = domain(1.0 / 64);
  const Metric m = Metric::euclidean();
  const MetricGrid mg(m, d);
  auto space = std::make_shared<const FemSpace>(m, d, 1.0);

  SUBCASE("potential tensors are removed") {
    const SymTensorField dv = sym_d(mg, OneFormField::sample(d, Support::M, bump_oneform));
    const SolenoidalDecomposition dec = solenoidal_project(space, dv);
    CHECK(norm_L2(mg, dec.solenoidal, Support::M) <= 0.02 * norm_L2(mg, dv, Support::M));
    CHECK(dec.orthogonality <= 1e-6);
  }
  SUBCASE("curl-curl tensors pass through") {
    const TensorFunction fn =
        curl_curl([](const Vec2& x) { return gaussian_stream_hessian(x, 6.0, Vec2(0.1, -0.1)); });
    const SymTensorField f = SymTensorField::sample(d, Support::M, fn);
    const SolenoidalDecomposition dec = solenoidal_project(space, f);
    CHECK(norm_L2(mg, dec.solenoidal - f, Support::M) <= 0.02 * norm_L2(mg, f, Support::M));
    CHECK(dec.orthogonality <= 1e-6);
  }
  SUBCASE("zero input") {
    const SolenoidalDecomposition dec = solenoidal_project(space, SymTensorField(d, Support::M));
    CHECK(dec.solenoidal.data().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("korn ratio is finite and grid independent") {
  const Metric m = Metric::euclidean();
  const OneFormFunction w = [](const Vec2& x) { return Vec2(std::sin(3 * x[1]), x[0] * x[1]); };
  double r[2];
  int i = 0;
  for (double h : {1.0 / 32, 1.0 / 64}) {
    const auto d = domain(h);
    const MetricGrid mg(m, d);
    r[i++] = korn_ratio(mg, OneFormField::sample(d, Support::Annulus, w), Support::Annulus);
  }
  CHECK(r[0] > 0.0);
  CHECK(std::abs(r[1] - r[0]) < 0.2 * r[0]);
}

TEST_CASE("negative and trace norms") {
  const auto d = domain(1.0 / 32);
  const Metric m = Metric::euclidean();
  const FemSpace space(m, d, 1.0);
  const SymTensorField zero(d, Support::M);
  CHECK(h_minus1_norm(space, zero) == 0.0);
  const SymTensorField f =
      SymTensorField::sample(d, Support::M, [](const Vec2& x) { return sym_from(1.0, x[0], 0.0); });
  const MetricGrid mg(m, d);
  CHECK(h_minus1_norm(space, f) > 0.0);
  CHECK(h_minus1_norm(space, f) < norm_L2(mg, f, Support::M));
}
