#include "tensortomo/stability.hpp"

#include <doctest.h>

#include <sstream>

using namespace tensortomo;

namespace {

std::shared_ptr<const Domain> domain(double h) { return std::make_shared<const Domain>(1.0, 1.3, h); }

const NormalGridOptions small_grid{128, 32, 48, 0.0, 0.05};

}  // namespace

TEST_CASE("seeded streams are reproducible and distinct") {
  auto a = sample_rng(7, 3), b = sample_rng(7, 3), c = sample_rng(7, 4), e = sample_rng(8, 3);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != e());
}

TEST_CASE("ensembles are deterministic and live inside M") {
  const auto d = domain(1.0 / 32);
  EnsembleSpec spec;
  spec.size = 3;
  const auto a = tensor_ensemble(d, spec), b = tensor_ensemble(d, spec);
  for (int i = 0; i < 3; ++i) CHECK((a[i].data() - b[i].data()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a[0].data() - a[1].data()).cwiseAbs().maxCoeff() > 0.0);
  for (int idx = 0; idx < d->node_count(); ++idx) {
    if (d->position(idx).norm() >= 0.9) CHECK(a[0].at(idx).norm() == 0.0);
  }
  CHECK(interior_bump(Vec2(0.0, 0.0)) == 1.0);
  CHECK(interior_bump(Vec2(0.95, 0.0)) == 0.0);
}

TEST_CASE("potential one-forms vanish near the boundary") {
  for (int i = 0; i < 20; ++i) {
    auto rng = sample_rng(1, i);
    const OneFormFunction v = random_potential_oneform(rng);
    for (int k = 0; k < 16; ++k) {
      const double a = 2 * M_PI * k / 16;
      CHECK(v(0.951 * Vec2(std::cos(a), std::sin(a))).norm() == 0.0);
    }
  }
}

TEST_CASE("boundary recovery") {
  const auto d = domain(1.0 / 64);
  const Metric m = Metric::euclidean();
  auto space_M1 = std::make_shared<const FemSpace>(m, d, d->radius_M1());
  auto space_M = std::make_shared<const FemSpace>(m, d, d->radius_M());
  const MetricGrid mg(m, d);

  SUBCASE("zero input gives a zero trace") {
    const BoundaryRecovery rec = recover_boundary_trace(space_M1, space_M, SymTensorField(d, Support::M));
    for (const Vec2& w : rec.trace.values) CHECK(w.norm() == 0.0);
  }
  SUBCASE("geodesic integration matches the elliptic trace") {
    EnsembleSpec spec;
    spec.size = 1;
    const SymTensorField f = tensor_ensemble(d, spec)[0];
    const BoundaryRecovery rec = recover_boundary_trace(space_M1, space_M, f);
    CHECK(trace_relative_error(rec.trace, rec.oracle) <= 0.05);
    CHECK(rec.max_third_error <= 0.05);
    const PipelineResult pipe = reconstruct_fs_from_trace(space_M, rec);
    const SymTensorField direct = solenoidal_project(space_M, f).solenoidal;
    CHECK(norm_L2(mg, pipe.fs - direct, Support::M) <= 0.05 * norm_L2(mg, direct, Support::M));
  }
  SUBCASE("potential input gives a small solenoidal part") {
    auto rng = sample_rng(3, 0);
    const SymTensorField f = sym_d(mg, OneFormField::sample(d, Support::M, random_potential_oneform(rng)));
    const PipelineResult pipe =
        reconstruct_fs_from_trace(space_M, recover_boundary_trace(space_M1, space_M, f));
    CHECK(norm_L2(mg, pipe.fs, Support::M) <= 0.05 * norm_L2(mg, f, Support::M));
  }
  SUBCASE("curl-curl input passes through") {
    const SymTensorField f = SymTensorField::sample(d, Support::M, curl_curl([](const Vec2& x) {
      return gaussian_stream_hessian(x, 6.0, Vec2(0.0, 0.1));
    }));
    const PipelineResult pipe =
        reconstruct_fs_from_trace(space_M, recover_boundary_trace(space_M1, space_M, f));
    CHECK(norm_L2(mg, pipe.fs - f, Support::M) <= 0.05 * norm_L2(mg, f, Support::M));
  }
}

TEST_CASE("direction pairs near the normal are rejected") {
  const auto d = domain(1.0 / 32);
  const SymTensorField f(d, Support::M1);
  BoundaryRecoveryOptions o;
  o.tilt = 0.04;
  CHECK_THROWS_AS(recover_w_at(Metric::euclidean(), TensorSampler(f), *d, Vec2(1.0, 0.0), o), Error);
}

TEST_CASE("stability probe") {
  const auto d = domain(1.0 / 32);
  const Metric m = Metric::euclidean();
  EnsembleSpec spec;
  spec.size = 4;
  StabilityOptions o;
  o.grid = small_grid;
  o.ratio_on_fs = true;
  const StabilityReport r = stability_probe(m, d, tensor_ensemble(d, spec), o, spec.seed);
  CHECK(r.samples.size() == 4u);
  CHECK(r.c_emp > 0.0);
  CHECK(r.c_emp <= r.C_emp);
  for (const auto& s : r.samples) CHECK(std::abs(s.ratio_fs - s.ratio) <= 0.02 * s.ratio);
  std::ostringstream a, b;
  write_stability_csv(a, r);
  write_stability_csv(b, stability_probe(m, d, tensor_ensemble(d, spec), o, spec.seed));
  CHECK(a.str() == b.str());

  CHECK_THROWS_AS(stability_probe(m, d, {SymTensorField(d, Support::M)}, o, 0), Error);
}

TEST_CASE("perturbation probe edge cases") {
  const auto d = domain(1.0 / 32);
  EnsembleSpec spec;
  spec.size = 1;
  PerturbationOptions o;
  o.grid = small_grid;
  const auto tests = tensor_ensemble(d, spec);
  const PerturbationReport r = perturbation_probe(Metric::euclidean(), d, {0.0}, tests, o);
  REQUIRE(r.rows.size() == 1u);
  CHECK(r.rows[0].d == 0.0);
  CHECK(r.rows[0].p == 0.0);
  CHECK_THROWS_AS(perturbation_probe(Metric::euclidean(), d, {20.0}, tests, o), Error);
}

TEST_CASE("cgls") {
  const auto d = domain(1.0 / 32);
  const Metric m = Metric::euclidean();
  const BoundaryFan fan = boundary_fan(m, *d, Boundary::M, 32, 16);
  SUBCASE("zero data") {
    const RayData data{&fan, std::vector<double>(fan.entries.size(), 0.0)};
    const CglsResult r = reconstruct_cgls(m, d, data);
    CHECK(r.iterations == 0);
    CHECK(r.f.data().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("phantom residual decreases") {
    const TensorFunction fn = curl_curl([](const Vec2& x) { return gaussian_stream_hessian(x, 8.0, Vec2::Zero()); });
    const CglsResult r = reconstruct_cgls(m, d, transform(m, fn, fan));
    CHECK(r.iterations > 0);
    CHECK(r.normal_residual <= 1e-3);
    for (size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("korn probe") {
  const KornProbe k = korn_probe(Metric::euclidean(), domain(1.0 / 32), 4, 5);
  CHECK(k.rotation_dw < 1e-13);
  CHECK(k.ratios.size() == 4u);
  CHECK(k.max_ratio > 0.0);
}
