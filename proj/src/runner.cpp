#include "tensortomo/runner.hpp"

#include "tensortomo/elliptic.hpp"
#include "tensortomo/normal_operator.hpp"
#include "tensortomo/parallel.hpp"
#include "tensortomo/ray_transform.hpp"
#include "tensortomo/stability.hpp"

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tensortomo {

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

struct Context {
  const ExperimentConfig& cfg;
  fs::path dir;
  std::string tag;
  std::ostream& log;
  Metric metric;
  std::shared_ptr<const Domain> domain;

  std::ofstream open(const std::string& suffix) const {
    std::ofstream os(dir / (tag + suffix));
    if (!os) throw Error(ErrorCode::ParseError, "cannot write " + (dir / (tag + suffix)).string());
    os << std::setprecision(17);
    return os;
  }
};

NormalGridOptions grid_options(const ExperimentConfig& c) {
  NormalGridOptions o;
  o.fan_points = c.normal_fan_points;
  o.fan_dirs = c.normal_fan_dirs;
  o.n_theta = c.normal_n_theta;
  o.map_step = c.normal_map_step;
  return o;
}

BoundaryRecoveryOptions recovery_options(const ExperimentConfig& c) {
  BoundaryRecoveryOptions o;
  o.n_points = c.recovery_points;
  o.step = c.step;
  o.tilt = c.recovery_tilt;
  return o;
}

EnsembleSpec ensemble_spec(const ExperimentConfig& c, int size) {
  EnsembleSpec s;
  s.size = size;
  s.seed = c.seed;
  s.band_limit = c.band_limit;
  s.modes = c.modes;
  return s;
}

SymTensorField first_sample(const Context& ctx) {
  auto rng = sample_rng(ctx.cfg.seed, 0);
  return random_tensor(ctx.domain, rng, ctx.cfg.band_limit, ctx.cfg.modes);
}

TensorFunction phantom(const ExperimentConfig& c) {
  const double a = c.phantom_a;
  const Vec2 center(c.phantom_cx, c.phantom_cy);
  return curl_curl([a, center](const Vec2& x) { return gaussian_stream_hessian(x, a, center); });
}

double frobenius(const Mat2& m) { return m.norm(); }

// ---------------------------------------------------------------------------

int run_certify(const Context& ctx) {
  const SimplicityReport r = certify_simple(ctx.metric, *ctx.domain);
  auto os = ctx.open(".csv");
  os << "metric,boundary_convexity_min,conjugate_point_found,min_jacobi,max_diffeo_residual,"
        "escaped,simple\n"
     << ctx.metric.describe() << ',' << r.boundary_convexity_min << ','
     << (r.conjugate_point_found ? "true" : "false") << ',' << r.min_jacobi << ','
     << r.max_diffeo_residual << ',' << (r.escaped ? "true" : "false") << ','
     << (r.simple() ? "true" : "false") << '\n';
  if (!r.simple()) {
    ctx.log << "CertificationFailure: metric is not certified simple\n";
    return CertificationError;
  }
  return Success;
}

int run_forward(const Context& ctx) {
  const auto& c = ctx.cfg;
  const BoundaryFan fan = boundary_fan(ctx.metric, *ctx.domain, Boundary::M, c.fan_points, c.fan_dirs);
  RayData data;
  if (c.forward_field == "metric") {
    const Metric& g = ctx.metric;
    data = transform(ctx.metric, TensorFunction([&g](const Vec2& x) { return g.g(x); }), fan, c.step);
  } else if (c.forward_field == "phantom") {
    data = transform(ctx.metric, phantom(c), fan, c.step);
  } else {
    data = transform(ctx.metric, first_sample(ctx), fan, c.step);
  }
  auto os = ctx.open(".csv");
  write_ray_csv(os, data);
  return Success;
}

int run_crosscheck(const Context& ctx) {
  const auto& c = ctx.cfg;
  const SymTensorField f = first_sample(ctx);
  const NormalGrid ng(ctx.metric, ctx.domain, grid_options(c));
  const TensorSampler nf(ng.apply(f));
  auto os = ctx.open(".csv");
  os << "x1,x2,compose11,compose12,compose22,kernel11,kernel12,kernel22,grid11,grid12,grid22,"
        "kernel_rel,grid_rel\n";
  double worst = 0.0;
  for (int j = 0; j < c.crosscheck_grid; ++j) {
    for (int i = 0; i < c.crosscheck_grid; ++i) {
      const auto coord = [&](int k) {
        return c.crosscheck_grid == 1 ? 0.0
                                      : c.crosscheck_extent * (2.0 * k / (c.crosscheck_grid - 1) - 1.0);
      };
      const Vec2 x(coord(i), coord(j));
      const Mat2 a = normal_compose(ctx.metric, f, x, c.crosscheck_dirs, c.step);
      const Mat2 b = normal_kernel(ctx.metric, f, x);
      const Mat2 g = nf(x);
      const double eb = frobenius(b - a) / frobenius(a);
      const double eg = frobenius(g - a) / frobenius(a);
      worst = std::max({worst, eb, eg});
      os << x[0] << ',' << x[1] << ',' << a(0, 0) << ',' << a(0, 1) << ',' << a(1, 1) << ','
         << b(0, 0) << ',' << b(0, 1) << ',' << b(1, 1) << ',' << g(0, 0) << ',' << g(0, 1) << ','
         << g(1, 1) << ',' << eb << ',' << eg << '\n';
    }
  }
  os << "# max_rel = " << worst << '\n';
  return Success;
}

int run_symbol(const Context& ctx) {
  const auto& c = ctx.cfg;
  const std::vector<Vec2> points{Vec2(0.0, 0.0), Vec2(0.3, 0.2), Vec2(-0.4, 0.1)};
  std::vector<Vec2> xs, xis;
  std::vector<SymbolTensor> exact;
  auto summary = ctx.open("_summary.csv");
  summary << "x1,x2,xi1,xi2,c0_mollified,c0_exact,c0_rel_diff,potential_contraction,homogeneity\n";
  for (const Vec2& x : points) {
    for (int k = 0; k < c.symbol_directions; ++k) {
      const double a = M_PI * k / c.symbol_directions;
      const Vec2 xi(std::cos(a), std::sin(a));
      const SymbolTensor se = principal_symbol(ctx.metric, x, xi, SymbolMethod::ExactCrossing);
      const SymbolTensor sm = principal_symbol(ctx.metric, x, xi, SymbolMethod::Mollified,
                                               c.symbol_width, c.symbol_angles);
      const SymbolTensor s2 = principal_symbol(ctx.metric, x, 2.0 * xi, SymbolMethod::ExactCrossing);
      const double ce = solenoidal_ellipticity(ctx.metric, se, x, xi);
      const double cm = solenoidal_ellipticity(ctx.metric, sm, x, xi);
      double hom = 0.0;
      const auto ie = se.independent(), i2 = s2.independent();
      for (int q = 0; q < 9; ++q) hom = std::max(hom, std::abs(2.0 * i2[q] - ie[q]));
      hom /= se.max_abs();
      summary << x[0] << ',' << x[1] << ',' << xi[0] << ',' << xi[1] << ',' << cm << ',' << ce << ','
              << std::abs(cm - ce) / ce << ',' << potential_contraction(se, xi) << ',' << hom << '\n';
      xs.push_back(x);
      xis.push_back(xi);
      exact.push_back(se);
    }
  }
  auto os = ctx.open(".csv");
  write_symbol_csv(os, xs, xis, exact);
  if (c.symbol_order_probe) {
    const NormalGrid ng(ctx.metric, ctx.domain, grid_options(c));
    const OrderProbe probe = symbol_order_probe(ng, {4.0, 8.0, 16.0, 32.0});
    auto po = ctx.open("_order.csv");
    po << "k,solenoidal_ratio,potential_ratio\n";
    for (const auto& r : probe.rows) {
      po << r.k << ',' << r.solenoidal_ratio << ',' << r.potential_ratio << '\n';
    }
    po << "# solenoidal_slope = " << probe.solenoidal_slope << '\n'
       << "# potential_slope = " << probe.potential_slope << '\n';
  }
  return Success;
}

int run_decompose(const Context& ctx) {
  const SymTensorField f = first_sample(ctx);
  auto space = std::make_shared<const FemSpace>(ctx.metric, ctx.domain, ctx.domain->radius_M());
  const SolenoidalDecomposition dec = solenoidal_project(space, f);
  const MetricGrid mg(ctx.metric, ctx.domain);
  {
    auto os = ctx.open("_solenoidal.field");
    write_field(os, dec.solenoidal);
  }
  {
    auto os = ctx.open("_potential.field");
    write_field(os, dec.potential.to_field(Support::M));
  }
  auto os = ctx.open(".csv");
  os << "f_norm,fs_norm,dv_norm,orthogonality\n"
     << norm_L2(mg, f, Support::M) << ',' << norm_L2(mg, dec.solenoidal, Support::M) << ','
     << norm_L2(mg, f - dec.solenoidal, Support::M) << ',' << dec.orthogonality << '\n';
  return Success;
}

int run_boundary_recovery(const Context& ctx) {
  const SymTensorField f = first_sample(ctx);
  auto space_M1 = std::make_shared<const FemSpace>(ctx.metric, ctx.domain, ctx.domain->radius_M1());
  auto space_M = std::make_shared<const FemSpace>(ctx.metric, ctx.domain, ctx.domain->radius_M());
  const BoundaryRecovery rec =
      recover_boundary_trace(space_M1, space_M, f, recovery_options(ctx.cfg));
  const PipelineResult pipe = reconstruct_fs_from_trace(space_M, rec);
  const SymTensorField direct = solenoidal_project(space_M, f).solenoidal;
  const MetricGrid mg(ctx.metric, ctx.domain);
  {
    auto os = ctx.open("_trace.csv");
    os << "angle,w1,w2,oracle1,oracle2\n";
    for (size_t p = 0; p < rec.trace.angles.size(); ++p) {
      os << rec.trace.angles[p] << ',' << rec.trace.values[p][0] << ',' << rec.trace.values[p][1]
         << ',' << rec.oracle.values[p][0] << ',' << rec.oracle.values[p][1] << '\n';
    }
  }
  auto os = ctx.open(".csv");
  os << "trace_rel_error,pipeline_rel_error,max_third_error,retries\n"
     << trace_relative_error(rec.trace, rec.oracle) << ','
     << norm_L2(mg, pipe.fs - direct, Support::M) / norm_L2(mg, direct, Support::M) << ','
     << rec.max_third_error << ',' << rec.retries << '\n';
  return Success;
}

int run_stability(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto ensemble = tensor_ensemble(ctx.domain, ensemble_spec(c, c.ensemble_size));
  StabilityOptions o;
  o.ratio_on_fs = c.stability_ratio_on_fs;
  o.pipeline_constants = c.stability_pipeline;
  o.grid = grid_options(c);
  o.recovery = recovery_options(c);
  const StabilityReport r = stability_probe(ctx.metric, ctx.domain, ensemble, o, c.seed);
  auto os = ctx.open(".csv");
  write_stability_csv(os, r);
  return Success;
}

int run_perturbation(const Context& ctx) {
  const auto& c = ctx.cfg;
  const Metric base =
      c.metric_kind == "euclidean" || c.conformal_amplitude == 0.0
          ? Metric::euclidean()
          : Metric::conformal({c.conformal_amplitude, c.conformal_width, Vec2(c.conformal_cx, c.conformal_cy)});
  const auto tests = tensor_ensemble(ctx.domain, ensemble_spec(c, c.perturbation_test_size));
  PerturbationOptions o;
  o.bump = make_bump(c);
  o.grid = grid_options(c);
  const PerturbationReport r = perturbation_probe(base, ctx.domain, c.perturbation_eps_list, tests, o);
  auto os = ctx.open(".csv");
  write_perturbation_csv(os, r);
  return Success;
}

int run_reconstruct(const Context& ctx) {
  const auto& c = ctx.cfg;
  const BoundaryFan fan = boundary_fan(ctx.metric, *ctx.domain, Boundary::M, c.fan_points, c.fan_dirs);
  const TensorFunction truth = phantom(c);
  const RayData data = transform(ctx.metric, truth, fan, c.step);
  CglsOptions o;
  o.max_iter = c.cgls_max_iter;
  o.tol = c.cgls_tol;
  o.coarse_h = c.cgls_coarse_h;
  o.step = c.step;
  const CglsResult r = reconstruct_cgls(ctx.metric, ctx.domain, data, o);
  const MetricGrid mg(ctx.metric, ctx.domain);
  const SymTensorField exact = SymTensorField::sample(ctx.domain, Support::M, truth);
  {
    auto os = ctx.open(".field");
    write_field(os, r.f);
  }
  auto os = ctx.open(".csv");
  os << "iteration,relative_residual\n";
  for (size_t i = 0; i < r.history.size(); ++i) os << i + 1 << ',' << r.history[i] << '\n';
  os << "# iterations = " << r.iterations << '\n'
     << "# residual = " << r.residual << '\n'
     << "# normal_residual = " << r.normal_residual << '\n'
     << "# relative_error = "
     << norm_L2(mg, r.f - exact, Support::M) / norm_L2(mg, exact, Support::M) << '\n';
  return Success;
}

void write_manifest(const Context& ctx) {
  std::ofstream os(ctx.dir / "manifest.txt");
  os << "# tensortomo " << kVersion << '\n'
     << "# eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION
     << '\n'
     << "# threads " << thread_count() << '\n'
     << "# outputs " << ctx.tag << ".*\n"
     << serialize(ctx.cfg);
}

}  // namespace

std::string output_tag(const ExperimentConfig& c) {
  std::ostringstream os;
  os << c.experiment << '_' << c.metric_kind << "_h" << std::lround(1.0 / c.h) << "_fan"
     << c.fan_points << 'x' << c.fan_dirs << "_seed" << c.seed;
  return os.str();
}

int run(const ExperimentConfig& config, const std::string& out_dir, std::ostream& log) {
  try {
    validate(config);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
      log << "cannot create output directory '" << out_dir << "': " << ec.message() << '\n';
      return ConfigError;
    }
    const Context ctx{config, fs::path(out_dir), output_tag(config), log, make_metric(config),
                      make_domain(config)};
    write_manifest(ctx);
    const std::string& e = config.experiment;
    if (e == "certify") return run_certify(ctx);
    if (e == "forward") return run_forward(ctx);
    if (e == "normal-crosscheck") return run_crosscheck(ctx);
    if (e == "symbol") return run_symbol(ctx);
    if (e == "decompose") return run_decompose(ctx);
    if (e == "boundary-recovery") return run_boundary_recovery(ctx);
    if (e == "stability") return run_stability(ctx);
    if (e == "perturbation") return run_perturbation(ctx);
    return run_reconstruct(ctx);
  } catch (const Error& err) {
    log << err.what() << '\n';
    switch (err.code()) {
      case ErrorCode::ParseError:
      case ErrorCode::UnknownKey:
      case ErrorCode::RangeError: return ConfigError;
      case ErrorCode::CertificationFailure: return CertificationError;
      default: return NumericalError;
    }
  } catch (const std::exception& err) {
    log << "NumericalFailure: " << err.what() << '\n';
    return NumericalError;
  }
}

}  // namespace tensortomo
