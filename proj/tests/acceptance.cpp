// One line per acceptance criterion; nonzero exit if any criterion fails.
#include "tensortomo/normal_operator.hpp"
#include "tensortomo/ray_transform.hpp"
#include "tensortomo/runner.hpp"
#include "tensortomo/stability.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <sstream>

using namespace tensortomo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const double kH = 1.0 / 64;
const int kFanPoints = 64;
const int kFanDirs = 32;
const double kStep = 1e-3;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::shared_ptr<const Domain> domain(double h = kH) {
  return std::make_shared<const Domain>(1.0, 1.3, h);
}

Metric conformal01() { return Metric::conformal({0.1, 1.0, Vec2::Zero()}); }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome potential_annihilation() {
  std::ostringstream os;
  bool ok = true;
  for (const Metric& m : {Metric::euclidean(), conformal01()}) {
    const auto t0 = Clock::now();
    const auto d = domain();
    const MetricGrid mg(m, d);
    const BoundaryFan fan = boundary_fan(m, *d, Boundary::M, kFanPoints, kFanDirs);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      auto rng = sample_rng(101, i);
      const OneFormField v = OneFormField::sample(d, Support::M, random_potential_oneform(rng));
      const RayData data = transform(m, sym_d(mg, v), fan, kStep);
      double mx = 0.0;
      for (double x : data.values) mx = std::max(mx, std::abs(x));
      worst = std::max(worst, mx / std::max(1.0, norm_H1(mg, v, Support::M)));
    }
    const double t = seconds_since(t0);
    ok = ok && worst <= 1e-3 && t < 60.0;
    os << m.describe() << " max|I(dv)|/max(1,|v|_H1) = " << fmt(worst) << " in " << fmt(t) << " s; ";
  }
  return {ok, os.str()};
}

Outcome geodesic_fidelity() {
  const Domain d;
  std::ostringstream os;
  const Metric e = Metric::euclidean();
  double chord = 0.0;
  for (const FanEntry& f : boundary_fan(e, d, Boundary::M, kFanPoints, kFanDirs).entries) {
    const GeodesicPath p = trace(e, d, f.x, f.omega, Boundary::M);
    chord = std::max(chord, std::abs(p.exit_time + 2.0 * f.x.dot(f.omega)));
    chord = std::max(chord, (p.exit_point - (f.x + p.exit_time * f.omega)).norm());
  }
  // Observed order of the trace position after unit arclength; exit-time
  // orders are reported too but carry the crossing solve.
  const Metric m = conformal01();
  double order = 1e9, exit_order = 1e9;
  double reversal = 0.0;
  const BoundaryFan fan = boundary_fan(m, d, Boundary::M, 16, 8);
  for (const FanEntry& f : fan.entries) {
    std::vector<Vec2> end;
    std::vector<double> t;
    for (double s : {0.05, 0.025, 0.0125}) {
      FlowState st{f.x, f.omega};
      for (int i = 0; i < std::lround(1.0 / s); ++i) st = flow_step(m, st, s);
      end.push_back(st.x);
      t.push_back(trace(m, d, f.x, f.omega, Boundary::M, s).exit_time);
    }
    order = std::min(order, std::log2((end[0] - end[1]).norm() / (end[1] - end[2]).norm()));
    exit_order = std::min(exit_order, std::log2(std::abs(t[0] - t[1]) / std::abs(t[1] - t[2])));
    const GeodesicPath fwd = trace(m, d, f.x, f.omega, Boundary::M, kStep);
    const GeodesicPath back = trace(m, d, fwd.exit_point, -fwd.exit_direction, Boundary::M, kStep);
    reversal = std::max(reversal, (back.exit_point - f.x).norm());
  }
  os << "chord error " << fmt(chord) << "; conformal min observed order " << fmt(order)
     << " (exit time " << fmt(exit_order) << "); reversal " << fmt(reversal);
  return {chord <= 1e-8 && order >= 3.95 && reversal <= 1e-5, os.str()};
}

Outcome normal_crosscheck() {
  std::ostringstream os;
  bool ok = true;
  for (const Metric& m : {Metric::euclidean(), conformal01()}) {
    const auto t0 = Clock::now();
    const auto d = domain();
    auto rng = sample_rng(7, 0);
    const SymTensorField f = random_tensor(d, rng, 8.0, 10);
    const NormalGrid ng(m, d, {});
    const TensorSampler nf(ng.apply(f));
    double ek = 0.0, eg = 0.0;
    for (int j = 0; j < 5; ++j) {
      for (int i = 0; i < 5; ++i) {
        const Vec2 x(-0.5 + 0.25 * i, -0.5 + 0.25 * j);
        const Mat2 a = normal_compose(m, f, x, 512, kStep);
        ek = std::max(ek, (normal_kernel(m, f, x) - a).norm() / a.norm());
        eg = std::max(eg, (nf(x) - a).norm() / a.norm());
      }
    }
    const double t = seconds_since(t0);
    ok = ok && ek <= 0.05 && eg <= 0.05 && t < 600.0;
    os << m.describe() << " kernel " << fmt(ek) << " grid " << fmt(eg) << " in " << fmt(t) << " s; ";
  }
  return {ok, os.str()};
}

Outcome adjoint_consistency() {
  std::ostringstream os;
  bool ok = true;
  for (const Metric& m : {Metric::euclidean(), conformal01()}) {
    const auto d = domain();
    const MetricGrid mg(m, d);
    const NormalGrid ng(m, d, {});
    const BoundaryFan fan = boundary_fan(m, *d, Boundary::M1, 128, 64);
    EnsembleSpec spec;
    spec.size = 5;
    spec.seed = 21;
    double worst = 0.0;
    for (const SymTensorField& f : tensor_ensemble(d, spec)) {
      const double lhs = inner_L2(mg, ng.apply(f), f, Support::M1);
      const double rhs = std::pow(norm_mu(transform(m, f, fan, kStep)), 2);
      worst = std::max(worst, std::abs(lhs - rhs) / rhs);
    }
    ok = ok && worst <= 0.02;
    os << m.describe() << " max rel " << fmt(worst) << "; ";
  }
  return {ok, os.str()};
}

Outcome symbol_structure() {
  double contraction = 0.0, c0_rel = 0.0, homogeneity = 0.0, c0_min = 1e300;
  for (const Metric& m : {Metric::euclidean(), conformal01()}) {
    for (const Vec2& x : {Vec2(0.0, 0.0), Vec2(0.3, 0.2), Vec2(-0.4, 0.1)}) {
      for (int k = 0; k < 16; ++k) {
        const double a = M_PI * k / 16;
        const Vec2 xi(std::cos(a), std::sin(a));
        const SymbolTensor se = principal_symbol(m, x, xi, SymbolMethod::ExactCrossing);
        const SymbolTensor sm = principal_symbol(m, x, xi, SymbolMethod::Mollified);
        const SymbolTensor s5 = principal_symbol(m, x, 5.0 * xi, SymbolMethod::ExactCrossing);
        contraction = std::max(contraction, potential_contraction(se, xi));
        const double ce = solenoidal_ellipticity(m, se, x, xi);
        const double cm = solenoidal_ellipticity(m, sm, x, xi);
        c0_min = std::min(c0_min, ce);
        c0_rel = std::max(c0_rel, std::abs(cm - ce) / ce);
        const auto i1 = se.independent(), i5 = s5.independent();
        for (int q = 0; q < 9; ++q) {
          homogeneity = std::max(homogeneity, std::abs(5.0 * i5[q] - i1[q]) / se.max_abs());
        }
      }
    }
  }
  std::ostringstream os;
  os << "contraction " << fmt(contraction) << "; c0 = " << fmt(c0_min) << " (mollified vs exact "
     << fmt(c0_rel) << "); homogeneity " << fmt(homogeneity);
  return {contraction <= 1e-8 && c0_min > 0.0 && c0_rel <= 0.01 && homogeneity <= 1e-8, os.str()};
}

Outcome order_minus_one() {
  const auto d = domain(1.0 / 128);
  const NormalGrid ng(Metric::euclidean(), d, {});
  const OrderProbe p = symbol_order_probe(ng, {4.0, 8.0, 16.0, 32.0});
  std::ostringstream os;
  os << "solenoidal slope " << fmt(p.solenoidal_slope) << ", potential slope " << fmt(p.potential_slope)
     << " (ratios";
  for (const auto& r : p.rows) os << ' ' << fmt(r.solenoidal_ratio) << '/' << fmt(r.potential_ratio);
  os << ")";
  const bool window = p.solenoidal_slope >= -1.15 && p.solenoidal_slope <= -0.85;
  return {window && p.potential_slope < p.solenoidal_slope, os.str()};
}

Outcome solenoidal_projection() {
  std::ostringstream os;
  double pot = 0.0, cc = 0.0, orth = 0.0;
  for (const Metric& m : {Metric::euclidean(), conformal01()}) {
    const auto d = domain();
    const MetricGrid mg(m, d);
    auto space = std::make_shared<const FemSpace>(m, d, 1.0);
    for (int i = 0; i < 5; ++i) {
      auto rng = sample_rng(31, i);
      const SymTensorField dv = sym_d(mg, OneFormField::sample(d, Support::M, random_potential_oneform(rng)));
      const SolenoidalDecomposition dec = solenoidal_project(space, dv);
      pot = std::max(pot, norm_L2(mg, dec.solenoidal, Support::M) / norm_L2(mg, dv, Support::M));
      orth = std::max(orth, dec.orthogonality);
    }
    if (m.is_euclidean()) {
      for (const Vec2& c : {Vec2(0.0, 0.0), Vec2(0.2, -0.1), Vec2(-0.15, 0.25)}) {
        const SymTensorField f = SymTensorField::sample(
            d, Support::M, curl_curl([&](const Vec2& x) { return gaussian_stream_hessian(x, 6.0, c); }));
        const SolenoidalDecomposition dec = solenoidal_project(space, f);
        cc = std::max(cc, norm_L2(mg, dec.solenoidal - f, Support::M) / norm_L2(mg, f, Support::M));
        orth = std::max(orth, dec.orthogonality);
      }
    }
  }
  os << "|(dv)^s|/|dv| " << fmt(pot) << "; curl-curl change " << fmt(cc) << "; orthogonality " << fmt(orth);
  return {pot <= 0.02 && cc <= 0.02 && orth <= 1e-6, os.str()};
}

Outcome boundary_recovery() {
  std::ostringstream os;
  double trace_err = 0.0, pipe_err = 0.0;
  for (const Metric& m : {Metric::euclidean(), conformal01()}) {
    const auto d = domain();
    const MetricGrid mg(m, d);
    auto space_M1 = std::make_shared<const FemSpace>(m, d, d->radius_M1());
    auto space_M = std::make_shared<const FemSpace>(m, d, d->radius_M());
    EnsembleSpec spec;
    spec.size = 3;
    spec.seed = 41;
    for (const SymTensorField& f : tensor_ensemble(d, spec)) {
      const BoundaryRecovery rec = recover_boundary_trace(space_M1, space_M, f);
      trace_err = std::max(trace_err, trace_relative_error(rec.trace, rec.oracle));
      const PipelineResult pipe = reconstruct_fs_from_trace(space_M, rec);
      const SymTensorField direct = solenoidal_project(space_M, f).solenoidal;
      pipe_err = std::max(pipe_err, norm_L2(mg, pipe.fs - direct, Support::M) / norm_L2(mg, direct, Support::M));
    }
  }
  os << "trace vs elliptic oracle " << fmt(trace_err) << "; pipeline vs direct projection " << fmt(pipe_err);
  return {trace_err <= 0.05 && pipe_err <= 0.05, os.str()};
}

Outcome korn() {
  const KornProbe a = korn_probe(Metric::euclidean(), domain(kH), 20, 51);
  const KornProbe b = korn_probe(Metric::euclidean(), domain(kH / 2), 20, 51);
  const double drift = std::abs(b.max_ratio - a.max_ratio) / a.max_ratio;
  std::ostringstream os;
  os << "rotation |dw| " << fmt(a.rotation_dw) << "; max korn ratio " << fmt(a.max_ratio) << " -> "
     << fmt(b.max_ratio) << " (drift " << fmt(drift) << ")";
  return {a.rotation_dw == 0.0 && b.rotation_dw == 0.0 && drift < 0.2, os.str()};
}

Outcome two_sided() {
  const Metric m = Metric::euclidean();
  EnsembleSpec spec;
  spec.size = 50;
  StabilityOptions o;
  o.ratio_on_fs = true;
  const auto d1 = domain(kH);
  const StabilityReport a = stability_probe(m, d1, tensor_ensemble(d1, spec), o, spec.seed);
  o.ratio_on_fs = false;
  const auto d2 = domain(kH / 2);
  const StabilityReport b = stability_probe(m, d2, tensor_ensemble(d2, spec), o, spec.seed);
  double fs_gap = 0.0;
  for (const auto& s : a.samples) fs_gap = std::max(fs_gap, std::abs(s.ratio_fs - s.ratio) / s.ratio);
  const double drift = std::max(std::abs(b.c_emp - a.c_emp) / a.c_emp, std::abs(b.C_emp - a.C_emp) / a.C_emp);
  std::ostringstream os;
  os << "h=1/64 [" << fmt(a.c_emp) << ", " << fmt(a.C_emp) << "] (" << a.samples.size() << " kept), h=1/128 ["
     << fmt(b.c_emp) << ", " << fmt(b.C_emp) << "], drift " << fmt(drift) << "; f vs f^s " << fmt(fs_gap);
  const bool ok = a.c_emp > 0.0 && a.c_emp <= a.C_emp && b.c_emp > 0.0 && b.c_emp <= b.C_emp &&
                  drift < 0.2 && fs_gap <= 0.02;
  return {ok, os.str()};
}

Outcome perturbation() {
  const auto d = domain();
  EnsembleSpec spec;
  spec.size = 10;
  spec.seed = 11;
  const PerturbationReport r =
      perturbation_probe(Metric::euclidean(), d, {0.02, 0.05, 0.1}, tensor_ensemble(d, spec), {});
  // Loss of the lower constant, 1 - c(eps)/c(0); losses under 1e-3 count as none.
  // "No faster than linearly": loss/eps must not grow across the range by more
  // than the slope window allows.
  std::vector<double> rate;
  for (const auto& row : r.rows) {
    const double loss = 1.0 - row.c_emp / r.c_emp0;
    rate.push_back(loss > 1e-3 ? loss / row.eps : 0.0);
  }
  const bool linear_loss = rate.back() <= 1.25 * rate.front() + 1e-12;
  std::ostringstream os;
  os << "slope d " << fmt(r.slope_d) << ", slope p " << fmt(r.slope_p) << "; c_emp " << fmt(r.c_emp0);
  for (const auto& row : r.rows) os << " -> " << fmt(row.c_emp);
  const bool ok = r.slope_d >= 0.8 && r.slope_d <= 1.2 && r.slope_p >= 0.8 && r.slope_p <= 1.2 && linear_loss;
  return {ok, os.str()};
}

Outcome closed_loop() {
  const auto d = domain();
  const Metric m = Metric::euclidean();
  const MetricGrid mg(m, d);
  const BoundaryFan fan = boundary_fan(m, *d, Boundary::M, kFanPoints, kFanDirs);
  const TensorFunction phantom =
      curl_curl([](const Vec2& x) { return gaussian_stream_hessian(x, 8.0, Vec2(0.1, -0.05)); });
  const SymTensorField truth = SymTensorField::sample(d, Support::M, phantom);
  const CglsResult r = reconstruct_cgls(m, d, transform(m, phantom, fan, kStep));
  const double err = norm_L2(mg, r.f - truth, Support::M) / norm_L2(mg, truth, Support::M);
  double pot = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto rng = sample_rng(61, i);
    const SymTensorField dv = sym_d(mg, OneFormField::sample(d, Support::M, random_potential_oneform(rng)));
    const CglsResult q = reconstruct_cgls(m, d, transform(m, dv, fan, kStep));
    pot = std::max(pot, norm_L2(mg, q.f, Support::M) / norm_L2(mg, dv, Support::M));
  }
  std::ostringstream os;
  os << "phantom error " << fmt(err) << " after " << r.iterations << " iterations; potential data -> "
     << fmt(pot) << " of |dv|";
  return {err <= 0.05 && r.iterations <= 200 && pot <= 0.02, os.str()};
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (ext != ".csv" && ext != ".field") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "tensortomo_acceptance";
  fs::remove_all(root);
  ExperimentConfig base;
  base.h = 1.0 / 32;
  base.fan_points = 16;
  base.fan_dirs = 8;
  base.ensemble_size = 4;
  base.normal_fan_points = 128;
  base.normal_fan_dirs = 32;
  base.normal_n_theta = 48;
  base.crosscheck_grid = 2;
  base.perturbation_eps_list = {0.05};
  base.perturbation_test_size = 2;
  base.forward_field = "random";
  int files = 0;
  std::ostringstream os;
  bool ok = true;
  for (const std::string& e : experiment_names()) {
    ExperimentConfig c = base;
    c.experiment = e;
    if (e == "normal-crosscheck" || e == "stability") c.metric_kind = "conformal";
    std::ostringstream log;
    const int r1 = run(c, (root / e / "a").string(), log);
    const int r2 = run(c, (root / e / "b").string(), log);
    const auto a = outputs(root / e / "a"), b = outputs(root / e / "b");
    if (r1 != Success || r2 != Success || a.empty() || a != b) {
      ok = false;
      os << e << " differs or failed (" << log.str() << "); ";
    }
    files += static_cast<int>(a.size());
  }
  os << files << " output files over " << experiment_names().size() << " experiments byte-identical";
  fs::remove_all(root);
  return {ok, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"potential annihilation", potential_annihilation},
      {"geodesic fidelity", geodesic_fidelity},
      {"normal-operator cross-check", normal_crosscheck},
      {"adjoint consistency", adjoint_consistency},
      {"symbol structure", symbol_structure},
      {"order -1", order_minus_one},
      {"solenoidal projection", solenoidal_projection},
      {"boundary-recovery oracle", boundary_recovery},
      {"korn probe", korn},
      {"two-sided estimate", two_sided},
      {"perturbation linearity", perturbation},
      {"closed-loop reconstruction", closed_loop},
      {"determinism", determinism},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "[PRIMARY] criterion " << i + 1 << " " << criteria[i].first << ": "
              << (o.pass ? "PASS" : "FAIL") << " | " << o.detail << " | " << fmt(seconds_since(t0))
              << " s" << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
