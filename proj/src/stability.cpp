#include "tensortomo/stability.hpp"

#include "tensortomo/parallel.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace tensortomo {

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double interior_bump(const Vec2& x) {
  const double r2 = x.squaredNorm() / 0.81;
  if (r2 >= 1.0) return 0.0;
  const double u = 1.0 - r2;
  return u * u * u * u;
}

namespace {

Vec2 random_in_disc(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const Vec2 p(u(rng), u(rng));
    if (p.squaredNorm() <= 1.0) return radius * p;
  }
}

}  // namespace

SymTensorField random_tensor(std::shared_ptr<const Domain> domain, std::mt19937_64& rng,
                             double band_limit, int modes) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  struct Wave {
    Vec2 k;
    double phi;
    Mat2 a;
  };
  std::vector<Wave> waves;
  for (int m = 0; m < modes; ++m) {
    Wave w;
    w.k = random_in_disc(rng, band_limit);
    w.phi = phase(rng);
    const double a11 = gauss(rng), a12 = gauss(rng), a22 = gauss(rng);
    w.a = sym_from(a11, a12, a22);
    waves.push_back(w);
  }
  return SymTensorField::sample(std::move(domain), Support::M, [&](const Vec2& x) {
    const double chi = interior_bump(x);
    if (chi == 0.0) return Mat2(Mat2::Zero());
    Mat2 s = Mat2::Zero();
    for (const Wave& w : waves) s += w.a * std::cos(w.k.dot(x) + w.phi);
    return Mat2(chi * s);
  });
}

std::vector<SymTensorField> tensor_ensemble(std::shared_ptr<const Domain> domain,
                                            const EnsembleSpec& spec) {
  std::vector<SymTensorField> out;
  out.reserve(spec.size);
  for (int i = 0; i < spec.size; ++i) {
    auto rng = sample_rng(spec.seed, static_cast<std::uint64_t>(i));
    out.push_back(random_tensor(domain, rng, spec.band_limit, spec.modes));
  }
  return out;
}

OneFormFunction random_potential_oneform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Vec2 c = random_in_disc(rng, 0.3);
  const double r = 0.95 - c.norm();
  const double ang = 2.0 * M_PI * u01(rng);
  const double mag = 1.0 + 2.0 * u01(rng);
  const Vec2 a = mag * Vec2(std::cos(ang), std::sin(ang));
  return [c, r, a](const Vec2& x) {
    const double q = (x - c).squaredNorm() / (r * r);
    if (q >= 1.0) return Vec2(Vec2::Zero());
    const double u = 1.0 - q;
    return Vec2(a * (u * u * u * u));
  };
}

OneFormFunction random_smooth_oneform(std::mt19937_64& rng, double band_limit, int modes) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::vector<std::tuple<Vec2, double, Vec2>> waves;
  for (int m = 0; m < modes; ++m) {
    const Vec2 k = random_in_disc(rng, band_limit);
    const double phi = phase(rng);
    const double a1 = gauss(rng), a2 = gauss(rng);
    waves.emplace_back(k, phi, Vec2(a1, a2));
  }
  return [waves](const Vec2& x) {
    Vec2 s = Vec2::Zero();
    for (const auto& [k, phi, a] : waves) s += a * std::cos(k.dot(x) + phi);
    return s;
  };
}

// ---------------------------------------------------------------------------

namespace {

struct OutwardIntegral {
  double value = 0.0;
  bool entered = false;
};

OutwardIntegral integrate_outward(const Metric& metric, const TensorSampler& fs, const Domain& d,
                                  const Vec2& x, const Vec2& xi, double step) {
  WalkEnd end;
  const double outer = d.radius_M1();
  const double inner = d.radius_M() - 1e-9;
  const double cap = default_cap(metric, x, outer);
  const double v = integrate_along<double>(
      metric, FlowState{x, xi}, WalkBounds{inner, outer}, step, cap,
      [&](const Vec2& p, const Vec2& w) { return fs.along(p, w); }, &end);
  if (!end.exited) {
    throw Error(ErrorCode::EscapeFailure, "outward geodesic did not reach the outer circle");
  }
  return {v, end.hit_inner};
}

}  // namespace

Vec2 recover_w_at(const Metric& metric, const TensorSampler& fs_M1, const Domain& domain,
                  const Vec2& x, const BoundaryRecoveryOptions& opts, double* third_error,
                  int* retries) {
  const CircleFrame frame = circle_frame(metric, x);
  double tilt = opts.tilt;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt, tilt *= 0.8) {
    // det of the pair in the orthonormal frame (nu, tau) is sin(2 tilt).
    if (std::abs(std::sin(2.0 * tilt)) < 0.1) {
      throw Error(ErrorCode::IllConditionedPair, "direction pair too close to the normal");
    }
    const Vec2 xi1 = std::cos(tilt) * frame.normal + std::sin(tilt) * frame.tangent;
    const Vec2 xi2 = std::cos(tilt) * frame.normal - std::sin(tilt) * frame.tangent;
    const OutwardIntegral a = integrate_outward(metric, fs_M1, domain, x, xi1, opts.step);
    const OutwardIntegral b = integrate_outward(metric, fs_M1, domain, x, xi2, opts.step);
    if (a.entered || b.entered) {
      if (retries) ++*retries;
      continue;
    }
    Mat2 rows;
    rows.row(0) = xi1.transpose();
    rows.row(1) = xi2.transpose();
    const Vec2 w = rows.partialPivLu().solve(Vec2(a.value, b.value));
    if (third_error && opts.third_direction) {
      const OutwardIntegral c = integrate_outward(metric, fs_M1, domain, x, frame.normal, opts.step);
      *third_error = std::abs(c.value - w.dot(frame.normal));
    }
    return w;
  }
  throw Error(ErrorCode::GeodesicEntersM, "every outward direction pair re-entered M");
}

BoundaryRecovery recover_boundary_trace(std::shared_ptr<const FemSpace> space_M1,
                                        std::shared_ptr<const FemSpace> space_M,
                                        const SymTensorField& f,
                                        const BoundaryRecoveryOptions& opts) {
  const Domain& d = space_M1->domain();
  const Metric& metric = space_M1->metric();
  SymTensorField ef(space_M1->domain_ptr(), Support::M1);
  ef.data() = f.data();
  ef.mask();
  SolenoidalDecomposition dec = solenoidal_project(space_M1, ef);

  const int n = opts.n_points;
  BoundaryTrace trace, oracle;
  trace.radius = oracle.radius = d.radius_M();
  trace.angles.resize(n);
  trace.values.assign(n, Vec2::Zero());
  oracle.values.assign(n, Vec2::Zero());
  for (int p = 0; p < n; ++p) trace.angles[p] = 2.0 * M_PI * p / n;
  oracle.angles = trace.angles;

  Eigen::MatrixX2d dirichlet = Eigen::MatrixX2d::Zero(d.node_count(), 2);
  BoundaryRecovery rec{dec.solenoidal, dec.potential, trace, oracle, dirichlet, 0.0, 0};
  if (f.data().cwiseAbs().maxCoeff() == 0.0) return rec;

  const TensorSampler sampler(dec.solenoidal);
  std::vector<double> third(n, 0.0);
  std::vector<int> retry(n, 0);
  parallel_for(n, [&](int p) {
    const Vec2 x = d.radius_M() * Vec2(std::cos(trace.angles[p]), std::sin(trace.angles[p]));
    rec.trace.values[p] = recover_w_at(metric, sampler, d, x, opts, &third[p], &retry[p]);
    rec.oracle.values[p] = dec.potential.value(x);
  });
  const std::vector<int>& nodes = space_M->dirichlet_nodes();
  parallel_for(static_cast<int>(nodes.size()), [&](int k) {
    const Vec2 x = d.position(nodes[k]);
    rec.dirichlet_values.row(nodes[k]) = recover_w_at(metric, sampler, d, x, opts).transpose();
  });

  double wmax = 0.0;
  for (const Vec2& w : rec.trace.values) wmax = std::max(wmax, w.norm());
  for (int p = 0; p < n; ++p) {
    rec.retries += retry[p];
    if (wmax > 0.0) rec.max_third_error = std::max(rec.max_third_error, third[p] / wmax);
  }
  return rec;
}

PipelineResult reconstruct_fs_from_trace(std::shared_ptr<const FemSpace> space_M,
                                         const BoundaryRecovery& rec) {
  const Domain& d = space_M->domain();
  const Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * space_M->free_count());
  const Eigen::VectorXd u = space_M->solve(rhs, &rec.dirichlet_values);
  Eigen::MatrixX2d nodal = Eigen::MatrixX2d::Zero(d.node_count(), 2);
  for (int idx = 0; idx < d.node_count(); ++idx) {
    const int s = space_M->free_slot(idx);
    if (s >= 0) {
      nodal(idx, 0) = u[2 * s];
      nodal(idx, 1) = u[2 * s + 1];
    } else if (space_M->is_dirichlet(idx)) {
      nodal.row(idx) = rec.dirichlet_values.row(idx);
    }
  }
  P1OneForm w(space_M, nodal);
  SymTensorField fs(space_M->domain_ptr(), Support::M);
  fs.data() = rec.fs_M1.data();
  fs.mask();
  fs += w.nodal_sym_d(Support::M);
  return {std::move(fs), std::move(w)};
}

double trace_relative_error(const BoundaryTrace& a, const BoundaryTrace& b) {
  double num = 0.0, den = 0.0;
  for (size_t p = 0; p < b.values.size(); ++p) {
    num += (a.values[p] - b.values[p]).squaredNorm();
    den += b.values[p].squaredNorm();
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---------------------------------------------------------------------------

StabilityReport stability_probe(const Metric& metric, std::shared_ptr<const Domain> domain,
                                const std::vector<SymTensorField>& ensemble,
                                const StabilityOptions& opts, std::uint64_t seed) {
  const Domain& d = *domain;
  const NormalGrid ng(metric, domain, opts.grid);
  const MetricGrid mg(metric, domain);
  auto space_M = std::make_shared<const FemSpace>(metric, domain, d.radius_M());
  std::shared_ptr<const FemSpace> space_M1;
  if (opts.pipeline_constants) {
    space_M1 = std::make_shared<const FemSpace>(metric, domain, d.radius_M1());
  }

  StabilityReport rep;
  rep.metric = metric.describe();
  rep.h = d.h();
  rep.fan_points = opts.grid.fan_points;
  rep.fan_dirs = opts.grid.fan_dirs;
  rep.seed = seed;
  for (size_t i = 0; i < ensemble.size(); ++i) {
    const SymTensorField& f = ensemble[i];
    StabilitySample s;
    s.index = static_cast<int>(i);
    s.f_norm = norm_L2(mg, f, Support::M);
    const SolenoidalDecomposition dec = solenoidal_project(space_M, f);
    s.fs_norm = norm_L2(mg, dec.solenoidal, Support::M);
    if (!(s.fs_norm >= 1e-3 * s.f_norm) || s.f_norm == 0.0) {
      ++rep.rejected;
      continue;
    }
    s.nf_h1 = norm_H1(mg, ng.apply(f), Support::M1);
    s.ratio = s.nf_h1 / s.fs_norm;
    if (opts.ratio_on_fs) {
      s.ratio_fs = norm_H1(mg, ng.apply(dec.solenoidal), Support::M1) / s.fs_norm;
    }
    s.f_hminus1 = h_minus1_norm(*space_M, f);
    s.prop1 = s.fs_norm / (s.nf_h1 + s.f_hminus1);
    if (opts.pipeline_constants) {
      const BoundaryRecovery rec = recover_boundary_trace(space_M1, space_M, f, opts.recovery);
      const double fs_ann = norm_L2(mg, rec.fs_M1, Support::Annulus);
      const OneFormField w_ann = rec.potential_M1.to_field(Support::M1);
      const PipelineResult pipe = reconstruct_fs_from_trace(space_M, rec);
      if (fs_ann > 0.0) {
        s.c22b = norm_L2(mg, w_ann, Support::Annulus) / fs_ann;
        s.c_el_es = norm_H1(mg, pipe.w.to_field(Support::M), Support::M) / fs_ann;
      }
    }
    rep.samples.push_back(s);
  }
  if (rep.samples.empty()) {
    throw Error(ErrorCode::EnsembleDegenerate, "every ensemble member was nearly potential");
  }
  rep.c_emp = rep.C_emp = rep.samples.front().ratio;
  for (const auto& s : rep.samples) {
    rep.c_emp = std::min(rep.c_emp, s.ratio);
    rep.C_emp = std::max(rep.C_emp, s.ratio);
    rep.prop1_constant = std::max(rep.prop1_constant, s.prop1);
    rep.c22b = std::max(rep.c22b, s.c22b);
    rep.c_el_es = std::max(rep.c_el_es, s.c_el_es);
  }
  return rep;
}

void write_stability_csv(std::ostream& os, const StabilityReport& r) {
  os << std::setprecision(17);
  os << "index,f_norm,fs_norm,nf_h1,ratio,ratio_fs,f_hminus1,prop1,c22b,c_el_es\n";
  for (const auto& s : r.samples) {
    os << s.index << ',' << s.f_norm << ',' << s.fs_norm << ',' << s.nf_h1 << ',' << s.ratio << ','
       << s.ratio_fs << ',' << s.f_hminus1 << ',' << s.prop1 << ',' << s.c22b << ',' << s.c_el_es
       << '\n';
  }
  os << "# metric = " << r.metric << '\n'
     << "# h = " << r.h << '\n'
     << "# fan = " << r.fan_points << 'x' << r.fan_dirs << '\n'
     << "# seed = " << r.seed << '\n'
     << "# rejected = " << r.rejected << '\n'
     << "# c_emp = " << r.c_emp << '\n'
     << "# C_emp = " << r.C_emp << '\n'
     << "# prop1_constant = " << r.prop1_constant << '\n'
     << "# c22b = " << r.c22b << '\n'
     << "# c_el_es = " << r.c_el_es << '\n';
}

// ---------------------------------------------------------------------------

PerturbationReport perturbation_probe(const Metric& base, std::shared_ptr<const Domain> domain,
                                      const std::vector<double>& eps_list,
                                      const std::vector<SymTensorField>& test_set,
                                      const PerturbationOptions& opts) {
  const Domain& d = *domain;
  PerturbationReport rep;
  rep.base = base.describe();
  rep.bump_scale = 1.0 / c3_norm(opts.bump, d);

  const MetricGrid mg0(base, domain);
  const NormalGrid ng0(base, domain, opts.grid);
  auto space0 = std::make_shared<const FemSpace>(base, domain, d.radius_M());
  std::vector<SymTensorField> n0, fs0;
  std::vector<double> fnorm;
  rep.c_emp0 = std::numeric_limits<double>::infinity();
  for (const auto& f : test_set) {
    n0.push_back(ng0.apply(f));
    fs0.push_back(solenoidal_project(space0, f).solenoidal);
    fnorm.push_back(norm_L2(mg0, f, Support::M));
    rep.c_emp0 = std::min(rep.c_emp0, norm_H1(mg0, n0.back(), Support::M1) /
                                          norm_L2(mg0, fs0.back(), Support::M));
  }

  std::vector<double> xs, ds, ps, degr;
  for (double eps : eps_list) {
    PerturbationRow row;
    row.eps = eps;
    if (eps == 0.0) {
      row.c_emp = rep.c_emp0;
      rep.rows.push_back(row);
      continue;
    }
    const Metric g = Metric::perturbed(base, eps, opts.bump, rep.bump_scale);
    if (!certify_simple(g, d, opts.certification).simple()) {
      throw Error(ErrorCode::CertificationFailure,
                  "perturbed metric is not certified simple at eps = " + std::to_string(eps));
    }
    const MetricGrid mg(g, domain);
    const NormalGrid ng(g, domain, opts.grid);
    auto space = std::make_shared<const FemSpace>(g, domain, d.radius_M());
    row.c_emp = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < test_set.size(); ++i) {
      const SymTensorField nf = ng.apply(test_set[i]);
      const SymTensorField fs = solenoidal_project(space, test_set[i]).solenoidal;
      row.d = std::max(row.d, norm_H1(mg0, nf - n0[i], Support::M1) / fnorm[i]);
      row.p = std::max(row.p, norm_L2(mg0, fs - fs0[i], Support::M) / fnorm[i]);
      row.c_emp = std::min(row.c_emp, norm_H1(mg, nf, Support::M1) / norm_L2(mg, fs, Support::M));
    }
    rep.rows.push_back(row);
    xs.push_back(eps);
    ds.push_back(row.d);
    ps.push_back(row.p);
    const double loss = 1.0 - row.c_emp / rep.c_emp0;
    degr.push_back(loss);
    rep.transfer_constant = std::max(rep.transfer_constant, std::max(0.0, loss) / eps);
  }
  if (xs.size() >= 2) {
    rep.slope_d = loglog_slope(xs, ds);
    rep.slope_p = loglog_slope(xs, ps);
    const bool degrades = std::all_of(degr.begin(), degr.end(), [](double v) { return v > 0.0; });
    rep.degradation_slope = degrades ? loglog_slope(xs, degr) : 0.0;
  }
  return rep;
}

void write_perturbation_csv(std::ostream& os, const PerturbationReport& r) {
  os << std::setprecision(17);
  os << "eps,d,p,c_emp\n";
  for (const auto& row : r.rows) {
    os << row.eps << ',' << row.d << ',' << row.p << ',' << row.c_emp << '\n';
  }
  os << "# base = " << r.base << '\n'
     << "# bump_scale = " << r.bump_scale << '\n'
     << "# c_emp0 = " << r.c_emp0 << '\n'
     << "# slope_d = " << r.slope_d << '\n'
     << "# slope_p = " << r.slope_p << '\n'
     << "# transfer_constant = " << r.transfer_constant << '\n'
     << "# degradation_slope = " << r.degradation_slope << '\n';
}

// ---------------------------------------------------------------------------

namespace {

double cubic_bspline(double t) {
  t = std::abs(t);
  if (t < 1.0) return (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0;
  if (t < 2.0) {
    const double u = 2.0 - t;
    return u * u * u / 6.0;
  }
  return 0.0;
}

// Prolongation from cubic B-spline coefficients (3 per coarse node) to nodal
// values (3 per fine node) inside M.
Eigen::SparseMatrix<double> spline_prolongation(const Domain& d, double H) {
  const double R = d.radius_M();
  const int nc = static_cast<int>(std::ceil((R + 2.0 * H) / H));
  std::vector<std::pair<int, int>> coarse;
  std::vector<int> slot((2 * nc + 1) * (2 * nc + 1), -1);
  for (int b = -nc; b <= nc; ++b) {
    for (int a = -nc; a <= nc; ++a) {
      // Keep nodes whose support meets the disc.
      if (Vec2(a * H, b * H).norm() < R + 2.0 * std::sqrt(2.0) * H) {
        slot[(b + nc) * (2 * nc + 1) + (a + nc)] = static_cast<int>(coarse.size());
        coarse.emplace_back(a, b);
      }
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (!in_support(d, Support::M, idx)) continue;
    const Vec2 x = d.position(idx);
    const int a0 = static_cast<int>(std::floor(x[0] / H));
    const int b0 = static_cast<int>(std::floor(x[1] / H));
    for (int b = b0 - 1; b <= b0 + 2; ++b) {
      for (int a = a0 - 1; a <= a0 + 2; ++a) {
        if (std::abs(a) > nc || std::abs(b) > nc) continue;
        const int s = slot[(b + nc) * (2 * nc + 1) + (a + nc)];
        if (s < 0) continue;
        const double w = cubic_bspline(x[0] / H - a) * cubic_bspline(x[1] / H - b);
        if (w == 0.0) continue;
        for (int c = 0; c < 3; ++c) trip.emplace_back(3 * idx + c, 3 * s + c, w);
      }
    }
  }
  // Drop coarse nodes that touch no fine node of M.
  std::vector<int> used(coarse.size(), -1);
  int n_used = 0;
  for (const auto& t : trip) {
    const int s = t.col() / 3;
    if (used[s] < 0) used[s] = n_used++;
  }
  for (auto& t : trip) t = Eigen::Triplet<double>(t.row(), 3 * used[t.col() / 3] + t.col() % 3, t.value());
  Eigen::SparseMatrix<double> p(3 * d.node_count(), 3 * n_used);
  p.setFromTriplets(trip.begin(), trip.end());
  return p;
}

// Per-node L2(g) block on (f11, f12, f22): tr(g^-1 E_a g^-1 E_b) sqrt(det g) h^2.
Eigen::SparseMatrix<double> l2_gram(const Metric& metric, const Domain& d) {
  std::vector<Eigen::Triplet<double>> trip;
  const double h2 = d.h() * d.h();
  const std::array<Mat2, 3> basis{sym_from(1, 0, 0), sym_from(0, 1, 0), sym_from(0, 0, 1)};
  for (int idx = 0; idx < d.node_count(); ++idx) {
    if (!in_support(d, Support::M, idx)) continue;
    const MetricAt m = metric.eval(d.position(idx), false);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double v = (m.ginv * basis[a] * m.ginv * basis[b]).trace() * m.sqrt_det * h2;
        trip.emplace_back(3 * idx + a, 3 * idx + b, v);
      }
    }
  }
  Eigen::SparseMatrix<double> w(3 * d.node_count(), 3 * d.node_count());
  w.setFromTriplets(trip.begin(), trip.end());
  return w;
}

}  // namespace

CglsResult reconstruct_cgls(const Metric& metric, std::shared_ptr<const Domain> domain,
                            const RayData& data, const CglsOptions& opts) {
  CglsResult res{SymTensorField(domain, Support::M), 0, 0.0, 0.0, {}};
  const Eigen::Map<const Eigen::VectorXd> b(data.values.data(),
                                            static_cast<Eigen::Index>(data.values.size()));
  const double bnorm = b.norm();
  if (bnorm == 0.0) return res;

  const RayMatrix rays(metric, domain, Support::M, *data.fan, opts.step);
  const Eigen::SparseMatrix<double> p = spline_prolongation(*domain, opts.coarse_h);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> a = rays.matrix() * p;

  // CGLS in the L2(g) inner product of the spline space, so the iterates stay
  // L2-orthogonal to the near-kernel of potential tensors.
  const Eigen::SparseMatrix<double> gram =
      Eigen::SparseMatrix<double>(p.transpose() * l2_gram(metric, *domain) * p);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> gram_solver(gram);
  if (gram_solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NonConvergence, "spline Gram matrix is singular");
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.cols());
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = a.transpose() * r;
  Eigen::VectorXd s = gram_solver.solve(z);
  Eigen::VectorXd dir = s;
  double gamma = z.dot(s);
  const double gamma0 = gamma;
  double best = bnorm;
  int flat = 0;
  for (int it = 0; it < opts.max_iter; ++it) {
    if (std::sqrt(gamma) <= opts.tol * std::sqrt(gamma0)) break;
    const Eigen::VectorXd q = a * dir;
    const double alpha = gamma / q.squaredNorm();
    x += alpha * dir;
    r -= alpha * q;
    z = a.transpose() * r;
    s = gram_solver.solve(z);
    const double gamma_new = z.dot(s);
    dir = s + (gamma_new / gamma) * dir;
    gamma = gamma_new;
    res.iterations = it + 1;
    const double rn = r.norm();
    res.history.push_back(rn / bnorm);
    if (rn < best * (1.0 - 1e-12)) {
      best = rn;
      flat = 0;
    } else if (++flat >= 25) {
      throw Error(ErrorCode::Stagnation, "CGLS residual stopped decreasing above tolerance");
    }
  }
  res.residual = r.norm() / bnorm;
  res.normal_residual = gamma0 > 0.0 ? std::sqrt(gamma / gamma0) : 0.0;
  res.f = RayMatrix::unflatten(domain, Support::M, p * x);
  return res;
}

// ---------------------------------------------------------------------------

KornProbe korn_probe(const Metric& metric, std::shared_ptr<const Domain> domain, int samples,
                     std::uint64_t seed) {
  const MetricGrid mg(metric, domain);
  KornProbe out;
  const OneFormField rot = OneFormField::sample(domain, Support::Annulus,
                                                [](const Vec2& x) { return Vec2(-x[1], x[0]); });
  out.rotation_dw = sym_d(mg, rot).data().cwiseAbs().maxCoeff();
  out.ratios.resize(samples);
  for (int i = 0; i < samples; ++i) {
    auto rng = sample_rng(seed, static_cast<std::uint64_t>(i));
    const OneFormField w = OneFormField::sample(domain, Support::Annulus, random_smooth_oneform(rng));
    out.ratios[i] = korn_ratio(mg, w, Support::Annulus);
  }
  out.max_ratio = *std::max_element(out.ratios.begin(), out.ratios.end());
  return out;
}

}  // namespace tensortomo
