#pragma once

#include "tensortomo/elliptic.hpp"
#include "tensortomo/normal_operator.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace tensortomo {

// ---------------------------------------------------------------------------
// Seeded random fields

/// Generator for sample `index` of a stream seeded with `seed`.
std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index);

struct EnsembleSpec {
  int size = 50;
  std::uint64_t seed = 7;
  double band_limit = 8.0;
  int modes = 10;
};

/// Interior cutoff (1 - |x|^2/0.9^2)^4 used to keep ensemble tensors inside M.
double interior_bump(const Vec2& x);

/// Sum of `modes` plane waves with |k| <= band_limit and Gaussian symmetric
/// amplitudes, times interior_bump. Supported in M.
SymTensorField random_tensor(std::shared_ptr<const Domain> domain, std::mt19937_64& rng,
                             double band_limit = 8.0, int modes = 10);
std::vector<SymTensorField> tensor_ensemble(std::shared_ptr<const Domain> domain,
                                            const EnsembleSpec& spec);

/// Smooth one-form vanishing outside a disc inside M: a (1 - |x - c|^2/r^2)^4
/// with |c| <= 0.3 and r = 0.95 - |c|, |a| in [1, 3].
OneFormFunction random_potential_oneform(std::mt19937_64& rng);

/// Band-limited one-form without cutoff (for Korn probes on the annulus).
OneFormFunction random_smooth_oneform(std::mt19937_64& rng, double band_limit = 4.0,
                                      int modes = 6);

// ---------------------------------------------------------------------------
// Boundary trace recovery and the constructive pipeline

struct BoundaryRecoveryOptions {
  int n_points = 128;
  double step = 1e-3;
  double tilt = M_PI / 4;    // initial angle from the outward normal
  int max_retries = 6;       // each retry multiplies the tilt by 0.8
  bool third_direction = true;
};

struct BoundaryRecovery {
  SymTensorField fs_M1;           // solenoidal projection of Ef in M1
  P1OneForm potential_M1;         // its potential; equals w on the annulus
  BoundaryTrace trace;            // w on dM from geodesic integration
  BoundaryTrace oracle;           // potential_M1 sampled on dM
  /// w from geodesic integration at the Dirichlet nodes of the M space
  /// (rows of other nodes are zero).
  Eigen::MatrixX2d dirichlet_values;
  double max_third_error = 0.0;   // relative misfit of a third direction
  int retries = 0;
};

/// w_i(x) xi^i = integral of f^s_{M1} along the geodesic from (x, xi) to dM1,
/// for two outward directions at x; solved for w(x). Throws GeodesicEntersM or
/// IllConditionedPair.
Vec2 recover_w_at(const Metric& metric, const TensorSampler& fs_M1, const Domain& domain,
                  const Vec2& x, const BoundaryRecoveryOptions& opts, double* third_error = nullptr,
                  int* retries = nullptr);

/// f^s_{M1} by projection of the zero extension of f, then w on dM (and at the
/// Dirichlet nodes of space_M) from the integrals of f^s_{M1} along outward
/// geodesics.
BoundaryRecovery recover_boundary_trace(std::shared_ptr<const FemSpace> space_M1,
                                        std::shared_ptr<const FemSpace> space_M,
                                        const SymTensorField& f,
                                        const BoundaryRecoveryOptions& opts = {});

/// f^s on M = f^s_{M1} + dw, w solving delta d w = 0 in M with the recovered
/// boundary values.
struct PipelineResult {
  SymTensorField fs;
  P1OneForm w;
};
PipelineResult reconstruct_fs_from_trace(std::shared_ptr<const FemSpace> space_M,
                                         const BoundaryRecovery& rec);

/// Relative L2 distance of two traces sampled at the same angles.
double trace_relative_error(const BoundaryTrace& a, const BoundaryTrace& b);

// ---------------------------------------------------------------------------
// Two-sided estimate

struct StabilitySample {
  int index = 0;
  double f_norm = 0.0;       // ||f||_{L2(M)}
  double fs_norm = 0.0;      // ||f^s||_{L2(M)}
  double nf_h1 = 0.0;        // ||Nf||_{H1(M1)}
  double ratio = 0.0;        // nf_h1 / fs_norm
  double ratio_fs = 0.0;     // ||N f^s||_{H1(M1)} / fs_norm (0 if not computed)
  double f_hminus1 = 0.0;    // ||f||_{H^-1(M)}
  double prop1 = 0.0;        // fs_norm / (nf_h1 + f_hminus1)
  double c22b = 0.0;         // ||w||_{L2(M1\M)} / ||f^s_{M1}||_{L2(M1\M)}
  double c_el_es = 0.0;      // ||w||_{H1(M)} / ||f^s_{M1}||_{L2(M1\M)}
};

struct StabilityOptions {
  bool ratio_on_fs = false;
  bool pipeline_constants = false;
  NormalGridOptions grid;
  BoundaryRecoveryOptions recovery;
};

struct StabilityReport {
  std::string metric;
  double h = 0.0;
  int fan_points = 0;
  int fan_dirs = 0;
  std::uint64_t seed = 0;
  int rejected = 0;
  std::vector<StabilitySample> samples;
  double c_emp = 0.0;
  double C_emp = 0.0;
  double prop1_constant = 0.0;   // max prop1
  double c22b = 0.0;             // max over samples
  double c_el_es = 0.0;
};

/// Ratios ||Nf||_{H1(M1)} / ||f^s||_{L2(M)} over a seeded ensemble; samples with
/// ||f^s|| < 1e-3 ||f|| are rejected. Throws EnsembleDegenerate.
StabilityReport stability_probe(const Metric& metric, std::shared_ptr<const Domain> domain,
                                const std::vector<SymTensorField>& ensemble,
                                const StabilityOptions& opts, std::uint64_t seed = 0);

void write_stability_csv(std::ostream& os, const StabilityReport& r);

// ---------------------------------------------------------------------------
// Perturbations

struct PerturbationRow {
  double eps = 0.0;
  double d = 0.0;       // max ||(N_g - N_g0) f||_{H1(M1)} / ||f||_{L2(M)}
  double p = 0.0;       // max ||f^s_g - f^s_g0||_{L2(M)} / ||f||_{L2(M)}
  double c_emp = 0.0;   // min ||N_g f||_{H1} / ||f^s_g|| over the test set
};

struct PerturbationReport {
  std::string base;
  double bump_scale = 0.0;   // scale making the discrete C3 norm of eps * bump equal eps
  double c_emp0 = 0.0;
  std::vector<PerturbationRow> rows;
  double slope_d = 0.0;
  double slope_p = 0.0;
  /// max over eps of (1 - c_emp(eps)/c_emp0) / eps, floored at 0.
  double transfer_constant = 0.0;
  /// log-log slope of the degradation 1 - c_emp(eps)/c_emp0 (0 when it never degrades).
  double degradation_slope = 0.0;
};

struct PerturbationOptions {
  TensorBump bump;
  NormalGridOptions grid;
  SimplicitySampling certification;
};

/// Throws CertificationFailure when g0 + eps h is not certified simple.
PerturbationReport perturbation_probe(const Metric& base, std::shared_ptr<const Domain> domain,
                                      const std::vector<double>& eps_list,
                                      const std::vector<SymTensorField>& test_set,
                                      const PerturbationOptions& opts);

void write_perturbation_csv(std::ostream& os, const PerturbationReport& r);

// ---------------------------------------------------------------------------
// Reconstruction

struct CglsOptions {
  int max_iter = 200;
  double tol = 1e-3;          // relative Gram-dual norm of A^T r
  double coarse_h = 0.125;    // spacing of the cubic B-spline parametrization
  double step = 1e-3;
};

struct CglsResult {
  SymTensorField f;
  int iterations = 0;
  double residual = 0.0;      // ||A c - b|| / ||b||
  double normal_residual = 0.0;
  std::vector<double> history;
};

/// CGLS on the ray transform restricted to tensors in M written in a cubic
/// B-spline basis of spacing coarse_h. Throws Stagnation.
CglsResult reconstruct_cgls(const Metric& metric, std::shared_ptr<const Domain> domain,
                            const RayData& data, const CglsOptions& opts = {});

// ---------------------------------------------------------------------------
// Korn probe

struct KornProbe {
  double rotation_dw = 0.0;  // max |dw| for w = (-x2, x1), Euclidean
  double max_ratio = 0.0;
  std::vector<double> ratios;
};

KornProbe korn_probe(const Metric& metric, std::shared_ptr<const Domain> domain, int samples,
                     std::uint64_t seed);

}  // namespace tensortomo
