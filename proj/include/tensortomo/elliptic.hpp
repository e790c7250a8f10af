#pragma once

#include "tensortomo/fields.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>
#include <vector>

namespace tensortomo {

/// Piecewise-linear one-forms on the Cartesian grid split into triangles
/// (each cell cut along its lower-left to upper-right diagonal). A triangle is
/// active when one of its vertices lies strictly inside the disc; nodes strictly
/// inside are free, the remaining vertices of active triangles carry Dirichlet
/// data. The system matrix is the Galerkin form (dw, dphi)_{L2} with d the
/// symmetrized covariant derivative, evaluated with one-point quadrature at
/// triangle centroids.
class FemSpace {
 public:
  FemSpace(const Metric& metric, std::shared_ptr<const Domain> domain, double radius);

  struct Triangle {
    std::array<int, 3> node;
    Eigen::Matrix<double, 3, 6> sym_grad;   // local dofs -> (d11, d12, d22) without Gamma
    Eigen::Matrix<double, 3, 6> dmap;       // full map including the Gamma term
    Eigen::Matrix3d weight;                 // tensor inner product incl. area sqrt(det g)
    Eigen::Matrix<double, 3, 2> grad;       // P1 basis gradients (rows per vertex)
    Vec2 centroid;
    double area = 0.0;
  };

  const Metric& metric() const { return metric_; }
  const Domain& domain() const { return *domain_; }
  std::shared_ptr<const Domain> domain_ptr() const { return domain_; }
  double radius() const { return radius_; }
  Support support() const;

  const std::vector<Triangle>& triangles() const { return tris_; }
  int free_count() const { return n_free_; }
  /// Free dof slot of a grid node, or -1.
  int free_slot(int node) const { return free_slot_[node]; }
  bool is_dirichlet(int node) const { return dirichlet_[node]; }
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_list_; }
  /// Triangle containing x, or -1 if it is not active.
  int locate(const Vec2& x) const;

  /// Right-hand side sum_T dmap^T W (F_T) over free dofs, for a source given
  /// triangle-wise as (F11, F12, F22).
  Eigen::VectorXd load(const std::vector<Eigen::Vector3d>& tri_values) const;

  /// Triangle values of a nodal tensor field (vertex average) or a function
  /// (centroid value).
  std::vector<Eigen::Vector3d> triangle_values(const SymTensorField& f) const;
  std::vector<Eigen::Vector3d> triangle_values(const TensorFunction& f) const;

  /// Solves K u = rhs - K_fd * boundary; boundary values per grid node.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const Eigen::MatrixX2d* boundary) const;

  const Eigen::SparseMatrix<double>& stiffness() const { return k_ff_; }

  /// Gram matrix of the scalar H1 inner product (grad.grad + mass) on free
  /// nodes; factorized on first use.
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& scalar_h1() const;
  const Eigen::SparseMatrix<double>& scalar_h1_matrix() const;

 private:
  Metric metric_;
  std::shared_ptr<const Domain> domain_;
  double radius_;
  std::vector<Triangle> tris_;
  std::vector<int> tri_of_cell_;  // 2 per cell
  std::vector<int> free_slot_;
  std::vector<char> dirichlet_;
  std::vector<int> dirichlet_list_;
  int n_free_ = 0;
  Eigen::SparseMatrix<double> k_ff_;
  Eigen::SparseMatrix<double> k_fd_;  // free dofs x (2 * node_count)
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  mutable std::unique_ptr<Eigen::SparseMatrix<double>> h1_;
  mutable std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> h1_solver_;
};

/// A piecewise-linear one-form on a FemSpace.
class P1OneForm {
 public:
  P1OneForm(std::shared_ptr<const FemSpace> space, Eigen::MatrixX2d nodal);

  const FemSpace& space() const { return *space_; }
  const Eigen::MatrixX2d& nodal() const { return nodal_; }

  Vec2 value(const Vec2& x) const;
  /// (dw)_ij at x: exact symmetrized gradient of the containing triangle minus
  /// Gamma(x) w(x). Zero outside the active triangles.
  Mat2 sym_d_at(const Vec2& x) const;
  /// Triangle-wise (dw)_T as used in the Galerkin form.
  std::vector<Eigen::Vector3d> triangle_sym_d() const;

  OneFormField to_field(Support support) const;
  /// Nodal dw: symmetrized gradient averaged over the active triangles at each
  /// node, minus Gamma w at the node.
  SymTensorField nodal_sym_d(Support support) const;

 private:
  std::shared_ptr<const FemSpace> space_;
  Eigen::MatrixX2d nodal_;
};

/// Source of the one-form equation delta d w = delta F, represented by the
/// tensor F acting as phi -> (F, d phi)_{L2}.
struct DivergenceSource {
  std::optional<SymTensorField> field;
  TensorFunction function;

  static DivergenceSource zero() { return {}; }
  static DivergenceSource of(SymTensorField f) { return {std::move(f), {}}; }
  static DivergenceSource of(TensorFunction f) { return {std::nullopt, std::move(f)}; }
};

/// Galerkin solution of delta d w = delta F in the disc of the space, w = alpha
/// on its boundary nodes (alpha evaluated at the node positions; empty means 0).
P1OneForm solve_dirichlet(std::shared_ptr<const FemSpace> space, const DivergenceSource& source,
                          const OneFormFunction& alpha = {});

struct SolenoidalDecomposition {
  SymTensorField solenoidal;
  P1OneForm potential;                 // v in H1_0 with f = f^s + dv
  std::vector<Eigen::Vector3d> tri_solenoidal;
  double orthogonality = 0.0;          // relative weak residual of f^s against d(test)
};

/// f = f^s + dv with v in H1_0 of the space's disc minimizing ||f - dv||_{L2}.
SolenoidalDecomposition solenoidal_project(std::shared_ptr<const FemSpace> space,
                                           const SymTensorField& f);

/// Relative weak residual max over free dofs of |(F - dv, d phi)| scaled by the
/// norm of the load of F.
double weak_orthogonality(const FemSpace& space, const std::vector<Eigen::Vector3d>& tri_values);

/// Discrete dual norms via the Riesz map of the scalar H1 inner product on
/// the space's free nodes.
double dual_norm_divergence(const FemSpace& space, const DivergenceSource& source);
double h_minus1_norm(const FemSpace& space, const SymTensorField& f);
/// H1 norm of the discrete harmonic (H1-minimal) extension of boundary data,
/// used in place of the H^{1/2} trace norm.
double harmonic_extension_norm(const FemSpace& space, const OneFormFunction& alpha);

}  // namespace tensortomo
