#pragma once

// Inexact augmented Lagrangian solver for matrix completion based ambiguity
// resolution. The heterogeneous matrix H_obs = [P; X] is column-scaled by W,
// split into a low-rank part H = [Y; Z] and sparse noise E = [E_P; E_X], and
// the label block of H is projected back onto the candidate simplex after
// every iteration.

#include "mcar/label_model.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace mcar {

/// Elementwise soft threshold sgn(b) * max(|b| - a, 0).
Matrix shrink(double a, const Matrix& b);

/// Singular value thresholding U * shrink(tau, S) * V^T via a thin SVD.
/// Throws NumericError on non-finite input.
Matrix svt(const Matrix& a, double tau);

/// Spectral norm (largest singular value).
double spectral_norm(const Matrix& a);

/// 1 / sqrt(max(c + m, N)).
double default_lambda(Index num_classes, Index feature_dim, Index num_instances);

struct SolverConfig {
  double lambda = 0.0;
  double gamma = 0.0;
  /// Unset: 1.25 / ||H_obs W||_2.
  std::optional<double> mu0;
  double rho = 1.5;
  /// Unset: mu0 * 1e7.
  std::optional<double> mu_max;
  double tol = 1e-7;
  std::size_t max_iter = 500;

  /// lambda = default_lambda, gamma = 2 lambda, remaining fields at defaults.
  static SolverConfig defaults_for(Index num_classes, Index feature_dim, Index num_instances);
  static SolverConfig defaults_for(const AmbiguousDataset& data);
  void validate() const;
};

struct SolveResult {
  SoftLabelMatrix y;  // c x N, unscaled
  Matrix z;           // m x N
  Matrix e_p;         // c x N
  Matrix e_x;         // m x N
  std::size_t iterations = 0;
  /// ||H_obs - H - E||_F / ||H_obs||_F in the unscaled domain, with H built
  /// from the returned (projected) Y.
  double final_residual = 0.0;
  /// The ALM constraint residual and the relative change of the projected
  /// label block both dropped below SolverConfig::tol once mu reached mu_max.
  bool converged = false;
  /// Scaled-domain ALM constraint residual ||H_obs W - H - E|| / ||H_obs W||
  /// after every iteration, measured before the label projection.
  std::vector<double> residual_history;
};

/// Maps the scaled label block Y W (c x N) onto its feasible set; the second
/// argument holds the target column sums w_jj.
using LabelProjection = std::function<Matrix(const Matrix& y_scaled, const Vector& targets)>;

/// Runs the ALM iteration with a caller-supplied label projection. Shared by
/// the plain, weighted and group-constrained solvers.
SolveResult alm_solve(const Matrix& features, const SoftLabelMatrix& p, const WeightMatrix& w,
                      const SolverConfig& config, const LabelProjection& project);

/// Weighted solve. `p` must be column-stochastic and supported on the
/// dataset's candidate sets. Throws NumericError when an iterate diverges.
SolveResult wmcar_solve(const AmbiguousDataset& data, const SoftLabelMatrix& p,
                        const WeightMatrix& w, const SolverConfig& config);

/// Unweighted solve (W = I).
SolveResult mcar_solve(const AmbiguousDataset& data, const SoftLabelMatrix& p,
                       const SolverConfig& config);

}  // namespace mcar
