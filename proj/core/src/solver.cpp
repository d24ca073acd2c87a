#include "mcar/solver.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mcar {

namespace {

constexpr double kMuMaxFactor = 1e7;
constexpr double kMu0Scale = 1.25;

Eigen::BDCSVD<Matrix> thin_svd(const Matrix& a) {
  return Eigen::BDCSVD<Matrix>(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

void check_shapes(const AmbiguousDataset& data, const SoftLabelMatrix& p, const WeightMatrix& w) {
  data.validate();
  if (p.rows() != data.num_classes || p.cols() != data.num_instances())
    throw InvalidInput("label matrix must be " + std::to_string(data.num_classes) + " x " +
                       std::to_string(data.num_instances()));
  if (w.size() != data.num_instances()) throw InvalidInput("weight vector length mismatch");
}

}  // namespace

Matrix shrink(double a, const Matrix& b) {
  if (a < 0.0) throw InvalidInput("shrinkage threshold must be non-negative");
  return b.unaryExpr([a](double v) {
    const double mag = std::abs(v) - a;
    return mag > 0.0 ? std::copysign(mag, v) : 0.0;
  });
}

Matrix svt(const Matrix& a, double tau) {
  if (tau < 0.0) throw InvalidInput("singular value threshold must be non-negative");
  if (!a.allFinite()) throw NumericError("singular value thresholding on non-finite matrix", 0);
  if (a.size() == 0) return a;
  const auto svd = thin_svd(a);
  const Vector& s = svd.singularValues();
  const Index keep = (s.array() > tau).count();
  if (keep == 0) return Matrix::Zero(a.rows(), a.cols());
  const Vector kept = s.head(keep).array() - tau;
  return svd.matrixU().leftCols(keep) * kept.asDiagonal() * svd.matrixV().leftCols(keep).transpose();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return thin_svd(a).singularValues()[0];
}

double default_lambda(Index num_classes, Index feature_dim, Index num_instances) {
  if (num_classes < 1 || feature_dim < 1 || num_instances < 1)
    throw InvalidInput("class count, feature dimension and instance count must be positive");
  return 1.0 / std::sqrt(static_cast<double>(std::max(num_classes + feature_dim, num_instances)));
}

SolverConfig SolverConfig::defaults_for(Index num_classes, Index feature_dim, Index num_instances) {
  SolverConfig cfg;
  cfg.lambda = default_lambda(num_classes, feature_dim, num_instances);
  cfg.gamma = 2.0 * cfg.lambda;
  return cfg;
}

SolverConfig SolverConfig::defaults_for(const AmbiguousDataset& data) {
  return defaults_for(data.num_classes, data.feature_dim(), data.num_instances());
}

void SolverConfig::validate() const {
  if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
  if (!(gamma > 0.0)) throw InvalidInput("gamma must be positive");
  if (mu0 && !(*mu0 > 0.0)) throw InvalidInput("mu0 must be positive");
  if (!(rho > 1.0)) throw InvalidInput("rho must exceed 1");
  if (mu_max && mu0 && *mu_max < *mu0) throw InvalidInput("mu_max must be at least mu0");
  if (mu_max && !(*mu_max > 0.0)) throw InvalidInput("mu_max must be positive");
  if (!(tol > 0.0)) throw InvalidInput("tolerance must be positive");
  if (max_iter == 0) throw InvalidInput("max_iter must be positive");
}

SolveResult alm_solve(const Matrix& features, const SoftLabelMatrix& p, const WeightMatrix& w,
                      const SolverConfig& config, const LabelProjection& project) {
  config.validate();
  const Index c = p.rows();
  const Index m = features.rows();
  const Index n = p.cols();
  if (features.cols() != n) throw InvalidInput("features and labels disagree on instance count");
  if (w.size() != n) throw InvalidInput("weight vector length mismatch");

  Matrix h_obs(c + m, n);
  h_obs << p, features;
  h_obs = w.apply(h_obs);
  const double h_norm = h_obs.norm();
  const double h_spec = spectral_norm(h_obs);
  if (!(h_spec > 0.0) || !std::isfinite(h_spec))
    throw NumericError("observed matrix has zero or non-finite spectral norm", 0);

  const auto p_bar = h_obs.topRows(c);
  const auto x_bar = h_obs.bottomRows(m);

  double mu = config.mu0.value_or(kMu0Scale / h_spec);
  const double mu_max = config.mu_max.value_or(mu * kMuMaxFactor);

  Matrix lambda_dual = h_obs / h_spec;
  Matrix h = Matrix::Zero(c + m, n);
  Matrix e(c + m, n);
  Matrix y_prev = Matrix::Zero(c, n);

  SolveResult out;
  out.residual_history.reserve(config.max_iter);
  for (std::size_t it = 1; it <= config.max_iter; ++it) {
    const double inv_mu = 1.0 / mu;
    e.topRows(c) = p_bar - shrink(config.gamma * inv_mu, h.topRows(c) - inv_mu * lambda_dual.topRows(c));
    e.bottomRows(m) =
        shrink(config.lambda * inv_mu, x_bar - h.bottomRows(m) + inv_mu * lambda_dual.bottomRows(m));

    h = svt(h_obs - e + inv_mu * lambda_dual, inv_mu);
    lambda_dual += mu * (h_obs - h - e);
    const bool saturated = mu >= mu_max;
    mu = std::min(config.rho * mu, mu_max);

    // Constraint residual of the ALM step, before the label block is projected.
    const double residual = (h_obs - h - e).norm() / h_norm;
    Matrix y_next = project(h.topRows(c), w.diag());
    const double label_change = (y_next - y_prev).norm() / h_norm;
    h.topRows(c) = y_next;
    y_prev = std::move(y_next);

    if (!std::isfinite(residual) || !h.allFinite())
      throw NumericError("ALM iterate became non-finite", it);
    out.residual_history.push_back(residual);
    out.iterations = it;
    if (residual < config.tol && label_change < config.tol && saturated) {
      out.converged = true;
      break;
    }
  }

  out.y = w.apply_inverse(h.topRows(c));
  out.z = w.apply_inverse(h.bottomRows(m));
  out.e_p = w.apply_inverse(e.topRows(c));
  out.e_x = w.apply_inverse(e.bottomRows(m));

  Matrix h_plain(c + m, n);
  h_plain << p, features;
  Matrix rest(c + m, n);
  rest << p - out.y - out.e_p, features - out.z - out.e_x;
  const double plain_norm = h_plain.norm();
  out.final_residual = plain_norm > 0.0 ? rest.norm() / plain_norm : rest.norm();
  return out;
}

SolveResult wmcar_solve(const AmbiguousDataset& data, const SoftLabelMatrix& p,
                        const WeightMatrix& w, const SolverConfig& config) {
  check_shapes(data, p, w);
  if (!is_valid_soft_labels(p, data.candidates, 1e-9))
    throw InvalidInput("initial label matrix violates the candidate simplex constraints");
  const auto& candidates = data.candidates;
  return alm_solve(data.features, p, w, config, [&candidates](const Matrix& y, const Vector& targets) {
    return project_to_candidate_simplex(y, candidates, targets);
  });
}

SolveResult mcar_solve(const AmbiguousDataset& data, const SoftLabelMatrix& p,
                       const SolverConfig& config) {
  return wmcar_solve(data, p, WeightMatrix::identity(data.num_instances()), config);
}

}  // namespace mcar
