#pragma once

// Reference implementations used only by the tests. They deliberately avoid
// the library's own SVD path so that agreement means something.

#include "mcar/label_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using mcar::Index;
using mcar::Matrix;
using mcar::Vector;

struct Svd {
  Matrix u;  // m x k
  Vector s;  // k, descending
  Matrix v;  // n x k
};

// One-sided Jacobi (Hestenes) SVD. Columns of A are rotated pairwise until
// mutually orthogonal; their norms are then the singular values.
inline Svd jacobi_svd(const Matrix& a) {
  const bool transposed = a.rows() < a.cols();
  Matrix work = transposed ? Matrix(a.transpose()) : a;
  const Index n = work.cols();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double alpha = work.col(p).squaredNorm();
        const double beta = work.col(q).squaredNorm();
        const double gamma = work.col(p).dot(work.col(q));
        if (alpha == 0.0 || beta == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        if (std::abs(gamma) < 1e-300) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index r = 0; r < work.rows(); ++r) {
          const double x = work(r, p), y = work(r, q);
          work(r, p) = c * x - s * y;
          work(r, q) = s * x + c * y;
        }
        for (Index r = 0; r < n; ++r) {
          const double x = v(r, p), y = v(r, q);
          v(r, p) = c * x - s * y;
          v(r, q) = s * x + c * y;
        }
      }
    }
    if (off < 1e-15) break;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(),
            [&](Index x, Index y) { return work.col(x).norm() > work.col(y).norm(); });
  Svd out;
  out.s.resize(n);
  out.u.setZero(work.rows(), n);
  out.v.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    const double sigma = work.col(src).norm();
    out.s[k] = sigma;
    if (sigma > 0.0) out.u.col(k) = work.col(src) / sigma;
    out.v.col(k) = v.col(src);
  }
  if (transposed) std::swap(out.u, out.v);
  return out;
}

inline Matrix svt(const Matrix& a, double tau) {
  const auto svd = jacobi_svd(a);
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (Index k = 0; k < svd.s.size(); ++k)
    if (svd.s[k] > tau) out += (svd.s[k] - tau) * svd.u.col(k) * svd.v.col(k).transpose();
  return out;
}

inline Matrix shrink(double a, const Matrix& b) {
  Matrix out(b.rows(), b.cols());
  for (Index j = 0; j < b.cols(); ++j)
    for (Index i = 0; i < b.rows(); ++i) {
      const double x = b(i, j);
      out(i, j) = x > a ? x - a : (x < -a ? x + a : 0.0);
    }
  return out;
}

inline Index rank(const Matrix& a, double rel_tol) {
  const auto svd = jacobi_svd(a);
  if (svd.s.size() == 0 || svd.s[0] == 0.0) return 0;
  Index r = 0;
  for (Index k = 0; k < svd.s.size(); ++k)
    if (svd.s[k] > rel_tol * svd.s[0]) ++r;
  return r;
}

struct RankSearch {
  Index best_rank = 0;
  std::vector<std::vector<mcar::ClassIndex>> minimizers;
};

// Every hard labeling consistent with the candidate sets, scored by the
// numerical rank of [one_hot(labels); X].
inline RankSearch min_rank_assignments(const Matrix& x, const mcar::CandidateSets& candidates, int c,
                                       double rel_tol) {
  const auto n = candidates.size();
  RankSearch out;
  out.best_rank = std::numeric_limits<Index>::max();
  std::vector<std::size_t> pick(n, 0);
  while (true) {
    std::vector<mcar::ClassIndex> labels(n);
    Matrix h = Matrix::Zero(c + x.rows(), static_cast<Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      labels[j] = candidates[j].labels()[pick[j]];
      h(labels[j], static_cast<Index>(j)) = 1.0;
    }
    h.bottomRows(x.rows()) = x;
    const Index r = rank(h, rel_tol);
    if (r < out.best_rank) {
      out.best_rank = r;
      out.minimizers.clear();
    }
    if (r == out.best_rank) out.minimizers.push_back(labels);
    std::size_t j = 0;
    while (j < n && ++pick[j] == candidates[j].size()) pick[j++] = 0;
    if (j == n) break;
  }
  return out;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

}  // namespace oracle
