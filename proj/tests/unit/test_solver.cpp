#include "mcar/error.hpp"
#include "mcar/solver.hpp"
#include "mcar/synth.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mcar;

namespace {

AmbiguousDataset separable(std::uint64_t seed, int c = 3, int vertices = 2, int samples = 10, Index m = 20,
                           double fraction = 0.9, int extra = 1) {
  auto spec = synth::ConvexHullSpec::uniform(c, vertices, samples, m, seed);
  const auto data = synth::gen_convex_hull_data(spec);
  const auto sets =
      synth::synthesize_ambiguity(data.ground_truth, c, {fraction, extra, 1.0 / (c - 1), seed + 100});
  return synth::make_dataset(data, sets, c);
}

}  // namespace

TEST_CASE("shrink") {
  CHECK(shrink(0.5, Matrix::Constant(1, 1, 1.2))(0, 0) == doctest::Approx(0.7));
  CHECK(shrink(0.5, Matrix::Constant(1, 1, -0.3))(0, 0) == 0.0);
  CHECK(shrink(0.5, Matrix::Constant(1, 1, -1.5))(0, 0) == doctest::Approx(-1.0));
  std::mt19937_64 rng(1);
  const Matrix b = oracle::random_matrix(4, 5, rng);
  CHECK(shrink(0.0, b) == b);
  CHECK_THROWS_AS(shrink(-0.1, b), InvalidInput);
}

TEST_CASE("singular value thresholding") {
  std::mt19937_64 rng(2);
  const Matrix a = oracle::random_matrix(6, 4, rng);
  CHECK((svt(a, 0.0) - a).cwiseAbs().maxCoeff() < 1e-10);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 1.0;
  CHECK((svt(d, 2.0) - expected).cwiseAbs().maxCoeff() < 1e-12);

  const auto ref = oracle::jacobi_svd(a);
  const Matrix thresholded = svt(a, ref.s[1]);
  CHECK(oracle::rank(thresholded, 1e-10) <= 1);
  CHECK((thresholded - oracle::svt(a, ref.s[1])).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(svt(a, -1.0), InvalidInput);
  Matrix bad = a;
  bad(0, 0) = NAN;
  CHECK_THROWS_AS(svt(bad, 0.1), NumericError);
}

TEST_CASE("svt and shrink agree with independent oracles on random matrices") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 12);
  std::uniform_real_distribution<double> frac(0.0, 1.2);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = oracle::random_matrix(dim(rng), dim(rng), rng);
    const double tau = frac(rng) * oracle::jacobi_svd(a).s[0];
    CHECK((svt(a, tau) - oracle::svt(a, tau)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((shrink(tau, a) - oracle::shrink(tau, a)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("default lambda") {
  CHECK(default_lambda(16, 5400, 1122) == doctest::Approx(1.0 / std::sqrt(5416.0)));
  CHECK(default_lambda(16, 5400, 1122) == doctest::Approx(0.013589).epsilon(1e-4));
  CHECK(default_lambda(2, 3, 5) == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK(default_lambda(1, 1, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(default_lambda(1, 0, 1), InvalidInput);
  CHECK_THROWS_AS(default_lambda(0, 1, 1), InvalidInput);
}

TEST_CASE("solver config defaults and validation") {
  const auto cfg = SolverConfig::defaults_for(3, 20, 30);
  CHECK(cfg.lambda == doctest::Approx(1.0 / std::sqrt(30.0)));
  CHECK(cfg.gamma == doctest::Approx(2.0 * cfg.lambda));
  CHECK(cfg.rho == 1.5);
  CHECK(cfg.tol == 1e-7);
  CHECK(cfg.max_iter == 500);
  auto bad = cfg;
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = cfg;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = cfg;
  bad.max_iter = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("unambiguous input returns P exactly") {
  auto ds = separable(4, 3, 2, 8, 10, 0.0, 0);
  const auto p = init_soft_labels(ds.candidates, 3);
  const auto res = mcar_solve(ds, p, SolverConfig::defaults_for(ds));
  CHECK(res.y == p);
}

TEST_CASE("noiseless separable data is recovered exactly") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto ds = separable(seed);
    const auto p = init_soft_labels(ds.candidates, 3);
    const auto res = mcar_solve(ds, p, SolverConfig::defaults_for(ds));
    CHECK(labeling_error_rate(predict_labels(res.y, ds.candidates), *ds.ground_truth) == 0.0);
    CHECK(res.converged);
    CHECK(res.final_residual < 1e-6);
  }
}

TEST_CASE("identity weights reproduce the unweighted solve") {
  for (std::uint64_t seed = 10; seed < 13; ++seed) {
    const auto ds = separable(seed);
    const auto p = init_soft_labels(ds.candidates, 3);
    const auto cfg = SolverConfig::defaults_for(ds);
    const auto a = mcar_solve(ds, p, cfg);
    const auto b = wmcar_solve(ds, p, WeightMatrix::identity(ds.num_instances()), cfg);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("every projected iterate respects the weighted simplex") {
  const auto ds = separable(21);
  const auto p = init_soft_labels(ds.candidates, 3);
  const auto w = weight_matrix(p);
  std::size_t calls = 0;
  bool all_valid = true;
  auto checked = [&](const Matrix& y, const Vector& targets) {
    Matrix out = project_to_candidate_simplex(y, ds.candidates, targets);
    all_valid = all_valid && is_valid_soft_labels(out, ds.candidates, 1e-9, targets);
    ++calls;
    return out;
  };
  const auto res = alm_solve(ds.features, p, w, SolverConfig::defaults_for(ds), checked);
  CHECK(calls == res.iterations);
  CHECK(all_valid);
  CHECK(is_valid_soft_labels(res.y, ds.candidates, 1e-9));
}

TEST_CASE("solver output is invariant to a uniform rescale of the weights") {
  const auto ds = separable(30);
  const auto p = init_soft_labels(ds.candidates, 3);
  const auto cfg = SolverConfig::defaults_for(ds);
  const auto a = wmcar_solve(ds, p, WeightMatrix::identity(ds.num_instances()), cfg);
  const auto b = wmcar_solve(ds, p, WeightMatrix::uniform(ds.num_instances(), 3.0), cfg);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(a.iterations == b.iterations);
  CHECK(predict_labels(a.y, ds.candidates) == predict_labels(b.y, ds.candidates));
}

TEST_CASE("identical feature columns with disjoint candidates converge") {
  AmbiguousDataset ds;
  ds.num_classes = 4;
  ds.features = Matrix::Ones(5, 4);
  ds.candidates = {{0}, {1}, {2}, {3}};
  const auto res = mcar_solve(ds, init_soft_labels(ds.candidates, 4), SolverConfig::defaults_for(ds));
  CHECK(res.y.allFinite());
  CHECK(predict_labels(res.y, ds.candidates) == std::vector<ClassIndex>{0, 1, 2, 3});
}

TEST_CASE("solver is deterministic") {
  const auto ds = separable(40);
  const auto p = init_soft_labels(ds.candidates, 3);
  const auto cfg = SolverConfig::defaults_for(ds);
  const auto a = wmcar_solve(ds, p, weight_matrix(p), cfg);
  const auto b = wmcar_solve(ds, p, weight_matrix(p), cfg);
  CHECK(a.y == b.y);
  CHECK(a.residual_history == b.residual_history);
}

TEST_CASE("solver input errors") {
  const auto ds = separable(50);
  const auto p = init_soft_labels(ds.candidates, 3);
  const auto cfg = SolverConfig::defaults_for(ds);
  CHECK_THROWS_AS(mcar_solve(ds, Matrix::Zero(3, ds.num_instances()), cfg), InvalidInput);
  CHECK_THROWS_AS(mcar_solve(ds, p.leftCols(3), cfg), InvalidInput);
  CHECK_THROWS_AS(wmcar_solve(ds, p, WeightMatrix::identity(3), cfg), InvalidInput);
  auto bad = cfg;
  bad.tol = 0.0;
  CHECK_THROWS_AS(mcar_solve(ds, p, bad), InvalidInput);
}

TEST_CASE("iteration cap is honored and reported") {
  const auto ds = separable(60);
  auto cfg = SolverConfig::defaults_for(ds);
  cfg.max_iter = 5;
  const auto res = mcar_solve(ds, init_soft_labels(ds.candidates, 3), cfg);
  CHECK(res.iterations == 5);
  CHECK_FALSE(res.converged);
  CHECK(res.residual_history.size() == 5);
}
