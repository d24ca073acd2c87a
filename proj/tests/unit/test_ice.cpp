#include "mcar/error.hpp"
#include "mcar/ice.hpp"
#include "mcar/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace mcar;
using namespace mcar::ice;

namespace {

AmbiguousDataset make(std::uint64_t seed, double fraction, int extra, int c = 4) {
  auto spec = synth::ConvexHullSpec::uniform(c, 2, 10, 20, seed);
  spec.noise_level = 0.05;
  const auto data = synth::gen_convex_hull_data(spec);
  const auto sets = synth::synthesize_ambiguity(data.ground_truth, c, {fraction, extra, 0.5, seed + 7});
  return synth::make_dataset(data, sets, c);
}

IceConfig config_for(const AmbiguousDataset& ds, double fe = 0.5) {
  IceConfig cfg;
  cfg.elimination_factor = fe;
  cfg.solver = SolverConfig::defaults_for(ds);
  return cfg;
}

}  // namespace

TEST_CASE("least likely candidate") {
  Matrix y(3, 3);
  y << 0.6, 0.5, 0.0, 0.3, 0.5, 0.7, 0.1, 0.0, 0.3;
  const auto [l0, s0] = least_likely_candidate(y, {0, 1, 2}, 0);
  CHECK(l0 == 2);
  CHECK(s0 == doctest::Approx(0.1));
  const auto [l1, s1] = least_likely_candidate(y, {0, 1}, 1);
  CHECK(l1 == 0);
  CHECK(s1 == doctest::Approx(0.5));
  const auto [l2, s2] = least_likely_candidate(y, {1}, 2);
  CHECK(l2 == 1);
  CHECK(s2 == doctest::Approx(0.7));
  CHECK_THROWS_AS(least_likely_candidate(y, {0, 5}, 0), InvalidInput);
}

TEST_CASE("elimination set size and tie handling") {
  std::vector<std::pair<Index, double>> scores{{0, 0.3}, {1, 0.1}, {2, 0.2}, {3, 0.4}, {4, 0.5}};
  CHECK(select_elimination_set(scores, 0.5) == std::vector<Index>{0, 1, 2});
  CHECK(select_elimination_set(scores, 1.0).size() == 5);
  CHECK(select_elimination_set(scores, 0.0).empty());
  std::vector<std::pair<Index, double>> tied{{4, 0.2}, {1, 0.2}, {7, 0.2}, {2, 0.9}};
  CHECK(select_elimination_set(tied, 0.5) == std::vector<Index>{1, 4});
  CHECK_THROWS_AS(select_elimination_set(scores, 1.5), InvalidInput);
}

TEST_CASE("no ambiguous instances means no rounds") {
  const auto ds = make(1, 0.0, 0);
  const auto [res, trace] = wmcar_ice(ds, config_for(ds));
  CHECK(trace.rounds.empty());
  CHECK(res.y == init_soft_labels(ds.candidates, 4));
  CHECK(trace.final_candidates == ds.candidates);
}

TEST_CASE("full elimination of one extra label takes one round") {
  const auto ds = make(2, 1.0, 1);
  const auto [res, trace] = wmcar_ice(ds, config_for(ds, 1.0));
  REQUIRE(trace.rounds.size() == 1);
  for (const auto& set : trace.final_candidates) CHECK(set.size() == 1);
  CHECK(is_valid_soft_labels(res.y, trace.final_candidates, 1e-9));
}

TEST_CASE("elimination rounds follow the cardinality rule") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto ds = make(seed, 0.8, 2);
    const auto [res, trace] = wmcar_ice(ds, config_for(ds));
    CHECK(trace.rounds.size() <= 5);
    std::vector<std::size_t> sizes;
    for (const auto& s : ds.candidates) sizes.push_back(s.size());
    for (const auto& round : trace.rounds) {
      const auto expected = static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(round.ambiguous)));
      CHECK(round.eliminated.size() == expected);
      CHECK(round.total_candidates_after + expected == round.total_candidates_before);
      for (std::size_t j = 0; j < sizes.size(); ++j) CHECK(round.set_sizes[j] <= sizes[j]);
      sizes = round.set_sizes;
      CHECK(round.error_rate.has_value());
    }
    for (std::size_t j = 0; j < ds.candidates.size(); ++j) {
      for (ClassIndex l : trace.final_candidates[j]) CHECK(ds.candidates[j].contains(l));
    }
    CHECK(is_valid_soft_labels(res.y, trace.final_candidates, 1e-9));
  }
}

TEST_CASE("eliminating a true label does not abort the loop") {
  // Heavy noise makes wrong eliminations likely; the loop must keep going.
  auto spec = synth::ConvexHullSpec::uniform(4, 2, 8, 10, 3);
  spec.noise_level = 1.0;
  const auto data = synth::gen_convex_hull_data(spec);
  const auto sets = synth::synthesize_ambiguity(data.ground_truth, 4, {1.0, 3, 0.5, 3});
  const auto ds = synth::make_dataset(data, sets, 4);
  CHECK_NOTHROW(wmcar_ice(ds, config_for(ds, 1.0)));
}

TEST_CASE("unweighted variant matches the loop with identity weights") {
  const auto ds = make(5, 0.8, 2);
  auto cfg = config_for(ds);
  const auto [a, ta] = mcar_ice(ds, cfg);
  cfg.unweighted = true;
  const auto [b, tb] = wmcar_ice(ds, cfg);
  CHECK(a.y == b.y);
  CHECK(ta.final_candidates == tb.final_candidates);
}

TEST_CASE("ice config validation") {
  const auto ds = make(6, 0.5, 1);
  auto cfg = config_for(ds);
  cfg.max_outer = 0;
  CHECK_THROWS_AS(wmcar_ice(ds, cfg), InvalidInput);
  cfg = config_for(ds, -0.1);
  CHECK_THROWS_AS(wmcar_ice(ds, cfg), InvalidInput);
}
