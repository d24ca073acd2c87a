#pragma once

// Data sets shared by the unit and acceptance tests.

#include "mcar/group.hpp"
#include "mcar/label_model.hpp"

#include <random>

namespace scenario {

using namespace mcar;

// Two instances in one group both carry candidates {A, null}. The first looks
// like the A exemplars, the second like the B exemplars, so an unconstrained
// solve tends to call both A while the uniqueness constraint should push the
// second onto null. Classes: A = 0, B = 1, null = 2.
struct Contested {
  AmbiguousDataset data;
  group::GroupStructure groups;
  Index first = 0;   // A-like
  Index second = 0;  // B-like
};

inline Contested contested_identity(std::uint64_t seed) {
  constexpr Index m = 20;
  constexpr Index per_class = 8;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.02);

  Vector a(m), b(m), background(m);
  for (Index r = 0; r < m; ++r) {
    a[r] = u(rng);
    b[r] = u(rng);
    background[r] = u(rng);
  }
  const Index n = 2 * per_class + 3;
  Contested out;
  auto& ds = out.data;
  ds.num_classes = 3;
  ds.features.resize(m, n);
  for (Index k = 0; k < per_class; ++k) {
    for (Index r = 0; r < m; ++r) ds.features(r, k) = a[r] + noise(rng);
    ds.candidates.push_back({0});
  }
  for (Index k = 0; k < per_class; ++k) {
    for (Index r = 0; r < m; ++r) ds.features(r, per_class + k) = b[r] + noise(rng);
    ds.candidates.push_back({1});
  }
  out.first = 2 * per_class;
  out.second = out.first + 1;
  for (Index r = 0; r < m; ++r) ds.features(r, out.first) = a[r] + noise(rng);
  for (Index r = 0; r < m; ++r) ds.features(r, out.second) = b[r] + noise(rng);
  ds.candidates.push_back({0, 2});
  ds.candidates.push_back({0, 2});
  // One explicit null instance with unrelated features.
  for (Index r = 0; r < m; ++r) ds.features(r, n - 1) = u(rng);
  ds.candidates.push_back({2});
  out.groups = group::GroupStructure({{out.first, out.second}}, n);
  return out;
}

}  // namespace scenario
