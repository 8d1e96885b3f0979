#pragma once

#include <random>

#include "spherecl/geometry.hpp"

namespace testutil {

inline spherecl::Matrix random_unit_rows(int m, int d,
                                         unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  spherecl::Matrix raw(m, d);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) {
      raw(i, j) = gauss(rng);
    }
  }
  return spherecl::normalize_rows(raw).points();
}

inline spherecl::EmbeddingBatch random_batch(int m, int d,
                                             unsigned long long seed) {
  return spherecl::EmbeddingBatch(random_unit_rows(m, d, seed));
}

}  // namespace testutil
