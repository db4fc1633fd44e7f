#pragma once

#include "genriesz/core.hpp"

#include <vector>

namespace genriesz {

/// Nearest-neighbor matching weights in representer form.
struct MatchWeights {
  Vector alpha;                    // (2 D_i - 1) (1 + K_M(i) / M)
  Index M = 1;
  std::vector<Index> match_counts;  // K_M(i)
  /// For each unit, its M matched opposite-arm units (nearest first).
  std::vector<std::vector<Index>> matches;
};

/// Matches every unit to its M nearest opposite-arm units in Euclidean
/// distance on Z (ties broken by lower index).
MatchWeights nn_match_weights(const Matrix& Z, const Vector& D, Index M);

/// Columns scaled to unit sample standard deviation (constant columns kept).
Matrix standardize_columns(const Matrix& Z);

}  // namespace genriesz
