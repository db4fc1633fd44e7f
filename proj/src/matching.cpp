#include "genriesz/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace genriesz {

MatchWeights nn_match_weights(const Matrix& Z, const Vector& D, Index M) {
  const Index n = Z.rows();
  if (D.size() != n) throw InvalidArgument("nn_match_weights: D length differs from Z rows");
  std::vector<Index> treated, control;
  for (Index i = 0; i < n; ++i) {
    if (D(i) == 1.0)
      treated.push_back(i);
    else if (D(i) == 0.0)
      control.push_back(i);
    else
      throw InvalidArgument("nn_match_weights: D must be binary");
  }
  if (treated.empty() || control.empty())
    throw InvalidArgument("nn_match_weights: both treatment arms must be nonempty");
  if (M < 1 || M > static_cast<Index>(std::min(treated.size(), control.size())))
    throw InvalidArgument("nn_match_weights: M must be between 1 and the smaller arm size");

  MatchWeights out;
  out.M = M;
  out.match_counts.assign(static_cast<std::size_t>(n), 0);
  out.matches.resize(static_cast<std::size_t>(n));

  std::vector<double> dist(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> pool = D(i) == 1.0 ? control : treated;
    for (Index j : pool) dist[static_cast<std::size_t>(j)] = (Z.row(i) - Z.row(j)).squaredNorm();
    std::partial_sort(pool.begin(), pool.begin() + M, pool.end(), [&](Index l, Index r) {
      const double dl = dist[static_cast<std::size_t>(l)], dr = dist[static_cast<std::size_t>(r)];
      return dl < dr || (dl == dr && l < r);
    });
    auto& set = out.matches[static_cast<std::size_t>(i)];
    set.assign(pool.begin(), pool.begin() + M);
    for (Index j : set) ++out.match_counts[static_cast<std::size_t>(j)];
  }

  out.alpha.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double sign = 2.0 * D(i) - 1.0;
    out.alpha(i) = sign * (1.0 + static_cast<double>(out.match_counts[static_cast<std::size_t>(i)]) /
                                     static_cast<double>(M));
  }
  return out;
}

Matrix standardize_columns(const Matrix& Z) {
  Matrix out = Z;
  if (Z.rows() < 2) return out;
  for (Index j = 0; j < Z.cols(); ++j) {
    const double mean = Z.col(j).mean();
    const double sd =
        std::sqrt((Z.col(j).array() - mean).square().sum() / static_cast<double>(Z.rows() - 1));
    if (sd > 0.0) out.col(j) /= sd;
  }
  return out;
}

}  // namespace genriesz
