#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace genriesz {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Error taxonomy. Everything derives from std::runtime_error or
// std::invalid_argument so callers can catch broadly.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidGenerator : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure that is not a caller error (degenerate representer,
/// root-finding without a sign change, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Portable PRNG: xoshiro256** seeded through splitmix64.

std::uint64_t splitmix64(std::uint64_t& state);

class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 bits of mantissa.
  double uniform();
  /// Uniform integer in [0, bound) by rejection (unbiased).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal by the Box-Muller transform; one draw per call.
  double normal();

 private:
  std::uint64_t s_[4];
};

// ---------------------------------------------------------------------------

/// Observed sample W = (X, Y). The treatment column, when set, lives inside X.
class Dataset {
 public:
  Dataset(Matrix X, Vector Y, std::optional<Index> treat_col = std::nullopt);

  const Matrix& X() const { return X_; }
  const Vector& Y() const { return Y_; }
  std::optional<Index> treat_col() const { return treat_col_; }
  Index n() const { return X_.rows(); }
  Index d() const { return X_.cols(); }

  /// Treatment indicator D; throws if no treatment column is set.
  Vector D() const;
  /// X with the treatment column removed (X itself when unset).
  Matrix Z() const;

  /// Row subset, preserving order of `rows`. Subsets of size 1 are allowed
  /// (validation of n >= 2 applies only to the constructor).
  Dataset subset(const std::vector<Index>& rows) const;

 private:
  Dataset() = default;
  Matrix X_;
  Vector Y_;
  std::optional<Index> treat_col_;
};

/// Drops column `col` from X.
Matrix drop_column(const Matrix& X, Index col);

struct FoldPlan {
  std::vector<int> assignments;
  int K = 1;
  std::uint64_t seed = 0;

  std::vector<Index> fold(int k) const;
  std::vector<Index> complement(int k) const;
  std::vector<Index> sizes() const;
};

FoldPlan make_fold_plan(Index n, int K, std::uint64_t seed);

struct PenaltySpec {
  double p_norm = 2.0;
  double lam = 0.0;
  double smoothing_mu = 1e-6;

  void validate() const;
};

enum class EstimatorKind { ra, rw, arw, tmle };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);

inline constexpr double kZ975 = 1.959963984540054;

struct EstimateSummary {
  std::string estimator_name;
  double theta = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double p_value = 1.0;
  double ci_level = 0.95;
  Vector scores;
  bool degenerate = false;
  // Plug-in SE of an estimator that is not Neyman orthogonal (RA, RW).
  bool non_orthogonal_se = false;
};

EstimateSummary wald_summary(const std::string& name, double theta, const Vector& scores,
                             double ci_level = 0.95);

double normal_cdf(double x);
/// Standard normal quantile.
double normal_quantile(double p);

}  // namespace genriesz
