#include "genriesz/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace genriesz {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Xoshiro256::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Xoshiro256::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("Xoshiro256::below: bound must be positive");
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % bound;
}

double Xoshiro256::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------

Dataset::Dataset(Matrix X, Vector Y, std::optional<Index> treat_col)
    : X_(std::move(X)), Y_(std::move(Y)), treat_col_(treat_col) {
  if (X_.rows() < 2) throw InvalidArgument("Dataset: need at least 2 rows");
  if (X_.cols() < 1) throw InvalidArgument("Dataset: need at least 1 column");
  if (Y_.size() != X_.rows()) {
    std::ostringstream os;
    os << "Dataset: Y has " << Y_.size() << " entries but X has " << X_.rows() << " rows";
    throw InvalidArgument(os.str());
  }
  for (Index i = 0; i < X_.rows(); ++i) {
    for (Index j = 0; j < X_.cols(); ++j) {
      if (!std::isfinite(X_(i, j))) {
        std::ostringstream os;
        os << "Dataset: non-finite X value at row " << i << ", column " << j;
        throw InvalidArgument(os.str());
      }
    }
    if (!std::isfinite(Y_(i))) {
      std::ostringstream os;
      os << "Dataset: non-finite Y value at row " << i;
      throw InvalidArgument(os.str());
    }
  }
  if (treat_col_) {
    if (*treat_col_ < 0 || *treat_col_ >= X_.cols())
      throw InvalidArgument("Dataset: treat_col out of range");
    for (Index i = 0; i < X_.rows(); ++i) {
      const double v = X_(i, *treat_col_);
      if (v != 0.0 && v != 1.0) {
        std::ostringstream os;
        os << "Dataset: treatment value " << v << " at row " << i << " is not 0 or 1";
        throw InvalidArgument(os.str());
      }
    }
  }
}

Vector Dataset::D() const {
  if (!treat_col_) throw InvalidArgument("Dataset: no treatment column set");
  return X_.col(*treat_col_);
}

Matrix Dataset::Z() const {
  if (!treat_col_) return X_;
  return drop_column(X_, *treat_col_);
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.X_ = X_(rows, Eigen::all);
  out.Y_ = Y_(rows);
  out.treat_col_ = treat_col_;
  return out;
}

Matrix drop_column(const Matrix& X, Index col) {
  if (col < 0 || col >= X.cols()) throw InvalidArgument("drop_column: column out of range");
  Matrix out(X.rows(), X.cols() - 1);
  out.leftCols(col) = X.leftCols(col);
  out.rightCols(X.cols() - col - 1) = X.rightCols(X.cols() - col - 1);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Index> FoldPlan::fold(int k) const {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == k) rows.push_back(static_cast<Index>(i));
  return rows;
}

std::vector<Index> FoldPlan::complement(int k) const {
  if (K == 1) return fold(0);
  std::vector<Index> rows;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != k) rows.push_back(static_cast<Index>(i));
  return rows;
}

std::vector<Index> FoldPlan::sizes() const {
  std::vector<Index> out(static_cast<std::size_t>(K), 0);
  for (int a : assignments) ++out[static_cast<std::size_t>(a)];
  return out;
}

FoldPlan make_fold_plan(Index n, int K, std::uint64_t seed) {
  if (K < 1) throw InvalidArgument("make_fold_plan: K must be at least 1");
  if (n < 1 || K > n) throw InvalidArgument("make_fold_plan: K must not exceed n");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Xoshiro256 rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  FoldPlan plan;
  plan.K = K;
  plan.seed = seed;
  plan.assignments.assign(static_cast<std::size_t>(n), 0);
  for (Index t = 0; t < n; ++t)
    plan.assignments[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])] =
        static_cast<int>(t % K);
  return plan;
}

void PenaltySpec::validate() const {
  if (!(p_norm >= 1.0)) throw InvalidArgument("PenaltySpec: p_norm must be >= 1");
  if (!(lam >= 0.0)) throw InvalidArgument("PenaltySpec: lam must be >= 0");
  if (!(smoothing_mu > 0.0)) throw InvalidArgument("PenaltySpec: smoothing_mu must be > 0");
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::ra: return "ra";
    case EstimatorKind::rw: return "rw";
    case EstimatorKind::arw: return "arw";
    case EstimatorKind::tmle: return "tmle";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "ra") return EstimatorKind::ra;
  if (name == "rw") return EstimatorKind::rw;
  if (name == "arw") return EstimatorKind::arw;
  if (name == "tmle") return EstimatorKind::tmle;
  throw InvalidArgument("unknown estimator '" + name + "'");
}

// ---------------------------------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
  if (p == 0.975) return kZ975;
  if (p == 0.025) return -kZ975;
  // Acklam's rational approximation followed by Halley refinement.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
    x = x - u / (1 + x * u / 2);
  }
  return x;
}

EstimateSummary wald_summary(const std::string& name, double theta, const Vector& scores,
                             double ci_level) {
  const Index n = scores.size();
  if (n < 2) throw InvalidArgument("wald_summary: need at least 2 scores");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw InvalidArgument("wald_summary: ci_level must lie in (0, 1)");
  EstimateSummary s;
  s.estimator_name = name;
  s.theta = theta;
  s.scores = scores;
  s.ci_level = ci_level;
  const Vector centered = scores.array() - scores.mean();
  const double var = centered.squaredNorm() / static_cast<double>(n - 1);
  s.se = std::sqrt(var / static_cast<double>(n));
  const double z = normal_quantile(0.5 + ci_level / 2.0);
  s.ci_lower = theta - z * s.se;
  s.ci_upper = theta + z * s.se;
  if (s.se > 0.0) {
    s.p_value = std::erfc(std::abs(theta / s.se) / std::numbers::sqrt2);
  } else {
    s.degenerate = true;
    s.p_value = theta != 0.0 ? 0.0 : 1.0;
  }
  return s;
}

}  // namespace genriesz
