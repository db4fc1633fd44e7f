#pragma once

#include "genriesz/core.hpp"

#include <json.hpp>

#include <functional>
#include <memory>

namespace genriesz {

/// A feature map phi: R^d -> R^p, evaluated row-wise on a design matrix.
class Basis {
 public:
  virtual ~Basis() = default;

  /// Output dimension p for inputs with `input_dim` columns.
  virtual Index dim(Index input_dim) const = 0;
  virtual Matrix evaluate(const Matrix& X) const = 0;

  virtual bool has_derivative() const { return false; }
  /// d phi_j / d x_k at every row (n x p).
  virtual Matrix derivative(const Matrix& X, Index k) const;

  virtual nlohmann::json metadata() const = 0;
};

using BasisPtr = std::shared_ptr<const Basis>;

/// Vector-valued function of the rows of X with an optional partial
/// derivative, the argument type of linear functionals.
struct FeatureMap {
  std::function<Matrix(const Matrix&)> value;
  std::function<Matrix(const Matrix&, Index)> partial;  // may be empty
};

FeatureMap as_feature_map(BasisPtr basis);

/// All monomials of total degree <= degree in graded lexicographic order.
BasisPtr polynomial_basis(int degree, bool include_bias = true);

/// [(1 - d) psi(z), d psi(z)] where d = x(treat_col) and z is x without it.
BasisPtr treatment_interaction_basis(BasisPtr base, Index treat_col);

/// sqrt(2 / dim) cos(W x + b), rows of W ~ N(0, I / bandwidth^2), b ~ U[0, 2 pi).
BasisPtr rff_basis(Index dim, double bandwidth, std::uint64_t seed, Index input_dim);

/// K_mm^{-1/2} k_m(x) for a Gaussian kernel; eigenvalues below 1e-10 are dropped.
BasisPtr nystroem_basis(const Matrix& landmarks, double bandwidth);

/// (1 / M) indicators of the M nearest anchors; ties go to the lower index.
BasisPtr knn_catchment_basis(const Matrix& anchors, Index M);

/// User-supplied feature map.
BasisPtr custom_basis(Index dim, std::function<Matrix(const Matrix&)> evaluate,
                      std::function<Matrix(const Matrix&, Index)> derivative = {},
                      std::string name = "custom");

/// Exponent table of polynomial_basis for d inputs (one row per column).
std::vector<std::vector<int>> graded_lex_exponents(Index d, int degree, bool include_bias);

}  // namespace genriesz
