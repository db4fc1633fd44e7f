#pragma once

#include "genriesz/bases.hpp"
#include "genriesz/core.hpp"

#include <functional>
#include <optional>
#include <string>

namespace genriesz {

/// A linear functional gamma -> m(W, gamma), given as an evaluation oracle.
///
/// `apply(f, data)` returns the n x q matrix of m(W_i, f_j) for every column
/// f_j of a vector-valued function f. Applying it to a basis gives the moment
/// matrix A with A_ij = m(W_i, phi_j).
class FunctionalSpec {
 public:
  using ApplyFn = std::function<Matrix(const FeatureMap&, const Dataset&)>;

  FunctionalSpec(std::string name, ApplyFn apply, bool requires_derivative = false,
                 nlohmann::json params = nlohmann::json::object());

  const std::string& name() const { return name_; }
  bool requires_derivative() const { return requires_derivative_; }
  const nlohmann::json& params() const { return params_; }

  Matrix apply(const FeatureMap& f, const Dataset& data) const;
  /// m(W_i, f) for a scalar-valued f (first column of the result).
  Vector apply_scalar(const FeatureMap& f, const Dataset& data) const;

 private:
  std::string name_;
  ApplyFn apply_;
  bool requires_derivative_;
  nlohmann::json params_;
};

/// A_ij = m(W_i, phi_j).
Matrix functional_matrix(const FunctionalSpec& m, const Basis& basis, const Dataset& data);
Matrix functional_matrix(const FunctionalSpec& m, const BasisPtr& basis, const Dataset& data);

/// m(W, gamma) = gamma(X).
FunctionalSpec identity_functional();

/// m(W, gamma) = gamma(1, Z) - gamma(0, Z).
FunctionalSpec ate_functional(std::optional<Index> treat_col);

/// m(W, gamma) = (D / pi1) (gamma(1, Z) - gamma(0, Z)), pi1 the treated share of `full`.
FunctionalSpec att_functional(const Dataset& full, std::optional<Index> treat_col);
/// Same with a given pi1 > 0.
FunctionalSpec att_functional(std::optional<Index> treat_col, double pi1);

/// m(W, gamma) = d gamma / d x_k (X).
FunctionalSpec ame_functional(Index coordinate);

/// Y1 - Y0.
Vector did_transform(const Vector& Y0, const Vector& Y1);

/// Replaces column `col` of X with `value`.
Matrix with_column(const Matrix& X, Index col, double value);

}  // namespace genriesz
