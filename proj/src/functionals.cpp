#include "genriesz/functionals.hpp"

#include <sstream>

namespace genriesz {

FunctionalSpec::FunctionalSpec(std::string name, ApplyFn apply, bool requires_derivative,
                               nlohmann::json params)
    : name_(std::move(name)),
      apply_(std::move(apply)),
      requires_derivative_(requires_derivative),
      params_(std::move(params)) {
  if (!apply_) throw InvalidArgument("functional '" + name_ + "': apply is empty");
}

Matrix FunctionalSpec::apply(const FeatureMap& f, const Dataset& data) const {
  if (requires_derivative_ && !f.partial)
    throw InvalidArgument("functional '" + name_ + "' requires a basis with derivatives");
  Matrix A = apply_(f, data);
  if (A.rows() != data.n())
    throw InvalidArgument("functional '" + name_ + "' returned the wrong number of rows");
  return A;
}

Vector FunctionalSpec::apply_scalar(const FeatureMap& f, const Dataset& data) const {
  return apply(f, data).col(0);
}

Matrix functional_matrix(const FunctionalSpec& m, const Basis& basis, const Dataset& data) {
  if (m.requires_derivative() && !basis.has_derivative())
    throw InvalidArgument("functional '" + m.name() + "' requires a basis with derivatives");
  FeatureMap fm;
  fm.value = [&basis](const Matrix& X) { return basis.evaluate(X); };
  if (basis.has_derivative())
    fm.partial = [&basis](const Matrix& X, Index k) { return basis.derivative(X, k); };
  return m.apply(fm, data);
}

Matrix functional_matrix(const FunctionalSpec& m, const BasisPtr& basis, const Dataset& data) {
  if (!basis) throw InvalidArgument("functional_matrix: basis is null");
  return functional_matrix(m, *basis, data);
}

Matrix with_column(const Matrix& X, Index col, double value) {
  Matrix out = X;
  out.col(col).setConstant(value);
  return out;
}

namespace {

Index require_treat_col(std::optional<Index> treat_col, const char* who) {
  if (!treat_col || *treat_col < 0)
    throw InvalidArgument(std::string(who) + ": treat_col must be set");
  return *treat_col;
}

Matrix contrast(const FeatureMap& f, const Matrix& X, Index col) {
  if (col >= X.cols()) throw InvalidArgument("treatment column out of range");
  return f.value(with_column(X, col, 1.0)) - f.value(with_column(X, col, 0.0));
}

}  // namespace

FunctionalSpec identity_functional() {
  return FunctionalSpec("identity",
                        [](const FeatureMap& f, const Dataset& data) { return f.value(data.X()); });
}

FunctionalSpec ate_functional(std::optional<Index> treat_col) {
  const Index col = require_treat_col(treat_col, "ate_functional");
  return FunctionalSpec(
      "ate",
      [col](const FeatureMap& f, const Dataset& data) { return contrast(f, data.X(), col); },
      false, {{"treat_col", col}});
}

FunctionalSpec att_functional(std::optional<Index> treat_col, double pi1) {
  const Index col = require_treat_col(treat_col, "att_functional");
  if (!(pi1 > 0.0)) throw InvalidArgument("att_functional: no treated units (pi1 = 0)");
  return FunctionalSpec(
      "att",
      [col, pi1](const FeatureMap& f, const Dataset& data) {
        const Vector w = data.X().col(col) / pi1;
        return Matrix(w.asDiagonal() * contrast(f, data.X(), col));
      },
      false, {{"treat_col", col}, {"pi1", pi1}});
}

FunctionalSpec att_functional(const Dataset& full, std::optional<Index> treat_col) {
  const Index col = require_treat_col(treat_col, "att_functional");
  if (col >= full.d()) throw InvalidArgument("att_functional: treat_col out of range");
  return att_functional(treat_col, full.X().col(col).mean());
}

FunctionalSpec ame_functional(Index coordinate) {
  if (coordinate < 0) throw InvalidArgument("ame_functional: coordinate out of range");
  return FunctionalSpec(
      "ame",
      [coordinate](const FeatureMap& f, const Dataset& data) {
        if (coordinate >= data.d()) {
          std::ostringstream os;
          os << "ame_functional: coordinate " << coordinate << " out of range for " << data.d()
             << " columns";
          throw InvalidArgument(os.str());
        }
        return f.partial(data.X(), coordinate);
      },
      true, {{"coordinate", coordinate}});
}

Vector did_transform(const Vector& Y0, const Vector& Y1) {
  if (Y0.size() != Y1.size()) throw InvalidArgument("did_transform: Y0 and Y1 lengths differ");
  return Y1 - Y0;
}

}  // namespace genriesz
