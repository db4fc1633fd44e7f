#include "genriesz/bases.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace genriesz {

Matrix Basis::derivative(const Matrix&, Index) const {
  throw InvalidArgument("basis '" + metadata().value("kind", std::string("?")) +
                        "' does not implement coordinate derivatives");
}

FeatureMap as_feature_map(BasisPtr basis) {
  FeatureMap fm;
  fm.value = [basis](const Matrix& X) { return basis->evaluate(X); };
  if (basis->has_derivative())
    fm.partial = [basis](const Matrix& X, Index k) { return basis->derivative(X, k); };
  return fm;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void check_coordinate(Index k, Index d) {
  if (k < 0 || k >= d) {
    std::ostringstream os;
    os << "coordinate " << k << " out of range for " << d << " input columns";
    throw InvalidArgument(os.str());
  }
}

void append_exponents(Index var, Index d, int remaining, std::vector<int>& current,
                      std::vector<std::vector<int>>& out) {
  if (var == d - 1) {
    current[static_cast<std::size_t>(var)] = remaining;
    out.push_back(current);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current[static_cast<std::size_t>(var)] = e;
    append_exponents(var + 1, d, remaining - e, current, out);
  }
}

// ---------------------------------------------------------------------------

class PolynomialBasis final : public Basis {
 public:
  PolynomialBasis(int degree, bool include_bias) : degree_(degree), bias_(include_bias) {}

  Index dim(Index d) const override {
    return static_cast<Index>(graded_lex_exponents(d, degree_, bias_).size());
  }

  Matrix evaluate(const Matrix& X) const override {
    const auto exps = graded_lex_exponents(X.cols(), degree_, bias_);
    Matrix out(X.rows(), static_cast<Index>(exps.size()));
    for (std::size_t c = 0; c < exps.size(); ++c) {
      Vector col = Vector::Ones(X.rows());
      for (Index k = 0; k < X.cols(); ++k) {
        const int e = exps[c][static_cast<std::size_t>(k)];
        for (int r = 0; r < e; ++r) col.array() *= X.col(k).array();
      }
      out.col(static_cast<Index>(c)) = col;
    }
    return out;
  }

  bool has_derivative() const override { return true; }

  Matrix derivative(const Matrix& X, Index k) const override {
    check_coordinate(k, X.cols());
    const auto exps = graded_lex_exponents(X.cols(), degree_, bias_);
    Matrix out(X.rows(), static_cast<Index>(exps.size()));
    for (std::size_t c = 0; c < exps.size(); ++c) {
      const int ek = exps[c][static_cast<std::size_t>(k)];
      if (ek == 0) {
        out.col(static_cast<Index>(c)).setZero();
        continue;
      }
      Vector col = Vector::Constant(X.rows(), static_cast<double>(ek));
      for (Index j = 0; j < X.cols(); ++j) {
        const int e = exps[c][static_cast<std::size_t>(j)] - (j == k ? 1 : 0);
        for (int r = 0; r < e; ++r) col.array() *= X.col(j).array();
      }
      out.col(static_cast<Index>(c)) = col;
    }
    return out;
  }

  nlohmann::json metadata() const override {
    return {{"kind", "polynomial"}, {"degree", degree_}, {"include_bias", bias_}};
  }

 private:
  int degree_;
  bool bias_;
};

class TreatmentInteractionBasis final : public Basis {
 public:
  TreatmentInteractionBasis(BasisPtr base, Index treat_col)
      : base_(std::move(base)), treat_col_(treat_col) {}

  Index dim(Index d) const override { return 2 * base_->dim(d - 1); }

  Matrix evaluate(const Matrix& X) const override {
    check_coordinate(treat_col_, X.cols());
    const Matrix psi = base_->evaluate(drop_column(X, treat_col_));
    const Vector D = X.col(treat_col_);
    Matrix out(X.rows(), 2 * psi.cols());
    out.leftCols(psi.cols()) = (1.0 - D.array()).matrix().asDiagonal() * psi;
    out.rightCols(psi.cols()) = D.asDiagonal() * psi;
    return out;
  }

  bool has_derivative() const override { return base_->has_derivative(); }

  Matrix derivative(const Matrix& X, Index k) const override {
    check_coordinate(k, X.cols());
    check_coordinate(treat_col_, X.cols());
    const Matrix Z = drop_column(X, treat_col_);
    if (k == treat_col_) {
      const Matrix psi = base_->evaluate(Z);
      Matrix out(X.rows(), 2 * psi.cols());
      out.leftCols(psi.cols()) = -psi;
      out.rightCols(psi.cols()) = psi;
      return out;
    }
    if (!base_->has_derivative()) return Basis::derivative(X, k);
    const Matrix dpsi = base_->derivative(Z, k < treat_col_ ? k : k - 1);
    const Vector D = X.col(treat_col_);
    Matrix out(X.rows(), 2 * dpsi.cols());
    out.leftCols(dpsi.cols()) = (1.0 - D.array()).matrix().asDiagonal() * dpsi;
    out.rightCols(dpsi.cols()) = D.asDiagonal() * dpsi;
    return out;
  }

  nlohmann::json metadata() const override {
    return {{"kind", "treatment_interaction"},
            {"treat_col", treat_col_},
            {"base", base_->metadata()}};
  }

 private:
  BasisPtr base_;
  Index treat_col_;
};

class RandomFourierBasis final : public Basis {
 public:
  RandomFourierBasis(Index dim, double bandwidth, std::uint64_t seed, Index input_dim)
      : bandwidth_(bandwidth), seed_(seed), W_(dim, input_dim), b_(dim) {
    Xoshiro256 rng(seed);
    for (Index j = 0; j < dim; ++j)
      for (Index k = 0; k < input_dim; ++k) W_(j, k) = rng.normal() / bandwidth;
    for (Index j = 0; j < dim; ++j) b_(j) = 2.0 * std::numbers::pi * rng.uniform();
  }

  Index dim(Index) const override { return W_.rows(); }

  Matrix evaluate(const Matrix& X) const override {
    check_input(X);
    const double scale = std::sqrt(2.0 / static_cast<double>(W_.rows()));
    Matrix arg = (X * W_.transpose()).rowwise() + b_.transpose();
    return scale * arg.array().cos().matrix();
  }

  bool has_derivative() const override { return true; }

  Matrix derivative(const Matrix& X, Index k) const override {
    check_input(X);
    check_coordinate(k, X.cols());
    const double scale = std::sqrt(2.0 / static_cast<double>(W_.rows()));
    Matrix arg = (X * W_.transpose()).rowwise() + b_.transpose();
    return (-scale * arg.array().sin()).matrix() * W_.col(k).asDiagonal();
  }

  nlohmann::json metadata() const override {
    return {{"kind", "rff"},
            {"dim", W_.rows()},
            {"bandwidth", bandwidth_},
            {"seed", seed_},
            {"input_dim", W_.cols()}};
  }

 private:
  void check_input(const Matrix& X) const {
    if (X.cols() != W_.cols()) throw InvalidArgument("rff basis: input dimension mismatch");
  }

  double bandwidth_;
  std::uint64_t seed_;
  Matrix W_;
  Vector b_;
};

class NystroemBasis final : public Basis {
 public:
  NystroemBasis(const Matrix& landmarks, double bandwidth)
      : landmarks_(landmarks), bandwidth_(bandwidth) {
    const Matrix K = kernel(landmarks_);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
    if (eig.info() != Eigen::Success) throw NumericalError("nystroem: eigendecomposition failed");
    const Vector& vals = eig.eigenvalues();
    std::vector<Index> keep;
    for (Index j = vals.size() - 1; j >= 0; --j)
      if (vals(j) > kFloor) keep.push_back(j);
    if (keep.empty()) throw InvalidArgument("nystroem: all kernel eigenvalues below 1e-10");
    transform_.resize(static_cast<Index>(keep.size()), landmarks_.rows());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      Vector u = eig.eigenvectors().col(keep[r]);
      Index arg;
      u.cwiseAbs().maxCoeff(&arg);
      if (u(arg) < 0) u = -u;
      transform_.row(static_cast<Index>(r)) = u.transpose() / std::sqrt(vals(keep[r]));
    }
  }

  Index dim(Index) const override { return transform_.rows(); }

  Matrix evaluate(const Matrix& X) const override { return kernel(X) * transform_.transpose(); }

  bool has_derivative() const override { return true; }

  Matrix derivative(const Matrix& X, Index k) const override {
    check_coordinate(k, X.cols());
    const Matrix K = kernel(X);
    Matrix dK(K.rows(), K.cols());
    const double inv_bw2 = 1.0 / (bandwidth_ * bandwidth_);
    for (Index i = 0; i < X.rows(); ++i)
      for (Index l = 0; l < landmarks_.rows(); ++l)
        dK(i, l) = -K(i, l) * (X(i, k) - landmarks_(l, k)) * inv_bw2;
    return dK * transform_.transpose();
  }

  nlohmann::json metadata() const override {
    return {{"kind", "nystroem"},
            {"bandwidth", bandwidth_},
            {"dim", transform_.rows()},
            {"landmarks", matrix_to_json(landmarks_)}};
  }

 private:
  static constexpr double kFloor = 1e-10;

  Matrix kernel(const Matrix& X) const {
    if (X.cols() != landmarks_.cols())
      throw InvalidArgument("nystroem basis: input dimension mismatch");
    Matrix K(X.rows(), landmarks_.rows());
    const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    for (Index i = 0; i < X.rows(); ++i)
      for (Index l = 0; l < landmarks_.rows(); ++l)
        K(i, l) = std::exp(-(X.row(i) - landmarks_.row(l)).squaredNorm() * inv);
    return K;
  }

  Matrix landmarks_;
  double bandwidth_;
  Matrix transform_;
};

class KnnCatchmentBasis final : public Basis {
 public:
  KnnCatchmentBasis(const Matrix& anchors, Index M) : anchors_(anchors), M_(M) {}

  Index dim(Index) const override { return anchors_.rows(); }

  Matrix evaluate(const Matrix& X) const override {
    if (X.cols() != anchors_.cols())
      throw InvalidArgument("knn catchment basis: input dimension mismatch");
    const Index A = anchors_.rows();
    Matrix out = Matrix::Zero(X.rows(), A);
    std::vector<Index> order(static_cast<std::size_t>(A));
    Vector dist(A);
    const double w = 1.0 / static_cast<double>(M_);
    for (Index i = 0; i < X.rows(); ++i) {
      for (Index a = 0; a < A; ++a) dist(a) = (anchors_.row(a) - X.row(i)).squaredNorm();
      std::iota(order.begin(), order.end(), Index{0});
      std::partial_sort(order.begin(), order.begin() + M_, order.end(), [&](Index l, Index r) {
        return dist(l) < dist(r) || (dist(l) == dist(r) && l < r);
      });
      for (Index m = 0; m < M_; ++m) out(i, order[static_cast<std::size_t>(m)]) = w;
    }
    return out;
  }

  nlohmann::json metadata() const override {
    return {{"kind", "knn_catchment"}, {"M", M_}, {"anchors", matrix_to_json(anchors_)}};
  }

 private:
  Matrix anchors_;
  Index M_;
};

class CustomBasis final : public Basis {
 public:
  CustomBasis(Index dim, std::function<Matrix(const Matrix&)> eval,
              std::function<Matrix(const Matrix&, Index)> deriv, std::string name)
      : dim_(dim), eval_(std::move(eval)), deriv_(std::move(deriv)), name_(std::move(name)) {}

  Index dim(Index) const override { return dim_; }

  Matrix evaluate(const Matrix& X) const override {
    Matrix out = eval_(X);
    if (out.rows() != X.rows() || out.cols() != dim_)
      throw InvalidArgument("custom basis '" + name_ + "': evaluator returned wrong shape");
    return out;
  }

  bool has_derivative() const override { return static_cast<bool>(deriv_); }

  Matrix derivative(const Matrix& X, Index k) const override {
    if (!deriv_) return Basis::derivative(X, k);
    return deriv_(X, k);
  }

  nlohmann::json metadata() const override {
    return {{"kind", "custom"}, {"name", name_}, {"dim", dim_}};
  }

 private:
  Index dim_;
  std::function<Matrix(const Matrix&)> eval_;
  std::function<Matrix(const Matrix&, Index)> deriv_;
  std::string name_;
};

}  // namespace

std::vector<std::vector<int>> graded_lex_exponents(Index d, int degree, bool include_bias) {
  if (d < 1) throw InvalidArgument("polynomial basis: need at least one input column");
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(d), 0);
  for (int t = include_bias ? 0 : 1; t <= degree; ++t) append_exponents(0, d, t, current, out);
  return out;
}

BasisPtr polynomial_basis(int degree, bool include_bias) {
  if (degree < 1) throw InvalidArgument("polynomial basis: degree must be >= 1");
  return std::make_shared<PolynomialBasis>(degree, include_bias);
}

BasisPtr treatment_interaction_basis(BasisPtr base, Index treat_col) {
  if (!base) throw InvalidArgument("treatment interaction basis: base is null");
  if (treat_col < 0) throw InvalidArgument("treatment interaction basis: treat_col out of range");
  return std::make_shared<TreatmentInteractionBasis>(std::move(base), treat_col);
}

BasisPtr rff_basis(Index dim, double bandwidth, std::uint64_t seed, Index input_dim) {
  if (dim < 1) throw InvalidArgument("rff basis: dim must be >= 1");
  if (!(bandwidth > 0.0)) throw InvalidArgument("rff basis: bandwidth must be > 0");
  if (input_dim < 1) throw InvalidArgument("rff basis: input_dim must be >= 1");
  return std::make_shared<RandomFourierBasis>(dim, bandwidth, seed, input_dim);
}

BasisPtr nystroem_basis(const Matrix& landmarks, double bandwidth) {
  if (landmarks.rows() < 1) throw InvalidArgument("nystroem basis: need at least one landmark");
  if (!(bandwidth > 0.0)) throw InvalidArgument("nystroem basis: bandwidth must be > 0");
  return std::make_shared<NystroemBasis>(landmarks, bandwidth);
}

BasisPtr knn_catchment_basis(const Matrix& anchors, Index M) {
  if (M < 1 || M > anchors.rows())
    throw InvalidArgument("knn catchment basis: need 1 <= M <= number of anchors");
  return std::make_shared<KnnCatchmentBasis>(anchors, M);
}

BasisPtr custom_basis(Index dim, std::function<Matrix(const Matrix&)> evaluate,
                      std::function<Matrix(const Matrix&, Index)> derivative, std::string name) {
  if (dim < 1 || !evaluate) throw InvalidArgument("custom basis: need dim >= 1 and an evaluator");
  return std::make_shared<CustomBasis>(dim, std::move(evaluate), std::move(derivative),
                                       std::move(name));
}

}  // namespace genriesz
