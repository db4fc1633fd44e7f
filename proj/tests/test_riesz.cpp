#include "genriesz/riesz.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace genriesz;
using testutil::normal_matrix;

namespace {

BasisPtr intercept() {
  return custom_basis(1, [](const Matrix& X) { return Matrix::Ones(X.rows(), 1).eval(); },
                      [](const Matrix& X, Index) { return Matrix::Zero(X.rows(), 1).eval(); }, "intercept");
}

Dataset plain_data(Xoshiro256& rng, Index n, Index d) {
  const Matrix X = normal_matrix(rng, n, d);
  Vector Y = X.rowwise().sum() + normal_matrix(rng, n, 1);
  return Dataset(X, Y);
}

struct Instance {
  Dataset data;
  FunctionalSpec m;
  BasisPtr basis;
};

Instance random_instance(Xoshiro256& rng) {
  const Index n = 20 + static_cast<Index>(rng.below(181));
  if (rng.below(2) == 0) {
    const Dataset d = testutil::ate_data(rng, n, 1 + static_cast<Index>(rng.below(3)));
    const int deg = 1 + static_cast<int>(rng.below(2));
    return {d, ate_functional(0), treatment_interaction_basis(polynomial_basis(deg), 0)};
  }
  const Dataset d = plain_data(rng, n, 2);
  const Index p = 1 + static_cast<Index>(rng.below(20));
  return {d, identity_functional(), rff_basis(p, 1.0, rng.next(), 2)};
}

}  // namespace

TEST_CASE("intercept-only representer for the identity functional") {
  Xoshiro256 rng(1);
  const Dataset d = plain_data(rng, 30, 2);
  const auto model = fit_riesz(d, identity_functional(), intercept(), make_builtin(GeneratorKind::squared),
                               PenaltySpec{2.0, 0.0, 1e-6});
  CHECK(model.converged);
  CHECK(model.beta(0) == doctest::Approx(2.0).epsilon(1e-10));
  const Vector a = predict_alpha(model, d.X());
  CHECK((a.array() - 1.0).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("ridge closed form for the squared generator") {
  Xoshiro256 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = random_instance(rng);
    const double lam = std::vector<double>{0.01, 1.0, 0.1}[static_cast<std::size_t>(trial % 3)];
    const Matrix Phi = inst.basis->evaluate(inst.data.X());
    const Vector abar = functional_matrix(inst.m, inst.basis, inst.data).colwise().mean();
    const double n = static_cast<double>(inst.data.n());
    const Matrix H = Phi.transpose() * Phi / (2.0 * n) + lam * Matrix::Identity(Phi.cols(), Phi.cols());
    const Vector oracle = H.ldlt().solve(abar);
    const auto model = fit_riesz(inst.data, inst.m, inst.basis, make_builtin(GeneratorKind::squared),
                                 PenaltySpec{2.0, lam, 1e-6});
    REQUIRE(model.converged);
    REQUIRE((model.beta - oracle).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("large penalty shrinks to the generator's base point") {
  Xoshiro256 rng(3);
  const Dataset d = testutil::ate_data(rng, 50, 2);
  const auto b = treatment_interaction_basis(polynomial_basis(1), 0);
  const auto gen = make_builtin(GeneratorKind::squared, 0.5);
  const auto model = fit_riesz(d, ate_functional(0), b, gen, PenaltySpec{2.0, 1e8, 1e-6});
  CHECK(model.beta.cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((predict_alpha(model, d.X()).array() - 0.5).abs().maxCoeff() <= 1e-7);
}

TEST_CASE("predict_alpha sign convention") {
  Xoshiro256 rng(4);
  const Dataset d = testutil::ate_data(rng, 20, 1);
  const auto b = treatment_interaction_basis(polynomial_basis(1), 0);
  RieszModel model{Vector::Zero(4), b, make_builtin(GeneratorKind::ukl, 0.0, 1.0, treatment_branch(0)),
                   PenaltySpec{}};
  const Vector a0 = predict_alpha(model, d.X());
  for (Index i = 0; i < d.n(); ++i) REQUIRE(a0(i) == (d.X()(i, 0) == 1.0 ? 1.0 : -1.0));

  model.generator = make_builtin(GeneratorKind::ukl, 0.7, 1.0, treatment_branch(0));
  model.beta << 0.3, -0.2, 0.1, 0.4;
  const Vector a = predict_alpha(model, d.X());
  const Matrix Phi = b->evaluate(d.X());
  for (Index i = 0; i < d.n(); ++i) {
    const double f = Phi.row(i).dot(model.beta);
    const double expect = d.X()(i, 0) == 1.0 ? std::exp(f) + 0.7 : -(std::exp(-f) + 0.7);
    REQUIRE(a(i) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("balancing conditions") {
  Xoshiro256 rng(5);
  for (auto kind : {GeneratorKind::squared, GeneratorKind::ukl, GeneratorKind::bkl}) {
    const Dataset d = testutil::ate_data(rng, 150, 2);
    const auto b = treatment_interaction_basis(polynomial_basis(1), 0);
    const double C = kind == GeneratorKind::squared ? 0.0 : 1.0;
    const auto gen = make_builtin(kind, C, 1.0, treatment_branch(0));
    const auto m = ate_functional(0);
    for (double q : {2.0, 1.5}) {
      const auto model = fit_riesz(d, m, b, gen, PenaltySpec{q, 0.1, 1e-6});
      REQUIRE(model.converged);
      const auto rep = balancing_report(model, d, m);
      REQUIRE(rep.max_abs_residual() <= 1e-6);
      const Vector a = predict_alpha(model, d.X());
      const auto br = gen.branches(d.X());
      for (Index i = 0; i < d.n(); ++i) REQUIRE(gen.alpha_in_domain(a(i), br[static_cast<std::size_t>(i)]));
    }
    const auto l1 = fit_riesz(d, m, b, gen, PenaltySpec{1.0, 0.05, 1e-6});
    REQUIRE(balancing_report(l1, d, m).max_abs_imbalance() <= 0.05 + 1e-4);
    const auto exact = fit_riesz(d, m, b, gen, PenaltySpec{2.0, 0.0, 1e-6});
    REQUIRE(exact.converged);
    REQUIRE(balancing_report(exact, d, m).max_abs_imbalance() <= 1e-6);
  }
}

TEST_CASE("exact balancing with an intercept gives mean alpha one") {
  Xoshiro256 rng(6);
  const Dataset d = plain_data(rng, 80, 2);
  const auto model = fit_riesz(d, identity_functional(), polynomial_basis(2), make_builtin(GeneratorKind::squared),
                               PenaltySpec{2.0, 0.0, 1e-6});
  CHECK(std::abs(predict_alpha(model, d.X()).mean() - 1.0) <= 1e-8);
}

TEST_CASE("dual and primal objectives agree") {
  Xoshiro256 rng(7);
  for (auto kind : {GeneratorKind::squared, GeneratorKind::ukl}) {
    const Dataset d = testutil::ate_data(rng, 60, 2);
    const auto b = treatment_interaction_basis(polynomial_basis(1), 0);
    const auto gen = make_builtin(kind, kind == GeneratorKind::ukl ? 1.0 : 0.0, 1.0, treatment_branch(0));
    const auto model = fit_riesz(d, ate_functional(0), b, gen, PenaltySpec{2.0, 0.01, 1e-6});
    CHECK(primal_objective(model, d, ate_functional(0)) ==
          doctest::Approx(dual_objective(model, d, ate_functional(0))).epsilon(1e-10));
    CHECK(dual_objective(model, d, ate_functional(0)) == doctest::Approx(model.objective).epsilon(1e-12));
  }
}

TEST_CASE("objective gradient matches finite differences") {
  Xoshiro256 rng(8);
  const Dataset d = testutil::ate_data(rng, 40, 2);
  const auto b = treatment_interaction_basis(polynomial_basis(2), 0);
  const Matrix Phi = b->evaluate(d.X());
  const Matrix A = functional_matrix(ate_functional(0), b, d);
  for (auto kind : {GeneratorKind::squared, GeneratorKind::ukl, GeneratorKind::bp}) {
    const auto gen = make_builtin(kind, 0.5, 2.0, treatment_branch(0));
    for (double q : {1.0, 1.5, 2.0}) {
      const RieszObjective obj(Phi, A, gen.branches(d.X()), gen, PenaltySpec{q, 0.2, 0.05});
      const Vector beta = obj.initial_point() + 0.01 * normal_matrix(rng, Phi.cols(), 1);
      REQUIRE(obj.feasible(beta));
      Vector g;
      obj(beta, g);
      const Vector fd = testutil::fd_gradient([&](const Vector& x) { return obj.value(x); }, beta, 1e-6);
      REQUIRE((g - fd).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, g.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("infeasible zero start uses an interior point") {
  Xoshiro256 rng(9);
  const Dataset d = testutil::ate_data(rng, 60, 1);
  const auto b = treatment_interaction_basis(polynomial_basis(1), 0);
  const auto gen = make_builtin(GeneratorKind::bkl, 1.0, 1.0, treatment_branch(0));
  const Matrix Phi = b->evaluate(d.X());
  const RieszObjective obj(Phi, functional_matrix(ate_functional(0), b, d), gen.branches(d.X()), gen, PenaltySpec{});
  CHECK_FALSE(obj.feasible(Vector::Zero(Phi.cols())));
  CHECK(obj.feasible(obj.initial_point()));
  const auto model = fit_riesz(d, ate_functional(0), b, gen, PenaltySpec{2.0, 0.01, 1e-6});
  CHECK(model.converged);

  // No interior point reachable: a constant basis column cannot be negative on
  // treated rows and positive on controls at the same time.
  const RieszObjective stuck(Matrix::Ones(d.n(), 1), Matrix::Zero(d.n(), 1), gen.branches(d.X()), gen, PenaltySpec{});
  CHECK_THROWS_AS(stuck.initial_point(), InvalidArgument);
}

TEST_CASE("evaluation rows outside the link range are clamped") {
  Matrix X(3, 1);
  X << 0.0, 1.0, 5.0;
  const auto b = polynomial_basis(1, false);
  RieszModel model{Vector::Constant(1, -1.0), b, make_builtin(GeneratorKind::bkl, 1.0), PenaltySpec{}};
  Index clamped = 0;
  const Vector a = predict_alpha(model, X, &clamped);
  CHECK(clamped == 1);
  CHECK(std::isfinite(a(0)));
  CHECK(a(0) > 1.0);
  CHECK(a.allFinite());
}

TEST_CASE("representer function derivatives") {
  Xoshiro256 rng(10);
  const Dataset d = plain_data(rng, 30, 2);
  const auto model = fit_riesz(d, ame_functional(0), polynomial_basis(2), make_builtin(GeneratorKind::ukl, -0.0),
                               PenaltySpec{2.0, 0.1, 1e-6});
  const FeatureMap fa = alpha_function(model);
  const Matrix X = normal_matrix(rng, 10, 2) * 0.3;
  CHECK((fa.value(X).col(0) - predict_alpha(model, X)).cwiseAbs().maxCoeff() == 0.0);
  for (Index k = 0; k < 2; ++k) {
    Matrix Xp = X, Xm = X;
    Xp.col(k).array() += 1e-6;
    Xm.col(k).array() -= 1e-6;
    const Vector fd = (fa.value(Xp) - fa.value(Xm)).col(0) / 2e-6;
    CHECK((fa.partial(X, k).col(0) - fd).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("gaussian outcome regression") {
  Xoshiro256 rng(11);
  const Matrix X = normal_matrix(rng, 50, 2);
  const auto b = polynomial_basis(2);
  const Matrix Phi = b->evaluate(X);
  const Vector c0 = normal_matrix(rng, Phi.cols(), 1);
  const Dataset exact(X, Phi * c0);
  const auto fit = fit_outcome(exact, b, PenaltySpec{2.0, 0.0, 1e-6}, OutcomeFamily::gaussian);
  CHECK((fit.coef - c0).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((predict_outcome(fit, X) - Phi * c0).cwiseAbs().maxCoeff() <= 1e-6);

  const Dataset noisy(X, Phi * c0 + normal_matrix(rng, 50, 1));
  for (double lam : {0.01, 0.5}) {
    const Matrix H = Phi.transpose() * Phi / 50.0 + lam * Matrix::Identity(Phi.cols(), Phi.cols());
    const Vector oracle = H.ldlt().solve(Phi.transpose() * noisy.Y() / 50.0);
    const auto r = fit_outcome(noisy, b, PenaltySpec{2.0, lam, 1e-6}, OutcomeFamily::gaussian);
    CHECK((r.coef - oracle).cwiseAbs().maxCoeff() <= 1e-7);
  }
  CHECK(fit_outcome(noisy, b, PenaltySpec{2.0, 1e9, 1e-6}, OutcomeFamily::gaussian).coef.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("bernoulli outcome regression") {
  Xoshiro256 rng(12);
  const Matrix X = normal_matrix(rng, 200, 2);
  Vector Y(200);
  for (Index i = 0; i < 200; ++i) Y(i) = rng.uniform() < testutil::logistic(X(i, 0) - 0.5 * X(i, 1)) ? 1.0 : 0.0;
  const Dataset d(X, Y);
  const auto b = polynomial_basis(1);
  const double lam = 0.01;
  const auto fit = fit_outcome(d, b, PenaltySpec{2.0, lam, 1e-6}, OutcomeFamily::bernoulli);
  CHECK(fit.converged);

  // Newton iterations on the penalized log-loss as the oracle.
  const Matrix Phi = b->evaluate(X);
  Vector c = Vector::Zero(Phi.cols());
  for (int it = 0; it < 50; ++it) {
    Vector p(200), w(200);
    for (Index i = 0; i < 200; ++i) {
      p(i) = testutil::logistic(Phi.row(i).dot(c));
      w(i) = p(i) * (1 - p(i));
    }
    const Vector grad = Phi.transpose() * (p - Y) / 200.0 + lam * c;
    const Matrix H = Phi.transpose() * w.asDiagonal() * Phi / 200.0 + lam * Matrix::Identity(Phi.cols(), Phi.cols());
    c -= H.ldlt().solve(grad);
  }
  CHECK((fit.coef - c).cwiseAbs().maxCoeff() <= 1e-6);
  const Vector pred = predict_outcome(fit, X);
  CHECK(pred.minCoeff() > 0.0);
  CHECK(pred.maxCoeff() < 1.0);

  const FeatureMap g = outcome_function(fit);
  for (Index k = 0; k < 2; ++k) {
    Matrix Xp = X.topRows(5), Xm = X.topRows(5);
    Xp.col(k).array() += 1e-6;
    Xm.col(k).array() -= 1e-6;
    const Vector fd = (g.value(Xp) - g.value(Xm)).col(0) / 2e-6;
    CHECK((g.partial(X.topRows(5), k).col(0) - fd).cwiseAbs().maxCoeff() <= 1e-6);
  }

  const Dataset cont(X, X.col(0));
  CHECK_THROWS_AS(fit_outcome(cont, b, PenaltySpec{}, OutcomeFamily::bernoulli), InvalidArgument);
}

TEST_CASE("model serialization") {
  Xoshiro256 rng(13);
  const Dataset d = testutil::ate_data(rng, 30, 1);
  const auto b = treatment_interaction_basis(polynomial_basis(1), 0);
  const auto model = fit_riesz(d, ate_functional(0), b, make_builtin(GeneratorKind::ukl, 1.0, 1.0, treatment_branch(0)),
                               PenaltySpec{2.0, 0.01, 1e-6});
  const auto j = to_json(model);
  CHECK(j["beta"].size() == 4);
  CHECK(j["generator"]["kind"] == "ukl");
  CHECK(j["generator"]["C"] == 1.0);
  CHECK(j["basis"]["kind"] == "treatment_interaction");
  CHECK(j["penalty"]["lam"] == 0.01);
  const auto rep = to_json(balancing_report(model, d, ate_functional(0)));
  CHECK(rep["imbalance"].size() == 4);
  CHECK(parse_outcome_mode(to_string(OutcomeMode::separate)) == OutcomeMode::separate);
  CHECK(parse_outcome_family("bernoulli") == OutcomeFamily::bernoulli);
  CHECK_THROWS_AS(parse_outcome_mode("joint"), InvalidArgument);
}
