#include "genriesz/optimizer.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace genriesz;

namespace {

double pseudo_huber(double b, double mu) { return std::sqrt(b * b + mu * mu) - mu; }

}  // namespace

TEST_CASE("quadratic bowl") {
  Vector target(2);
  target << 1.0, 2.0;
  auto fg = [&](const Vector& x, Vector& g) {
    g = 2.0 * (x - target);
    return (x - target).squaredNorm();
  };
  const auto r = minimize<double>(fg, Vector::Zero(2));
  CHECK(r.converged);
  CHECK((r.x - target).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(r.grad_inf <= 1e-8);

  const auto again = minimize<double>(fg, target);
  CHECK(again.converged);
  CHECK(again.iterations == 0);
  CHECK(again.x == target);
}

TEST_CASE("smoothed absolute value plus quadratic") {
  const double mu = 1e-6;
  auto fg = [&](const Vector& x, Vector& g) {
    const double b = x(0);
    g.resize(1);
    g(0) = 2 * b + b / std::hypot(b, mu);
    return b * b + pseudo_huber(b, mu);
  };
  const auto r = minimize<double>(fg, Vector::Constant(1, 5.0));
  // Grid oracle.
  double best = INFINITY, arg = 0.0;
  for (int k = -100000; k <= 100000; ++k) {
    const double b = 1e-5 * k;
    const double f = b * b + pseudo_huber(b, mu);
    if (f < best) {
      best = f;
      arg = b;
    }
  }
  CHECK(std::abs(r.x(0) - arg) <= 1e-3);
  CHECK(std::abs(r.x(0)) <= 1e-3);
}

TEST_CASE("random strictly convex quadratics recover the closed form") {
  Xoshiro256 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const Index p = 1 + static_cast<Index>(rng.below(50));
    const Matrix B = testutil::normal_matrix(rng, p, p);
    const Matrix Q = B * B.transpose() / static_cast<double>(p) + 0.5 * Matrix::Identity(p, p);
    const Vector b = testutil::normal_matrix(rng, p, 1);
    const Vector xstar = Q.ldlt().solve(b);
    auto fg = [&](const Vector& x, Vector& g) {
      g = Q * x - b;
      return 0.5 * x.dot(Q * x) - b.dot(x);
    };
    const Vector init = testutil::normal_matrix(rng, p, 1);
    Vector g0;
    const double f_init = fg(init, g0);
    SolveConfig cfg;
    cfg.grad_tol = 1e-10;
    const auto r = minimize<double>(fg, init, cfg);
    REQUIRE(r.converged);
    REQUIRE((r.x - xstar).cwiseAbs().maxCoeff() <= 1e-6);
    REQUIRE(r.value <= f_init);
  }
}

TEST_CASE("objective never increases across accepted steps") {
  Xoshiro256 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Index p = 2 + static_cast<Index>(rng.below(8));
    const Matrix A = testutil::normal_matrix(rng, 40, p);
    const Vector y = testutil::normal_matrix(rng, 40, 1);
    std::vector<double> values;
    auto fg = [&](const Vector& x, Vector& g) {
      // Logistic-type convex objective.
      const Vector eta = A * x;
      double f = 0.0;
      Vector w(eta.size());
      for (Index i = 0; i < eta.size(); ++i) {
        f += std::log1p(std::exp(eta(i))) - y(i) * eta(i);
        w(i) = 1.0 / (1.0 + std::exp(-eta(i))) - y(i);
      }
      g = A.transpose() * w / 40.0 + 0.01 * x;
      f = f / 40.0 + 0.005 * x.squaredNorm();
      values.push_back(f);
      return f;
    };
    const auto r = minimize<double>(fg, Vector::Zero(p));
    REQUIRE(r.converged);
    REQUIRE(r.value <= values.front());
  }
}

TEST_CASE("barrier objectives are handled by step halving") {
  // f(x) = x - log x on x > 0, infinite elsewhere.
  auto fg = [](const Vector& x, Vector& g) -> double {
    g.resize(1);
    if (!(x(0) > 0.0)) {
      g(0) = NAN;
      return INFINITY;
    }
    g(0) = 1.0 - 1.0 / x(0);
    return x(0) - std::log(x(0));
  };
  const auto r = minimize<double>(fg, Vector::Constant(1, 30.0));
  CHECK(r.converged);
  CHECK(std::abs(r.x(0) - 1.0) <= 1e-7);

  CHECK_THROWS_AS(minimize<double>(fg, Vector::Constant(1, -1.0)), InvalidArgument);
  CHECK_THROWS_AS(minimize<double>(fg, Vector::Constant(1, NAN)), InvalidArgument);
}

TEST_CASE("failure diagnostics") {
  // Finite only at the initial point.
  auto spike = [](const Vector& x, Vector& g) -> double {
    g = Vector::Ones(1);
    return x(0) == 0.0 ? 0.0 : NAN;
  };
  const auto r = minimize<double>(spike, Vector::Zero(1));
  CHECK_FALSE(r.converged);
  CHECK(r.x(0) == 0.0);
  CHECK_FALSE(r.message.empty());

  auto rosen = [](const Vector& x, Vector& g) {
    const double a = 1 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g << -2 * a - 400 * x(0) * b, 200 * b;
    return a * a + 100 * b * b;
  };
  SolveConfig cfg;
  cfg.max_iter = 3;
  const auto short_run = minimize<double>(rosen, Vector::Zero(2), cfg);
  CHECK_FALSE(short_run.converged);
  CHECK(short_run.iterations == 3);
  const auto full = minimize<double>(rosen, Vector::Zero(2));
  CHECK(full.converged);
  CHECK((full.x - Vector::Ones(2)).cwiseAbs().maxCoeff() <= 1e-6);

  SolveConfig bad;
  bad.memory = 0;
  CHECK_THROWS_AS(minimize<double>(rosen, Vector::Zero(2), bad), InvalidArgument);
  bad = SolveConfig{};
  bad.c2 = 1e-5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("scalar template and separate callables") {
  using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  auto fg = [](const LVec& x, LVec& g) {
    g = 2 * (x.array() - 3.0L).matrix();
    return (x.array() - 3.0L).square().sum();
  };
  const auto r = minimize<long double>(fg, LVec::Zero(3));
  CHECK(r.converged);
  CHECK(std::abs(static_cast<double>(r.x(2)) - 3.0) <= 1e-9);

  std::function<double(const Vector&)> f = [](const Vector& x) { return (x.array() + 1).square().sum(); };
  std::function<Vector(const Vector&)> gr = [](const Vector& x) { return (2 * (x.array() + 1)).matrix().eval(); };
  const auto s = minimize<double>(f, gr, Vector::Zero(4));
  CHECK(s.converged);
  CHECK((s.x + Vector::Ones(4)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("penalty examples") {
  Vector b(2);
  b << 3.0, -4.0;
  auto [v2, g2] = penalty_value_grad(PenaltySpec{2.0, 1.0, 1e-6}, b);
  CHECK(v2 == 12.5);
  CHECK(g2 == b);

  auto [v1, g1] = penalty_value_grad(PenaltySpec{1.0, 1.0, 1e-9}, Vector::Constant(1, 2.0));
  CHECK(v1 == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(g1(0) == doctest::Approx(1.0).epsilon(1e-9));

  auto [v15, g15] = penalty_value_grad(PenaltySpec{1.5, 1.0, 1e-6}, Vector::Constant(1, 4.0));
  CHECK(v15 == doctest::Approx(8.0 / 1.5).epsilon(1e-14));
  CHECK(g15(0) == doctest::Approx(2.0).epsilon(1e-14));

  CHECK(penalty_value_grad(PenaltySpec{3.0, 1.0, 1e-6}, Vector::Zero(3)).first == 0.0);
  CHECK_THROWS_AS(penalty_value_grad(PenaltySpec{0.5, 1.0, 1e-6}, b), InvalidArgument);
}

TEST_CASE("penalty gradients match finite differences") {
  Xoshiro256 rng(9);
  for (double q : {1.0, 1.5, 2.0, 3.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      Vector b = testutil::normal_matrix(rng, 5, 1);
      for (Index j = 0; j < b.size(); ++j)
        if (std::abs(b(j)) < 0.05) b(j) += 0.1;
      const PenaltySpec pen{q, 1.0, q == 1.0 ? 0.3 : 1e-6};
      const Vector fd = testutil::fd_gradient(
          [&](const Vector& x) { return penalty_value_grad(pen, x).first; }, b, 1e-6);
      REQUIRE((penalty_value_grad(pen, b).second - fd).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
  // The smoothed l1 penalty is differentiable at 0 as well.
  const PenaltySpec l1{1.0, 1.0, 1e-2};
  const Vector z = Vector::Zero(3);
  const Vector fd = testutil::fd_gradient([&](const Vector& x) { return penalty_value_grad(l1, x).first; }, z, 1e-6);
  CHECK((penalty_value_grad(l1, z).second - fd).cwiseAbs().maxCoeff() <= 1e-6);
}
