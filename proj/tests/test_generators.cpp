#include "genriesz/generators.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace genriesz;

namespace {

struct RefGen {
  std::string label;
  GeneratorSpec gen;
  std::function<double(double)> g, zeta, zinv;
  double a_lo, a_hi;  // alpha grid on the + branch
};

std::vector<RefGen> reference_generators() {
  std::vector<RefGen> out;
  {
    const double C = 1.0;
    out.push_back({"squared", make_builtin(GeneratorKind::squared, C),
                   [=](double a) { return (a - C) * (a - C); },
                   [=](double a) { return 2.0 * (a - C); }, [=](double v) { return C + v / 2.0; },
                   -5.0, 5.0});
  }
  {
    const double C = 1.0;
    out.push_back({"ukl", make_builtin(GeneratorKind::ukl, C),
                   [=](double a) { return (a - C) * std::log(a - C) - a; },
                   [=](double a) { return std::log(a - C); },
                   [=](double v) { return std::exp(v) + C; }, C + 1e-3, 21.0});
  }
  {
    const double C = 0.5;
    out.push_back({"bkl", make_builtin(GeneratorKind::bkl, C),
                   [=](double a) { return (a - C) * std::log(a - C) - (a + C) * std::log(a + C); },
                   [=](double a) { return std::log((a - C) / (a + C)); },
                   [=](double v) { return C * (1.0 + std::exp(v)) / (1.0 - std::exp(v)); },
                   C + 1e-2, 20.0});
  }
  for (double w : {1.0, 2.0, 0.5}) {
    const double C = 0.5;
    out.push_back({"bp(omega=" + std::to_string(w) + ")", make_builtin(GeneratorKind::bp, C, w),
                   [=](double a) {
                     return (std::pow(a - C, 1.0 + w) - (a - C)) / w - (a - C);
                   },
                   [=](double a) { return (1.0 + w) / w * (std::pow(a - C, w) - 1.0); },
                   [=](double v) { return C + std::pow(1.0 + w * v / (1.0 + w), 1.0 / w); },
                   C + 1e-2, 10.0});
  }
  {
    const double C = 2.0;
    out.push_back({"pu", make_builtin(GeneratorKind::pu, C),
                   [=](double a) { return C * (a * std::log(a) + (1 - a) * std::log(1 - a)); },
                   [=](double a) { return C * (std::log(a) - std::log(1 - a)); },
                   [=](double v) { return 1.0 / (1.0 + std::exp(-v / C)); }, 0.01, 0.99});
  }
  return out;
}

double grid(double lo, double hi, int k, int n = 100) { return lo + (hi - lo) * k / (n - 1.0); }

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("builtin generators match the analytic forms") {
  for (const auto& r : reference_generators()) {
    INFO(r.label);
    for (int k = 0; k < 100; ++k) {
      const double a = grid(r.a_lo, r.a_hi, k);
      REQUIRE(close(r.gen.g(a), r.g(a), 1e-10));
      REQUIRE(close(r.gen.link(a), r.zeta(a), 1e-10));
      const double v = r.zeta(a);
      REQUIRE(close(r.gen.inv_link(v), r.zinv(v), 1e-10));
      const double as = r.zinv(v);
      REQUIRE(close(r.gen.conjugate(v), as * v - r.g(as), 1e-9));
    }
  }
}

TEST_CASE("round trip, Fenchel-Young and conjugate derivative") {
  for (const auto& r : reference_generators()) {
    INFO(r.label);
    for (int k = 0; k < 100; ++k) {
      const double a = grid(r.a_lo, r.a_hi, k);
      const double v = r.gen.link(a);
      REQUIRE(std::abs(r.gen.inv_link(v) - a) <= 1e-8 * std::max(1.0, std::abs(a)));
      const double star = r.gen.inv_link(v);
      REQUIRE(std::abs(r.gen.conjugate(v) - (star * v - r.gen.g(star))) <= 1e-8);
      for (int j = 0; j < 100; j += 7) {
        const double b = grid(r.a_lo, r.a_hi, j);
        REQUIRE(r.gen.conjugate(v) >= b * v - r.gen.g(b) - 1e-10);
      }
      const double h = 1e-5;
      if (r.gen.v_in_range(v + h) && r.gen.v_in_range(v - h)) {
        const double d = (r.gen.conjugate(v + h) - r.gen.conjugate(v - h)) / (2 * h);
        REQUIRE(std::abs(d - r.gen.inv_link(v)) <= 1e-5 * std::max(1.0, std::abs(star)));
      }
      const double dd = r.gen.inv_link_derivative(v);
      const double hh = 1e-7 * std::max(1.0, std::abs(v));
      if (r.gen.v_in_range(v + hh) && r.gen.v_in_range(v - hh)) {
        const double fd = (r.gen.inv_link(v + hh) - r.gen.inv_link(v - hh)) / (2 * hh);
        REQUIRE(std::abs(dd - fd) <= 1e-5 * std::max(1.0, std::abs(dd)));
      }
    }
  }
}

TEST_CASE("strict convexity on the branch domain") {
  for (const auto& r : reference_generators()) {
    INFO(r.label);
    for (int k = 1; k < 99; ++k) {
      const double a = grid(r.a_lo, r.a_hi, k), h = 1e-3 * (r.a_hi - r.a_lo);
      REQUIRE(r.gen.g(a + h) - 2 * r.gen.g(a) + r.gen.g(a - h) > 0.0);
    }
  }
}

TEST_CASE("negative branch mirrors the positive branch") {
  for (const auto& r : reference_generators()) {
    INFO(r.label);
    const bool ext = r.gen.sign_extension();
    for (int k = 0; k < 100; k += 3) {
      const double a = grid(r.a_lo, r.a_hi, k);
      const double v = r.gen.link(a);
      if (ext) {
        REQUIRE(r.gen.g(-a, -1) == r.gen.g(a, 1));
        REQUIRE(r.gen.link(-a, -1) == -r.gen.link(a, 1));
        REQUIRE(r.gen.inv_link(-v, -1) == -r.gen.inv_link(v, 1));
        REQUIRE(r.gen.conjugate(-v, -1) == r.gen.conjugate(v, 1));
        REQUIRE(r.gen.inv_link_derivative(-v, -1) == r.gen.inv_link_derivative(v, 1));
      } else {
        REQUIRE(r.gen.g(a, -1) == r.gen.g(a, 1));
        REQUIRE(r.gen.inv_link(v, -1) == r.gen.inv_link(v, 1));
      }
    }
  }
}

TEST_CASE("generator examples") {
  const auto sq1 = make_builtin(GeneratorKind::squared, 1.0);
  CHECK(sq1.g(1.0) == 0.0);
  CHECK(sq1.link(1.0) == 0.0);

  const auto ukl = make_builtin(GeneratorKind::ukl, 1.0);
  CHECK(ukl.inv_link(0.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ukl.link(2.0) == 0.0);

  // Grid maximization of alpha v - alpha^2 over [-10, 10] at v = 2.
  const auto sq0 = make_builtin(GeneratorKind::squared, 0.0);
  double best = -INFINITY, arg = 0.0;
  for (int k = 0; k <= 200000; ++k) {
    const double a = -10.0 + 20.0 * k / 200000.0;
    if (2.0 * a - a * a > best) {
      best = 2.0 * a - a * a;
      arg = a;
    }
  }
  CHECK(sq0.conjugate(2.0) == doctest::Approx(best).epsilon(1e-9));
  CHECK(sq0.conjugate(2.0) == 1.0);
  CHECK(sq0.inv_link(2.0) == doctest::Approx(arg).epsilon(1e-6));
}

TEST_CASE("bregman divergence") {
  const auto sq0 = make_builtin(GeneratorKind::squared, 0.0);
  CHECK(bregman_divergence(sq0, 3.0, 1.0) == 4.0);
  const auto ukl0 = make_builtin(GeneratorKind::ukl, 0.0);
  // High-precision value of 2 log 2 - 1.
  CHECK(bregman_divergence(ukl0, 2.0, 1.0) == doctest::Approx(0.38629436111989061883).epsilon(1e-14));
  for (const auto& r : reference_generators()) {
    INFO(r.label);
    for (int k = 0; k < 100; k += 5) {
      const double a = grid(r.a_lo, r.a_hi, k);
      REQUIRE(bregman_divergence(r.gen, a, a) == 0.0);
      for (int j = 0; j < 100; j += 9) {
        const double b = grid(r.a_lo, r.a_hi, j);
        REQUIRE(bregman_divergence(r.gen, a, b) >= -1e-12);
        if (std::abs(a - b) > 1e-3) REQUIRE(bregman_divergence(r.gen, a, b) > 0.0);
      }
    }
  }
  CHECK_THROWS_AS(bregman_divergence(ukl0, -1.0, 1.0), DomainError);
}

TEST_CASE("parameter and domain errors") {
  CHECK_THROWS_AS(make_builtin(GeneratorKind::ukl, -1.0), InvalidArgument);
  CHECK_THROWS_AS(make_builtin(GeneratorKind::bkl, 0.0), InvalidArgument);
  CHECK_THROWS_AS(make_builtin(GeneratorKind::bp, 1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(make_builtin(GeneratorKind::bp, 1.0, -2.0), InvalidArgument);
  CHECK_THROWS_AS(make_builtin(GeneratorKind::pu, 0.0), InvalidArgument);
  CHECK_THROWS_AS(make_builtin(GeneratorKind::custom), InvalidArgument);
  CHECK_NOTHROW(make_builtin(GeneratorKind::squared, -3.0));

  const auto bkl = make_builtin(GeneratorKind::bkl, 1.0);
  CHECK_THROWS_AS(bkl.inv_link(0.0), DomainError);
  CHECK_THROWS_AS(bkl.inv_link(0.5, 1), DomainError);
  CHECK_NOTHROW(bkl.inv_link(0.5, -1));
  try {
    bkl.inv_link(0.5, 1);
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("branch") != std::string::npos);
    CHECK(msg.find('0') != std::string::npos);
  }
  CHECK_FALSE(bkl.v_in_range(0.1));
  CHECK(std::isinf(bkl.conjugate_or_inf(0.1, 1)));
  CHECK(bkl.clamp_v(0.3, 1, 1e-8) == -1e-8);

  const auto ukl = make_builtin(GeneratorKind::ukl, 1.0);
  CHECK_THROWS_AS(ukl.g(0.5), DomainError);
  CHECK_THROWS_AS(ukl.g(1.5, -1), DomainError);
  CHECK(ukl.g(-1.5, -1) == ukl.g(1.5, 1));

  const auto bp = make_builtin(GeneratorKind::bp, 0.0, 2.0);
  CHECK_THROWS_AS(bp.inv_link(-1.6), DomainError);  // range is v > -(1 + omega) / omega
  CHECK_NOTHROW(bp.inv_link(-1.4));

  const auto pu = make_builtin(GeneratorKind::pu, 1.0);
  CHECK_THROWS_AS(pu.g(1.0), DomainError);
  CHECK_FALSE(pu.sign_extension());
}

TEST_CASE("branch rules") {
  const auto ukl = make_builtin(GeneratorKind::ukl, 1.0, 1.0, treatment_branch(0));
  RowVector treated(2), control(2);
  treated << 1.0, 0.3;
  control << 0.0, 0.3;
  CHECK(ukl.branch(treated) == 1);
  CHECK(ukl.branch(control) == -1);
  Matrix X(2, 2);
  X << treated, control;
  CHECK(ukl.branches(X) == std::vector<int>{1, -1});
  CHECK(make_builtin(GeneratorKind::ukl, 1.0).branch(control) == 1);
  const auto pu = make_builtin(GeneratorKind::pu, 1.0, 1.0, treatment_branch(0));
  CHECK(pu.branch(control) == 1);
  CHECK(ukl.with_branch({}).branch(control) == 1);
  CHECK(parse_generator_kind("sq") == GeneratorKind::squared);
  CHECK(parse_generator_kind(to_string(GeneratorKind::bkl)) == GeneratorKind::bkl);
  CHECK_THROWS_AS(parse_generator_kind("hinge"), InvalidArgument);
}

TEST_CASE("numeric generator examples") {
  const auto quad = numeric_generator([](double a) { return a * a; }, Interval{});
  CHECK(std::abs(quad.inv_link(2.0) - 1.0) <= 1e-8);
  CHECK(quad.warnings().empty());

  const auto sq = make_builtin(GeneratorKind::squared, 0.0);
  const auto num_sq = numeric_generator([&](double a) { return sq.g(a); }, Interval{});
  for (double v : {-1.0, 0.0, 1.0}) CHECK(std::abs(num_sq.conjugate(v) - sq.conjugate(v)) <= 1e-6);

  // Link log(alpha) > 0 on (1, inf): negative link values are not attained.
  const auto bounded = numeric_generator([](double a) { return a * std::log(a) - a; }, Interval{1.0, INFINITY});
  CHECK_THROWS_AS(bounded.inv_link(-1.0), DomainError);
  CHECK(std::abs(bounded.inv_link(1.0) - std::exp(1.0)) <= 1e-8);
  CHECK(std::isinf(bounded.conjugate_or_inf(-1.0, 1)));

  const auto concave = numeric_generator([](double a) { return -a * a; }, Interval{});
  CHECK_FALSE(concave.warnings().empty());
  CHECK_THROWS_AS(concave.inv_link(1.0), InvalidGenerator);

  const auto wavy = numeric_generator([](double a) { return std::cos(a); }, Interval{0.0, 20.0});
  CHECK_FALSE(wavy.warnings().empty());
  CHECK_THROWS_AS(wavy.inv_link(0.9), InvalidGenerator);

  CHECK_THROWS_AS(numeric_generator({}, Interval{}), InvalidArgument);
  CHECK_THROWS_AS(numeric_generator([](double a) { return a; }, Interval{1.0, 1.0}), InvalidArgument);
}

TEST_CASE("numeric generator matches analytic ukl") {
  const auto ukl = make_builtin(GeneratorKind::ukl, 1.0);
  const auto num = numeric_generator([&](double a) { return ukl.g(a); }, Interval{1.0, INFINITY});
  for (int k = 0; k <= 40; ++k) {
    const double v = -4.0 + 0.2 * k;
    REQUIRE(std::abs(num.inv_link(v) - ukl.inv_link(v)) <= 1e-6);
    REQUIRE(std::abs(num.conjugate(v) - ukl.conjugate(v)) <= 1e-6);
    const double a = ukl.inv_link(v);
    REQUIRE(std::abs(num.link(a) - ukl.link(a)) <= 1e-6);
  }
}
