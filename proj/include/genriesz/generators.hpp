#pragma once

#include "genriesz/core.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace genriesz {

enum class GeneratorKind { squared, ukl, bkl, bp, pu, custom };

std::string to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(const std::string& name);

/// Open interval (lo, hi); either end may be infinite.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x > lo && x < hi; }
};

/// Maps a data row to its branch label, +1 or -1.
using BranchFn = std::function<int(const RowVector&)>;

/// Branch rule for treatment workflows: +1 on treated rows, -1 on controls.
BranchFn treatment_branch(Index treat_col);

/// A Bregman generator g together with its link (the derivative of g), the
/// inverse link, and the convex conjugate g*.
///
/// The analytic pieces are defined on the positive branch in terms of
/// a = |alpha|. On a row with branch label s the representer is
/// alpha = s * a, so
///
///   g(alpha) = g+(s alpha),          link(alpha) = s link+(s alpha),
///   inv_link(v) = s inv_link+(s v),  g*(v) = g*+(s v).
///
/// Generators without a sign extension (pu) always use s = +1.
class GeneratorSpec {
 public:
  using ScalarFn = std::function<double(double)>;

  struct Parts {
    ScalarFn g;
    ScalarFn link;
    ScalarFn inv_link;
    ScalarFn inv_link_derivative;
    ScalarFn conjugate;
    Interval alpha_domain;  // positive branch
    Interval link_range;    // positive branch
  };

  GeneratorSpec(GeneratorKind kind, double C, double omega, Parts parts, BranchFn branch_fn,
                bool sign_extension);

  GeneratorKind kind() const { return kind_; }
  double C() const { return C_; }
  double omega() const { return omega_; }
  bool sign_extension() const { return sign_extension_; }
  bool has_branch_fn() const { return static_cast<bool>(branch_fn_); }
  const Interval& alpha_domain() const { return parts_.alpha_domain; }
  const Interval& link_range() const { return parts_.link_range; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Copy with a different branch rule.
  GeneratorSpec with_branch(BranchFn branch_fn) const;

  /// Branch label of a row; constant +1 without a branch rule or sign extension.
  int branch(const RowVector& x) const;
  std::vector<int> branches(const Matrix& X) const;

  // Branch-aware, domain-checked evaluation. Throw DomainError.
  double g(double alpha, int s = 1) const;
  double link(double alpha, int s = 1) const;
  double inv_link(double v, int s = 1) const;
  double inv_link_derivative(double v, int s = 1) const;
  double conjugate(double v, int s = 1) const;

  bool alpha_in_domain(double alpha, int s = 1) const;
  bool v_in_range(double v, int s = 1) const;

  /// g*(s v), or +infinity when s v is outside the link range.
  double conjugate_or_inf(double v, int s) const;

  /// Closest admissible dual coordinate on branch s, `margin` inside the range.
  double clamp_v(double v, int s, double margin) const;

  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  int effective(int s) const { return sign_extension_ ? s : 1; }
  [[noreturn]] void domain_fail(const char* what, double value, int s, const Interval& iv) const;

  GeneratorKind kind_;
  double C_;
  double omega_;
  Parts parts_;
  BranchFn branch_fn_;
  bool sign_extension_;
  std::vector<std::string> warnings_;
};

/// Built-in generator of the given family. `omega` is used by bp only.
GeneratorSpec make_builtin(GeneratorKind kind, double C = 0.0, double omega = 1.0,
                           BranchFn branch_fn = {});

/// Generator defined only through g; the link is a central difference and the
/// inverse link a bracketed bisection on `domain` (positive branch).
GeneratorSpec numeric_generator(std::function<double(double)> g_fn, Interval domain,
                                BranchFn branch_fn = {});

/// g(a0) - g(a) - link(a) (a0 - a) on branch s.
double bregman_divergence(const GeneratorSpec& gen, double a0, double a, int s = 1);

}  // namespace genriesz
