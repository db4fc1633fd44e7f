#pragma once

#include "genriesz/bases.hpp"
#include "genriesz/core.hpp"
#include "genriesz/functionals.hpp"
#include "genriesz/generators.hpp"
#include "genriesz/optimizer.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace genriesz {

/// Margin kept from the boundary of a generator's link range.
inline constexpr double kDomainMargin = 1e-8;

/// Dual program in beta for the representer:
///
///   F(beta) = (1/n) sum_i [ g*(s_i, phi_i' beta) - A_i beta ] + lam Omega(beta),
///   grad F  = (1/n) Phi' alpha(beta) - abar + lam grad Omega(beta),
///
/// where alpha_i = s_i inv_link+(s_i phi_i' beta). Points outside the
/// generator's link range evaluate to +infinity.
class RieszObjective {
 public:
  RieszObjective(Matrix Phi, const Matrix& A, std::vector<int> branches, GeneratorSpec gen,
                 PenaltySpec pen);

  double operator()(const Vector& beta, Vector& grad) const;
  double value(const Vector& beta) const;

  const Matrix& Phi() const { return Phi_; }
  const Vector& abar() const { return abar_; }
  const std::vector<int>& branches() const { return branches_; }

  /// Representer values at the training rows.
  Vector alpha(const Vector& beta) const;
  /// True when every training row's dual coordinate lies strictly in range.
  bool feasible(const Vector& beta) const;
  /// Feasible starting point: zero if admissible, otherwise a least-squares
  /// fit of phi_i' beta = s_i t for an interior link value t.
  Vector initial_point() const;

 private:
  Matrix Phi_;
  Vector abar_;
  std::vector<int> branches_;
  GeneratorSpec gen_;
  PenaltySpec pen_;
};

struct RieszModel {
  Vector beta;
  BasisPtr basis;
  GeneratorSpec generator;
  PenaltySpec penalty;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_inf = 0.0;
  std::string message{};
};

RieszModel fit_riesz(const Dataset& data, const FunctionalSpec& m, BasisPtr basis,
                     const GeneratorSpec& gen, const PenaltySpec& pen,
                     const SolveConfig& cfg = {},
                     const std::optional<Vector>& warm_start = std::nullopt);

/// alpha(x) = s inv_link+(s phi(x)' beta). Dual coordinates outside the link
/// range are pulled `kDomainMargin` inside; the count goes to `clamped`.
Vector predict_alpha(const RieszModel& model, const Matrix& X, Index* clamped = nullptr);

/// The fitted representer as a scalar function (with x-derivatives when the
/// basis has them), for evaluating m(W, alpha).
FeatureMap alpha_function(const RieszModel& model);

/// Dual objective value at the fitted coefficients on `data`.
double dual_objective(const RieszModel& model, const Dataset& data, const FunctionalSpec& m);
/// Bregman-Riesz objective (1/n) sum [ -g(alpha_i) + link(alpha_i) alpha_i - m(W_i, f_beta) ]
/// + lam Omega(beta), evaluated at the fitted representer.
double primal_objective(const RieszModel& model, const Dataset& data, const FunctionalSpec& m);

struct BalancingReport {
  Vector imbalance;  // (1/n) sum alpha_i phi_j(X_i) - abar_j
  Vector bound;      // lam (q = 1) or lam |beta_j|^(q-1)
  Vector residual;   // |imbalance_j| - bound_j
  double lam = 0.0;
  double p_norm = 2.0;

  double max_abs_imbalance() const;
  double max_residual() const;
  /// max_j | |imbalance_j| - bound_j |
  double max_abs_residual() const;
};

BalancingReport balancing_report(const RieszModel& model, const Dataset& data,
                                 const FunctionalSpec& m);

enum class OutcomeMode { shared, separate, none };
enum class OutcomeFamily { gaussian, bernoulli };

std::string to_string(OutcomeMode mode);
std::string to_string(OutcomeFamily family);
OutcomeMode parse_outcome_mode(const std::string& name);
OutcomeFamily parse_outcome_family(const std::string& name);

struct OutcomeModel {
  Vector coef;
  BasisPtr basis;
  PenaltySpec penalty;
  OutcomeMode mode = OutcomeMode::shared;
  OutcomeFamily family = OutcomeFamily::gaussian;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
};

/// Gaussian: (1/(2n)) ||Y - Phi c||^2 + lam Omega(c).
/// Bernoulli: (1/n) sum [ log(1 + e^eta) - Y eta ] + lam Omega(c), eta = Phi c.
OutcomeModel fit_outcome(const Dataset& data, BasisPtr basis, const PenaltySpec& pen,
                         OutcomeFamily family, const SolveConfig& cfg = {});

Vector predict_outcome(const OutcomeModel& model, const Matrix& X);
FeatureMap outcome_function(const OutcomeModel& model);

nlohmann::json to_json(const RieszModel& model);
nlohmann::json to_json(const OutcomeModel& model);
nlohmann::json to_json(const PenaltySpec& pen);
nlohmann::json to_json(const BalancingReport& report);

double logistic(double t);

}  // namespace genriesz
