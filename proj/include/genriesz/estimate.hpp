#pragma once

#include "genriesz/bases.hpp"
#include "genriesz/core.hpp"
#include "genriesz/functionals.hpp"
#include "genriesz/generators.hpp"
#include "genriesz/riesz.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace genriesz {

enum class RieszMethod { glm, nn_matching };

std::string to_string(RieszMethod method);
RieszMethod parse_riesz_method(const std::string& name);

struct PipelineConfig {
  std::vector<EstimatorKind> estimators = {EstimatorKind::ra, EstimatorKind::rw,
                                           EstimatorKind::arw, EstimatorKind::tmle};
  bool cross_fit = true;
  int folds = 5;
  OutcomeMode outcome_mode = OutcomeMode::shared;
  BasisPtr outcome_basis;                       // used when outcome_mode == separate
  std::optional<OutcomeFamily> tmle_family;     // auto-detected when unset
  RieszMethod riesz_method = RieszMethod::glm;
  Index M = 1;                                  // nn_matching
  bool standardize = false;                     // nn_matching distance on standardized Z
  PenaltySpec riesz_penalty{2.0, 1e-3, 1e-6};
  PenaltySpec outcome_penalty{2.0, 1e-3, 1e-6};
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  SolveConfig solver;
  std::optional<FoldPlan> fold_plan;  // overrides (cross_fit, folds, seed)

  void validate() const;
  bool needs_outcome() const;
  bool wants(EstimatorKind kind) const;
};

/// Per-fold fitting diagnostics.
struct FoldDiagnostics {
  int fold = 0;
  Index train_size = 0;
  Index eval_size = 0;
  bool riesz_converged = true;
  int riesz_iterations = 0;
  double riesz_grad_inf = 0.0;
  bool outcome_converged = true;
  int outcome_iterations = 0;
  Index clamped_rows = 0;
  std::optional<double> tmle_epsilon;
  std::optional<BalancingReport> balancing;
  nlohmann::json riesz_model;
  nlohmann::json outcome_model;
};

struct PipelineResult {
  std::vector<EstimateSummary> summaries;  // in requested order
  Vector alpha;                            // out-of-fold representer values
  Vector gamma;                            // out-of-fold outcome predictions (empty if none)
  Vector m_gamma;                          // m(W_i, gamma_hat)
  FoldPlan folds;
  std::vector<FoldDiagnostics> fold_diagnostics;
  std::optional<OutcomeFamily> family;
  std::vector<std::string> warnings;

  const EstimateSummary& summary(EstimatorKind kind) const;
  const EstimateSummary* find(EstimatorKind kind) const;
  std::string summary_text() const;
};

// Estimators. Each returns theta and the centered influence scores.

struct ScoreEstimate {
  double theta = 0.0;
  Vector scores;
};

ScoreEstimate estimate_ra(const Vector& m_of_gamma);
ScoreEstimate estimate_rw(const Vector& alpha, const Vector& Y);
ScoreEstimate estimate_arw(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                           const Vector& m_of_gamma);

struct TmleEstimate {
  double theta = 0.0;
  Vector scores;
  double epsilon = 0.0;
  Vector gamma_updated;  // gamma^(1)(X_i)
  Vector m_updated;      // m(W_i, gamma^(1))
  int iterations = 0;
  double score_residual = 0.0;
};

/// Additive fluctuation gamma + eps alpha with eps = sum a (Y - g) / sum a^2.
TmleEstimate tmle_gaussian(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                           const Vector& m_of_gamma, const Vector& m_of_alpha);

inline constexpr double kTmleClip = 1e-6;

/// Logit-scale fluctuation Lambda(logit(gamma) + eps alpha). `m_of_updated(eps)`
/// must return m(W_i, gamma^(1)) for the fluctuated regression.
TmleEstimate tmle_bernoulli(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                            const std::function<Vector(double)>& m_of_updated);

/// Root of the Bernoulli score equation
/// (1/n) sum alpha_i (Y_i - Lambda(logit(gamma_i) + eps alpha_i)) = 0.
double solve_logistic_fluctuation(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                                  int* iterations = nullptr);

PipelineResult run_pipeline(const Dataset& data, const FunctionalSpec& m, BasisPtr basis,
                            const GeneratorSpec& gen, const PipelineConfig& cfg);

// Wrappers with predefined functionals. The ATE/ATT/DID wrappers install the
// treated/control branch rule when the generator has none.

PipelineResult grr_functional(const Dataset& data, const FunctionalSpec& m, BasisPtr basis,
                              const GeneratorSpec& gen, const PipelineConfig& cfg);
PipelineResult grr_ate(const Dataset& data, BasisPtr basis, const GeneratorSpec& gen,
                       const PipelineConfig& cfg);
PipelineResult grr_att(const Dataset& data, BasisPtr basis, const GeneratorSpec& gen,
                       const PipelineConfig& cfg);
PipelineResult grr_did(const Matrix& X, const Vector& Y0, const Vector& Y1,
                       std::optional<Index> treat_col, BasisPtr basis, const GeneratorSpec& gen,
                       const PipelineConfig& cfg);
PipelineResult grr_ame(const Dataset& data, Index coordinate, BasisPtr basis,
                       const GeneratorSpec& gen, const PipelineConfig& cfg);

nlohmann::json to_json(const EstimateSummary& s);
nlohmann::json to_json(const PipelineResult& r);

}  // namespace genriesz
