#include "genriesz/estimate.hpp"

#include "genriesz/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace genriesz {

std::string to_string(RieszMethod method) {
  return method == RieszMethod::glm ? "glm" : "nn_matching";
}

RieszMethod parse_riesz_method(const std::string& name) {
  if (name == "glm") return RieszMethod::glm;
  if (name == "nn_matching") return RieszMethod::nn_matching;
  throw InvalidArgument("unknown riesz method '" + name + "'");
}

bool PipelineConfig::wants(EstimatorKind kind) const {
  return std::find(estimators.begin(), estimators.end(), kind) != estimators.end();
}

bool PipelineConfig::needs_outcome() const {
  return wants(EstimatorKind::ra) || wants(EstimatorKind::arw) || wants(EstimatorKind::tmle);
}

void PipelineConfig::validate() const {
  if (estimators.empty()) throw InvalidArgument("pipeline: no estimators requested");
  for (std::size_t i = 0; i < estimators.size(); ++i)
    for (std::size_t j = i + 1; j < estimators.size(); ++j)
      if (estimators[i] == estimators[j])
        throw InvalidArgument("pipeline: estimator '" + to_string(estimators[i]) +
                              "' requested twice");
  if (needs_outcome() && outcome_mode == OutcomeMode::none)
    throw InvalidArgument("pipeline: ra, arw and tmle need an outcome model (outcome_mode=none)");
  if (outcome_mode == OutcomeMode::separate && !outcome_basis)
    throw InvalidArgument("pipeline: outcome_mode=separate requires an outcome basis");
  if (cross_fit && folds < 2 && !fold_plan)
    throw InvalidArgument("pipeline: cross-fitting needs at least 2 folds");
  if (riesz_method == RieszMethod::nn_matching) {
    if (cross_fit) throw InvalidArgument("pipeline: nn_matching requires cross_fit = false");
    for (auto e : estimators)
      if (e != EstimatorKind::rw)
        throw InvalidArgument("pipeline: nn_matching supports only the rw estimator");
    if (M < 1) throw InvalidArgument("pipeline: M must be >= 1");
  }
  riesz_penalty.validate();
  outcome_penalty.validate();
  solver.validate();
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw InvalidArgument("pipeline: ci_level must lie in (0, 1)");
}

const EstimateSummary* PipelineResult::find(EstimatorKind kind) const {
  const std::string name = to_string(kind);
  for (const auto& s : summaries)
    if (s.estimator_name == name) return &s;
  return nullptr;
}

const EstimateSummary& PipelineResult::summary(EstimatorKind kind) const {
  const auto* s = find(kind);
  if (!s) throw InvalidArgument("no summary for estimator '" + to_string(kind) + "'");
  return *s;
}

std::string PipelineResult::summary_text() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %14s %14s %14s %14s %12s\n", "estimator", "theta", "se",
                "ci_lower", "ci_upper", "p_value");
  os << line;
  for (const auto& s : summaries) {
    std::snprintf(line, sizeof line, "%-10s %14.6f %14.6f %14.6f %14.6f %12.4g\n",
                  s.estimator_name.c_str(), s.theta, s.se, s.ci_lower, s.ci_upper, s.p_value);
    os << line;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

void require_same_length(std::initializer_list<const Vector*> vs, const char* who) {
  const Index n = (*vs.begin())->size();
  for (const Vector* v : vs)
    if (v->size() != n) throw InvalidArgument(std::string(who) + ": input lengths differ");
}

ScoreEstimate center(Vector summand) {
  ScoreEstimate out;
  out.theta = summand.mean();
  out.scores = summand.array() - out.theta;
  return out;
}

double clip_probability(double p) { return std::clamp(p, kTmleClip, 1.0 - kTmleClip); }

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

ScoreEstimate estimate_ra(const Vector& m_of_gamma) {
  if (m_of_gamma.size() == 0) throw InvalidArgument("estimate_ra: empty input");
  return center(m_of_gamma);
}

ScoreEstimate estimate_rw(const Vector& alpha, const Vector& Y) {
  require_same_length({&alpha, &Y}, "estimate_rw");
  return center(alpha.cwiseProduct(Y));
}

ScoreEstimate estimate_arw(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                           const Vector& m_of_gamma) {
  require_same_length({&alpha, &Y, &gamma_hat, &m_of_gamma}, "estimate_arw");
  return center(alpha.cwiseProduct(Y - gamma_hat) + m_of_gamma);
}

TmleEstimate tmle_gaussian(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                           const Vector& m_of_gamma, const Vector& m_of_alpha) {
  require_same_length({&alpha, &Y, &gamma_hat, &m_of_gamma, &m_of_alpha}, "tmle_gaussian");
  const double denom = alpha.squaredNorm();
  if (!(denom > 0.0)) throw NumericalError("tmle_gaussian: degenerate representer (sum alpha^2 = 0)");
  TmleEstimate out;
  out.epsilon = alpha.dot(Y - gamma_hat) / denom;
  out.gamma_updated = gamma_hat + out.epsilon * alpha;
  out.m_updated = m_of_gamma + out.epsilon * m_of_alpha;
  out.theta = m_of_gamma.mean() + out.epsilon * m_of_alpha.mean();
  out.scores = (out.m_updated + alpha.cwiseProduct(Y - out.gamma_updated)).array() - out.theta;
  out.score_residual = alpha.dot(Y - out.gamma_updated) / static_cast<double>(alpha.size());
  return out;
}

double solve_logistic_fluctuation(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                                  int* iterations) {
  require_same_length({&alpha, &Y, &gamma_hat}, "tmle_bernoulli");
  const Index n = alpha.size();
  if (!(alpha.squaredNorm() > 0.0))
    throw NumericalError("tmle_bernoulli: degenerate representer (alpha = 0)");
  Vector offset(n);
  for (Index i = 0; i < n; ++i) offset(i) = logit(clip_probability(gamma_hat(i)));

  auto score = [&](double eps, double* slope) {
    double s = 0.0, ds = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double t = offset(i) + eps * alpha(i);
      const double p = logistic(t);
      // 1 - p as logistic(-t) keeps the residual's sign in the tails.
      s += alpha(i) * (Y(i) == 1.0 ? logistic(-t) : Y(i) == 0.0 ? -p : Y(i) - p);
      ds -= alpha(i) * alpha(i) * p * (1.0 - p);
    }
    if (slope) *slope = ds / static_cast<double>(n);
    return s / static_cast<double>(n);
  };

  constexpr double kLimit = 50.0;
  double lo = -1.0, hi = 1.0;
  double s_lo = score(lo, nullptr), s_hi = score(hi, nullptr);
  // The score is non-increasing in eps; push the ends out until it changes sign.
  while (s_lo < 0.0 && lo > -kLimit) {
    lo = std::max(2.0 * lo, -kLimit);
    s_lo = score(lo, nullptr);
  }
  while (s_hi > 0.0 && hi < kLimit) {
    hi = std::min(2.0 * hi, kLimit);
    s_hi = score(hi, nullptr);
  }
  if (s_lo == 0.0) return lo;
  if (s_hi == 0.0) return hi;
  if (!(s_lo > 0.0 && s_hi < 0.0)) {
    std::ostringstream os;
    os << "tmle_bernoulli: score equation has no sign change on [-50, 50] (score(-50) = " << s_lo
       << ", score(50) = " << s_hi << "); predictions may be at the clipping bound";
    throw NumericalError(os.str());
  }

  double eps = 0.0;
  if (eps <= lo || eps >= hi) eps = 0.5 * (lo + hi);
  int it = 0;
  for (; it < 200; ++it) {
    double slope;
    const double s = score(eps, &slope);
    if (std::abs(s) <= 1e-10) break;
    if (s > 0.0)
      lo = eps;
    else
      hi = eps;
    if (hi - lo <= 1e-12) {
      eps = 0.5 * (lo + hi);
      break;
    }
    double next = slope < 0.0 ? eps - s / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    eps = next;
  }
  if (iterations) *iterations = it;
  return eps;
}

TmleEstimate tmle_bernoulli(const Vector& alpha, const Vector& Y, const Vector& gamma_hat,
                            const std::function<Vector(double)>& m_of_updated) {
  for (Index i = 0; i < Y.size(); ++i)
    if (Y(i) != 0.0 && Y(i) != 1.0) throw InvalidArgument("tmle_bernoulli: Y must be binary");
  TmleEstimate out;
  out.epsilon = solve_logistic_fluctuation(alpha, Y, gamma_hat, &out.iterations);
  const Index n = alpha.size();
  out.gamma_updated.resize(n);
  for (Index i = 0; i < n; ++i)
    out.gamma_updated(i) =
        logistic(logit(clip_probability(gamma_hat(i))) + out.epsilon * alpha(i));
  out.m_updated = m_of_updated(out.epsilon);
  if (out.m_updated.size() != n) throw InvalidArgument("tmle_bernoulli: evaluator length mismatch");
  out.theta = out.m_updated.mean();
  out.scores = (out.m_updated + alpha.cwiseProduct(Y - out.gamma_updated)).array() - out.theta;
  out.score_residual = alpha.dot(Y - out.gamma_updated) / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void rethrow_with_fold(int fold) {
  const std::string prefix = "fold " + std::to_string(fold) + ": ";
  try {
    throw;
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  } catch (const InvalidGenerator& e) {
    throw InvalidGenerator(prefix + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  }
}

bool is_binary(const Vector& Y) {
  for (Index i = 0; i < Y.size(); ++i)
    if (Y(i) != 0.0 && Y(i) != 1.0) return false;
  return true;
}

/// Family auto-detection: binary with both levels present.
bool looks_bernoulli(const Vector& Y) {
  return is_binary(Y) && Y.size() > 0 && Y.minCoeff() == 0.0 && Y.maxCoeff() == 1.0;
}

/// x -> Lambda(logit(clip(gamma(x))) + eps alpha(x)).
FeatureMap fluctuated_function(const FeatureMap& gamma, const FeatureMap& alpha, double eps) {
  FeatureMap fm;
  fm.value = [=](const Matrix& X) {
    const Vector g = gamma.value(X).col(0);
    const Vector a = alpha.value(X).col(0);
    Matrix out(X.rows(), 1);
    for (Index i = 0; i < X.rows(); ++i)
      out(i, 0) = logistic(logit(clip_probability(g(i))) + eps * a(i));
    return out;
  };
  if (gamma.partial && alpha.partial) {
    fm.partial = [=](const Matrix& X, Index k) {
      const Vector g = gamma.value(X).col(0);
      const Vector a = alpha.value(X).col(0);
      const Vector dg = gamma.partial(X, k).col(0);
      const Vector da = alpha.partial(X, k).col(0);
      Matrix out(X.rows(), 1);
      for (Index i = 0; i < X.rows(); ++i) {
        const double gc = clip_probability(g(i));
        const double deta = (gc == g(i) ? dg(i) / (gc * (1.0 - gc)) : 0.0) + eps * da(i);
        const double p = logistic(logit(gc) + eps * a(i));
        out(i, 0) = p * (1.0 - p) * deta;
      }
      return out;
    };
  }
  return fm;
}

PipelineResult run_matching(const Dataset& data, const FunctionalSpec& m,
                            const PipelineConfig& cfg) {
  if (m.name() != "ate")
    throw InvalidArgument("pipeline: nn_matching is available for the ATE functional only");
  if (!data.treat_col()) throw InvalidArgument("pipeline: nn_matching needs a treatment column");
  Matrix Z = data.Z();
  if (Z.cols() == 0) throw InvalidArgument("pipeline: nn_matching needs covariates besides D");
  if (cfg.standardize) Z = standardize_columns(Z);
  const MatchWeights w = nn_match_weights(Z, data.D(), cfg.M);

  PipelineResult res;
  res.folds = make_fold_plan(data.n(), 1, cfg.seed);
  res.alpha = w.alpha;
  const ScoreEstimate rw = estimate_rw(w.alpha, data.Y());
  auto s = wald_summary("rw", rw.theta, rw.scores, cfg.ci_level);
  s.non_orthogonal_se = true;
  res.summaries.push_back(std::move(s));
  FoldDiagnostics diag;
  diag.train_size = diag.eval_size = data.n();
  res.fold_diagnostics.push_back(std::move(diag));
  return res;
}

}  // namespace

PipelineResult run_pipeline(const Dataset& data, const FunctionalSpec& m, BasisPtr basis,
                            const GeneratorSpec& gen, const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.riesz_method == RieszMethod::nn_matching) return run_matching(data, m, cfg);
  if (!basis) throw InvalidArgument("pipeline: basis is null");

  const Index n = data.n();
  FoldPlan plan;
  if (cfg.fold_plan) {
    plan = *cfg.fold_plan;
    if (static_cast<Index>(plan.assignments.size()) != n)
      throw InvalidArgument("pipeline: fold plan length differs from the sample size");
  } else {
    plan = make_fold_plan(n, cfg.cross_fit ? cfg.folds : 1, cfg.seed);
  }

  PipelineResult res;
  res.folds = plan;
  const bool need_outcome = cfg.needs_outcome();
  const bool want_tmle = cfg.wants(EstimatorKind::tmle);
  OutcomeFamily family = OutcomeFamily::gaussian;
  if (need_outcome) {
    family = cfg.tmle_family.value_or(looks_bernoulli(data.Y()) ? OutcomeFamily::bernoulli
                                                          : OutcomeFamily::gaussian);
    if (family == OutcomeFamily::bernoulli && !is_binary(data.Y()))
      throw InvalidArgument("pipeline: bernoulli family requires a binary outcome");
    res.family = family;
  }
  const BasisPtr out_basis = cfg.outcome_mode == OutcomeMode::separate ? cfg.outcome_basis : basis;

  res.alpha = Vector::Zero(n);
  if (need_outcome) {
    res.gamma = Vector::Zero(n);
    res.m_gamma = Vector::Zero(n);
  }
  Vector gamma_updated, m_updated;
  if (want_tmle) {
    gamma_updated = Vector::Zero(n);
    m_updated = Vector::Zero(n);
  }

  for (int k = 0; k < plan.K; ++k) {
    try {
      const std::vector<Index> train = plan.complement(k);
      const std::vector<Index> eval = plan.fold(k);
      const Dataset train_data = data.subset(train);
      const Dataset eval_data = data.subset(eval);

      FoldDiagnostics diag;
      diag.fold = k;
      diag.train_size = static_cast<Index>(train.size());
      diag.eval_size = static_cast<Index>(eval.size());

      const RieszModel rmodel =
          fit_riesz(train_data, m, basis, gen, cfg.riesz_penalty, cfg.solver);
      diag.riesz_converged = rmodel.converged;
      diag.riesz_iterations = rmodel.iterations;
      diag.riesz_grad_inf = rmodel.grad_inf;
      diag.balancing = balancing_report(rmodel, train_data, m);
      diag.riesz_model = to_json(rmodel);
      if (!rmodel.converged)
        res.warnings.push_back("fold " + std::to_string(k) + ": riesz fit did not converge (" +
                               rmodel.message + ")");

      Index clamped = 0;
      const Vector alpha = predict_alpha(rmodel, eval_data.X(), &clamped);
      diag.clamped_rows = clamped;
      if (clamped > 0)
        res.warnings.push_back("fold " + std::to_string(k) + ": " + std::to_string(clamped) +
                               " evaluation rows clamped into the generator domain");
      res.alpha(eval) = alpha;

      if (need_outcome) {
        OutcomeModel omodel =
            fit_outcome(train_data, out_basis, cfg.outcome_penalty, family, cfg.solver);
        omodel.mode = cfg.outcome_mode;
        diag.outcome_converged = omodel.converged;
        diag.outcome_iterations = omodel.iterations;
        diag.outcome_model = to_json(omodel);
        if (!omodel.converged)
          res.warnings.push_back("fold " + std::to_string(k) + ": outcome fit did not converge");
        const FeatureMap gamma_fn = outcome_function(omodel);
        const Vector gamma = predict_outcome(omodel, eval_data.X());
        const Vector m_gamma = m.apply_scalar(gamma_fn, eval_data);
        res.gamma(eval) = gamma;
        res.m_gamma(eval) = m_gamma;

        if (want_tmle) {
          const FeatureMap alpha_fn = alpha_function(rmodel);
          TmleEstimate t;
          if (family == OutcomeFamily::gaussian) {
            const Vector m_alpha = m.apply_scalar(alpha_fn, eval_data);
            t = tmle_gaussian(alpha, eval_data.Y(), gamma, m_gamma, m_alpha);
          } else {
            t = tmle_bernoulli(alpha, eval_data.Y(), gamma, [&](double eps) {
              return m.apply_scalar(fluctuated_function(gamma_fn, alpha_fn, eps), eval_data);
            });
          }
          diag.tmle_epsilon = t.epsilon;
          gamma_updated(eval) = t.gamma_updated;
          m_updated(eval) = t.m_updated;
        }
      }
      res.fold_diagnostics.push_back(std::move(diag));
    } catch (const std::exception&) {
      rethrow_with_fold(k);
    }
  }

  const Vector& Y = data.Y();
  for (EstimatorKind kind : cfg.estimators) {
    ScoreEstimate est;
    switch (kind) {
      case EstimatorKind::ra: est = estimate_ra(res.m_gamma); break;
      case EstimatorKind::rw: est = estimate_rw(res.alpha, Y); break;
      case EstimatorKind::arw: est = estimate_arw(res.alpha, Y, res.gamma, res.m_gamma); break;
      case EstimatorKind::tmle:
        est.theta = m_updated.mean();
        est.scores =
            (m_updated + res.alpha.cwiseProduct(Y - gamma_updated)).array() - est.theta;
        break;
    }
    auto s = wald_summary(to_string(kind), est.theta, est.scores, cfg.ci_level);
    s.non_orthogonal_se = kind == EstimatorKind::ra || kind == EstimatorKind::rw;
    res.summaries.push_back(std::move(s));
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

GeneratorSpec with_treatment_branch(const GeneratorSpec& gen, Index treat_col) {
  if (gen.has_branch_fn()) return gen;
  return gen.with_branch(treatment_branch(treat_col));
}

Index require_treatment(const Dataset& data, const char* who) {
  if (!data.treat_col()) throw InvalidArgument(std::string(who) + ": treat_col must be set");
  return *data.treat_col();
}

}  // namespace

PipelineResult grr_functional(const Dataset& data, const FunctionalSpec& m, BasisPtr basis,
                              const GeneratorSpec& gen, const PipelineConfig& cfg) {
  return run_pipeline(data, m, std::move(basis), gen, cfg);
}

PipelineResult grr_ate(const Dataset& data, BasisPtr basis, const GeneratorSpec& gen,
                       const PipelineConfig& cfg) {
  const Index col = require_treatment(data, "grr_ate");
  return run_pipeline(data, ate_functional(col), std::move(basis), with_treatment_branch(gen, col),
                      cfg);
}

PipelineResult grr_att(const Dataset& data, BasisPtr basis, const GeneratorSpec& gen,
                       const PipelineConfig& cfg) {
  const Index col = require_treatment(data, "grr_att");
  return run_pipeline(data, att_functional(data, col), std::move(basis),
                      with_treatment_branch(gen, col), cfg);
}

PipelineResult grr_did(const Matrix& X, const Vector& Y0, const Vector& Y1,
                       std::optional<Index> treat_col, BasisPtr basis, const GeneratorSpec& gen,
                       const PipelineConfig& cfg) {
  if (!treat_col) throw InvalidArgument("grr_did: treat_col must be set");
  return grr_att(Dataset(X, did_transform(Y0, Y1), treat_col), std::move(basis), gen, cfg);
}

PipelineResult grr_ame(const Dataset& data, Index coordinate, BasisPtr basis,
                       const GeneratorSpec& gen, const PipelineConfig& cfg) {
  return run_pipeline(data, ame_functional(coordinate), std::move(basis), gen, cfg);
}

// ---------------------------------------------------------------------------

namespace {
nlohmann::json vec_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}
}  // namespace

nlohmann::json to_json(const EstimateSummary& s) {
  return {{"estimator", s.estimator_name},
          {"theta", s.theta},
          {"se", s.se},
          {"ci_lower", s.ci_lower},
          {"ci_upper", s.ci_upper},
          {"ci_level", s.ci_level},
          {"p_value", s.p_value},
          {"degenerate", s.degenerate},
          {"non_orthogonal_se", s.non_orthogonal_se},
          {"scores", vec_json(s.scores)}};
}

nlohmann::json to_json(const PipelineResult& r) {
  nlohmann::json out;
  out["summaries"] = nlohmann::json::array();
  for (const auto& s : r.summaries) out["summaries"].push_back(to_json(s));
  nlohmann::json nuis;
  nuis["alpha"] = vec_json(r.alpha);
  if (r.gamma.size()) nuis["gamma"] = vec_json(r.gamma);
  if (r.m_gamma.size()) nuis["m_gamma"] = vec_json(r.m_gamma);
  nuis["folds"] = r.folds.assignments;
  nuis["K"] = r.folds.K;
  out["nuisances"] = std::move(nuis);
  if (r.family) out["outcome_family"] = to_string(*r.family);
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& d : r.fold_diagnostics) {
    nlohmann::json f = {{"fold", d.fold},
                        {"train_size", d.train_size},
                        {"eval_size", d.eval_size},
                        {"riesz_converged", d.riesz_converged},
                        {"riesz_iterations", d.riesz_iterations},
                        {"riesz_grad_inf", d.riesz_grad_inf},
                        {"outcome_converged", d.outcome_converged},
                        {"outcome_iterations", d.outcome_iterations},
                        {"clamped_rows", d.clamped_rows}};
    if (d.tmle_epsilon) f["tmle_epsilon"] = *d.tmle_epsilon;
    if (d.balancing) f["balancing"] = to_json(*d.balancing);
    if (!d.riesz_model.is_null()) f["riesz_model"] = d.riesz_model;
    if (!d.outcome_model.is_null()) f["outcome_model"] = d.outcome_model;
    folds.push_back(std::move(f));
  }
  out["folds"] = std::move(folds);
  out["warnings"] = r.warnings;
  return out;
}

}  // namespace genriesz
