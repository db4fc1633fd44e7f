#include "genriesz/riesz.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace genriesz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double interior_link_value(const Interval& r) {
  const bool flo = std::isfinite(r.lo), fhi = std::isfinite(r.hi);
  if (flo && fhi) return 0.5 * (r.lo + r.hi);
  if (fhi) return r.hi - 1.0;
  if (flo) return r.lo + 1.0;
  return 0.0;
}

}  // namespace

double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

RieszObjective::RieszObjective(Matrix Phi, const Matrix& A, std::vector<int> branches,
                               GeneratorSpec gen, PenaltySpec pen)
    : Phi_(std::move(Phi)),
      abar_(A.colwise().mean().transpose()),
      branches_(std::move(branches)),
      gen_(std::move(gen)),
      pen_(pen) {
  if (A.rows() != Phi_.rows() || A.cols() != Phi_.cols())
    throw InvalidArgument("RieszObjective: moment matrix and basis matrix shapes differ");
  if (static_cast<Index>(branches_.size()) != Phi_.rows())
    throw InvalidArgument("RieszObjective: one branch label per row required");
}

double RieszObjective::operator()(const Vector& beta, Vector& grad) const {
  const Index n = Phi_.rows();
  const Vector v = Phi_ * beta;
  Vector alpha(n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int s = branches_[static_cast<std::size_t>(i)];
    const double c = gen_.conjugate_or_inf(v(i), s);
    if (!std::isfinite(c)) {
      grad.setZero(beta.size());
      return kInf;
    }
    total += c;
    alpha(i) = gen_.inv_link(v(i), s);
  }
  const auto [pen_value, pen_grad] = penalty_value_grad(pen_, beta);
  grad = Phi_.transpose() * alpha / static_cast<double>(n) - abar_ + pen_.lam * pen_grad;
  return total / static_cast<double>(n) - abar_.dot(beta) + pen_.lam * pen_value;
}

double RieszObjective::value(const Vector& beta) const {
  Vector grad;
  return (*this)(beta, grad);
}

Vector RieszObjective::alpha(const Vector& beta) const {
  const Vector v = Phi_ * beta;
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = gen_.inv_link(v(i), branches_[static_cast<std::size_t>(i)]);
  return out;
}

bool RieszObjective::feasible(const Vector& beta) const {
  const Vector v = Phi_ * beta;
  for (Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(gen_.conjugate_or_inf(v(i), branches_[static_cast<std::size_t>(i)])))
      return false;
  return true;
}

Vector RieszObjective::initial_point() const {
  Vector zero = Vector::Zero(Phi_.cols());
  if (feasible(zero)) return zero;
  const double t = interior_link_value(gen_.link_range());
  Vector target(Phi_.rows());
  for (Index i = 0; i < target.size(); ++i)
    target(i) = (gen_.sign_extension() ? branches_[static_cast<std::size_t>(i)] : 1) * t;
  Vector beta = Phi_.completeOrthogonalDecomposition().solve(target);
  if (!beta.allFinite() || !feasible(beta))
    throw InvalidArgument(
        "fit_riesz: no feasible starting point inside the generator's link range for this basis");
  return beta;
}

// ---------------------------------------------------------------------------

RieszModel fit_riesz(const Dataset& data, const FunctionalSpec& m, BasisPtr basis,
                     const GeneratorSpec& gen, const PenaltySpec& pen, const SolveConfig& cfg,
                     const std::optional<Vector>& warm_start) {
  if (!basis) throw InvalidArgument("fit_riesz: basis is null");
  pen.validate();
  Matrix Phi = basis->evaluate(data.X());
  const Matrix A = functional_matrix(m, *basis, data);
  RieszObjective objective(std::move(Phi), A, gen.branches(data.X()), gen, pen);

  Vector init;
  if (warm_start) {
    if (warm_start->size() != objective.Phi().cols())
      throw InvalidArgument("fit_riesz: warm start has the wrong length");
    if (!objective.feasible(*warm_start))
      throw InvalidArgument("fit_riesz: warm start is outside the generator's domain");
    init = *warm_start;
  } else {
    init = objective.initial_point();
  }

  const SolveResult sol = minimize<double>(
      [&objective](const Vector& b, Vector& g) { return objective(b, g); }, init, cfg);

  RieszModel model{sol.x, std::move(basis), gen, pen};
  model.objective = sol.value;
  model.converged = sol.converged;
  model.iterations = sol.iterations;
  model.grad_inf = sol.grad_inf;
  model.message = sol.message;
  return model;
}

Vector predict_alpha(const RieszModel& model, const Matrix& X, Index* clamped) {
  const Vector v = model.basis->evaluate(X) * model.beta;
  const auto branches = model.generator.branches(X);
  Vector out(v.size());
  Index count = 0;
  for (Index i = 0; i < v.size(); ++i) {
    const int s = branches[static_cast<std::size_t>(i)];
    double vi = v(i);
    if (!model.generator.v_in_range(vi, s) ||
        model.generator.clamp_v(vi, s, kDomainMargin) != vi) {
      vi = model.generator.clamp_v(vi, s, kDomainMargin);
      ++count;
    }
    out(i) = model.generator.inv_link(vi, s);
  }
  if (clamped) *clamped = count;
  return out;
}

FeatureMap alpha_function(const RieszModel& model) {
  FeatureMap fm;
  fm.value = [model](const Matrix& X) { return Matrix(predict_alpha(model, X)); };
  if (model.basis->has_derivative()) {
    fm.partial = [model](const Matrix& X, Index k) {
      const Vector v = model.basis->evaluate(X) * model.beta;
      const Vector dv = model.basis->derivative(X, k) * model.beta;
      const auto branches = model.generator.branches(X);
      Matrix out(X.rows(), 1);
      for (Index i = 0; i < X.rows(); ++i) {
        const int s = branches[static_cast<std::size_t>(i)];
        const double vi = model.generator.clamp_v(v(i), s, kDomainMargin);
        out(i, 0) = model.generator.inv_link_derivative(vi, s) * dv(i);
      }
      return out;
    };
  }
  return fm;
}

double dual_objective(const RieszModel& model, const Dataset& data, const FunctionalSpec& m) {
  RieszObjective obj(model.basis->evaluate(data.X()), functional_matrix(m, *model.basis, data),
                     model.generator.branches(data.X()), model.generator, model.penalty);
  return obj.value(model.beta);
}

double primal_objective(const RieszModel& model, const Dataset& data, const FunctionalSpec& m) {
  const Vector alpha = predict_alpha(model, data.X());
  const auto branches = model.generator.branches(data.X());
  const Matrix A = functional_matrix(m, *model.basis, data);
  double total = 0.0;
  for (Index i = 0; i < alpha.size(); ++i) {
    const int s = branches[static_cast<std::size_t>(i)];
    total += -model.generator.g(alpha(i), s) + model.generator.link(alpha(i), s) * alpha(i);
  }
  const double n = static_cast<double>(alpha.size());
  const auto pen = penalty_value_grad(model.penalty, model.beta);
  return total / n - (A * model.beta).mean() + model.penalty.lam * pen.first;
}

// ---------------------------------------------------------------------------

double BalancingReport::max_abs_imbalance() const {
  return imbalance.size() ? imbalance.cwiseAbs().maxCoeff() : 0.0;
}
double BalancingReport::max_residual() const { return residual.size() ? residual.maxCoeff() : 0.0; }
double BalancingReport::max_abs_residual() const {
  return residual.size() ? residual.cwiseAbs().maxCoeff() : 0.0;
}

BalancingReport balancing_report(const RieszModel& model, const Dataset& data,
                                 const FunctionalSpec& m) {
  const Matrix Phi = model.basis->evaluate(data.X());
  const Matrix A = functional_matrix(m, *model.basis, data);
  const Vector alpha = predict_alpha(model, data.X());
  const double n = static_cast<double>(data.n());
  BalancingReport rep;
  rep.lam = model.penalty.lam;
  rep.p_norm = model.penalty.p_norm;
  rep.imbalance = Phi.transpose() * alpha / n - A.colwise().mean().transpose();
  rep.bound.resize(rep.imbalance.size());
  for (Index j = 0; j < rep.bound.size(); ++j) {
    rep.bound(j) = rep.p_norm == 1.0
                       ? rep.lam
                       : rep.lam * std::pow(std::abs(model.beta(j)), rep.p_norm - 1.0);
  }
  rep.residual = rep.imbalance.cwiseAbs() - rep.bound;
  return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(OutcomeMode mode) {
  switch (mode) {
    case OutcomeMode::shared: return "shared";
    case OutcomeMode::separate: return "separate";
    case OutcomeMode::none: return "none";
  }
  return "?";
}

std::string to_string(OutcomeFamily family) {
  return family == OutcomeFamily::gaussian ? "gaussian" : "bernoulli";
}

OutcomeMode parse_outcome_mode(const std::string& name) {
  if (name == "shared") return OutcomeMode::shared;
  if (name == "separate") return OutcomeMode::separate;
  if (name == "none") return OutcomeMode::none;
  throw InvalidArgument("unknown outcome mode '" + name + "'");
}

OutcomeFamily parse_outcome_family(const std::string& name) {
  if (name == "gaussian") return OutcomeFamily::gaussian;
  if (name == "bernoulli") return OutcomeFamily::bernoulli;
  throw InvalidArgument("unknown outcome family '" + name + "'");
}

OutcomeModel fit_outcome(const Dataset& data, BasisPtr basis, const PenaltySpec& pen,
                         OutcomeFamily family, const SolveConfig& cfg) {
  if (!basis) throw InvalidArgument("fit_outcome: basis is null");
  pen.validate();
  const Vector& Y = data.Y();
  if (family == OutcomeFamily::bernoulli) {
    for (Index i = 0; i < Y.size(); ++i)
      if (Y(i) != 0.0 && Y(i) != 1.0) {
        std::ostringstream os;
        os << "fit_outcome: bernoulli family needs Y in {0, 1}; row " << i << " has " << Y(i);
        throw InvalidArgument(os.str());
      }
  }
  const Matrix Phi = basis->evaluate(data.X());
  const double n = static_cast<double>(data.n());

  auto objective = [&](const Vector& c, Vector& grad) {
    const Vector eta = Phi * c;
    double loss;
    Vector resid;
    if (family == OutcomeFamily::gaussian) {
      resid = eta - Y;
      loss = 0.5 * resid.squaredNorm() / n;
    } else {
      loss = 0.0;
      resid.resize(eta.size());
      for (Index i = 0; i < eta.size(); ++i) {
        const double e = eta(i);
        loss += std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e))) - Y(i) * e;
        resid(i) = logistic(e) - Y(i);
      }
      loss /= n;
    }
    const auto [pv, pg] = penalty_value_grad(pen, c);
    grad = Phi.transpose() * resid / n + pen.lam * pg;
    return loss + pen.lam * pv;
  };

  const SolveResult sol = minimize<double>(objective, Vector(Vector::Zero(Phi.cols())), cfg);
  OutcomeModel model;
  model.coef = sol.x;
  model.basis = std::move(basis);
  model.penalty = pen;
  model.family = family;
  model.converged = sol.converged;
  model.iterations = sol.iterations;
  model.objective = sol.value;
  return model;
}

Vector predict_outcome(const OutcomeModel& model, const Matrix& X) {
  Vector eta = model.basis->evaluate(X) * model.coef;
  if (model.family == OutcomeFamily::bernoulli)
    for (Index i = 0; i < eta.size(); ++i) eta(i) = logistic(eta(i));
  return eta;
}

FeatureMap outcome_function(const OutcomeModel& model) {
  FeatureMap fm;
  fm.value = [model](const Matrix& X) { return Matrix(predict_outcome(model, X)); };
  if (model.basis->has_derivative()) {
    fm.partial = [model](const Matrix& X, Index k) {
      Vector d = model.basis->derivative(X, k) * model.coef;
      if (model.family == OutcomeFamily::bernoulli) {
        const Vector eta = model.basis->evaluate(X) * model.coef;
        for (Index i = 0; i < d.size(); ++i) {
          const double p = logistic(eta(i));
          d(i) *= p * (1.0 - p);
        }
      }
      return Matrix(d);
    };
  }
  return fm;
}

// ---------------------------------------------------------------------------

namespace {
nlohmann::json vector_to_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}
}  // namespace

nlohmann::json to_json(const PenaltySpec& pen) {
  return {{"p_norm", pen.p_norm}, {"lam", pen.lam}, {"smoothing_mu", pen.smoothing_mu}};
}

nlohmann::json to_json(const RieszModel& model) {
  nlohmann::json gen = {{"kind", to_string(model.generator.kind())}, {"C", model.generator.C()}};
  if (model.generator.kind() == GeneratorKind::bp) gen["omega"] = model.generator.omega();
  return {{"beta", vector_to_json(model.beta)},
          {"penalty", to_json(model.penalty)},
          {"generator", gen},
          {"basis", model.basis->metadata()},
          {"objective", model.objective},
          {"converged", model.converged},
          {"iterations", model.iterations},
          {"grad_inf", model.grad_inf}};
}

nlohmann::json to_json(const OutcomeModel& model) {
  return {{"coef", vector_to_json(model.coef)},
          {"penalty", to_json(model.penalty)},
          {"mode", to_string(model.mode)},
          {"family", to_string(model.family)},
          {"basis", model.basis->metadata()},
          {"objective", model.objective},
          {"converged", model.converged},
          {"iterations", model.iterations}};
}

nlohmann::json to_json(const BalancingReport& report) {
  return {{"imbalance", vector_to_json(report.imbalance)},
          {"bound", vector_to_json(report.bound)},
          {"residual", vector_to_json(report.residual)},
          {"lam", report.lam},
          {"p_norm", report.p_norm},
          {"max_abs_imbalance", report.max_abs_imbalance()}};
}

}  // namespace genriesz
