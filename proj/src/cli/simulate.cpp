#include "genriesz/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

namespace genriesz::cli {

using nlohmann::json;

const std::vector<std::string>& dgp_names() {
  static const std::vector<std::string> names = {"linear-ate", "logistic-propensity-ate",
                                                 "quadratic-ame"};
  return names;
}

SimDraw draw_dgp(const std::string& name, Index n, double tau, Xoshiro256& rng) {
  if (n < 2) throw InvalidArgument("simulate: n must be >= 2");
  if (name == "linear-ate" || name == "logistic-propensity-ate") {
    const bool linear = name == "linear-ate";
    Matrix X(n, 3);
    Vector Y(n);
    for (Index i = 0; i < n; ++i) {
      const double z1 = rng.normal(), z2 = rng.normal();
      const double eta = linear ? 0.5 * z1 - 0.5 * z2 : 0.5 * z1 + 0.25 * z1 * z2;
      const double d = rng.uniform() < logistic(eta) ? 1.0 : 0.0;
      const double mu = linear ? z1 + 0.5 * z2
                               : std::sin(z1) + 0.5 * z2 * z2 + 0.5 * d * z1;
      X.row(i) << d, z1, z2;
      Y(i) = tau * d + mu + rng.normal();
    }
    return {Dataset(std::move(X), std::move(Y), Index{0}), tau};
  }
  if (name == "quadratic-ame") {
    Matrix X(n, 2);
    Vector Y(n);
    for (Index i = 0; i < n; ++i) {
      const double x1 = rng.normal(), x2 = rng.normal();
      X.row(i) << x1, x2;
      Y(i) = tau * x1 + 0.5 * x1 * x1 + x2 + rng.normal();
    }
    return {Dataset(std::move(X), std::move(Y)), tau};
  }
  throw InvalidArgument("simulate: unknown dgp '" + name +
                        "' (expected linear-ate, logistic-propensity-ate or quadratic-ame)");
}

namespace {

std::vector<EstimateSummary> replicate(const SimulateOptions& opts, int rep) {
  std::uint64_t state = opts.seed + static_cast<std::uint64_t>(rep);
  const std::uint64_t seed = splitmix64(state);
  Xoshiro256 rng(seed);
  SimDraw draw = draw_dgp(opts.dgp, opts.n, opts.tau, rng);

  PipelineConfig cfg;
  cfg.folds = opts.folds;
  cfg.cross_fit = opts.folds >= 2;
  cfg.seed = seed;
  cfg.ci_level = opts.ci_level;
  if (opts.dgp == "quadratic-ame")
    return grr_ame(draw.data, 0, polynomial_basis(2), make_builtin(GeneratorKind::squared), cfg)
        .summaries;
  const BasisPtr basis = treatment_interaction_basis(polynomial_basis(2), 0);
  return grr_ate(draw.data, basis, make_builtin(GeneratorKind::ukl, 1.0), cfg).summaries;
}

}  // namespace

SimulationReport run_simulation(const SimulateOptions& opts) {
  if (opts.reps < 1) throw InvalidArgument("simulate: reps must be >= 1");
  if (opts.n < 2) throw InvalidArgument("simulate: n must be >= 2");
  bool known = false;
  for (const auto& d : dgp_names()) known = known || d == opts.dgp;
  if (!known) {
    Xoshiro256 rng(0);
    draw_dgp(opts.dgp, 2, opts.tau, rng);
  }

  const auto reps = static_cast<std::size_t>(opts.reps);
  std::vector<std::vector<EstimateSummary>> results(reps);
  std::vector<std::string> errors(reps);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r; (r = next.fetch_add(1)) < opts.reps;) {
      try {
        results[static_cast<std::size_t>(r)] = replicate(opts, r);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(r)] = "rep " + std::to_string(r) + ": " + e.what();
      }
    }
  };
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(opts.reps));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SimulationReport report;
  report.options = opts;
  report.theta0 = opts.tau;
  std::vector<const std::vector<EstimateSummary>*> ok;
  for (std::size_t r = 0; r < reps; ++r) {
    if (!errors[r].empty())
      report.failures.push_back(errors[r]);
    else
      ok.push_back(&results[r]);
  }
  report.completed = static_cast<int>(ok.size());
  if (ok.empty()) return report;

  const auto R = static_cast<double>(ok.size());
  for (std::size_t k = 0; k < ok.front()->size(); ++k) {
    EstimatorStats st;
    st.estimator = (*ok.front())[k].estimator_name;
    st.non_orthogonal_se = (*ok.front())[k].non_orthogonal_se;
    double sum = 0.0, sq_err = 0.0, se_sum = 0.0, covered = 0.0;
    for (const auto* r : ok) {
      const auto& s = (*r)[k];
      sum += s.theta;
      sq_err += (s.theta - report.theta0) * (s.theta - report.theta0);
      se_sum += s.se;
      covered += (s.ci_lower <= report.theta0 && report.theta0 <= s.ci_upper) ? 1.0 : 0.0;
    }
    st.mean_theta = sum / R;
    st.bias = st.mean_theta - report.theta0;
    st.rmse = std::sqrt(sq_err / R);
    st.mean_se = se_sum / R;
    if (ok.size() > 1) {
      double var = 0.0;
      for (const auto* r : ok) var += ((*r)[k].theta - st.mean_theta) * ((*r)[k].theta - st.mean_theta);
      st.mc_se = std::sqrt(var / (R - 1.0) / R);
      st.coverage = covered / R;
    }
    report.stats.push_back(std::move(st));
  }
  return report;
}

json to_json(const SimulationReport& r) {
  json stats = json::array();
  for (const auto& s : r.stats) {
    json e = {{"estimator", s.estimator}, {"mean_theta", s.mean_theta}, {"bias", s.bias},
              {"rmse", s.rmse},           {"mc_se", s.mc_se},           {"mean_se", s.mean_se},
              {"non_orthogonal_se", s.non_orthogonal_se}};
    if (s.coverage) e["coverage"] = *s.coverage;
    stats.push_back(std::move(e));
  }
  return {{"dgp", r.options.dgp},   {"n", r.options.n},         {"reps", r.options.reps},
          {"seed", r.options.seed}, {"tau", r.options.tau},     {"folds", r.options.folds},
          {"theta0", r.theta0},     {"completed", r.completed}, {"failures", r.failures},
          {"estimators", stats}};
}

std::string report_text(const SimulationReport& r) {
  std::ostringstream os;
  os << "dgp " << r.options.dgp << ", n = " << r.options.n << ", reps = " << r.options.reps
     << " (" << r.completed << " completed), theta0 = " << r.theta0 << '\n';
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %12s %12s %12s %12s %12s %10s\n", "estimator", "mean",
                "bias", "rmse", "mc_se", "mean_se", "coverage");
  os << line;
  bool caveat = false;
  for (const auto& s : r.stats) {
    char cov[32] = "-";
    if (s.coverage) std::snprintf(cov, sizeof cov, "%.3f", *s.coverage);
    const std::string name = s.estimator + (s.non_orthogonal_se ? "*" : "");
    caveat = caveat || s.non_orthogonal_se;
    std::snprintf(line, sizeof line, "%-10s %12.6f %12.6f %12.6f %12.6f %12.6f %10s\n",
                  name.c_str(), s.mean_theta, s.bias, s.rmse, s.mc_se, s.mean_se, cov);
    os << line;
  }
  if (caveat) os << "* plug-in standard error of a non-orthogonal estimator\n";
  for (const auto& f : r.failures) os << "failed: " << f << '\n';
  return os.str();
}

int simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err,
             const std::optional<std::string>& json_out) {
  try {
    const SimulationReport report = run_simulation(opts);
    out << report_text(report);
    if (json_out) {
      std::ofstream f(*json_out);
      if (!f) throw InvalidArgument("cannot write report '" + *json_out + "'");
      f << to_json(report).dump(2) << '\n';
    }
    if (report.completed == 0) {
      err << "error: every replication failed\n";
      return kNumerical;
    }
    return kOk;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace genriesz::cli
