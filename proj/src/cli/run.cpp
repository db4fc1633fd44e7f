#include "genriesz/cli.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <ostream>

namespace genriesz::cli {

using nlohmann::json;

namespace {

/// `count` distinct rows of Z chosen by a partial Fisher-Yates shuffle.
Matrix sample_rows(const Matrix& Z, Index count, std::uint64_t seed) {
  const Index n = Z.rows();
  count = std::min(count, n);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Xoshiro256 rng(seed);
  for (Index i = 0; i < count; ++i) {
    const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  Matrix out(count, Z.cols());
  for (Index i = 0; i < count; ++i) out.row(i) = Z.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

BasisPtr build_basis(const BasisConfig& b, const Dataset& data, bool default_interact) {
  const bool interact = b.interact.value_or(default_interact);
  if (interact && !data.treat_col())
    throw InvalidArgument("config: basis.interact needs a treatment column");
  const Matrix Z = interact ? data.Z() : data.X();
  if (interact && Z.cols() == 0)
    throw InvalidArgument("config: basis.interact needs covariates besides the treatment");
  BasisPtr base;
  if (b.kind == "polynomial")
    base = polynomial_basis(b.degree);
  else if (b.kind == "rff")
    base = rff_basis(b.dim, b.bandwidth, b.seed, Z.cols());
  else if (b.kind == "nystroem")
    base = nystroem_basis(sample_rows(Z, b.landmarks, b.seed), b.bandwidth);
  else if (b.kind == "knn")
    base = knn_catchment_basis(sample_rows(Z, b.landmarks, b.seed), b.M);
  else
    throw InvalidArgument("config: unknown basis kind '" + b.kind + "'");
  return interact ? treatment_interaction_basis(base, *data.treat_col()) : base;
}

PipelineConfig pipeline_config(const RunConfig& c, const Dataset& data, bool default_interact) {
  PipelineConfig p;
  p.estimators.clear();
  for (const auto& e : c.estimators) p.estimators.push_back(parse_estimator(e));
  p.cross_fit = c.cross_fit;
  p.folds = c.folds;
  p.outcome_mode = parse_outcome_mode(c.outcome.mode);
  if (c.outcome.basis) p.outcome_basis = build_basis(*c.outcome.basis, data, default_interact);
  if (c.outcome.family) p.tmle_family = parse_outcome_family(*c.outcome.family);
  p.riesz_method = parse_riesz_method(c.riesz_method);
  p.M = c.M;
  p.standardize = c.standardize;
  p.riesz_penalty = {c.riesz_penalty.p, c.riesz_penalty.lam, c.riesz_penalty.mu};
  p.outcome_penalty = {c.outcome_penalty.p, c.outcome_penalty.lam, c.outcome_penalty.mu};
  p.seed = c.seed;
  p.ci_level = c.ci_level;
  p.solver.max_iter = c.solver.max_iter;
  p.solver.grad_tol = c.solver.grad_tol;
  return p;
}

}  // namespace

PreparedRun prepare(const RunConfig& cfg, const CsvTable& table) {
  cfg.validate();
  const Index rows = table.values.rows();
  auto col = [&](const std::string& name) {
    try {
      return table.column(name);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(cfg.data_path + ": " + e.what());
    }
  };

  std::vector<std::string> reserved;
  for (const auto& c : {cfg.outcome_col, cfg.y0_col, cfg.y1_col, cfg.treat_col})
    if (c) reserved.push_back(*c);
  std::vector<std::string> columns;
  if (cfg.treat_col) columns.push_back(*cfg.treat_col);
  if (cfg.covariates.empty()) {
    for (const auto& h : table.header)
      if (std::find(reserved.begin(), reserved.end(), h) == reserved.end()) columns.push_back(h);
  } else {
    for (const auto& h : cfg.covariates) {
      if (std::find(reserved.begin(), reserved.end(), h) != reserved.end())
        throw InvalidArgument("config: covariate '" + h + "' is also the outcome or treatment column");
      columns.push_back(h);
    }
  }

  Matrix X(rows, static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    X.col(static_cast<Index>(j)) = table.values.col(col(columns[j]));

  if (cfg.treat_col) {
    const Index t = col(*cfg.treat_col);
    for (Index i = 0; i < rows; ++i) {
      const double v = table.values(i, t);
      if (v != 0.0 && v != 1.0)
        throw InvalidArgument(cfg.data_path + ":" + std::to_string(table.line_of(i)) +
                              ": treatment column '" + *cfg.treat_col + "' has value " +
                              json(v).dump() + " (must be 0 or 1)");
    }
  }
  if (rows < 2) throw InvalidArgument(cfg.data_path + ": at least 2 data rows are required");

  Vector Y;
  if (cfg.functional == "did")
    Y = did_transform(table.values.col(col(*cfg.y0_col)), table.values.col(col(*cfg.y1_col)));
  else
    Y = table.values.col(col(*cfg.outcome_col));

  const std::optional<Index> treat = cfg.treat_col ? std::optional<Index>(0) : std::nullopt;
  Dataset data(std::move(X), std::move(Y), treat);

  std::optional<FunctionalSpec> m;
  if (cfg.functional == "ate") {
    m = ate_functional(treat);
  } else if (cfg.functional == "att" || cfg.functional == "did") {
    m = att_functional(data, treat);
  } else {
    const auto it = std::find(columns.begin(), columns.end(), *cfg.coordinate);
    if (it == columns.end())
      throw InvalidArgument("config: coordinate '" + *cfg.coordinate + "' is not a covariate");
    m = ame_functional(static_cast<Index>(it - columns.begin()));
  }

  const bool default_interact = treat.has_value() && cfg.functional != "ame";
  BasisPtr basis = build_basis(cfg.basis, data, default_interact);
  GeneratorSpec gen =
      make_builtin(parse_generator_kind(cfg.generator.kind), cfg.generator.C, cfg.generator.omega);
  if (treat && cfg.functional != "ame") gen = gen.with_branch(treatment_branch(*treat));
  PipelineConfig pipe = pipeline_config(cfg, data, default_interact);
  return PreparedRun{std::move(data), std::move(*m), std::move(basis), std::move(gen),
                     std::move(pipe), std::move(columns)};
}

PipelineResult execute(const PreparedRun& run) {
  return run_pipeline(run.data, run.functional, run.basis, run.generator, run.pipeline);
}

json result_document(const RunConfig& cfg, const PreparedRun& run, const PipelineResult& result,
                     const std::string& timestamp) {
  json doc;
  doc["schema"] = kResultSchema;
  doc["version"] = kVersion;
  doc["timestamp"] = timestamp;
  doc["config"] = to_json(cfg);
  doc["data"] = {{"n", run.data.n()},
                 {"columns", run.columns},
                 {"treat_col", run.data.treat_col() ? json(0) : json(nullptr)}};
  doc["functional"] = {{"name", run.functional.name()}, {"params", run.functional.params()}};
  doc["generator"] = {{"kind", to_string(run.generator.kind())},
                      {"C", run.generator.C()},
                      {"omega", run.generator.omega()},
                      {"warnings", run.generator.warnings()}};
  doc["basis"] = run.basis->metadata();
  const json body = to_json(result);
  for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
  return doc;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg = load_config(opts.config_path, opts.overrides);
    if (opts.ci_level) cfg.ci_level = *opts.ci_level;
    if (opts.out) cfg.out = *opts.out;
    cfg.validate();
    const CsvTable table = read_csv(cfg.data_path);
    const PreparedRun prepared = prepare(cfg, table);
    const PipelineResult result = execute(prepared);

    const std::string path = cfg.out.value_or("genriesz-result.json");
    const json doc = result_document(cfg, prepared, result, utc_timestamp());
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot write results document '" + path + "'");
    f << doc.dump(2) << '\n';
    if (!f) throw InvalidArgument("failed writing results document '" + path + "'");

    if (!opts.quiet) {
      out << result.summary_text();
      for (const auto& s : result.summaries)
        if (s.non_orthogonal_se) {
          out << "(ra/rw standard errors ignore nuisance estimation error)\n";
          break;
        }
    }
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    return kOk;
  } catch (const InvalidGenerator& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const DomainError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace genriesz::cli
