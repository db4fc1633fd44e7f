#pragma once

#include "genriesz/estimate.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace genriesz::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kResultSchema = "genriesz-result/1";

enum ExitCode { kOk = 0, kValidation = 2, kNumerical = 3 };

// CSV ------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;            // rows x columns
  std::vector<Index> lines;  // source line of each row

  /// Column index by name; throws InvalidArgument naming the column.
  Index column(const std::string& name) const;
  Index line_of(Index row) const { return lines[static_cast<std::size_t>(row)]; }
};

/// Comma-separated, header required, no missing or non-finite cells.
/// Errors are InvalidArgument with "<source>:<line>: ..." messages.
CsvTable parse_csv(std::istream& in, const std::string& source = "<csv>");
CsvTable read_csv(const std::string& path);

// Run configuration ----------------------------------------------------------

struct BasisConfig {
  std::string kind = "polynomial";  // polynomial | rff | nystroem | knn
  int degree = 2;
  std::optional<bool> interact;  // [(1-d) psi, d psi]; default on when a treatment is set
  Index dim = 100;               // rff
  double bandwidth = 1.0;        // rff, nystroem
  Index landmarks = 50;          // nystroem landmarks / knn anchors
  Index M = 1;                   // knn
  std::uint64_t seed = 0;

  bool operator==(const BasisConfig&) const = default;
};

struct GeneratorConfig {
  std::string kind = "squared";
  double C = 0.0;
  double omega = 1.0;

  bool operator==(const GeneratorConfig&) const = default;
};

struct PenaltyConfig {
  double p = 2.0;
  double lam = 1e-3;
  double mu = 1e-6;

  bool operator==(const PenaltyConfig&) const = default;
};

struct OutcomeConfig {
  std::string mode = "shared";
  std::optional<std::string> family;
  std::optional<BasisConfig> basis;  // required for mode = separate

  bool operator==(const OutcomeConfig&) const = default;
};

struct SolverConfig {
  int max_iter = 500;
  double grad_tol = 1e-8;

  bool operator==(const SolverConfig&) const = default;
};

struct RunConfig {
  std::string data_path;
  std::optional<std::string> outcome_col;
  std::optional<std::string> y0_col;  // did
  std::optional<std::string> y1_col;  // did
  std::optional<std::string> treat_col;
  std::vector<std::string> covariates;  // empty: all remaining columns
  std::string functional = "ate";       // ate | att | did | ame
  std::optional<std::string> coordinate;  // ame: covariate name
  BasisConfig basis;
  GeneratorConfig generator;
  PenaltyConfig riesz_penalty;
  PenaltyConfig outcome_penalty;
  OutcomeConfig outcome;
  std::vector<std::string> estimators = {"ra", "rw", "arw", "tmle"};
  bool cross_fit = true;
  int folds = 5;
  std::uint64_t seed = 0;
  std::string riesz_method = "glm";
  Index M = 1;
  bool standardize = false;
  SolverConfig solver;
  std::optional<std::string> out;  // results document path
  double ci_level = 0.95;

  bool operator==(const RunConfig&) const = default;

  /// Semantic checks that do not need the data.
  void validate() const;
};

/// Strict: unknown keys and wrong types are InvalidArgument.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

/// Applies "a.b.c=value" to a config object. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Reads a JSON config, applies overrides, resolves data_path relative to the
/// config file, and validates.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Pipeline assembly ----------------------------------------------------------

struct PreparedRun {
  Dataset data;
  FunctionalSpec functional;
  BasisPtr basis;
  GeneratorSpec generator;
  PipelineConfig pipeline;
  std::vector<std::string> columns;  // names of the columns of X
};

PreparedRun prepare(const RunConfig& cfg, const CsvTable& table);
PipelineResult execute(const PreparedRun& run);

/// Results document (schema genriesz-result/1).
nlohmann::json result_document(const RunConfig& cfg, const PreparedRun& run,
                               const PipelineResult& result, const std::string& timestamp);

std::string utc_timestamp();

struct RunOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out;
  bool quiet = false;
  std::optional<double> ci_level;
};

/// Full `run` command; returns the process exit code.
int run(const RunOptions& opts, std::ostream& out, std::ostream& err);

// Simulation -----------------------------------------------------------------

struct SimDraw {
  Dataset data;
  double theta0;
};

/// linear-ate | logistic-propensity-ate | quadratic-ame.
const std::vector<std::string>& dgp_names();
SimDraw draw_dgp(const std::string& name, Index n, double tau, Xoshiro256& rng);

struct SimulateOptions {
  std::string dgp = "linear-ate";
  Index n = 500;
  int reps = 200;
  std::uint64_t seed = 0;
  double tau = 1.0;
  int folds = 5;
  unsigned threads = 0;  // 0: hardware concurrency
  double ci_level = 0.95;
};

struct EstimatorStats {
  std::string estimator;
  double mean_theta = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double mc_se = 0.0;  // Monte-Carlo SE of the mean estimate
  double mean_se = 0.0;
  std::optional<double> coverage;  // absent when reps == 1
  bool non_orthogonal_se = false;
};

struct SimulationReport {
  SimulateOptions options;
  double theta0 = 0.0;
  int completed = 0;
  std::vector<std::string> failures;  // one message per failed replication
  std::vector<EstimatorStats> stats;
};

/// Replication r uses the seed splitmix64(seed + r) for data and folds.
SimulationReport run_simulation(const SimulateOptions& opts);
nlohmann::json to_json(const SimulationReport& report);
std::string report_text(const SimulationReport& report);

/// Full `simulate` command; returns the process exit code.
int simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err,
             const std::optional<std::string>& json_out = std::nullopt);

}  // namespace genriesz::cli
