#include "genriesz/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

namespace genriesz::cli {

using nlohmann::json;

namespace {

/// Reads the members of one JSON object and rejects keys it was not asked for.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidArgument(where() + "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, out, path_ + key);
  }

  template <class T>
  void require(const char* key, T& out) {
    if (!j_.contains(key)) throw InvalidArgument(where() + "missing required key '" + key + "'");
    get(key, out);
  }

  /// Marks a key as handled elsewhere.
  void mark(const char* key) { seen_.insert(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw InvalidArgument("config: unknown key '" + path_ + it.key() + "'");
  }

 private:
  std::string where() const {
    return "config" + (path_.empty() ? std::string() : " '" + path_.substr(0, path_.size() - 1) + "'") +
           ": ";
  }

  [[noreturn]] static void type_error(const std::string& key, const char* expected) {
    throw InvalidArgument("config: key '" + key + "' must be " + expected);
  }

  static void read(const json& v, std::string& out, const std::string& key) {
    if (!v.is_string()) type_error(key, "a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, bool& out, const std::string& key) {
    if (!v.is_boolean()) type_error(key, "a boolean");
    out = v.get<bool>();
  }
  static void read(const json& v, double& out, const std::string& key) {
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
  }
  static void read(const json& v, int& out, const std::string& key) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    out = v.get<int>();
  }
  static void read(const json& v, long& out, const std::string& key) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    out = v.get<long>();
  }
  static void read(const json& v, std::uint64_t& out, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      type_error(key, "a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, std::vector<std::string>& out, const std::string& key) {
    if (!v.is_array()) type_error(key, "an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) type_error(key, "an array of strings");
      out.push_back(e.get<std::string>());
    }
  }
  static void read(const json& v, BasisConfig& out, const std::string& key);
  template <class T>
  static void read(const json& v, std::optional<T>& out, const std::string& key) {
    if (v.is_null()) {
      out.reset();
      return;
    }
    T value{};
    read(v, value, key);
    out = std::move(value);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

BasisConfig basis_from_json(const json& j, const std::string& path) {
  BasisConfig b;
  StrictObject o(j, path + ".");
  o.get("kind", b.kind);
  o.get("degree", b.degree);
  o.get("interact", b.interact);
  o.get("dim", b.dim);
  o.get("bandwidth", b.bandwidth);
  o.get("landmarks", b.landmarks);
  o.get("M", b.M);
  o.get("seed", b.seed);
  o.finish();
  return b;
}

void StrictObject::read(const json& v, BasisConfig& out, const std::string& key) {
  out = basis_from_json(v, key);
}

PenaltyConfig penalty_from_json(const json& j, const std::string& path) {
  PenaltyConfig p;
  StrictObject o(j, path + ".");
  o.get("p", p.p);
  o.get("lam", p.lam);
  o.get("mu", p.mu);
  o.finish();
  return p;
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json to_json(const BasisConfig& b) {
  return {{"kind", b.kind},           {"degree", b.degree}, {"interact", opt(b.interact)},
          {"dim", b.dim},             {"bandwidth", b.bandwidth},
          {"landmarks", b.landmarks}, {"M", b.M},           {"seed", b.seed}};
}

json to_json(const PenaltyConfig& p) { return {{"p", p.p}, {"lam", p.lam}, {"mu", p.mu}}; }

void check_basis(const BasisConfig& b, const std::string& where) {
  static const std::vector<std::string> kinds = {"polynomial", "rff", "nystroem", "knn"};
  if (std::find(kinds.begin(), kinds.end(), b.kind) == kinds.end())
    throw InvalidArgument("config: " + where + ".kind must be one of polynomial, rff, nystroem, knn");
  if (b.degree < 1) throw InvalidArgument("config: " + where + ".degree must be >= 1");
  if (b.dim < 1) throw InvalidArgument("config: " + where + ".dim must be >= 1");
  if (!(b.bandwidth > 0.0)) throw InvalidArgument("config: " + where + ".bandwidth must be > 0");
  if (b.landmarks < 1) throw InvalidArgument("config: " + where + ".landmarks must be >= 1");
  if (b.M < 1) throw InvalidArgument("config: " + where + ".M must be >= 1");
}

PenaltySpec to_spec(const PenaltyConfig& p) { return {p.p, p.lam, p.mu}; }

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  StrictObject o(j, "");
  o.require("data_path", c.data_path);
  o.get("outcome_col", c.outcome_col);
  o.get("y0_col", c.y0_col);
  o.get("y1_col", c.y1_col);
  o.get("treat_col", c.treat_col);
  o.get("covariates", c.covariates);
  o.get("functional", c.functional);
  o.get("coordinate", c.coordinate);
  o.get("basis", c.basis);
  for (const char* key : {"generator", "riesz_penalty", "outcome_penalty", "outcome", "solver"})
    o.mark(key);
  if (j.contains("generator") && !j.at("generator").is_null()) {
    StrictObject g(j.at("generator"), "generator.");
    g.get("kind", c.generator.kind);
    g.get("C", c.generator.C);
    g.get("omega", c.generator.omega);
    g.finish();
  }
  if (j.contains("riesz_penalty")) c.riesz_penalty = penalty_from_json(j.at("riesz_penalty"), "riesz_penalty");
  if (j.contains("outcome_penalty"))
    c.outcome_penalty = penalty_from_json(j.at("outcome_penalty"), "outcome_penalty");
  if (j.contains("outcome")) {
    StrictObject out(j.at("outcome"), "outcome.");
    out.get("mode", c.outcome.mode);
    out.get("family", c.outcome.family);
    out.get("basis", c.outcome.basis);
    out.finish();
  }
  o.get("estimators", c.estimators);
  o.get("cross_fit", c.cross_fit);
  o.get("folds", c.folds);
  o.get("seed", c.seed);
  o.get("riesz_method", c.riesz_method);
  o.get("M", c.M);
  o.get("standardize", c.standardize);
  if (j.contains("solver")) {
    StrictObject s(j.at("solver"), "solver.");
    s.get("max_iter", c.solver.max_iter);
    s.get("grad_tol", c.solver.grad_tol);
    s.finish();
  }
  o.get("out", c.out);
  o.get("ci_level", c.ci_level);
  o.finish();
  return c;
}

json to_json(const RunConfig& c) {
  json estimators = c.estimators;
  json covariates = c.covariates;
  return {{"data_path", c.data_path},
          {"outcome_col", opt(c.outcome_col)},
          {"y0_col", opt(c.y0_col)},
          {"y1_col", opt(c.y1_col)},
          {"treat_col", opt(c.treat_col)},
          {"covariates", covariates},
          {"functional", c.functional},
          {"coordinate", opt(c.coordinate)},
          {"basis", to_json(c.basis)},
          {"generator", {{"kind", c.generator.kind}, {"C", c.generator.C}, {"omega", c.generator.omega}}},
          {"riesz_penalty", to_json(c.riesz_penalty)},
          {"outcome_penalty", to_json(c.outcome_penalty)},
          {"outcome",
           {{"mode", c.outcome.mode},
            {"family", opt(c.outcome.family)},
            {"basis", c.outcome.basis ? to_json(*c.outcome.basis) : json(nullptr)}}},
          {"estimators", estimators},
          {"cross_fit", c.cross_fit},
          {"folds", c.folds},
          {"seed", c.seed},
          {"riesz_method", c.riesz_method},
          {"M", c.M},
          {"standardize", c.standardize},
          {"solver", {{"max_iter", c.solver.max_iter}, {"grad_tol", c.solver.grad_tol}}},
          {"out", opt(c.out)},
          {"ci_level", c.ci_level}};
}

void RunConfig::validate() const {
  if (data_path.empty()) throw InvalidArgument("config: data_path is empty");
  if (functional != "ate" && functional != "att" && functional != "did" && functional != "ame")
    throw InvalidArgument("config: functional must be one of ate, att, did, ame");
  if (functional == "did") {
    if (!y0_col || !y1_col) throw InvalidArgument("config: did requires y0_col and y1_col");
    if (outcome_col) throw InvalidArgument("config: did uses y0_col/y1_col instead of outcome_col");
  } else if (!outcome_col) {
    throw InvalidArgument("config: outcome_col is required");
  }
  if (functional != "ame" && !treat_col)
    throw InvalidArgument("config: " + functional + " requires treat_col");
  if (functional == "ame" && !coordinate) throw InvalidArgument("config: ame requires coordinate");
  if (functional != "ame" && coordinate)
    throw InvalidArgument("config: coordinate is only used by ame");
  check_basis(basis, "basis");
  if (outcome.basis) check_basis(*outcome.basis, "outcome.basis");
  parse_generator_kind(generator.kind);
  const PipelineConfig pipe = [&] {
    PipelineConfig p;
    p.estimators.clear();
    for (const auto& e : estimators) p.estimators.push_back(parse_estimator(e));
    p.cross_fit = cross_fit;
    p.folds = folds;
    p.outcome_mode = parse_outcome_mode(outcome.mode);
    if (outcome.family) p.tmle_family = parse_outcome_family(*outcome.family);
    p.riesz_method = parse_riesz_method(riesz_method);
    p.M = M;
    p.standardize = standardize;
    p.riesz_penalty = to_spec(riesz_penalty);
    p.outcome_penalty = to_spec(outcome_penalty);
    p.solver.max_iter = solver.max_iter;
    p.solver.grad_tol = solver.grad_tol;
    p.ci_level = ci_level;
    return p;
  }();
  if (pipe.outcome_mode == OutcomeMode::separate && !outcome.basis)
    throw InvalidArgument("config: outcome.mode = separate requires outcome.basis");
  if (pipe.outcome_mode != OutcomeMode::separate && outcome.basis)
    throw InvalidArgument("config: outcome.basis is only used with outcome.mode = separate");
  if (pipe.riesz_method == RieszMethod::nn_matching && functional != "ate")
    throw InvalidArgument("config: riesz_method nn_matching supports functional ate only");
  try {
    pipe.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InvalidArgument("override '" + assignment + "' must have the form key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw InvalidArgument("override '" + assignment + "': empty key segment");
    if (!node->is_object()) {
      if (!node->is_null())
        throw InvalidArgument("override '" + assignment + "': '" + path.substr(0, start - 1) +
                              "' is not an object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  RunConfig cfg = config_from_json(j);
  namespace fs = std::filesystem;
  const fs::path data(cfg.data_path);
  if (data.is_relative() && !cfg.data_path.empty())
    cfg.data_path = (fs::path(path).parent_path() / data).lexically_normal().string();
  cfg.validate();
  return cfg;
}

}  // namespace genriesz::cli
