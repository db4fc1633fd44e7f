#include "genriesz/generators.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace genriesz {

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::squared: return "squared";
    case GeneratorKind::ukl: return "ukl";
    case GeneratorKind::bkl: return "bkl";
    case GeneratorKind::bp: return "bp";
    case GeneratorKind::pu: return "pu";
    case GeneratorKind::custom: return "custom";
  }
  return "?";
}

GeneratorKind parse_generator_kind(const std::string& name) {
  if (name == "squared" || name == "sq") return GeneratorKind::squared;
  if (name == "ukl") return GeneratorKind::ukl;
  if (name == "bkl") return GeneratorKind::bkl;
  if (name == "bp") return GeneratorKind::bp;
  if (name == "pu") return GeneratorKind::pu;
  throw InvalidArgument("unknown generator '" + name + "'");
}

BranchFn treatment_branch(Index treat_col) {
  return [treat_col](const RowVector& x) { return x(treat_col) == 1.0 ? 1 : -1; };
}

GeneratorSpec::GeneratorSpec(GeneratorKind kind, double C, double omega, Parts parts,
                             BranchFn branch_fn, bool sign_extension)
    : kind_(kind),
      C_(C),
      omega_(omega),
      parts_(std::move(parts)),
      branch_fn_(std::move(branch_fn)),
      sign_extension_(sign_extension) {}

GeneratorSpec GeneratorSpec::with_branch(BranchFn branch_fn) const {
  GeneratorSpec out = *this;
  out.branch_fn_ = std::move(branch_fn);
  return out;
}

int GeneratorSpec::branch(const RowVector& x) const {
  if (!sign_extension_ || !branch_fn_) return 1;
  const int s = branch_fn_(x);
  if (s != 1 && s != -1) throw InvalidArgument("branch_fn must return +1 or -1");
  return s;
}

std::vector<int> GeneratorSpec::branches(const Matrix& X) const {
  std::vector<int> out(static_cast<std::size_t>(X.rows()), 1);
  if (!sign_extension_ || !branch_fn_) return out;
  for (Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = branch(X.row(i));
  return out;
}

void GeneratorSpec::domain_fail(const char* what, double value, int s, const Interval& iv) const {
  std::ostringstream os;
  os << to_string(kind_) << " generator: " << what << ' ' << value << " outside ("
     << (s > 0 ? iv.lo : -iv.hi) << ", " << (s > 0 ? iv.hi : -iv.lo) << ") on the "
     << (s > 0 ? '+' : '-') << " branch";
  throw DomainError(os.str());
}

bool GeneratorSpec::alpha_in_domain(double alpha, int s) const {
  s = effective(s);
  return parts_.alpha_domain.contains(s * alpha);
}

bool GeneratorSpec::v_in_range(double v, int s) const {
  s = effective(s);
  return parts_.link_range.contains(s * v);
}

double GeneratorSpec::g(double alpha, int s) const {
  s = effective(s);
  if (!parts_.alpha_domain.contains(s * alpha)) domain_fail("alpha", alpha, s, parts_.alpha_domain);
  return parts_.g(s * alpha);
}

double GeneratorSpec::link(double alpha, int s) const {
  s = effective(s);
  if (!parts_.alpha_domain.contains(s * alpha)) domain_fail("alpha", alpha, s, parts_.alpha_domain);
  return s * parts_.link(s * alpha);
}

double GeneratorSpec::inv_link(double v, int s) const {
  s = effective(s);
  if (!parts_.link_range.contains(s * v)) domain_fail("link value", v, s, parts_.link_range);
  return s * parts_.inv_link(s * v);
}

double GeneratorSpec::inv_link_derivative(double v, int s) const {
  s = effective(s);
  if (!parts_.link_range.contains(s * v)) domain_fail("link value", v, s, parts_.link_range);
  return parts_.inv_link_derivative(s * v);
}

double GeneratorSpec::conjugate(double v, int s) const {
  s = effective(s);
  if (!parts_.link_range.contains(s * v)) domain_fail("link value", v, s, parts_.link_range);
  return parts_.conjugate(s * v);
}

double GeneratorSpec::conjugate_or_inf(double v, int s) const {
  s = effective(s);
  if (!parts_.link_range.contains(s * v)) return std::numeric_limits<double>::infinity();
  try {
    const double val = parts_.conjugate(s * v);
    return std::isfinite(val) ? val : std::numeric_limits<double>::infinity();
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

double GeneratorSpec::clamp_v(double v, int s, double margin) const {
  s = effective(s);
  const double w = s * v;
  const Interval& r = parts_.link_range;
  double clamped = w;
  if (std::isfinite(r.lo) && w <= r.lo + margin) clamped = r.lo + margin;
  if (std::isfinite(r.hi) && w >= r.hi - margin) clamped = r.hi - margin;
  return s * clamped;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

GeneratorSpec::Parts squared_parts(double C) {
  GeneratorSpec::Parts p;
  p.g = [C](double a) { return (a - C) * (a - C); };
  p.link = [C](double a) { return 2.0 * (a - C); };
  p.inv_link = [C](double v) { return C + v / 2.0; };
  p.inv_link_derivative = [](double) { return 0.5; };
  p.conjugate = [C](double v) { return C * v + v * v / 4.0; };
  p.alpha_domain = {-kInf, kInf};
  p.link_range = {-kInf, kInf};
  return p;
}

GeneratorSpec::Parts ukl_parts(double C) {
  GeneratorSpec::Parts p;
  p.g = [C](double a) { return (a - C) * std::log(a - C) - a; };
  p.link = [C](double a) { return std::log(a - C); };
  p.inv_link = [C](double v) { return std::exp(v) + C; };
  p.inv_link_derivative = [](double v) { return std::exp(v); };
  p.conjugate = [C](double v) { return C * v + std::exp(v) + C; };
  p.alpha_domain = {C, kInf};
  p.link_range = {-kInf, kInf};
  return p;
}

GeneratorSpec::Parts bkl_parts(double C) {
  GeneratorSpec::Parts p;
  p.g = [C](double a) { return (a - C) * std::log(a - C) - (a + C) * std::log(a + C); };
  // log((a - C) / (a + C)) without cancellation for large a.
  p.link = [C](double a) { return std::log1p(-2.0 * C / (a + C)); };
  p.inv_link = [C](double v) { return C * (1.0 + std::exp(v)) / -std::expm1(v); };
  p.inv_link_derivative = [C](double v) {
    const double em1 = std::expm1(v);
    return 2.0 * C * std::exp(v) / (em1 * em1);
  };
  // With a = inv_link(v): a v - g(a) = C v + 2C log(a + C), a + C = 2C / (1 - e^v).
  p.conjugate = [C](double v) {
    return C * v + 2.0 * C * std::log(2.0 * C) - 2.0 * C * std::log(-std::expm1(v));
  };
  p.alpha_domain = {C, kInf};
  p.link_range = {-kInf, 0.0};
  return p;
}

GeneratorSpec::Parts bp_parts(double C, double w) {
  GeneratorSpec::Parts p;
  p.g = [C, w](double a) {
    const double u = a - C;
    return (std::pow(u, 1.0 + w) - u) / w - u;
  };
  p.link = [C, w](double a) { return (1.0 + w) * std::expm1(w * std::log(a - C)) / w; };
  // (1 + w v / (1 + w)) ^ (1 / w)
  p.inv_link = [C, w](double v) { return C + std::exp(std::log1p(w * v / (1.0 + w)) / w); };
  p.inv_link_derivative = [w](double v) {
    return std::exp((1.0 / w - 1.0) * std::log1p(w * v / (1.0 + w))) / (1.0 + w);
  };
  p.conjugate = [C, w](double v) {
    return C * v + std::exp((1.0 + w) / w * std::log1p(w * v / (1.0 + w)));
  };
  p.alpha_domain = {C, kInf};
  p.link_range = {-(1.0 + w) / w, kInf};
  return p;
}

GeneratorSpec::Parts pu_parts(double C) {
  GeneratorSpec::Parts p;
  p.g = [C](double a) { return C * (a * std::log(a) + (1.0 - a) * std::log1p(-a)); };
  p.link = [C](double a) { return C * (std::log(a) - std::log1p(-a)); };
  p.inv_link = [C](double v) { return 1.0 / (1.0 + std::exp(-v / C)); };
  p.inv_link_derivative = [C](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v / C));
    return s * (1.0 - s) / C;
  };
  p.conjugate = [C](double v) { return C * softplus(v / C); };
  p.alpha_domain = {0.0, 1.0};
  p.link_range = {-kInf, kInf};
  return p;
}

}  // namespace

GeneratorSpec make_builtin(GeneratorKind kind, double C, double omega, BranchFn branch_fn) {
  if (!std::isfinite(C)) throw InvalidArgument("generator: C must be finite");
  switch (kind) {
    case GeneratorKind::squared:
      return GeneratorSpec(kind, C, omega, squared_parts(C), std::move(branch_fn), true);
    case GeneratorKind::ukl:
      if (C < 0.0) throw InvalidArgument("ukl generator: C must be >= 0");
      return GeneratorSpec(kind, C, omega, ukl_parts(C), std::move(branch_fn), true);
    case GeneratorKind::bkl:
      // g is identically zero at C = 0.
      if (!(C > 0.0)) throw InvalidArgument("bkl generator: C must be > 0");
      return GeneratorSpec(kind, C, omega, bkl_parts(C), std::move(branch_fn), true);
    case GeneratorKind::bp:
      if (C < 0.0) throw InvalidArgument("bp generator: C must be >= 0");
      if (!(omega > 0.0) || !std::isfinite(omega))
        throw InvalidArgument("bp generator: omega must be > 0");
      return GeneratorSpec(kind, C, omega, bp_parts(C, omega), std::move(branch_fn), true);
    case GeneratorKind::pu:
      if (!(C > 0.0)) throw InvalidArgument("pu generator: C must be > 0");
      return GeneratorSpec(kind, C, omega, pu_parts(C), std::move(branch_fn), false);
    case GeneratorKind::custom:
      break;
  }
  throw InvalidArgument("make_builtin: custom generators are built with numeric_generator");
}

// ---------------------------------------------------------------------------
// Numeric generator.

namespace {

struct NumericCore {
  std::function<double(double)> g;
  Interval dom;

  double step(double a) const {
    double h = std::max(1e-6, 1e-6 * std::abs(a));
    if (std::isfinite(dom.lo)) h = std::min(h, (a - dom.lo) / 2.0);
    if (std::isfinite(dom.hi)) h = std::min(h, (dom.hi - a) / 2.0);
    return h;
  }

  double link(double a) const {
    const double h = step(a);
    return (g(a + h) - g(a - h)) / (2.0 * h);
  }

  double curvature(double a) const {
    double h = std::max(1e-4, 1e-4 * std::abs(a));
    if (std::isfinite(dom.lo)) h = std::min(h, (a - dom.lo) / 2.0);
    if (std::isfinite(dom.hi)) h = std::min(h, (dom.hi - a) / 2.0);
    return (g(a + h) - 2.0 * g(a) + g(a - h)) / (h * h);
  }

  double interior() const {
    const bool flo = std::isfinite(dom.lo), fhi = std::isfinite(dom.hi);
    if (flo && fhi) return 0.5 * (dom.lo + dom.hi);
    if (flo) return dom.lo + 1.0;
    if (fhi) return dom.hi - 1.0;
    return 0.0;
  }

  [[noreturn]] void not_bracketed(double v) const {
    std::ostringstream os;
    os << "custom generator: link value " << v << " is not attained on (" << dom.lo << ", "
       << dom.hi << ") on the + branch";
    throw DomainError(os.str());
  }

  // Next trial point when pushing the bracket up (dir > 0) or down.
  double expand(double x0, double x, int k, int dir) const {
    const double bound = dir > 0 ? dom.hi : dom.lo;
    if (!std::isfinite(bound)) return x0 + dir * std::ldexp(1.0, k);
    return x + (bound - x) / 2.0;
  }

  double inverse(double v) const {
    if (!std::isfinite(v)) not_bracketed(v);
    const double x0 = interior();
    double lo = x0, hi = x0;
    double f0 = link(x0);
    if (f0 == v) return x0;
    const int dir = f0 < v ? 1 : -1;
    double x = x0;
    bool found = false;
    for (int k = 0; k < 200; ++k) {
      const double next = expand(x0, x, k, dir);
      if (next == x || !dom.contains(next)) break;
      const double fx = link(next);
      if (!std::isfinite(fx)) break;
      if ((dir > 0 && fx < f0) || (dir < 0 && fx > f0))
        throw InvalidGenerator("custom generator: non-monotone link detected");
      if (dir > 0) {
        lo = x;
        hi = next;
      } else {
        hi = x;
        lo = next;
      }
      x = next;
      f0 = fx;
      if ((dir > 0 && fx >= v) || (dir < 0 && fx <= v)) {
        found = true;
        break;
      }
    }
    if (!found) not_bracketed(v);
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (link(mid) < v)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }
};

}  // namespace

GeneratorSpec numeric_generator(std::function<double(double)> g_fn, Interval domain,
                                BranchFn branch_fn) {
  if (!g_fn) throw InvalidArgument("numeric_generator: g_fn is empty");
  if (!(domain.lo < domain.hi)) throw InvalidArgument("numeric_generator: empty domain");
  auto core = std::make_shared<const NumericCore>(NumericCore{std::move(g_fn), domain});

  GeneratorSpec::Parts p;
  p.g = [core](double a) { return core->g(a); };
  p.link = [core](double a) { return core->link(a); };
  p.inv_link = [core](double v) { return core->inverse(v); };
  p.inv_link_derivative = [core](double v) { return 1.0 / core->curvature(core->inverse(v)); };
  p.conjugate = [core](double v) {
    const double a = core->inverse(v);
    return a * v - core->g(a);
  };
  p.alpha_domain = domain;
  p.link_range = {-kInf, kInf};  // enforced lazily by the bracket search

  GeneratorSpec gen(GeneratorKind::custom, 0.0, 0.0, std::move(p), std::move(branch_fn), true);

  // Convexity spot-check on a grid inside the domain.
  const double x0 = core->interior();
  const double width = (std::isfinite(domain.lo) && std::isfinite(domain.hi))
                           ? (domain.hi - domain.lo) / 2.0
                           : 4.0;
  for (int k = -8; k <= 8; ++k) {
    double a = x0 + width * k / 9.0;
    if (!domain.contains(a)) continue;
    const double c = core->curvature(a);
    if (!(c > 0.0)) {
      std::ostringstream os;
      os << "custom generator: second difference " << c << " <= 0 at alpha = " << a;
      gen.add_warning(os.str());
      break;
    }
  }
  return gen;
}

double bregman_divergence(const GeneratorSpec& gen, double a0, double a, int s) {
  return gen.g(a0, s) - gen.g(a, s) - gen.link(a, s) * (a0 - a);
}

}  // namespace genriesz
