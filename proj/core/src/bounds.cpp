#include "csa/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace csa {
namespace {

constexpr double kE = 2.7182818284590452353602874713527;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

ConditionClause upper_clause(std::string name, double value, double threshold, bool gating = true) {
  ConditionClause c;
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.margin = threshold - value;
  c.ok = value <= threshold;
  c.gating = gating;
  return c;
}

ConditionClause lower_clause(std::string name, double value, double threshold, bool gating = true) {
  ConditionClause c;
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.margin = value - threshold;
  c.ok = value > threshold;
  c.gating = gating;
  return c;
}

void finalize(ConditionReport& r) {
  r.pass = true;
  for (const auto& c : r.clauses)
    if (c.gating && !c.ok) r.pass = false;
}

// log((k-1+h)/(h-1)); zero at k = 0.
double log_from_start(double h, double k) {
  return std::log((static_cast<double>(k) - 1.0 + h) / (h - 1.0));
}

// log((k-1+h)/(K-1+h))
double log_from_anchor(double h, double k, double K) {
  return std::log((static_cast<double>(k) - 1.0 + h) / (static_cast<double>(K) - 1.0 + h));
}

double anchor_power(const MultLedger& lg, double K) {
  const double h = lg.schedule.h;
  const double expo = lg.schedule.alpha * lg.D0 / 2.0 - 1.0;
  return std::pow(h / (static_cast<double>(K) + h), expo);
}

void check_curve_pre(double delta, double K, bool condition_pass, bool enforce) {
  require(delta > 0.0 && delta < 1.0, "bound curve: delta must be in (0,1)");
  require(K >= 0, "bound curve: K must be >= 0");
  if (enforce && !condition_pass)
    throw std::domain_error("bound curve: stepsize condition violated (use force to override)");
}

// Supremum over integer k' >= 0 of alpha_{k'} (base + c4 * log((k'-1+h)/(h-1)))^m,
// evaluated in log space. The continuous supremand is unimodal: forward scan
// until it decreases, then golden-section refine and check both neighbors.
double sup_log_bracket(const StepSchedule& s, double base, double c4, int m) {
  const double h = s.h;
  auto log_f = [&](double t) {
    const double L = std::log((t - 1.0 + h) / (h - 1.0));
    const double inner = base + c4 * L;
    if (inner <= 0.0) return -kInf;
    return std::log(s.alpha) - std::log(t + h) + m * std::log(inner);
  };
  double best = log_f(0.0);
  double prev = best;
  double lo = 0.0, hi = 0.0;
  bool bracketed = false;
  for (double t = 1.0; t < 1e280; t = std::max(t * 1.25, t + 1.0)) {
    const double v = log_f(t);
    best = std::max(best, v);
    if (v < prev) {
      hi = t;
      lo = t / (1.25 * 1.25);
      bracketed = true;
      break;
    }
    prev = v;
  }
  if (bracketed) {
    const double gr = 0.61803398874989484820;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = log_f(x1), f2 = log_f(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-9 * (1.0 + b); ++it) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = log_f(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = log_f(x1);
      }
    }
    const double t_star = 0.5 * (a + b);
    best = std::max(best, log_f(std::floor(t_star)));
    best = std::max(best, log_f(std::ceil(t_star)));
  }
  return std::exp(best);
}

double log_c1(const MultLedger& lg) {
  const double u2 = lg.moreau.u_cM() * lg.moreau.u_cM();
  return lg.m * std::log(32.0 * lg.D1 * (1.0 + lg.D4) * u2 / lg.D0) +
         std::log1p(lg.sigma * lg.sigma * lg.D4 / (lg.D * lg.D));
}

}  // namespace

namespace {
// Small helpers the ledger exposes implicitly.
struct MoreauDerived {
  double l_cM, u_cM, gamma_tilde;
};
MoreauDerived derived(const MoreauConfig& cfg, double gamma_c) {
  MoreauConstants mc = moreau_constants(cfg, gamma_c);
  return {mc.l_cM, mc.u_cM, mc.gamma_tilde};
}
}  // namespace

std::string to_string(BoundVariant v) {
  switch (v) {
    case BoundVariant::worst_case: return "worst_case";
    case BoundVariant::thm1_D0: return "thm1_D0";
    case BoundVariant::thm1_Dpos: return "thm1_Dpos";
    case BoundVariant::thm1_prime: return "thm1_prime";
    case BoundVariant::thm2_z1: return "thm2_z1";
    case BoundVariant::thm2_zlt1: return "thm2_zlt1";
    case BoundVariant::fixed_time_mult: return "fixed_time_mult";
    case BoundVariant::fixed_time_add: return "fixed_time_add";
    case BoundVariant::thm4_qlearning: return "thm4_qlearning";
  }
  return "?";
}

double BoundCurve::at_k(double k) const {
  auto it = std::lower_bound(ks.begin(), ks.end(), k);
  if (it == ks.end() || *it != k) throw std::out_of_range("BoundCurve::at_k: k not in curve");
  return values[static_cast<std::size_t>(it - ks.begin())];
}

MultLedger build_mult_ledger(double gamma_c, double sigma, double x0_err, double xstar_norm,
                             const MoreauConfig& moreau, const StepSchedule& schedule) {
  require(gamma_c >= 0.0 && gamma_c < 1.0, "build_mult_ledger: gamma_c must be in [0,1)");
  require(sigma > 0.0, "build_mult_ledger: sigma must be > 0");
  require(x0_err > 0.0, "build_mult_ledger: x0_err must be > 0");

  MultLedger lg;
  lg.moreau = moreau;
  lg.schedule = schedule;
  lg.gamma_c = gamma_c;
  lg.sigma_raw = sigma;
  lg.x0_err = x0_err;
  lg.xstar_norm = xstar_norm;

  const MoreauDerived md = derived(moreau, gamma_c);
  require(md.gamma_tilde < 1.0, "build_mult_ledger: gamma_tilde >= 1; decrease mu");
  lg.gamma_tilde = md.gamma_tilde;

  const double alpha = schedule.alpha;
  const double D_raw = sigma + gamma_c - 1.0;
  if (D_raw > 1e-12) {
    // 2 alpha D must be an integer; inflate sigma minimally.
    const double t = 2.0 * alpha * D_raw;
    double n = std::ceil(t - 1e-9);
    if (n < 1.0) n = 1.0;
    lg.sigma = n / (2.0 * alpha) + 1.0 - gamma_c;
    lg.D = n / (2.0 * alpha);
    lg.m = static_cast<int>(n) + 1;
  } else if (D_raw >= -1e-12) {
    lg.sigma = sigma;
    lg.D = 0.0;
    lg.m = 1;
  } else {
    lg.sigma = sigma;
    lg.D = D_raw;
    lg.m = 0;
  }

  const double l2 = md.l_cM * md.l_cM;
  const double u2 = md.u_cM * md.u_cM;
  lg.D0 = 2.0 * (1.0 - lg.gamma_tilde);
  lg.D1 = 4.0 * lg.sigma * lg.sigma / l2;
  lg.D2 = 2.0 * moreau.L * (2.0 + lg.sigma) * (2.0 + lg.sigma) * u2 /
          (moreau.mu * moreau.l_cs * moreau.l_cs);
  lg.D3 = lg.D0 * lg.D2 / (4.0 * lg.D1);
  lg.D4 = (1.0 + xstar_norm) * (1.0 + xstar_norm) / (x0_err * x0_err);
  lg.theta = lg.D0 * x0_err * x0_err /
             (8.0 * lg.D1 * ((1.0 + xstar_norm) * (1.0 + xstar_norm) + x0_err * x0_err));

  const double alpha0 = schedule.at(0);
  lg.c2 = lg.D0 / (16.0 * alpha0 * lg.D1 * l2);
  lg.c3 = (alpha * lg.D0 > 2.0) ? 8.0 * alpha * kE * lg.D2 * lg.D4 / (alpha * lg.D0 - 2.0) : kInf;
  lg.c4 = alpha * lg.D3;
  lg.c1_prime = 32.0 * u2 * lg.D1 * (1.0 + lg.sigma * lg.D4 * alpha * alpha) * (lg.D4 + 1.0) / lg.D0;

  if (lg.D > 0.0 && std::isfinite(lg.c3)) {
    lg.c1 = std::exp(log_c1(lg));
    lg.c5 = sup_log_bracket(schedule, lg.c2 + lg.c3, lg.c4, lg.m);
    // Proof-of-Prop form: 8^{2m+1} (D1 (1+D4) u_cM^2 / D0)^{m+1} (1 + sigma^2 D4 / D^2)(1 + c5).
    const double log_core = (2.0 * lg.m + 1.0) * std::log(8.0) +
                            (lg.m + 1.0) * std::log(lg.D1 * (1.0 + lg.D4) * u2 / lg.D0);
    lg.c1_dprime = std::exp(log_core + std::log1p(lg.sigma * lg.sigma * lg.D4 / (lg.D * lg.D)) +
                            std::log1p(lg.c5));
  } else {
    lg.c1 = lg.c5 = lg.c1_dprime = std::numeric_limits<double>::quiet_NaN();
  }

  lg.condition = validate_conditions(lg);
  return lg;
}

ConditionReport validate_conditions(const MultLedger& lg) {
  ConditionReport r;
  const double alpha0 = lg.schedule.at(0);
  r.clauses.push_back(lower_clause("alpha > 2/D0", lg.schedule.alpha, 2.0 / lg.D0));
  r.clauses.push_back(lower_clause("h > 1", lg.schedule.h, 1.0));
  r.clauses.push_back(upper_clause("alpha_0 <= 1", alpha0, 1.0));
  r.clauses.push_back(upper_clause("alpha_0 <= D0", alpha0, lg.D0));
  r.clauses.push_back(upper_clause("alpha_0 <= D0/(4 D2)", alpha0, lg.D0 / (4.0 * lg.D2)));
  r.clauses.push_back(upper_clause("z == 1 (multiplicative analysis)", std::abs(lg.schedule.z - 1.0), 0.0));
  r.clauses.push_back(upper_clause("gamma_tilde < 1 [info]", lg.gamma_tilde, 1.0, false));
  r.clauses.push_back(lower_clause("D >= 0 (else additive regime) [info]", lg.D, -1e-300, false));
  finalize(r);
  return r;
}

double worst_case_bound(const WorstCaseParams& p, double k) {
  require(k >= 0, "worst_case_bound: k must be >= 0");
  if (k == 0) return p.x0_err;
  const double w = p.sigma * (1.0 + p.xstar_norm);
  if (p.D > 1e-15) {
    require(p.h > 1.0, "worst_case_bound: needs h > 1 when D >= 0");
    const double lg = p.alpha * p.D * log_from_start(p.h, k);
    return std::exp(lg) * (p.x0_err + w / p.D) - w / p.D;
  }
  if (p.D >= -1e-15) {
    require(p.h > 1.0, "worst_case_bound: needs h > 1 when D >= 0");
    return p.x0_err + w * p.alpha * log_from_start(p.h, k);
  }
  return p.x0_err - w / p.D;
}

double worst_case_bound(const MultLedger& lg, double k) {
  WorstCaseParams p;
  p.D = lg.D;
  p.sigma = lg.sigma;
  p.gamma_c = lg.gamma_c;
  p.x0_err = lg.x0_err;
  p.xstar_norm = lg.xstar_norm;
  p.alpha = lg.schedule.alpha;
  p.h = lg.schedule.h;
  return worst_case_bound(p, k);
}

BoundCurve mult_bound_curve(const MultLedger& lg, double delta, double K, BoundVariant variant,
                            const std::vector<double>& ks, bool enforce_condition) {
  check_curve_pre(delta, K, lg.condition.pass, enforce_condition);
  const double alpha = lg.schedule.alpha;
  const double h = lg.schedule.h;
  const double x0sq = lg.x0_err * lg.x0_err;

  BoundCurve curve;
  curve.ks = ks;
  curve.delta = delta;
  curve.K = K;
  curve.variant = variant;

  auto value_at = [&](double k) -> double {
    require(k >= K, "mult_bound_curve: k < K");
    switch (variant) {
      case BoundVariant::thm1_Dpos: {
        require(lg.D > 0.0, "thm1_Dpos requires D > 0");
        const double A = std::log(lg.m / delta) + lg.c2 + lg.c3 + lg.c4 * log_from_start(h, k);
        const double B = std::log(lg.m / delta) + lg.c2 * anchor_power(lg, K) + lg.c3 +
                         lg.c4 * log_from_anchor(h, k, K);
        return std::exp(log_c1(lg) + std::log(alpha * x0sq) - std::log(static_cast<double>(k) + h) +
                        (lg.m - 1.0) * std::log(A) + std::log(B));
      }
      case BoundVariant::thm1_D0: {
        require(lg.D == 0.0, "thm1_D0 requires D == 0");
        const double L = log_from_start(h, k);
        const double B = std::log(1.0 / delta) + lg.c2 * anchor_power(lg, K) + lg.c3 +
                         lg.c4 * log_from_anchor(h, k, K);
        return lg.c1_prime * alpha * x0sq / (static_cast<double>(k) + h) * L * L * B;
      }
      case BoundVariant::thm1_prime: {
        require(lg.D > 0.0, "thm1_prime requires D > 0");
        const double lam = std::log((lg.m + 1.0) / delta);
        const double front = std::exp(lg.m * std::log(lam)) + 1.0;
        const double B = lam + lg.c2 * anchor_power(lg, K) + lg.c3 + lg.c4 * log_from_anchor(h, k, K);
        return lg.c1_dprime * lg.schedule.at(k) * x0sq * front * B;
      }
      case BoundVariant::fixed_time_mult: {
        require(lg.D > 0.0, "fixed_time_mult requires D > 0");
        const double A = std::log(lg.m / delta) + lg.c2 + lg.c3 + lg.c4 * log_from_start(h, k);
        return std::exp(log_c1(lg) + std::log(alpha * x0sq) - std::log(static_cast<double>(k) + h) +
                        lg.m * std::log(A));
      }
      case BoundVariant::worst_case: {
        const double b = worst_case_bound(lg, k);
        return b * b;
      }
      default:
        throw std::invalid_argument("mult_bound_curve: variant belongs to the additive ledger");
    }
  };

  curve.values.reserve(ks.size());
  for (double k : ks) curve.values.push_back(value_at(k));
  std::ostringstream os;
  os << to_string(variant) << "(delta=" << delta << ",K=" << K << ",m=" << lg.m << ")";
  curve.provenance = os.str();
  return curve;
}

double mult_fixed_time(const MultLedger& lg, double delta, double k) {
  require(delta > 0.0 && delta < 1.0, "mult_fixed_time: delta in (0,1)");
  require(lg.D > 0.0, "mult_fixed_time requires D > 0");
  const double h = lg.schedule.h;
  const double A = std::log(lg.m / delta) + lg.c2 + lg.c3 + lg.c4 * log_from_start(h, k);
  return std::exp(log_c1(lg) + std::log(lg.schedule.alpha * lg.x0_err * lg.x0_err) -
                  std::log(static_cast<double>(k) + h) + lg.m * std::log(A));
}

double mult_tail(const MultLedger& lg, double k, double eps) {
  require(eps > 0.0, "mult_tail: eps must be > 0");
  const double target = eps * eps;
  if (mult_fixed_time(lg, 1.0 - 1e-12, k) <= target) return 1.0;
  // Monotone bisection on log(delta); the bound decreases in delta.
  double lo = std::log(1e-300), hi = std::log(1.0 - 1e-12);
  for (int it = 0; it < 500; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = mult_fixed_time(lg, std::exp(mid), k);
    if (v > target)
      lo = mid;  // need larger delta? bound too big -> decrease bound -> increase delta
    else
      hi = mid;
    if (std::abs(v - target) <= 1e-12 * target) break;
  }
  return std::exp(0.5 * (lo + hi));
}

SampleComplexity mult_sample_complexity(const MultLedger& lg, double eps, double delta) {
  require(eps > 0.0, "mult_sample_complexity: eps must be > 0");
  const double target = eps * eps;
  auto f = [&](double k) { return mult_fixed_time(lg, delta, k); };
  double k_hi = 1.0;
  while (k_hi < 1e280 && f(k_hi) > target) k_hi *= 2.0;
  if (k_hi >= 1e280) return {k_hi, false};
  double k_lo = k_hi / 2.0;
  while (k_hi - k_lo > 1.0) {
    const double mid = 0.5 * (k_lo + k_hi);
    if (f(mid) > target)
      k_lo = mid;
    else
      k_hi = mid;
  }
  return {std::ceil(k_hi), true};
}

AddLedger build_add_ledger(double gamma_c, double sigma_bar, double c_d, double x0_err,
                           const MoreauConfig& moreau, const StepSchedule& schedule) {
  require(gamma_c >= 0.0 && gamma_c < 1.0, "build_add_ledger: gamma_c must be in [0,1)");
  require(sigma_bar > 0.0, "build_add_ledger: sigma_bar must be > 0");
  require(c_d > 0.0, "build_add_ledger: c_d must be > 0");

  AddLedger lg;
  lg.moreau = moreau;
  lg.schedule = schedule;
  lg.gamma_c = gamma_c;
  lg.sigma_bar = sigma_bar;
  lg.c_d = c_d;
  lg.x0_err = x0_err;

  const MoreauDerived md = derived(moreau, gamma_c);
  require(md.gamma_tilde < 1.0, "build_add_ledger: gamma_tilde >= 1; decrease mu");
  lg.gamma_tilde = md.gamma_tilde;
  lg.u_cM_star = moreau.u_cM_star();

  const double l2 = md.l_cM * md.l_cM;
  const double u2 = md.u_cM * md.u_cM;
  const double mls = moreau.mu * moreau.l_cs * moreau.l_cs;
  lg.Db0 = mls / (8.0 * sigma_bar * sigma_bar * moreau.L);
  lg.Db1 = 2.0 * (1.0 - lg.gamma_tilde);
  lg.Db2 = 8.0 * moreau.L * u2 / mls;
  lg.Db3 = 2.0 * sigma_bar * sigma_bar * lg.u_cM_star * lg.u_cM_star;
  lg.Db4 = 2.0 * c_d * sigma_bar * sigma_bar * moreau.L / mls;
  lg.Db5 = lg.Db1 * lg.Db4 / (4.0 * lg.Db3);
  lg.theta_bar = lg.Db1 / (8.0 * lg.Db3);

  const double alpha = schedule.alpha;
  lg.cb1 = 16.0 * lg.Db3 * u2 * alpha / lg.Db1;
  lg.cb2 = u2 / l2;
  lg.cb3 = (schedule.z == 1.0 && lg.Db1 * alpha / 2.0 > 1.0)
               ? 16.0 * kE * u2 * lg.Db4 * alpha * alpha / (lg.Db1 * alpha / 2.0 - 1.0)
               : kInf;
  lg.cb4 = 32.0 * u2 * lg.Db3 * alpha / lg.Db1;
  lg.cb5 = 16.0 * kE * u2 * lg.Db4 * alpha / lg.Db1;

  lg.condition = validate_conditions(lg);
  return lg;
}

ConditionReport validate_conditions(const AddLedger& lg) {
  ConditionReport r;
  const double alpha0 = lg.schedule.at(0);
  const double z = lg.schedule.z;
  r.clauses.push_back(upper_clause("alpha_0 <= 4 Db0 Db3 / Db1", alpha0,
                                   4.0 * lg.Db0 * lg.Db3 / lg.Db1));
  r.clauses.push_back(upper_clause("alpha_0 <= 1/Db1", alpha0, 1.0 / lg.Db1));
  // The text of the condition writes D/(4 Db2) with the multiplicative D; the
  // proof uses Db1/(4 Db2), which is what gates here.
  r.clauses.push_back(upper_clause("alpha_0 <= Db1/(4 Db2)", alpha0, lg.Db1 / (4.0 * lg.Db2)));
  if (z == 1.0) {
    r.clauses.push_back(lower_clause("alpha > 2/Db1 (z=1)", lg.schedule.alpha, 2.0 / lg.Db1));
  } else {
    const double h4 = std::max(1.0, std::pow(4.0 * z / (lg.Db1 * lg.schedule.alpha), 1.0 / (1.0 - z)));
    const double h2 = std::max(1.0, std::pow(2.0 * z / (lg.Db1 * lg.schedule.alpha), 1.0 / (1.0 - z)));
    ConditionClause strict = lower_clause("h >= (4z/(Db1 alpha))^{1/(1-z)}", lg.schedule.h, h4);
    strict.ok = lg.schedule.h >= h4;  // inclusive
    strict.margin = lg.schedule.h - h4;
    r.clauses.push_back(strict);
    ConditionClause text = lower_clause("h >= (2z/(Db1 alpha))^{1/(1-z)} [text form]", lg.schedule.h, h2, false);
    text.ok = lg.schedule.h >= h2;
    r.clauses.push_back(text);
  }
  r.clauses.push_back(upper_clause("gamma_tilde < 1 [info]", lg.gamma_tilde, 1.0, false));
  finalize(r);
  return r;
}

double auto_h_mult(double gamma_c, double sigma, const MoreauConfig& moreau, double alpha) {
  const MoreauDerived md = derived(moreau, gamma_c);
  const double D_raw = sigma + gamma_c - 1.0;
  double sig = sigma;
  if (D_raw > 1e-12) {
    double n = std::ceil(2.0 * alpha * D_raw - 1e-9);
    if (n < 1.0) n = 1.0;
    sig = n / (2.0 * alpha) + 1.0 - gamma_c;
  }
  const double D0 = 2.0 * (1.0 - md.gamma_tilde);
  const double u2 = md.u_cM * md.u_cM;
  const double D2 =
      2.0 * moreau.L * (2.0 + sig) * (2.0 + sig) * u2 / (moreau.mu * moreau.l_cs * moreau.l_cs);
  const double cap = std::min({1.0, D0, D0 / (4.0 * D2)});
  return std::max(1.0 + 1e-6, alpha / cap);
}

double auto_h_add(double gamma_c, double sigma_bar, double c_d, const MoreauConfig& moreau,
                  double alpha, double z) {
  const MoreauDerived md = derived(moreau, gamma_c);
  const double u2 = md.u_cM * md.u_cM;
  const double mls = moreau.mu * moreau.l_cs * moreau.l_cs;
  const double Db0 = mls / (8.0 * sigma_bar * sigma_bar * moreau.L);
  const double Db1 = 2.0 * (1.0 - md.gamma_tilde);
  const double Db2 = 8.0 * moreau.L * u2 / mls;
  const double Db3 = 2.0 * sigma_bar * sigma_bar * moreau.u_cM_star() * moreau.u_cM_star();
  const double cap = std::min({4.0 * Db0 * Db3 / Db1, 1.0 / Db1, Db1 / (4.0 * Db2)});
  double h = std::max(1.0, std::pow(alpha / cap, 1.0 / z));
  if (z < 1.0) h = std::max(h, std::pow(4.0 * z / (Db1 * alpha), 1.0 / (1.0 - z)));
  return h;
}

BoundCurve add_bound_curve(const AddLedger& lg, double delta, double K,
                           const std::vector<double>& ks, bool enforce_condition) {
  check_curve_pre(delta, K, lg.condition.pass, enforce_condition);
  const double alpha = lg.schedule.alpha;
  const double h = lg.schedule.h;
  const double z = lg.schedule.z;
  const double x0sq = lg.x0_err * lg.x0_err;
  const double Keff = std::max(K, 1.0);

  BoundCurve curve;
  curve.ks = ks;
  curve.delta = delta;
  curve.K = K;
  curve.variant = (z == 1.0) ? BoundVariant::thm2_z1 : BoundVariant::thm2_zlt1;

  for (double k : ks) {
    require(k >= K, "add_bound_curve: k < K");
    const double kk = static_cast<double>(k);
    const double tele = lg.cb4 * std::log((kk + 1.0) / std::sqrt(static_cast<double>(Keff)));
    double v;
    if (z == 1.0) {
      v = lg.cb1 * std::log(1.0 / delta) / (kk + h) +
          lg.cb2 * x0sq * std::pow(h / (kk + h), lg.Db1 * alpha / 2.0) + (lg.cb3 + tele) / (kk + h);
    } else {
      const double decay =
          std::exp(-lg.Db1 * alpha / (2.0 * (1.0 - z)) * (std::pow(kk + h, 1.0 - z) - std::pow(h, 1.0 - z)));
      v = lg.cb1 * std::log(1.0 / delta) / std::pow(kk + h, z) + lg.cb2 * x0sq * decay +
          (lg.cb5 + tele) / std::pow(kk + h, z);
    }
    curve.values.push_back(v);
  }
  std::ostringstream os;
  os << to_string(curve.variant) << "(delta=" << delta << ",K=" << K << ",z=" << z << ")";
  curve.provenance = os.str();
  return curve;
}

double add_fixed_time(const AddLedger& lg, double delta, double k) {
  require(delta > 0.0 && delta <= 1.0, "add_fixed_time: delta in (0,1]");
  const double alpha = lg.schedule.alpha;
  const double h = lg.schedule.h;
  const double z = lg.schedule.z;
  const double x0sq = lg.x0_err * lg.x0_err;
  const double kk = static_cast<double>(k);
  if (z == 1.0) {
    return lg.cb1 * std::log(1.0 / delta) / (kk + h) +
           lg.cb2 * x0sq * std::pow(h / (kk + h), lg.Db1 * alpha / 2.0) +
           (lg.cb3 + lg.cb4) / (kk + h);
  }
  const double decay =
      std::exp(-lg.Db1 * alpha / (2.0 * (1.0 - z)) * (std::pow(kk + h, 1.0 - z) - std::pow(h, 1.0 - z)));
  return lg.cb1 * std::log(1.0 / delta) / std::pow(kk + h, z) + lg.cb2 * x0sq * decay +
         (lg.cb4 + lg.cb5) / std::pow(kk + h, z);
}

double add_tail(const AddLedger& lg, double k, double eps) {
  require(eps > 0.0, "add_tail: eps must be > 0");
  const double h = lg.schedule.h;
  const double z = lg.schedule.z;
  const double alpha = lg.schedule.alpha;
  const double x0sq = lg.x0_err * lg.x0_err;
  const double kk = static_cast<double>(k);
  double expo;
  if (z == 1.0) {
    expo = -(kk + h) / lg.cb1 *
           (eps * eps - lg.cb2 * x0sq * std::pow(h / (kk + h), lg.Db1 * alpha / 2.0) -
            (lg.cb3 + lg.cb4) / (kk + h));
  } else {
    const double decay =
        std::exp(-lg.Db1 * alpha / (2.0 * (1.0 - z)) * (std::pow(kk + h, 1.0 - z) - std::pow(h, 1.0 - z)));
    expo = -std::pow(kk + h, z) / lg.cb1 *
           (eps * eps - lg.cb2 * x0sq * decay - (lg.cb4 + lg.cb5) / std::pow(kk + h, z));
  }
  return std::clamp(std::exp(expo), 0.0, 1.0);
}

BoundCurve qlearning_bound_curve(double c_q, double gamma_hat, const StepSchedule& schedule,
                                 double delta, double K, const std::vector<double>& ks) {
  require(delta > 0.0 && delta < 1.0, "qlearning_bound_curve: delta in (0,1)");
  const double h = schedule.h;
  const double alpha = schedule.alpha;
  const double Keff = static_cast<double>(std::max(K, 1.0));
  BoundCurve curve;
  curve.ks = ks;
  curve.delta = delta;
  curve.K = K;
  curve.variant = BoundVariant::thm4_qlearning;
  for (double k : ks) {
    require(k >= K, "qlearning_bound_curve: k < K");
    const double kk = static_cast<double>(k);
    const double v = c_q * (std::log(1.0 / delta) / (kk + h) +
                            std::pow(h / (kk + h), (1.0 - gamma_hat) * alpha / 2.0) +
                            (1.0 + std::log((kk + 1.0) / std::sqrt(Keff))) / (kk + h));
    curve.values.push_back(v);
  }
  std::ostringstream os;
  os << "thm4_qlearning(c_q=" << c_q << ",delta=" << delta << ",K=" << K << ")";
  curve.provenance = os.str();
  return curve;
}

}  // namespace csa
