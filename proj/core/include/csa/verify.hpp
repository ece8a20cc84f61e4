#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csa/bounds.hpp"
#include "csa/sa.hpp"

namespace csa {

/// Exact one-sided upper confidence bound on a binomial proportion.
double clopper_pearson_upper(int successes, int n, double confidence = 0.95);

struct ViolationAudit {
  int n = 0;
  long long K = 0;
  int violations = 0;
  double cp_upper = 1.0;
  double confidence = 0.95;
};

/// Counts trajectories with any k >= K where err_k^2 exceeds the curve value
/// (plus tol). Trajectory faults count as violations.
ViolationAudit audit_violations(const EnsembleResult& ens, const BoundCurve& curve,
                                double tol = 1e-9, double confidence = 0.95);

struct CcdfCurve {
  std::vector<double> eps;
  std::vector<double> surv;  // strictly-greater survival fractions
};

CcdfCurve empirical_ccdf(std::span<const double> samples);

struct TailFit {
  double beta_hat = 0.0;
  double k2_hat = 0.0;
  double log_k1_hat = 0.0;
  double r_squared = 0.0;
  double ci_lo = 0.0;  // bootstrap percentile interval for beta_hat
  double ci_hi = 0.0;
  int points_used = 0;
};

/// Fits S(eps) ~ K1 exp(-K2 eps^beta) on the CCDF restricted to
/// [fit_lo, fit_hi]: a log-log linearization seeds beta, then a golden-section
/// refinement over beta with (K2, log K1) solved linearly. No CI.
TailFit fit_tail_exponent(const CcdfCurve& curve, double fit_lo, double fit_hi);

/// Sample-level fit with a bootstrap confidence interval for beta_hat.
TailFit fit_tail_exponent_boot(std::span<const double> samples, double fit_lo, double fit_hi,
                               int n_boot = 200, std::uint64_t seed = 7);

/// Kolmogorov-Smirnov distance between an empirical sample and an exact
/// discrete distribution given as (value, probability) atoms.
double ks_distance_to_atoms(std::span<const double> samples,
                            std::vector<std::pair<double, double>> atoms);

// ---------------------------------------------------------------------------
// Empirical checks of the proof machinery
// ---------------------------------------------------------------------------

struct MachineryRow {
  int k = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_se = 0.0;
  bool ok = false;
};

struct MachineryReport {
  bool pass = false;
  bool finite = true;
  std::vector<MachineryRow> rows;
  std::string note;
};

struct MachineryOptions {
  int k_lo = 0;
  int k_hi = 50;
  int n = 100000;
  std::uint64_t master_seed = 1;
  int workers = 1;
  double lambda_scale = 1.0;  // != 1 corrupts lambda_k (negative control)
  double drift_scale = 1.0;   // != 1 corrupts the drift constant
};

/// One-step MGF recursion, multiplicative regime: paired Monte Carlo estimate
/// of E[exp(lambda_{k+1} M_{k+1})] against the recursion's right-hand side,
/// with T_k = B_k(D)^2 so the good-event indicator is constant 1.
MachineryReport check_mgf_recursion_mult(const SAProblem& p, const MultLedger& ledger,
                                         const MachineryOptions& opts);
MachineryReport check_mgf_recursion_add(const SAProblem& p, const AddLedger& ledger,
                                        const MachineryOptions& opts);

/// E[Mbar_k] nonincreasing (3-SE gate on paired differences).
MachineryReport check_supermartingale_mult(const SAProblem& p, const MultLedger& ledger,
                                           const MachineryOptions& opts);
MachineryReport check_supermartingale_add(const SAProblem& p, const AddLedger& ledger,
                                          const MachineryOptions& opts);

}  // namespace csa
