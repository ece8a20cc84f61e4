#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csa/moreau.hpp"
#include "csa/schedule.hpp"

namespace csa {

struct ConditionClause {
  std::string name;
  double value = 0.0;      // the quantity being constrained
  double threshold = 0.0;  // the limit it is compared against
  double margin = 0.0;     // positive = satisfied with room
  bool ok = false;
  bool gating = true;  // informational clauses are reported but do not gate
};

struct ConditionReport {
  bool pass = false;
  std::vector<ConditionClause> clauses;
};

/// Every derived constant of the multiplicative analysis for one problem
/// instance. sigma is the effective constant after the minimal inflation
/// that makes 2*alpha*D an integer (sigma_raw records the declared one).
struct MultLedger {
  double gamma_c = 0.0;
  double sigma_raw = 0.0;
  double sigma = 0.0;
  double D = 0.0;  // sigma + gamma_c - 1, after inflation
  int m = 0;       // 2 alpha D + 1 when D > 0
  double gamma_tilde = 0.0;
  double D0 = 0.0, D1 = 0.0, D2 = 0.0, D3 = 0.0, D4 = 0.0;
  double theta = 0.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  double c1_prime = 0.0;
  double c5 = 0.0;
  double c1_dprime = 0.0;
  double x0_err = 0.0;
  double xstar_norm = 0.0;
  MoreauConfig moreau;
  StepSchedule schedule;
  ConditionReport condition;
};

/// Additive (sub-Gaussian) counterpart with the barred constants.
struct AddLedger {
  double gamma_c = 0.0;
  double sigma_bar = 0.0;
  double c_d = 0.0;
  double gamma_tilde = 0.0;
  double Db0 = 0.0, Db1 = 0.0, Db2 = 0.0, Db3 = 0.0, Db4 = 0.0, Db5 = 0.0;
  double theta_bar = 0.0;
  double cb1 = 0.0, cb2 = 0.0, cb3 = 0.0, cb4 = 0.0, cb5 = 0.0;
  double u_cM_star = 0.0;
  double x0_err = 0.0;
  MoreauConfig moreau;
  StepSchedule schedule;
  ConditionReport condition;
};

enum class BoundVariant {
  worst_case,
  thm1_D0,
  thm1_Dpos,
  thm1_prime,
  thm2_z1,
  thm2_zlt1,
  fixed_time_mult,
  fixed_time_add,
  thm4_qlearning,
};

std::string to_string(BoundVariant v);

/// A sequence of bounds on ||x_k - x*||_c^2 with its provenance.
struct BoundCurve {
  std::vector<double> ks;
  std::vector<double> values;
  double delta = 0.0;
  double K = 0;
  BoundVariant variant = BoundVariant::worst_case;
  std::string provenance;

  double at_k(double k) const;  // lookup; requires k present in ks
};

MultLedger build_mult_ledger(double gamma_c, double sigma, double x0_err, double xstar_norm,
                             const MoreauConfig& moreau, const StepSchedule& schedule);

AddLedger build_add_ledger(double gamma_c, double sigma_bar, double c_d, double x0_err,
                           const MoreauConfig& moreau, const StepSchedule& schedule);

/// Time-varying almost sure bound B_k(D) on ||x_k - x*||_c. Needs h > 1 when
/// D >= 0.
struct WorstCaseParams {
  double D = 0.0;
  double sigma = 0.0;
  double gamma_c = 0.0;
  double x0_err = 0.0;
  double xstar_norm = 0.0;
  double alpha = 1.0;
  double h = 2.0;
};
double worst_case_bound(const WorstCaseParams& p, double k);
double worst_case_bound(const MultLedger& ledger, double k);

ConditionReport validate_conditions(const MultLedger& ledger);
ConditionReport validate_conditions(const AddLedger& ledger);

/// Smallest h satisfying the stepsize condition for given alpha (the "auto"
/// resolution); callers may override upward.
double auto_h_mult(double gamma_c, double sigma, const MoreauConfig& moreau, double alpha);
double auto_h_add(double gamma_c, double sigma_bar, double c_d, const MoreauConfig& moreau,
                  double alpha, double z);

BoundCurve mult_bound_curve(const MultLedger& ledger, double delta, double K,
                            BoundVariant variant, const std::vector<double>& ks,
                            bool enforce_condition = true);

/// Fixed-time bound (Corollary "Fixed-Time Concentration", D > 0 form).
double mult_fixed_time(const MultLedger& ledger, double delta, double k);

/// delta such that the fixed-time bound at k equals eps^2 (monotone bisection).
double mult_tail(const MultLedger& ledger, double k, double eps);

struct SampleComplexity {
  double k = 0.0;
  bool attainable = false;
};
SampleComplexity mult_sample_complexity(const MultLedger& ledger, double eps, double delta);

BoundCurve add_bound_curve(const AddLedger& ledger, double delta, double K,
                           const std::vector<double>& ks, bool enforce_condition = true);
double add_fixed_time(const AddLedger& ledger, double delta, double k);
/// Closed-form tail probability (clamped to [0,1]).
double add_tail(const AddLedger& ledger, double k, double eps);

/// Theorem-4 style Q-learning curve: c_q [ log(1/delta)/(k+h)
/// + (h/(k+h))^{(1-gamma_hat) alpha/2} + (1+log((k+1)/sqrt(K)))/(k+h) ].
BoundCurve qlearning_bound_curve(double c_q, double gamma_hat, const StepSchedule& schedule,
                                 double delta, double K, const std::vector<double>& ks);

}  // namespace csa
