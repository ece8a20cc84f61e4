#pragma once

#include <Eigen/Dense>

#include "csa/linear_sa.hpp"
#include "csa/mdp.hpp"
#include "csa/sa.hpp"

namespace csa {

// ---------------------------------------------------------------------------
// Off-policy TD with generalized importance sampling factors
// ---------------------------------------------------------------------------

struct ISFactors {
  Eigen::MatrixXd c;    // states x actions
  Eigen::MatrixXd rho;  // states x actions, rho >= c
  int n_step = 1;
};

/// c = rho = pi/pi_b (0/0 treated as 0), the classical choice.
ISFactors is_factors_from_policies(const TabularMDP& mdp, const Policy& pi_target,
                                   const Policy& pi_b, int n_step);

/// Machine-checks the theorem hypotheses: rho >= c, coverage, and
/// max_s sum_a pi_b(a|s) rho(s,a) <= 1/gamma.
void validate_is_factors(const TabularMDP& mdp, const Policy& pi_target, const Policy& pi_b,
                         const ISFactors& f);

/// The n-step operator is affine in Q; M and v are its exact matrix form, so
/// the contraction factor in the max norm is certified as ||M||_inf.
struct OffPolicyTdModel {
  TabularMDP mdp;
  Policy pi_b;
  ISFactors factors;
  Eigen::VectorXd kappa;        // stationary distribution of pi_b
  Eigen::MatrixXd M;            // Fbar(Q) = M Q + v
  Eigen::VectorXd v;
  double gamma_o_certified = 0;  // ||M||_inf
  Eigen::VectorXd q_limit;       // Q_{pi,rho}, fixed point of Fbar

  Eigen::VectorXd expected(const Eigen::VectorXd& q) const { return M * q + v; }
  Eigen::VectorXd sample(const Eigen::VectorXd& q, Rng& g) const;
};

OffPolicyTdModel offpolicy_td_build(const TabularMDP& mdp, const Policy& pi_b,
                                    const Policy& pi_target, const ISFactors& f);

/// Empirical multiplicative-noise constant: max ||F(Q,Y)-Fbar(Q)||_inf /
/// (1+||Q||_inf) over an audit sweep, inflated by 1.05.
double offpolicy_td_noise_constant(const OffPolicyTdModel& model, int n_probes, int draws_per_probe,
                                   std::uint64_t seed);

SAProblem offpolicy_td_problem(const OffPolicyTdModel& model, const Eigen::VectorXd& q0,
                               double sigma_audited);

// ---------------------------------------------------------------------------
// Contraction factor estimation
// ---------------------------------------------------------------------------

struct ContractionEstimate {
  double gamma_hat = 0.0;
  Eigen::VectorXd x1, x2;  // the pair attaining the maximum ratio
};

ContractionEstimate estimate_contraction_factor(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& expected_op, int dim,
    const NormSpec& norm, int n_pairs, std::uint64_t seed, double scale = 1.0);

// ---------------------------------------------------------------------------
// On-policy TD with linear function approximation
// ---------------------------------------------------------------------------

struct TdlfaModel {
  TabularMDP mdp;
  Policy pi;
  Eigen::MatrixXd Phi;  // possibly rescaled so max_s ||phi(s)||_2 <= 1
  bool rescaled = false;
  Eigen::VectorXd kappa;
  Eigen::MatrixXd A_bar;  // Phi' K (gamma P_pi - I) Phi
  Eigen::VectorXd b_bar;  // -Phi' K r_pi  (so theta* solves A theta = b)
  double A_max = 0.0;     // exact max over the support
  double b_max = 0.0;
  Eigen::VectorXd theta_star;

  void sample(Rng& g, Eigen::MatrixXd& A, Eigen::VectorXd& b) const;
};

TdlfaModel tdlfa_build(const TabularMDP& mdp, const Policy& pi, const Eigen::MatrixXd& Phi);

/// Plugs the TD-LFA matrices into the linear-SA remodeling.
std::pair<LinearSASpec, SAProblem> tdlfa_remodel(const TdlfaModel& model);

// ---------------------------------------------------------------------------
// Q-learning
// ---------------------------------------------------------------------------

Eigen::VectorXd bellman_optimality(const TabularMDP& mdp, const Eigen::VectorXd& q);
Eigen::VectorXd q_star(const TabularMDP& mdp, double tol = 1e-12);

struct QLearningModel {
  TabularMDP mdp;
  Policy pi_b;
  Eigen::VectorXd kappa_b;
  Eigen::VectorXd D_b;        // diag entries kappa_b(s) pi_b(a|s)
  double D_b_min = 0.0;
  double gamma_hat = 0.0;     // 1 - D_b_min (1 - gamma)
  Eigen::VectorXd q_opt;      // Q*

  Eigen::VectorXd expected(const Eigen::VectorXd& q) const;
  Eigen::VectorXd sample(const Eigen::VectorXd& q, Rng& g) const;
};

QLearningModel qlearning_build(const TabularMDP& mdp, const Policy& pi_b);

/// SAProblem with additive sub-Gaussian noise sigma_bar = 4/(1-gamma), c_d = 1.
/// Requires ||q0||_inf <= 1/(1-gamma).
SAProblem qlearning_problem(const QLearningModel& model, const Eigen::VectorXd& q0);

}  // namespace csa
