#pragma once

#include <Eigen/Dense>
#include <optional>

#include "csa/norms.hpp"

namespace csa {

/// Configuration of the generalized Moreau envelope
///   M(x) = min_u { 1/2 ||u||_c^2 + 1/(2 mu) ||x-u||_s^2 },
/// a smooth surrogate for 1/2 ||x||_c^2. L is the smoothness constant of
/// 1/2 ||.||_s^2 with respect to ||.||_s (1 for euclidean, p-1 for p-norms).
struct MoreauConfig {
  NormSpec norm_c = NormSpec::Euclidean(1);
  NormSpec norm_s = NormSpec::Euclidean(1);
  double mu = 1.0;
  double L = 1.0;
  double l_cs = 1.0;
  double u_cs = 1.0;

  static MoreauConfig Make(NormSpec c, NormSpec s, double mu);

  double l_cM() const { return std::sqrt(1.0 + mu * l_cs * l_cs); }
  double u_cM() const { return std::sqrt(1.0 + mu * u_cs * u_cs); }

  /// u with ||x||_M <= u * ||x||_{c,*}. Uses the sqrt(e) value for the
  /// max-norm instantiation, the dual-pair closed form otherwise.
  double u_cM_star() const;
};

struct MoreauValue {
  double value = 0.0;
  Eigen::VectorXd minimizer;
  int iterations = 0;
  bool closed_form = false;
};

MoreauValue moreau_eval_full(const MoreauConfig& cfg, const Eigen::VectorXd& x);
double moreau_eval(const MoreauConfig& cfg, const Eigen::VectorXd& x);

/// Always takes the iterative minimization path, even when a closed form
/// exists; the closed-form/numeric agreement checks compare against this.
MoreauValue moreau_eval_numeric(const MoreauConfig& cfg, const Eigen::VectorXd& x);

/// Envelope gradient at x, from the minimizer (Danskin).
Eigen::VectorXd moreau_gradient(const MoreauConfig& cfg, const Eigen::VectorXd& x);

struct MoreauConstants {
  double l_cM = 1.0;
  double u_cM = 1.0;
  double gamma_tilde = 0.0;
};

MoreauConstants moreau_constants(const MoreauConfig& cfg, double gamma_c);

/// Largest mu on (0, 1e6] with gamma_c * u_cM / l_cM <= target
/// (default target (1+gamma_c)/2). gamma_tilde is increasing in mu and tends
/// to gamma_c as mu -> 0, so feasibility only fails for target < gamma_c.
double choose_mu(const NormSpec& norm_c, const NormSpec& norm_s, double gamma_c,
                 std::optional<double> target = std::nullopt);

/// mu = ((1+gamma)/(2 gamma))^2 - 1, the max-norm smoothing recipe.
double q_learning_recipe_mu(double gamma_hat);

}  // namespace csa
