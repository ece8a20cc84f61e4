#pragma once

#include <Eigen/Dense>
#include <functional>

#include "csa/sa.hpp"

namespace csa {

/// Linear SA x_{k+1} = x_k + alpha_k (A(Y_k) x_k - b(Y_k)) remodeled as a
/// contractive problem in the Lyapunov geometry ||.||_Pbar.
struct LinearSASpec {
  int dim = 1;
  std::function<void(Rng&, Eigen::MatrixXd&, Eigen::VectorXd&)> sampler;
  Eigen::MatrixXd A_bar;
  Eigen::VectorXd b_bar;
  double A_max = 0.0;  // sup ||A(y)||_2
  double b_max = 0.0;  // sup ||b(y)||_2
  Eigen::MatrixXd P_bar;
  double beta = 0.0;                   // 1 / (2 lambda_max(A' P A))
  double gamma_bar_exact = 0.0;        // ||beta A + I||_Pbar, exact operator norm
  double gamma_bar_paper_bound = 0.0;  // 1 - beta/lambda_max(P), as printed
  double gamma_bar_analytic = 0.0;     // sqrt(1 - beta/(2 lambda_max(P))), corrected chain
  double sigma_hat = 0.0;
  bool expectations_estimated = false;
};

bool hurwitz_check(const Eigen::MatrixXd& A_bar);

/// Unique SPD solution of A' P + P A + I = 0 via the vectorized Kronecker
/// system; output symmetrized. Throws on non-Hurwitz input.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A_bar);

struct RemodelInputs {
  std::function<void(Rng&, Eigen::MatrixXd&, Eigen::VectorXd&)> sampler;
  Eigen::MatrixXd A_bar;  // empty: estimate from samples
  Eigen::VectorXd b_bar;
  double A_max = -1.0;  // negative: estimate as empirical max (marks approximate)
  double b_max = -1.0;
  int estimation_draws = 1000000;
  std::uint64_t estimation_seed = 99;
};

/// Builds the Lyapunov geometry and the equivalent SAProblem, with F_beta(x,y)
/// = beta A(y) x - beta b(y) + x. The beta factor is absorbed into the
/// stepsize by the caller (alpha_k -> alpha beta/(k+h)).
std::pair<LinearSASpec, SAProblem> remodel(const RemodelInputs& in);

}  // namespace csa
