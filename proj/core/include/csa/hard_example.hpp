#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "csa/sa.hpp"
#include "csa/schedule.hpp"

namespace csa {

/// The 1-d multiplicative counterexample: F(x,y) = y x with
/// P(Y = a+N) = 1/(N+1), P(Y = a-1) = N/(N+1), so E[Y] = a and x* = 0.
/// alpha_0 < 1/2 keeps every iterate strictly positive.
struct HardExampleSpec {
  double a = 0.5;
  double N = 1.0;
  double x0 = 1.0;
  StepSchedule schedule{2.0, 8.0, 1.0};

  double D() const { return a + N - 1.0; }
  int m_e() const;  // ceil(2 alpha D) + 1
  void validate() const;
};

/// Test hook: force every draw to the given branch instead of sampling.
enum class ForcedDraw { none, all_max, all_min };

SAProblem hard_example_problem(const HardExampleSpec& spec, ForcedDraw forced = ForcedDraw::none);

/// All 2^k atoms (value, probability) of x_k. Step-dependent stepsizes keep
/// the paths distinct; probabilities sum to 1 up to roundoff.
std::vector<std::pair<double, double>> exact_distribution(const HardExampleSpec& spec, int k);

/// Exact E[x_k] = x0 prod (1 + alpha_i (a-1)); the recursion is linear in
/// expectation.
double exact_mean(const HardExampleSpec& spec, int k);

/// E[exp(lambda ((k+h)^{1/2} x_k)^{beta_tilde})] over the enumerated atoms.
/// Returns +infinity when any single exponent exceeds 700.
double exact_rescaled_mgf(const HardExampleSpec& spec, int k, double lambda, double beta_tilde);

/// Log of the all-maximal-path certificate
///   exp(lambda x0^bt (k+h)^{bt/2} prod_{i=k_eps}^{k-1} (1+alpha_i D)^bt) / (N+1)^k,
/// a lower bound for the exact rescaled MGF. Evaluated fully in log space.
double mgf_lower_bound_log(const HardExampleSpec& spec, std::uint64_t k, double lambda,
                           double beta_tilde, std::uint64_t k_eps);

/// Same certificate for z in (0,1): rescaling (k+h)^{beta_prime} instead of
/// (k+h)^{bt/2}; pass beta_prime = beta_tilde/2 to recover the z = 1 form.
double mgf_lower_bound_log_general(const HardExampleSpec& spec, std::uint64_t k, double lambda,
                                   double beta_tilde, double beta_prime, std::uint64_t k_eps);

/// First k in (k_eps, k_cap] where the log certificate exceeds `threshold`,
/// computed with a running product so the scan is O(k_cap). Returns 0 when
/// the threshold is never reached.
std::uint64_t mgf_lower_bound_first_exceed(const HardExampleSpec& spec, double lambda,
                                           double beta_tilde, std::uint64_t k_eps,
                                           double threshold, std::uint64_t k_cap);

struct EpsWitness {
  bool found = false;
  double eps = 0.0;
  std::uint64_t k_eps = 0;
};

/// Grid search over eps = 2^{-j} for a witness of the divergence condition
/// beta_tilde > 2 / (1 + 2 alpha D / (1+eps)), with k_eps the first index
/// where exp(alpha_k D/(1+eps)) <= 1 + alpha_k D.
EpsWitness find_divergence_witness(const HardExampleSpec& spec, double beta_tilde);

}  // namespace csa
