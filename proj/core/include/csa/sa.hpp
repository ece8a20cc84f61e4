#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csa/norms.hpp"
#include "csa/rng.hpp"
#include "csa/schedule.hpp"

namespace csa {

enum class NoiseModel { multiplicative, additive_subgaussian };

struct NoiseSpec {
  NoiseModel model = NoiseModel::multiplicative;
  double sigma = 0.0;      // multiplicative: ||F - Fbar||_c <= sigma (1 + ||x||_c)
  double sigma_bar = 0.0;  // additive: sub-Gaussian scale
  double c_d = 0.0;        // additive: dimension constant

  static NoiseSpec Multiplicative(double sigma) { return {NoiseModel::multiplicative, sigma, 0, 0}; }
  static NoiseSpec AdditiveSubGaussian(double sigma_bar, double c_d) {
    return {NoiseModel::additive_subgaussian, 0, sigma_bar, c_d};
  }
};

/// A random fixed-point problem: one noisy operator draw F(x, Y), its exact
/// expectation Fbar when available, and the contraction data. Immutable and
/// shareable across worker threads; generators are always caller-owned.
struct SAProblem {
  int dim = 1;
  std::function<void(const Eigen::VectorXd& x, Rng& g, Eigen::VectorXd& out)> sample_op;
  std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& out)> expected_op;
  NormSpec norm_c = NormSpec::Euclidean(1);
  double gamma_c = 0.0;
  NoiseSpec noise;
  Eigen::VectorXd x_star;
  Eigen::VectorXd x0;
  bool contraction_is_global = true;  // false: pseudo-contraction against x_star only
  std::string name;

  double error_of(const Eigen::VectorXd& x) const { return norm_c.eval(x - x_star); }
};

Eigen::VectorXd sa_step(const SAProblem& p, const Eigen::VectorXd& x, double alpha_k, Rng& g);

struct Trajectory {
  std::vector<double> errors;  // ||x_k - x*||_c for k = 0..k_max
  SeedSpec seed;
  long long fault_step = -1;  // first k with a non-finite iterate, -1 if none
};

/// Called with every iterate (k = 0..k_max) when supplied to run_trajectory.
using StepObserver = std::function<void(int k, const Eigen::VectorXd& x)>;

Trajectory run_trajectory(const SAProblem& p, const StepSchedule& s, int k_max, SeedSpec seed,
                          const StepObserver* observer = nullptr);

struct EnsembleResult {
  int n = 0;
  int k_max = 0;
  std::uint64_t master_seed = 0;
  std::vector<double> errors;  // row-major n x (k_max+1)
  std::vector<long long> fault_steps;

  double err(int traj, int k) const { return errors[static_cast<std::size_t>(traj) * (k_max + 1) + k]; }
  bool any_fault() const;
  /// Errors at a fixed k across all trajectories.
  std::vector<double> column(int k) const;
};

EnsembleResult run_ensemble(const SAProblem& p, const StepSchedule& s, int k_max, int n,
                            std::uint64_t master_seed, int workers = 1);

/// Runs an ensemble and records stat(k, x_k) instead of the error; used by the
/// proof-machinery checks, which need functionals of the full iterate.
std::vector<double> run_ensemble_stat(const SAProblem& p, const StepSchedule& s, int k_max, int n,
                                      std::uint64_t master_seed, int workers,
                                      const std::function<double(int, const Eigen::VectorXd&)>& stat);

Eigen::VectorXd solve_fixed_point(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& expected_op, int dim,
    const NormSpec& norm_c, double gamma_c, double tol = 1e-12, int budget = 1000000);

struct AuditReport {
  bool pass = true;
  double worst = 0.0;  // worst margin observed (positive = violation)
  std::string detail;
};

/// Assumption 1: contraction of the expected operator on random pairs
/// (or toward x* when the problem declares a pseudo-contraction).
AuditReport audit_contraction(const SAProblem& p, int n_probes, std::uint64_t seed, double scale = 1.0);
/// Assumption 2: Monte Carlo mean of draws matches the expected operator
/// within 4 standard errors componentwise.
AuditReport audit_unbiased(const SAProblem& p, int n_probes, int n_draws, std::uint64_t seed,
                           double scale = 1.0);
/// Assumption 3: every draw satisfies the multiplicative noise bound.
AuditReport audit_mult_noise(const SAProblem& p, int n_probes, int draws_per_probe,
                             std::uint64_t seed, double scale = 1.0);

}  // namespace csa
