#include "csa/sa.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace csa {
namespace {

void check_step_pre(double alpha_k) {
  if (!(alpha_k > 0.0 && alpha_k <= 1.0))
    throw std::invalid_argument("sa_step: stepsize must be in (0, 1]");
}

template <typename PerTrajectory>
void parallel_over_trajectories(int n, int workers, PerTrajectory&& body) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto drain = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  const int nw = std::min(workers, n);
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w) pool.emplace_back(drain);
  for (auto& t : pool) t.join();
}

}  // namespace

Eigen::VectorXd sa_step(const SAProblem& p, const Eigen::VectorXd& x, double alpha_k, Rng& g) {
  check_step_pre(alpha_k);
  Eigen::VectorXd draw(p.dim);
  p.sample_op(x, g, draw);
  return x + alpha_k * (draw - x);
}

Trajectory run_trajectory(const SAProblem& p, const StepSchedule& s, int k_max, SeedSpec seed,
                          const StepObserver* observer) {
  Trajectory out;
  out.seed = seed;
  out.errors.assign(static_cast<std::size_t>(k_max) + 1, std::numeric_limits<double>::quiet_NaN());
  Rng rng = derive_stream(seed);
  Eigen::VectorXd x = p.x0;
  Eigen::VectorXd draw(p.dim);
  out.errors[0] = p.error_of(x);
  if (observer) (*observer)(0, x);
  for (int k = 0; k < k_max; ++k) {
    const double a = s.at(k);
    check_step_pre(a);
    p.sample_op(x, rng, draw);
    x += a * (draw - x);
    if (!x.allFinite()) {
      out.fault_step = k + 1;
      return out;
    }
    out.errors[static_cast<std::size_t>(k) + 1] = p.error_of(x);
    if (observer) (*observer)(k + 1, x);
  }
  return out;
}

bool EnsembleResult::any_fault() const {
  for (long long f : fault_steps)
    if (f >= 0) return true;
  return false;
}

std::vector<double> EnsembleResult::column(int k) const {
  std::vector<double> col(n);
  for (int i = 0; i < n; ++i) col[i] = err(i, k);
  return col;
}

EnsembleResult run_ensemble(const SAProblem& p, const StepSchedule& s, int k_max, int n,
                            std::uint64_t master_seed, int workers) {
  if (n < 1) throw std::invalid_argument("run_ensemble: n must be >= 1");
  EnsembleResult res;
  res.n = n;
  res.k_max = k_max;
  res.master_seed = master_seed;
  res.errors.assign(static_cast<std::size_t>(n) * (k_max + 1), 0.0);
  res.fault_steps.assign(n, -1);
  parallel_over_trajectories(n, workers, [&](int i) {
    Trajectory t = run_trajectory(p, s, k_max, SeedSpec{master_seed, static_cast<std::uint64_t>(i)});
    std::copy(t.errors.begin(), t.errors.end(),
              res.errors.begin() + static_cast<std::size_t>(i) * (k_max + 1));
    res.fault_steps[i] = t.fault_step;
  });
  return res;
}

std::vector<double> run_ensemble_stat(const SAProblem& p, const StepSchedule& s, int k_max, int n,
                                      std::uint64_t master_seed, int workers,
                                      const std::function<double(int, const Eigen::VectorXd&)>& stat) {
  std::vector<double> values(static_cast<std::size_t>(n) * (k_max + 1),
                             std::numeric_limits<double>::quiet_NaN());
  parallel_over_trajectories(n, workers, [&](int i) {
    StepObserver obs = [&](int k, const Eigen::VectorXd& x) {
      values[static_cast<std::size_t>(i) * (k_max + 1) + k] = stat(k, x);
    };
    run_trajectory(p, s, k_max, SeedSpec{master_seed, static_cast<std::uint64_t>(i)}, &obs);
  });
  return values;
}

Eigen::VectorXd solve_fixed_point(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& expected_op, int dim,
    const NormSpec& norm_c, double gamma_c, double tol, int budget) {
  if (!(gamma_c < 1.0)) throw std::invalid_argument("solve_fixed_point: gamma_c must be < 1");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd fx(dim);
  const double target = tol * (1.0 - gamma_c);
  for (int it = 0; it < budget; ++it) {
    expected_op(x, fx);
    if (norm_c.eval(fx - x) <= target) return fx;
    x = fx;
  }
  throw std::runtime_error("solve_fixed_point: iteration budget exceeded (broken contraction?)");
}

AuditReport audit_contraction(const SAProblem& p, int n_probes, std::uint64_t seed, double scale) {
  AuditReport rep;
  if (!p.expected_op) {
    rep.detail = "no expected operator supplied; skipped";
    return rep;
  }
  Rng rng(SeedSpec{seed, 17});
  Eigen::VectorXd x1(p.dim), x2(p.dim), f1(p.dim), f2(p.dim);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_probes; ++i) {
    for (int j = 0; j < p.dim; ++j) x1[j] = scale * rng.normal();
    if (p.contraction_is_global) {
      for (int j = 0; j < p.dim; ++j) x2[j] = scale * rng.normal();
    } else {
      x2 = p.x_star;
    }
    p.expected_op(x1, f1);
    p.expected_op(x2, f2);
    const double lhs = p.norm_c.eval(f1 - f2);
    const double rhs = p.gamma_c * p.norm_c.eval(x1 - x2);
    worst = std::max(worst, lhs - rhs);
  }
  rep.worst = worst;
  rep.pass = worst <= 1e-9 * std::max(1.0, scale);
  std::ostringstream os;
  os << "max ||Fbar(x1)-Fbar(x2)||_c - gamma_c ||x1-x2||_c = " << worst;
  rep.detail = os.str();
  return rep;
}

AuditReport audit_unbiased(const SAProblem& p, int n_probes, int n_draws, std::uint64_t seed,
                           double scale) {
  AuditReport rep;
  if (!p.expected_op) {
    rep.detail = "no expected operator supplied; skipped";
    return rep;
  }
  Rng rng(SeedSpec{seed, 23});
  Eigen::VectorXd x(p.dim), draw(p.dim), expect(p.dim);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_probes; ++i) {
    for (int j = 0; j < p.dim; ++j) x[j] = scale * rng.normal();
    p.expected_op(x, expect);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p.dim);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(p.dim);
    for (int t = 1; t <= n_draws; ++t) {
      p.sample_op(x, rng, draw);
      Eigen::VectorXd delta = draw - mean;
      mean += delta / t;
      m2 += delta.cwiseProduct(draw - mean);
    }
    for (int j = 0; j < p.dim; ++j) {
      const double se = std::sqrt(std::max(m2[j] / (n_draws - 1.0), 1e-300) / n_draws);
      const double dev = std::abs(mean[j] - expect[j]);
      worst = std::max(worst, dev - 4.0 * se);
    }
  }
  rep.worst = worst;
  rep.pass = worst <= 0.0;
  std::ostringstream os;
  os << "max componentwise |mean - Fbar| - 4 SE = " << worst;
  rep.detail = os.str();
  return rep;
}

AuditReport audit_mult_noise(const SAProblem& p, int n_probes, int draws_per_probe,
                             std::uint64_t seed, double scale) {
  AuditReport rep;
  if (p.noise.model != NoiseModel::multiplicative) {
    rep.detail = "problem does not declare multiplicative noise; skipped";
    return rep;
  }
  if (!p.expected_op) {
    rep.detail = "no expected operator supplied; skipped";
    return rep;
  }
  Rng rng(SeedSpec{seed, 29});
  Eigen::VectorXd x(p.dim), draw(p.dim), expect(p.dim);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_probes; ++i) {
    for (int j = 0; j < p.dim; ++j) x[j] = scale * rng.normal();
    p.expected_op(x, expect);
    const double budget = p.noise.sigma * (1.0 + p.norm_c.eval(x));
    for (int t = 0; t < draws_per_probe; ++t) {
      p.sample_op(x, rng, draw);
      worst = std::max(worst, p.norm_c.eval(draw - expect) - budget);
    }
  }
  rep.worst = worst;
  rep.pass = worst <= 1e-9 * std::max(1.0, scale);
  std::ostringstream os;
  os << "max ||F(x,Y)-Fbar(x)||_c - sigma(1+||x||_c) = " << worst;
  rep.detail = os.str();
  return rep;
}

}  // namespace csa
