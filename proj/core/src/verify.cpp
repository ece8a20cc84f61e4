#include "csa/verify.hpp"

#include <boost/math/distributions/beta.hpp>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace csa {
namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0, m2 = 0.0;
  double count = 0.0;
  for (double x : v) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  return {mean, std::sqrt(std::max(m2 / (n - 1.0), 0.0) / n)};
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
  double r2 = 0.0;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.sse = std::max(0.0, syy - f.slope * sxy);
  f.r2 = (syy > 0.0) ? 1.0 - f.sse / syy : 0.0;
  return f;
}

TailFit fit_points(const std::vector<double>& eps, const std::vector<double>& surv) {
  if (eps.size() < 20)
    throw std::invalid_argument("fit_tail_exponent: need at least 20 CCDF points in range");
  std::vector<double> lx, ly, nls;
  lx.reserve(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0) || !(surv[i] > 0.0) || !(surv[i] < 1.0)) continue;
    const double nl = -std::log(surv[i]);
    if (!(nl > 0.0)) continue;
    lx.push_back(std::log(eps[i]));
    ly.push_back(std::log(nl));
    nls.push_back(nl);
  }
  if (lx.size() < 20)
    throw std::invalid_argument("fit_tail_exponent: degenerate support in fit range");

  const LinearFit stage1 = least_squares(lx, ly);
  double beta0 = stage1.slope;
  if (!(beta0 > 0.0)) beta0 = 1.0;

  // Refine beta by minimizing the SSE of -log S against (eps^beta, 1).
  auto sse_of = [&](double beta) {
    std::vector<double> xb(lx.size());
    for (std::size_t i = 0; i < lx.size(); ++i) xb[i] = std::exp(beta * lx[i]);
    return least_squares(xb, nls);
  };
  const double gr = 0.61803398874989484820;
  double a = beta0 / 3.0, b = beta0 * 3.0;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = sse_of(x1).sse, f2 = sse_of(x2).sse;
  for (int it = 0; it < 120; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = sse_of(x1).sse;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = sse_of(x2).sse;
    }
  }
  TailFit fit;
  fit.beta_hat = 0.5 * (a + b);
  const LinearFit final_fit = sse_of(fit.beta_hat);
  fit.k2_hat = final_fit.slope;
  fit.log_k1_hat = -final_fit.intercept;
  fit.r_squared = final_fit.r2;
  fit.points_used = static_cast<int>(lx.size());
  fit.ci_lo = fit.ci_hi = fit.beta_hat;
  return fit;
}

// Deterministic thinning: at most `cap` points, evenly spaced in index order.
void select_range(const CcdfCurve& curve, double lo, double hi, std::vector<double>& eps,
                  std::vector<double>& surv, std::size_t cap = 512) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < curve.eps.size(); ++i)
    if (curve.eps[i] >= lo && curve.eps[i] <= hi && curve.surv[i] > 0.0 && curve.surv[i] < 1.0)
      idx.push_back(i);
  const std::size_t m = idx.size();
  eps.clear();
  surv.clear();
  if (m == 0) return;
  const std::size_t take = std::min(cap, m);
  for (std::size_t j = 0; j < take; ++j) {
    const std::size_t i = idx[(j * (m - 1)) / std::max<std::size_t>(take - 1, 1)];
    eps.push_back(curve.eps[i]);
    surv.push_back(curve.surv[i]);
  }
}

}  // namespace

double clopper_pearson_upper(int successes, int n, double confidence) {
  if (n <= 0 || successes < 0 || successes > n)
    throw std::invalid_argument("clopper_pearson_upper: bad counts");
  if (successes == n) return 1.0;
  boost::math::beta_distribution<double> dist(successes + 1.0, static_cast<double>(n - successes));
  return boost::math::quantile(dist, confidence);
}

ViolationAudit audit_violations(const EnsembleResult& ens, const BoundCurve& curve, double tol,
                                double confidence) {
  ViolationAudit audit;
  audit.n = ens.n;
  audit.K = static_cast<long long>(curve.K);
  audit.confidence = confidence;
  if (curve.ks.empty() || curve.ks.front() != curve.K || curve.ks.back() < ens.k_max)
    throw std::invalid_argument("audit_violations: curve must cover [K, k_max]");
  for (std::size_t i = 1; i < curve.ks.size(); ++i)
    if (curve.ks[i] != curve.ks[i - 1] + 1)
      throw std::invalid_argument("audit_violations: curve grid must be contiguous");
  const long long K = static_cast<long long>(curve.K);
  for (int t = 0; t < ens.n; ++t) {
    bool violated = ens.fault_steps[t] >= 0;
    if (!violated) {
      for (long long k = K; k <= ens.k_max; ++k) {
        const double e = ens.err(t, static_cast<int>(k));
        const double b = curve.values[static_cast<std::size_t>(k - K)];
        if (e * e > b + tol) {
          violated = true;
          break;
        }
      }
    }
    if (violated) ++audit.violations;
  }
  audit.cp_upper = clopper_pearson_upper(audit.violations, audit.n, confidence);
  return audit;
}

CcdfCurve empirical_ccdf(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_ccdf: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  if (!(sorted.front() >= 0.0))
    throw std::invalid_argument("empirical_ccdf: samples must be nonnegative");
  CcdfCurve curve;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;  // keep the last duplicate
    curve.eps.push_back(sorted[i]);
    curve.surv.push_back(static_cast<double>(sorted.size() - (i + 1)) / n);
  }
  return curve;
}

TailFit fit_tail_exponent(const CcdfCurve& curve, double fit_lo, double fit_hi) {
  std::vector<double> eps, surv;
  select_range(curve, fit_lo, fit_hi, eps, surv);
  return fit_points(eps, surv);
}

TailFit fit_tail_exponent_boot(std::span<const double> samples, double fit_lo, double fit_hi,
                               int n_boot, std::uint64_t seed) {
  TailFit fit = fit_tail_exponent(empirical_ccdf(samples), fit_lo, fit_hi);
  std::vector<double> betas;
  betas.reserve(n_boot);
  std::vector<double> resample(samples.size());
  for (int b = 0; b < n_boot; ++b) {
    Rng rng(SeedSpec{seed, static_cast<std::uint64_t>(b)});
    for (std::size_t i = 0; i < resample.size(); ++i) {
      const std::size_t j = std::min(static_cast<std::size_t>(rng.uniform01() * samples.size()),
                                     samples.size() - 1);
      resample[i] = samples[j];
    }
    try {
      betas.push_back(fit_tail_exponent(empirical_ccdf(resample), fit_lo, fit_hi).beta_hat);
    } catch (const std::invalid_argument&) {
      // resample collapsed below the point floor; skip
    }
  }
  if (betas.size() >= 20) {
    std::sort(betas.begin(), betas.end());
    const auto q = [&](double p) {
      const double pos = p * (betas.size() - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double w = pos - static_cast<double>(i);
      return (i + 1 < betas.size()) ? (1.0 - w) * betas[i] + w * betas[i + 1] : betas[i];
    };
    fit.ci_lo = q(0.025);
    fit.ci_hi = q(0.975);
  }
  return fit;
}

double ks_distance_to_atoms(std::span<const double> samples,
                            std::vector<std::pair<double, double>> atoms) {
  if (samples.empty() || atoms.empty()) throw std::invalid_argument("ks_distance: empty input");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::sort(atoms.begin(), atoms.end());
  const double n = static_cast<double>(sorted.size());
  double ks = 0.0;
  double exact_cdf = 0.0;
  std::size_t si = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const double v = atoms[i].first;
    // Empirical CDF just below the atom (left limit) against exact left limit.
    while (si < sorted.size() && sorted[si] < v) ++si;
    ks = std::max(ks, std::abs(static_cast<double>(si) / n - exact_cdf));
    exact_cdf += atoms[i].second;
    // At the atom (right-continuous values).
    std::size_t sj = si;
    while (sj < sorted.size() && sorted[sj] <= v) ++sj;
    ks = std::max(ks, std::abs(static_cast<double>(sj) / n - exact_cdf));
  }
  return ks;
}

namespace detail {

MachineryReport mgf_recursion_check(const SAProblem& p, const MoreauConfig& cfg,
                                    const StepSchedule& sched,
                                    const std::function<double(int)>& lambda_of,
                                    const std::function<double(int)>& rho_of,
                                    const std::function<double(int)>& drift_of,
                                    const MachineryOptions& opts) {
  const Eigen::VectorXd x_star = p.x_star;
  auto stat = [&cfg, x_star](int, const Eigen::VectorXd& x) { return moreau_eval(cfg, x - x_star); };
  const std::vector<double> M =
      run_ensemble_stat(p, sched, opts.k_hi + 1, opts.n, opts.master_seed, opts.workers, stat);
  const int cols = opts.k_hi + 2;

  MachineryReport rep;
  rep.pass = true;
  rep.note = "paired Monte Carlo of the one-step MGF recursion";
  std::vector<double> lhs_v(opts.n), rhs_v(opts.n);
  for (int k = opts.k_lo; k <= opts.k_hi; ++k) {
    const double lam_k = lambda_of(k);
    const double lam_k1 = lambda_of(k + 1);
    const double rho = rho_of(k);
    const double drift = drift_of(k);
    for (int i = 0; i < opts.n; ++i) {
      const double mk = M[static_cast<std::size_t>(i) * cols + k];
      const double mk1 = M[static_cast<std::size_t>(i) * cols + k + 1];
      lhs_v[i] = std::exp(lam_k1 * mk1);
      rhs_v[i] = std::exp(rho * lam_k * mk) * drift;
    }
    const MeanSe L = mean_se(lhs_v);
    const MeanSe R = mean_se(rhs_v);
    MachineryRow row;
    row.k = k;
    row.lhs = L.mean;
    row.rhs = R.mean;
    row.rel_se = std::sqrt((L.se / L.mean) * (L.se / L.mean) + (R.se / R.mean) * (R.se / R.mean));
    row.ok = std::isfinite(L.mean) && std::isfinite(R.mean) &&
             L.mean <= R.mean * (1.0 + 3.0 * row.rel_se);
    if (!std::isfinite(L.mean) || !std::isfinite(R.mean)) rep.finite = false;
    rep.rows.push_back(row);
    rep.pass = rep.pass && row.ok;
  }
  if (!rep.finite) rep.note += "; non-finite MGF estimate encountered";
  return rep;
}

MachineryReport supermartingale_check(const SAProblem& p, const MoreauConfig& cfg,
                                      const StepSchedule& sched,
                                      const std::function<double(int)>& lambda_of,
                                      double drift_constant, const MachineryOptions& opts) {
  const Eigen::VectorXd x_star = p.x_star;
  auto stat = [&cfg, x_star](int, const Eigen::VectorXd& x) { return moreau_eval(cfg, x - x_star); };
  const std::vector<double> M =
      run_ensemble_stat(p, sched, opts.k_hi + 1, opts.n, opts.master_seed, opts.workers, stat);
  const int cols = opts.k_hi + 2;

  std::vector<double> alpha_sum(opts.k_hi + 2, 0.0);
  for (int k = 1; k <= opts.k_hi + 1; ++k) alpha_sum[k] = alpha_sum[k - 1] + sched.at(k - 1);

  MachineryReport rep;
  rep.pass = true;
  rep.note = "E[Mbar_k] nonincreasing, paired-difference 3 SE gate";
  std::vector<double> diff(opts.n);
  for (int k = opts.k_lo; k <= opts.k_hi; ++k) {
    const double lam_k = lambda_of(k);
    const double lam_k1 = lambda_of(k + 1);
    double mean_k = 0.0, mean_k1 = 0.0;
    for (int i = 0; i < opts.n; ++i) {
      const double mk = M[static_cast<std::size_t>(i) * cols + k];
      const double mk1 = M[static_cast<std::size_t>(i) * cols + k + 1];
      const double mb_k = std::exp(lam_k * mk - drift_constant * alpha_sum[k]);
      const double mb_k1 = std::exp(lam_k1 * mk1 - drift_constant * alpha_sum[k + 1]);
      diff[i] = mb_k1 - mb_k;
      mean_k += mb_k;
      mean_k1 += mb_k1;
    }
    const MeanSe D = mean_se(diff);
    MachineryRow row;
    row.k = k;
    row.lhs = mean_k1 / opts.n;
    row.rhs = mean_k / opts.n;
    row.rel_se = D.se;
    row.ok = std::isfinite(D.mean) && D.mean <= 3.0 * D.se;
    if (!std::isfinite(D.mean)) rep.finite = false;
    rep.rows.push_back(row);
    rep.pass = rep.pass && row.ok;
  }
  if (!rep.finite) rep.note += "; non-finite estimate encountered";
  return rep;
}

}  // namespace detail

MachineryReport check_mgf_recursion_mult(const SAProblem& p, const MultLedger& lg,
                                         const MachineryOptions& opts) {
  const StepSchedule sched = lg.schedule;
  const double theta = lg.theta;
  const double scale = opts.lambda_scale;
  auto lambda_of = [&lg, sched, theta, scale](int k) {
    const double B = worst_case_bound(lg, k);
    return scale * theta / (sched.at(k) * B * B);
  };
  const double rate = (sched.alpha * lg.D0 / 2.0 - 1.0) / sched.alpha;
  auto rho_of = [sched, rate](int k) { return std::exp(-rate * sched.at(k)); };
  const double xs = 1.0 + lg.xstar_norm;
  auto drift_of = [&lg, sched, lambda_of, xs](int k) {
    const double a = sched.at(k);
    return std::exp(2.0 * a * a * lambda_of(k) * lg.D2 * xs * xs);
  };
  return detail::mgf_recursion_check(p, lg.moreau, sched, lambda_of, rho_of, drift_of, opts);
}

MachineryReport check_mgf_recursion_add(const SAProblem& p, const AddLedger& lg,
                                        const MachineryOptions& opts) {
  const StepSchedule sched = lg.schedule;
  const double theta = lg.theta_bar;
  const double scale = opts.lambda_scale;
  auto lambda_of = [sched, theta, scale](int k) { return scale * theta / sched.at(k); };
  auto rho_of = [&lg, sched](int k) {
    return sched.at(k) / sched.at(k + 1) * (1.0 - lg.Db1 * sched.at(k) / 2.0);
  };
  const double drift_c = lg.Db1 * lg.Db4 / (4.0 * lg.Db3);
  auto drift_of = [sched, drift_c](int k) { return std::exp(drift_c * sched.at(k)); };
  return detail::mgf_recursion_check(p, lg.moreau, sched, lambda_of, rho_of, drift_of, opts);
}

MachineryReport check_supermartingale_mult(const SAProblem& p, const MultLedger& lg,
                                           const MachineryOptions& opts) {
  const StepSchedule sched = lg.schedule;
  const double theta = lg.theta;
  auto lambda_of = [&lg, sched, theta](int k) {
    const double B = worst_case_bound(lg, k);
    return theta / (sched.at(k) * B * B);
  };
  return detail::supermartingale_check(p, lg.moreau, sched, lambda_of, lg.D3 * opts.drift_scale,
                                       opts);
}

MachineryReport check_supermartingale_add(const SAProblem& p, const AddLedger& lg,
                                          const MachineryOptions& opts) {
  const StepSchedule sched = lg.schedule;
  const double theta = lg.theta_bar;
  auto lambda_of = [sched, theta](int k) { return theta / sched.at(k); };
  return detail::supermartingale_check(p, lg.moreau, sched, lambda_of, lg.Db5 * opts.drift_scale,
                                       opts);
}

}  // namespace csa
