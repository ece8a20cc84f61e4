#include "csa/moreau.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace csa {
namespace {

constexpr double kSqrtE = 1.6487212707001281468486507878142;

double smoothness_of(const NormSpec& s) {
  switch (s.kind()) {
    case NormKind::euclidean: return 1.0;
    case NormKind::p_norm: return s.p() - 1.0;
    case NormKind::weighted_quadratic: return 1.0;  // in its own geometry
    case NormKind::max_norm:
      throw std::invalid_argument("MoreauConfig: max-norm is not a valid smoothing norm");
  }
  return 1.0;
}

// Curvature bound of 1/2||.||^2 with respect to the euclidean norm, used for
// step sizing only.
double euclid_curvature(const NormSpec& n) {
  switch (n.kind()) {
    case NormKind::euclidean: return 1.0;
    case NormKind::p_norm: return n.p() - 1.0;
    case NormKind::weighted_quadratic: return n.lambda_max();
    case NormKind::max_norm: return 1.0;
  }
  return 1.0;
}

// Gradient of 1/2||v||^2 for the smooth kinds.
void grad_half_sq(const NormSpec& n, const Eigen::VectorXd& v, Eigen::VectorXd& out) {
  switch (n.kind()) {
    case NormKind::euclidean:
      out = v;
      return;
    case NormKind::weighted_quadratic:
      out = n.weight() * v;
      return;
    case NormKind::p_norm: {
      const double nv = n.eval(v);
      if (nv == 0.0) {
        out.setZero(v.size());
        return;
      }
      out.resize(v.size());
      for (int i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]) / nv;
        out[i] = (v[i] >= 0.0 ? 1.0 : -1.0) * nv * std::pow(a, n.p() - 1.0);
      }
      return;
    }
    case NormKind::max_norm:
      throw std::logic_error("max-norm has no smooth gradient");
  }
}

// prox of t * 1/2||.||_inf^2: clips |v| at the root of
// tau - (1/t) sum (|v_i| - tau)_+ = 0 (piecewise linear, solved by sorting).
Eigen::VectorXd prox_half_sq_max(const Eigen::VectorXd& v, double t) {
  const int d = static_cast<int>(v.size());
  std::vector<double> a(d);
  for (int i = 0; i < d; ++i) a[i] = std::abs(v[i]);
  std::sort(a.begin(), a.end(), std::greater<double>());
  if (a[0] == 0.0) return v;
  double tau = a[0];
  double prefix = 0.0;
  for (int j = 1; j <= d; ++j) {
    prefix += a[j - 1];
    const double cand = prefix / (t + j);
    const double lo = (j < d) ? a[j] : 0.0;
    if (cand >= lo && cand <= a[j - 1]) {
      tau = cand;
      break;
    }
  }
  Eigen::VectorXd u(d);
  for (int i = 0; i < d; ++i) {
    const double m = std::min(std::abs(v[i]), tau);
    u[i] = (v[i] >= 0.0 ? m : -m);
  }
  return u;
}

double half_sq(const NormSpec& n, const Eigen::VectorXd& v) {
  const double t = n.eval(v);
  return 0.5 * t * t;
}

}  // namespace

MoreauConfig MoreauConfig::Make(NormSpec c, NormSpec s, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("MoreauConfig: mu must be > 0");
  if (c.dim() != s.dim()) throw std::invalid_argument("MoreauConfig: dimension mismatch");
  MoreauConfig cfg{std::move(c), std::move(s), mu, 1.0, 1.0, 1.0};
  cfg.L = smoothness_of(cfg.norm_s);
  const EquivConstants eq = norm_equiv_constants(cfg.norm_c, cfg.norm_s);
  cfg.l_cs = eq.lower;
  cfg.u_cs = eq.upper;
  return cfg;
}

double MoreauConfig::u_cM_star() const {
  if (norm_c.kind() == NormKind::max_norm) return kSqrtE;
  return dual_pair_constants(norm_c).upper / l_cM();
}

MoreauValue moreau_eval_full(const MoreauConfig& cfg, const Eigen::VectorXd& x) {
  if (x.size() != cfg.norm_c.dim()) throw std::invalid_argument("moreau_eval: dimension mismatch");

  MoreauValue result;
  const bool hilbert_pair =
      cfg.norm_c.same_as(cfg.norm_s) && cfg.norm_c.kind() != NormKind::p_norm &&
      cfg.norm_c.kind() != NormKind::max_norm;
  if (hilbert_pair) {
    const double n = cfg.norm_c.eval(x);
    result.value = n * n / (2.0 * (1.0 + cfg.mu));
    result.minimizer = x / (1.0 + cfg.mu);
    result.closed_form = true;
    return result;
  }
  return moreau_eval_numeric(cfg, x);
}

MoreauValue moreau_eval_numeric(const MoreauConfig& cfg, const Eigen::VectorXd& x) {
  if (x.size() != cfg.norm_c.dim()) throw std::invalid_argument("moreau_eval: dimension mismatch");
  MoreauValue result;
  // FISTA on f + psi, with psi the max-norm half-square if present
  // (it has an exact prox), everything else folded into the smooth part.
  const bool c_smooth = cfg.norm_c.kind() != NormKind::max_norm;
  const double mu = cfg.mu;
  auto objective = [&](const Eigen::VectorXd& u) {
    return half_sq(cfg.norm_c, u) + half_sq(cfg.norm_s, x - u) / mu;
  };
  auto grad_smooth = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    Eigen::VectorXd tmp;
    grad_half_sq(cfg.norm_s, x - u, tmp);
    g = -tmp / mu;
    if (c_smooth) {
      grad_half_sq(cfg.norm_c, u, tmp);
      g += tmp;
    }
  };

  double lip = euclid_curvature(cfg.norm_s) / mu;
  if (c_smooth) lip += euclid_curvature(cfg.norm_c);
  const double step = 1.0 / lip;

  Eigen::VectorXd u = x / (1.0 + mu);
  Eigen::VectorXd y = u;
  Eigen::VectorXd u_prev = u;
  Eigen::VectorXd g(x.size());
  double theta = 1.0;
  double best = objective(u);
  double window_best = best;
  const int max_iters = 100000;
  const int window = 50;
  int iters = 0;
  for (; iters < max_iters; ++iters) {
    grad_smooth(y, g);
    Eigen::VectorXd u_next = y - step * g;
    if (!c_smooth) u_next = prox_half_sq_max(u_next, step);
    const double val = objective(u_next);
    if (val > best) {  // function restart
      y = u;
      theta = 1.0;
      grad_smooth(y, g);
      u_next = y - step * g;
      if (!c_smooth) u_next = prox_half_sq_max(u_next, step);
    }
    u_prev.swap(u);
    u = u_next;
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    y = u + ((theta - 1.0) / theta_next) * (u - u_prev);
    theta = theta_next;
    const double cur = objective(u);
    best = std::min(best, cur);
    if ((iters + 1) % window == 0) {
      if (window_best - best <= 1e-14 * std::max(1.0, std::abs(best))) {
        ++iters;
        break;
      }
      window_best = best;
    }
  }
  if (iters >= max_iters)
    throw std::runtime_error("moreau_eval: minimization did not converge within budget");
  result.value = objective(u);
  result.minimizer = std::move(u);
  result.iterations = iters;
  return result;
}

double moreau_eval(const MoreauConfig& cfg, const Eigen::VectorXd& x) {
  return moreau_eval_full(cfg, x).value;
}

Eigen::VectorXd moreau_gradient(const MoreauConfig& cfg, const Eigen::VectorXd& x) {
  const MoreauValue mv = moreau_eval_full(cfg, x);
  Eigen::VectorXd g;
  grad_half_sq(cfg.norm_s, x - mv.minimizer, g);
  return g / cfg.mu;
}

MoreauConstants moreau_constants(const MoreauConfig& cfg, double gamma_c) {
  if (!(gamma_c >= 0.0 && gamma_c < 1.0))
    throw std::invalid_argument("moreau_constants: gamma_c must be in [0,1)");
  MoreauConstants out;
  out.l_cM = cfg.l_cM();
  out.u_cM = cfg.u_cM();
  out.gamma_tilde = gamma_c * out.u_cM / out.l_cM;
  return out;
}

double choose_mu(const NormSpec& norm_c, const NormSpec& norm_s, double gamma_c,
                 std::optional<double> target) {
  if (!(gamma_c < 1.0)) throw std::invalid_argument("choose_mu: gamma_c must be < 1");
  const double tgt = target.value_or(0.5 * (1.0 + gamma_c));
  const EquivConstants eq = norm_equiv_constants(norm_c, norm_s);
  auto gamma_tilde = [&](double mu) {
    return gamma_c * std::sqrt((1.0 + mu * eq.upper * eq.upper) /
                               (1.0 + mu * eq.lower * eq.lower));
  };
  const double mu_max = 1e6;
  if (gamma_tilde(mu_max) <= tgt) return mu_max;
  double lo = 1e-12;
  if (gamma_tilde(lo) > tgt)
    throw std::invalid_argument("choose_mu: target below the mu->0 limit gamma_c");
  double hi = mu_max;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_tilde(mid) <= tgt)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double q_learning_recipe_mu(double gamma_hat) {
  if (!(gamma_hat > 0.0 && gamma_hat < 1.0))
    throw std::invalid_argument("q_learning_recipe_mu: gamma in (0,1) required");
  const double r = (1.0 + gamma_hat) / (2.0 * gamma_hat);
  return r * r - 1.0;
}

}  // namespace csa
