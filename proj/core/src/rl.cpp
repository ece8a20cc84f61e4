#include "csa/rl.hpp"

#include <cmath>
#include <stdexcept>

namespace csa {
namespace {

int sa_of(const TabularMDP& m, int s, int a) { return m.sa_index(s, a); }

Eigen::VectorXd draw_row(const Eigen::MatrixXd& rows, int row, Rng& g) {
  Eigen::VectorXd r = rows.row(row);
  return r;
}

int sample_index(const Eigen::VectorXd& probs, Rng& g) {
  const double u = g.uniform01();
  double acc = 0.0;
  for (int i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

ISFactors is_factors_from_policies(const TabularMDP& mdp, const Policy& pi_target,
                                   const Policy& pi_b, int n_step) {
  ISFactors f;
  f.n_step = n_step;
  f.c.resize(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pb = pi_b.table(s, a);
      f.c(s, a) = pb > 0.0 ? pi_target.table(s, a) / pb : 0.0;
    }
  f.rho = f.c;
  return f;
}

void validate_is_factors(const TabularMDP& mdp, const Policy& pi_target, const Policy& pi_b,
                         const ISFactors& f) {
  if (f.n_step < 1) throw std::invalid_argument("ISFactors: n_step must be >= 1");
  if (f.c.rows() != mdp.n_states || f.c.cols() != mdp.n_actions || f.rho.rows() != mdp.n_states ||
      f.rho.cols() != mdp.n_actions)
    throw std::invalid_argument("ISFactors: table shape mismatch");
  if (f.c.minCoeff() < 0.0 || f.rho.minCoeff() < 0.0)
    throw std::invalid_argument("ISFactors: factors must be nonnegative");
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (f.rho(s, a) < f.c(s, a) - 1e-14)
        throw std::invalid_argument("ISFactors: rho >= c violated");
      if (pi_target.table(s, a) > 0.0 && pi_b.table(s, a) <= 0.0)
        throw std::invalid_argument("ISFactors: coverage violated (support of pi not in pi_b)");
    }
  for (int s = 0; s < mdp.n_states; ++s) {
    const double prod = pi_b.table.row(s).dot(f.rho.row(s));
    if (prod > 1.0 / mdp.gamma + 1e-12)
      throw std::invalid_argument("ISFactors: max_s sum_a pi_b rho <= 1/gamma violated");
  }
}

OffPolicyTdModel offpolicy_td_build(const TabularMDP& mdp, const Policy& pi_b,
                                    const Policy& pi_target, const ISFactors& f) {
  mdp.validate();
  pi_b.validate(mdp);
  pi_target.validate(mdp);
  validate_is_factors(mdp, pi_target, pi_b, f);

  OffPolicyTdModel model;
  model.mdp = mdp;
  model.pi_b = pi_b;
  model.factors = f;
  model.kappa = stationary_distribution(mdp, pi_b);

  const int nsa = mdp.n_states * mdp.n_actions;
  // B[(s,a),(s',a')] = P_a(s,s') pi_b(a'|s') c(s',a'); P_rho likewise with rho.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nsa, nsa);
  Eigen::MatrixXd P_rho = Eigen::MatrixXd::Zero(nsa, nsa);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        for (int a2 = 0; a2 < mdp.n_actions; ++a2) {
          const double base = mdp.P[a](s, s2) * pi_b.table(s2, a2);
          B(sa_of(mdp, s, a), sa_of(mdp, s2, a2)) = base * f.c(s2, a2);
          P_rho(sa_of(mdp, s, a), sa_of(mdp, s2, a2)) = base * f.rho(s2, a2);
        }

  // C = sum_{i<n} gamma^i B^i; T(Q) = R + gamma P_rho Q - Q.
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(nsa, nsa);
  Eigen::MatrixXd Bi = Eigen::MatrixXd::Identity(nsa, nsa);
  double gi = 1.0;
  for (int i = 1; i < f.n_step; ++i) {
    Bi = Bi * B;
    gi *= mdp.gamma;
    C += gi * Bi;
  }
  Eigen::VectorXd Db(nsa);
  Eigen::VectorXd Rvec(nsa);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      Db[sa_of(mdp, s, a)] = model.kappa[s] * pi_b.table(s, a);
      Rvec[sa_of(mdp, s, a)] = mdp.R(s, a);
    }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nsa, nsa);
  model.M = I + Db.asDiagonal() * C * (mdp.gamma * P_rho - I);
  model.v = Db.asDiagonal() * C * Rvec;
  model.gamma_o_certified = model.M.cwiseAbs().rowwise().sum().maxCoeff();

  // Fixed-point iteration on the exact expected operator (tol 1e-12, inf norm).
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nsa);
  for (int it = 0; it < 1000000; ++it) {
    Eigen::VectorXd next = model.expected(q);
    const double diff = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (diff <= 1e-12 * (1.0 - std::min(model.gamma_o_certified, 1.0 - 1e-6))) break;
  }
  model.q_limit = q;
  return model;
}

Eigen::VectorXd OffPolicyTdModel::sample(const Eigen::VectorXd& q, Rng& g) const {
  const int n = factors.n_step;
  // Draw the chain (s0,a0,...,sn,an).
  std::vector<int> ss(n + 1), aa(n + 1);
  Eigen::VectorXd kap = kappa;
  ss[0] = sample_index(kap, g);
  for (int i = 0; i <= n; ++i) {
    Eigen::VectorXd row = pi_b.table.row(ss[i]);
    aa[i] = sample_index(row, g);
    if (i < n) {
      Eigen::VectorXd prow = mdp.P[aa[i]].row(ss[i]);
      ss[i + 1] = sample_index(prow, g);
    }
  }
  Eigen::VectorXd out = q;
  double weight = 1.0;  // gamma^i prod_{j=1}^i c(s_j,a_j)
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i >= 1) weight *= mdp.gamma * factors.c(ss[i], aa[i]);
    const double delta = mdp.R(ss[i], aa[i]) +
                         mdp.gamma * factors.rho(ss[i + 1], aa[i + 1]) * q[sa_of(mdp, ss[i + 1], aa[i + 1])] -
                         q[sa_of(mdp, ss[i], aa[i])];
    acc += weight * delta;
  }
  out[sa_of(mdp, ss[0], aa[0])] += acc;
  return out;
}

double offpolicy_td_noise_constant(const OffPolicyTdModel& model, int n_probes, int draws_per_probe,
                                   std::uint64_t seed) {
  Rng rng(SeedSpec{seed, 41});
  const int nsa = model.mdp.n_states * model.mdp.n_actions;
  double worst = 0.0;
  for (int i = 0; i < n_probes; ++i) {
    Eigen::VectorXd q(nsa);
    const double scale = std::exp(3.0 * (rng.uniform01() - 0.5));
    for (int j = 0; j < nsa; ++j) q[j] = scale * rng.normal();
    Eigen::VectorXd fbar = model.expected(q);
    const double denom = 1.0 + q.cwiseAbs().maxCoeff();
    for (int t = 0; t < draws_per_probe; ++t) {
      Eigen::VectorXd draw = model.sample(q, rng);
      worst = std::max(worst, (draw - fbar).cwiseAbs().maxCoeff() / denom);
    }
  }
  return 1.05 * worst;
}

SAProblem offpolicy_td_problem(const OffPolicyTdModel& model, const Eigen::VectorXd& q0,
                               double sigma_audited) {
  const int nsa = model.mdp.n_states * model.mdp.n_actions;
  if (q0.size() != nsa) throw std::invalid_argument("offpolicy_td_problem: q0 size mismatch");
  if (!(model.gamma_o_certified < 1.0))
    throw std::invalid_argument("offpolicy_td_problem: certified factor >= 1");
  SAProblem p;
  p.dim = nsa;
  p.name = "offpolicy_td";
  p.norm_c = NormSpec::Max(nsa);
  p.gamma_c = model.gamma_o_certified;
  p.noise = NoiseSpec::Multiplicative(sigma_audited);
  p.x_star = model.q_limit;
  p.x0 = q0;
  auto m = std::make_shared<OffPolicyTdModel>(model);
  p.sample_op = [m](const Eigen::VectorXd& x, Rng& g, Eigen::VectorXd& out) { out = m->sample(x, g); };
  p.expected_op = [m](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out = m->expected(x); };
  return p;
}

ContractionEstimate estimate_contraction_factor(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& expected_op, int dim,
    const NormSpec& norm, int n_pairs, std::uint64_t seed, double scale) {
  if (n_pairs < 1) throw std::invalid_argument("estimate_contraction_factor: n_pairs >= 1");
  Rng rng(SeedSpec{seed, 51});
  Eigen::VectorXd x1(dim), x2(dim), f1(dim), f2(dim);
  ContractionEstimate best;
  for (int i = 0; i < n_pairs; ++i) {
    for (int j = 0; j < dim; ++j) {
      x1[j] = scale * rng.normal();
      x2[j] = scale * rng.normal();
    }
    expected_op(x1, f1);
    expected_op(x2, f2);
    const double den = norm.eval(x1 - x2);
    if (den <= 0.0) continue;
    const double r = norm.eval(f1 - f2) / den;
    if (r > best.gamma_hat) {
      best.gamma_hat = r;
      best.x1 = x1;
      best.x2 = x2;
    }
  }
  return best;
}

TdlfaModel tdlfa_build(const TabularMDP& mdp, const Policy& pi, const Eigen::MatrixXd& Phi) {
  mdp.validate();
  pi.validate(mdp);
  if (Phi.rows() != mdp.n_states) throw std::invalid_argument("tdlfa_build: Phi must have |S| rows");
  const int d = static_cast<int>(Phi.cols());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Phi);
  if (lu.rank() < d) throw std::invalid_argument("tdlfa_build: feature columns must be independent");

  TdlfaModel model;
  model.mdp = mdp;
  model.pi = pi;
  model.Phi = Phi;
  double max_norm = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) max_norm = std::max(max_norm, Phi.row(s).norm());
  if (max_norm > 1.0 + 1e-12) {
    model.Phi /= max_norm;
    model.rescaled = true;
  }
  model.kappa = stationary_distribution(mdp, pi);

  const Eigen::MatrixXd Ppi = policy_transition(mdp, pi);
  const Eigen::MatrixXd K = model.kappa.asDiagonal();
  model.A_bar = model.Phi.transpose() * K *
                (mdp.gamma * Ppi - Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states)) * model.Phi;
  Eigen::VectorXd r_pi(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) r_pi[s] = pi.table.row(s).dot(mdp.R.row(s));
  model.b_bar = -model.Phi.transpose() * K * r_pi;

  // Exact sup over the support: A_o is rank one, so its spectral norm is
  // ||phi(s)|| ||gamma phi(s') - phi(s)||.
  model.A_max = 0.0;
  model.b_max = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    const double ns = model.Phi.row(s).norm();
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (pi.table(s, a) <= 0.0) continue;
      model.b_max = std::max(model.b_max, ns * mdp.R(s, a));
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        if (mdp.P[a](s, s2) <= 0.0) continue;
        const double na = ns * (mdp.gamma * model.Phi.row(s2) - model.Phi.row(s)).norm();
        model.A_max = std::max(model.A_max, na);
      }
    }
  }
  model.theta_star = model.A_bar.fullPivLu().solve(model.b_bar);
  return model;
}

void TdlfaModel::sample(Rng& g, Eigen::MatrixXd& A, Eigen::VectorXd& b) const {
  Eigen::VectorXd kap = kappa;
  const int s = sample_index(kap, g);
  Eigen::VectorXd prow = pi.table.row(s);
  const int a = sample_index(prow, g);
  Eigen::VectorXd trow = mdp.P[a].row(s);
  const int s2 = sample_index(trow, g);
  const Eigen::VectorXd phi_s = Phi.row(s);
  const Eigen::VectorXd phi_s2 = Phi.row(s2);
  A = phi_s * (mdp.gamma * phi_s2 - phi_s).transpose();
  b = -phi_s * mdp.R(s, a);
}

std::pair<LinearSASpec, SAProblem> tdlfa_remodel(const TdlfaModel& model) {
  RemodelInputs in;
  auto m = std::make_shared<TdlfaModel>(model);
  in.sampler = [m](Rng& g, Eigen::MatrixXd& A, Eigen::VectorXd& b) { m->sample(g, A, b); };
  in.A_bar = model.A_bar;
  in.b_bar = model.b_bar;
  in.A_max = model.A_max;
  in.b_max = model.b_max;
  auto out = remodel(in);
  out.second.name = "tdlfa";
  return out;
}

Eigen::VectorXd bellman_optimality(const TabularMDP& mdp, const Eigen::VectorXd& q) {
  Eigen::VectorXd out(q.size());
  Eigen::VectorXd vmax(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    double m = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) m = std::max(m, q[mdp.sa_index(s, a)]);
    vmax[s] = m;
  }
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      out[mdp.sa_index(s, a)] = mdp.R(s, a) + mdp.gamma * mdp.P[a].row(s).dot(vmax);
  return out;
}

Eigen::VectorXd q_star(const TabularMDP& mdp, double tol) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(mdp.n_states * mdp.n_actions);
  for (int it = 0; it < 1000000; ++it) {
    Eigen::VectorXd next = bellman_optimality(mdp, q);
    const double diff = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (diff <= tol * (1.0 - mdp.gamma)) break;
  }
  return q;
}

QLearningModel qlearning_build(const TabularMDP& mdp, const Policy& pi_b) {
  mdp.validate();
  pi_b.validate(mdp);
  QLearningModel model;
  model.mdp = mdp;
  model.pi_b = pi_b;
  model.kappa_b = stationary_distribution(mdp, pi_b);
  model.D_b.resize(mdp.n_states * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      model.D_b[mdp.sa_index(s, a)] = model.kappa_b[s] * pi_b.table(s, a);
  model.D_b_min = model.D_b.minCoeff();
  if (model.D_b_min <= 0.0)
    throw std::runtime_error("qlearning_build: behavior policy must visit every (s,a)");
  model.gamma_hat = 1.0 - model.D_b_min * (1.0 - mdp.gamma);
  model.q_opt = q_star(mdp);
  return model;
}

Eigen::VectorXd QLearningModel::expected(const Eigen::VectorXd& q) const {
  const Eigen::VectorXd h = bellman_optimality(mdp, q);
  return D_b.cwiseProduct(h) + (Eigen::VectorXd::Ones(q.size()) - D_b).cwiseProduct(q);
}

Eigen::VectorXd QLearningModel::sample(const Eigen::VectorXd& q, Rng& g) const {
  Eigen::VectorXd kap = kappa_b;
  const int s = sample_index(kap, g);
  Eigen::VectorXd prow = pi_b.table.row(s);
  const int a = sample_index(prow, g);
  Eigen::VectorXd trow = mdp.P[a].row(s);
  const int s2 = sample_index(trow, g);
  double vmax = -std::numeric_limits<double>::infinity();
  for (int a2 = 0; a2 < mdp.n_actions; ++a2) vmax = std::max(vmax, q[mdp.sa_index(s2, a2)]);
  Eigen::VectorXd out = q;
  out[mdp.sa_index(s, a)] += mdp.R(s, a) + mdp.gamma * vmax - q[mdp.sa_index(s, a)];
  return out;
}

SAProblem qlearning_problem(const QLearningModel& model, const Eigen::VectorXd& q0) {
  const int nsa = model.mdp.n_states * model.mdp.n_actions;
  if (q0.size() != nsa) throw std::invalid_argument("qlearning_problem: q0 size mismatch");
  const double cap = 1.0 / (1.0 - model.mdp.gamma);
  if (q0.cwiseAbs().maxCoeff() > cap + 1e-12)
    throw std::invalid_argument("qlearning_problem: ||Q_0||_inf <= 1/(1-gamma) required");
  SAProblem p;
  p.dim = nsa;
  p.name = "q_learning";
  p.norm_c = NormSpec::Max(nsa);
  p.gamma_c = model.gamma_hat;
  p.noise = NoiseSpec::AdditiveSubGaussian(4.0 / (1.0 - model.mdp.gamma), 1.0);
  p.x_star = model.q_opt;
  p.x0 = q0;
  auto m = std::make_shared<QLearningModel>(model);
  p.sample_op = [m](const Eigen::VectorXd& x, Rng& g, Eigen::VectorXd& out) { out = m->sample(x, g); };
  p.expected_op = [m](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out = m->expected(x); };
  return p;
}

}  // namespace csa
