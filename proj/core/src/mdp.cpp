#include "csa/mdp.hpp"

#include <nlohmann/json.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace csa {

void TabularMDP::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("TabularMDP: empty spaces");
  if (static_cast<int>(P.size()) != n_actions) throw std::invalid_argument("TabularMDP: |P| != n_actions");
  for (const auto& Pa : P) {
    if (Pa.rows() != n_states || Pa.cols() != n_states)
      throw std::invalid_argument("TabularMDP: transition matrix shape");
    for (int s = 0; s < n_states; ++s) {
      if (Pa.row(s).minCoeff() < -1e-14)
        throw std::invalid_argument("TabularMDP: negative transition probability");
      if (std::abs(Pa.row(s).sum() - 1.0) > 1e-12)
        throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
    }
  }
  if (R.rows() != n_states || R.cols() != n_actions)
    throw std::invalid_argument("TabularMDP: reward table shape");
  if (R.minCoeff() < 0.0 || R.maxCoeff() > 1.0)
    throw std::invalid_argument("TabularMDP: rewards must lie in [0,1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMDP: gamma in (0,1)");
}

void Policy::validate(const TabularMDP& mdp) const {
  if (table.rows() != mdp.n_states || table.cols() != mdp.n_actions)
    throw std::invalid_argument("Policy: shape mismatch");
  for (int s = 0; s < mdp.n_states; ++s) {
    if (table.row(s).minCoeff() < -1e-14) throw std::invalid_argument("Policy: negative probability");
    if (std::abs(table.row(s).sum() - 1.0) > 1e-12)
      throw std::invalid_argument("Policy: row does not sum to 1");
  }
}

Policy Policy::Uniform(const TabularMDP& mdp) {
  Policy pi;
  pi.table = Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions);
  return pi;
}

Eigen::MatrixXd policy_transition(const TabularMDP& mdp, const Policy& pi) {
  Eigen::MatrixXd Ppi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a)
    Ppi += pi.table.col(a).asDiagonal() * mdp.P[a];
  return Ppi;
}

namespace {

// Single recurrent class check: states reachable from everywhere must form
// one communicating class under the chain.
bool single_recurrent_class(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  auto reach = [&](int from) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      const int s = stack.back();
      stack.pop_back();
      for (int t = 0; t < n; ++t)
        if (!seen[t] && P(s, t) > 1e-15) {
          seen[t] = true;
          stack.push_back(t);
        }
    }
    return seen;
  };
  // A state is recurrent-candidate if every state it reaches can reach it back.
  std::vector<std::vector<bool>> R(n);
  for (int s = 0; s < n; ++s) R[s] = reach(s);
  std::vector<int> recurrent;
  for (int s = 0; s < n; ++s) {
    bool rec = true;
    for (int t = 0; t < n && rec; ++t)
      if (R[s][t] && !R[t][s]) rec = false;
    if (rec) recurrent.push_back(s);
  }
  if (recurrent.empty()) return false;
  // All recurrent states must communicate.
  for (int s : recurrent)
    for (int t : recurrent)
      if (!R[s][t]) return false;
  return true;
}

}  // namespace

Eigen::VectorXd stationary_distribution(const TabularMDP& mdp, const Policy& pi) {
  const Eigen::MatrixXd Ppi = policy_transition(mdp, pi);
  if (!single_recurrent_class(Ppi))
    throw std::runtime_error("stationary_distribution: chain has multiple recurrent classes");
  const int n = mdp.n_states;
  // Power iteration, falling back to the direct solve of (P' - I) kappa = 0.
  Eigen::VectorXd kappa = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd next = Ppi.transpose() * kappa;
    next /= next.sum();
    const double diff = (next - kappa).cwiseAbs().maxCoeff();
    kappa = next;
    if (diff < 1e-15) break;
  }
  Eigen::MatrixXd A = Ppi.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  const Eigen::VectorXd direct = A.fullPivLu().solve(rhs);
  if ((Ppi.transpose() * direct - direct).cwiseAbs().maxCoeff() < 1e-10) kappa = direct;
  kappa /= kappa.sum();
  if (kappa.minCoeff() <= 0.0)
    throw std::runtime_error("stationary_distribution: distribution not strictly positive");
  return kappa;
}

Eigen::VectorXd policy_values(const TabularMDP& mdp, const Policy& pi) {
  const Eigen::MatrixXd Ppi = policy_transition(mdp, pi);
  Eigen::VectorXd r_pi(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) r_pi[s] = pi.table.row(s).dot(mdp.R.row(s));
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * Ppi;
  return M.fullPivLu().solve(r_pi);
}

Eigen::VectorXd policy_q_values(const TabularMDP& mdp, const Policy& pi) {
  const Eigen::VectorXd v = policy_values(mdp, pi);
  Eigen::VectorXd q(mdp.n_states * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      q[mdp.sa_index(s, a)] = mdp.R(s, a) + mdp.gamma * mdp.P[a].row(s).dot(v);
  return q;
}

TabularMDP garnet_mdp(int n_states, int n_actions, int branching, std::uint64_t seed) {
  if (branching < 1 || branching > n_states) throw std::invalid_argument("garnet: bad branching");
  Rng rng(SeedSpec{seed, 0});
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = 0.9;
  mdp.R.resize(n_states, n_actions);
  mdp.P.assign(n_actions, Eigen::MatrixXd::Zero(n_states, n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s) {
      // Choose `branching` successor states without replacement.
      std::vector<int> idx(n_states);
      std::iota(idx.begin(), idx.end(), 0);
      for (int b = 0; b < branching; ++b) {
        const std::size_t pick = b + static_cast<std::size_t>(rng.uniform01() * (n_states - b));
        std::swap(idx[b], idx[std::min(pick, idx.size() - 1)]);
      }
      double total = 0.0;
      std::vector<double> w(branching);
      for (int b = 0; b < branching; ++b) {
        w[b] = -std::log(1.0 - rng.uniform01());
        total += w[b];
      }
      for (int b = 0; b < branching; ++b) mdp.P[a](s, idx[b]) = w[b] / total;
      mdp.R(s, a) = rng.uniform01();
    }
  mdp.validate();
  return mdp;
}

TabularMDP constant_reward_mdp(int n_states, int n_actions, double gamma) {
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.R = Eigen::MatrixXd::Ones(n_states, n_actions);
  // Doubly stochastic so the uniform distribution is stationary for any policy.
  mdp.P.assign(n_actions, Eigen::MatrixXd::Constant(n_states, n_states, 1.0 / n_states));
  mdp.validate();
  return mdp;
}

TabularMDP load_mdp_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  TabularMDP mdp;
  mdp.n_states = j.at("n_states").get<int>();
  mdp.n_actions = j.at("n_actions").get<int>();
  mdp.gamma = j.at("gamma").get<double>();
  mdp.P.assign(mdp.n_actions, Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states));
  const auto& jp = j.at("transitions");
  for (int a = 0; a < mdp.n_actions; ++a)
    for (int s = 0; s < mdp.n_states; ++s)
      for (int t = 0; t < mdp.n_states; ++t) mdp.P[a](s, t) = jp.at(a).at(s).at(t).get<double>();
  mdp.R.resize(mdp.n_states, mdp.n_actions);
  const auto& jr = j.at("rewards");
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) mdp.R(s, a) = jr.at(s).at(a).get<double>();
  mdp.validate();
  return mdp;
}

std::string mdp_to_json(const TabularMDP& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  for (int a = 0; a < mdp.n_actions; ++a) {
    nlohmann::json ja;
    for (int s = 0; s < mdp.n_states; ++s) {
      nlohmann::json row;
      for (int t = 0; t < mdp.n_states; ++t) row.push_back(mdp.P[a](s, t));
      ja.push_back(row);
    }
    j["transitions"].push_back(ja);
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    nlohmann::json row;
    for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.R(s, a));
    j["rewards"].push_back(row);
  }
  return j.dump(2);
}

}  // namespace csa
