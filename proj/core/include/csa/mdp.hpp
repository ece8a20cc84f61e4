#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "csa/rng.hpp"

namespace csa {

/// Finite discounted MDP. P[a] is the |S| x |S| transition matrix of action a
/// (rows are probability vectors); rewards live in [0,1].
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Eigen::MatrixXd> P;
  Eigen::MatrixXd R;  // states x actions
  double gamma = 0.9;

  void validate() const;
  int sa_index(int s, int a) const { return s * n_actions + a; }
};

struct Policy {
  Eigen::MatrixXd table;  // states x actions, rows in the simplex
  void validate(const TabularMDP& mdp) const;
  static Policy Uniform(const TabularMDP& mdp);
};

/// State transition matrix under a policy.
Eigen::MatrixXd policy_transition(const TabularMDP& mdp, const Policy& pi);

/// Unique stationary distribution of the chain induced by pi. Errors out if
/// the chain has more than one recurrent class (the Assumption fails).
Eigen::VectorXd stationary_distribution(const TabularMDP& mdp, const Policy& pi);

/// V^pi via the direct linear solve (I - gamma P_pi)^{-1} r_pi.
Eigen::VectorXd policy_values(const TabularMDP& mdp, const Policy& pi);
/// Q^pi componentwise over (s,a).
Eigen::VectorXd policy_q_values(const TabularMDP& mdp, const Policy& pi);

/// Builtin generators.
TabularMDP garnet_mdp(int n_states, int n_actions, int branching, std::uint64_t seed);
TabularMDP constant_reward_mdp(int n_states, int n_actions, double gamma);

/// Structured text (JSON) round trip.
TabularMDP load_mdp_json(const std::string& text);
std::string mdp_to_json(const TabularMDP& mdp);

}  // namespace csa
