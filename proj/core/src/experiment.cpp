#include "csa/experiment.hpp"

#include <nlohmann/json.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "csa/bounds.hpp"
#include "csa/hard_example.hpp"
#include "csa/linear_sa.hpp"
#include "csa/mdp.hpp"
#include "csa/moreau.hpp"
#include "csa/rl.hpp"
#include "csa/sa.hpp"
#include "csa/verify.hpp"

namespace csa {
namespace {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic formatting: 17 significant digits round-trips doubles.
// ---------------------------------------------------------------------------

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) {
    out_.open(path);
    if (!out_) throw IoError("cannot open output file: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
      out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out_ << fmt(values[i]) << (i + 1 < values.size() ? "," : "\n");
  }

 private:
  std::ofstream out_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Config access helpers
// ---------------------------------------------------------------------------

const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string("missing config key: ") + key);
  return *it;
}

double need_num(const json& j, const char* key) {
  const json& v = need(j, key);
  if (!v.is_number()) throw ConfigError(std::string("config key must be a number: ") + key);
  return v.get<double>();
}

double opt_num(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(std::string("config key must be a number: ") + key);
  return it->get<double>();
}

std::string opt_str(const json& j, const char* key, const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw ConfigError(std::string("config key must be a string: ") + key);
  return it->get<std::string>();
}

// ---------------------------------------------------------------------------
// Built problem: the SA problem plus whichever ledger applies.
// ---------------------------------------------------------------------------

struct Built {
  SAProblem problem;
  StepSchedule schedule{1.0, 2.0, 1.0};
  MoreauConfig moreau;
  std::optional<MultLedger> mult;
  std::optional<AddLedger> add;
  // Q-learning extras (Theorem on Q-learning):
  std::optional<double> c_q;
  std::optional<double> gamma_hat;
  double iterate_cap = 0.0;  // 1/(1-gamma) when the problem has one
  json manifest;             // resolved description
};

json condition_to_json(const ConditionReport& r) {
  json j;
  j["pass"] = r.pass;
  for (const auto& c : r.clauses) {
    json cj;
    cj["name"] = c.name;
    cj["value"] = c.value;
    cj["threshold"] = c.threshold;
    cj["margin"] = c.margin;
    cj["ok"] = c.ok;
    cj["gating"] = c.gating;
    j["clauses"].push_back(cj);
  }
  return j;
}

json mult_ledger_json(const MultLedger& lg) {
  json j;
  j["regime"] = "multiplicative";
  j["gamma_c"] = lg.gamma_c;
  j["sigma_raw"] = lg.sigma_raw;
  j["sigma_effective"] = lg.sigma;
  j["D"] = lg.D;
  j["m"] = lg.m;
  j["gamma_tilde"] = lg.gamma_tilde;
  j["D0"] = lg.D0;
  j["D1"] = lg.D1;
  j["D2"] = lg.D2;
  j["D3"] = lg.D3;
  j["D4"] = lg.D4;
  j["theta"] = lg.theta;
  j["c1"] = lg.c1;
  j["c2"] = lg.c2;
  j["c3"] = lg.c3;
  j["c4"] = lg.c4;
  j["c1_prime"] = lg.c1_prime;
  j["c5"] = lg.c5;
  j["c1_dprime"] = lg.c1_dprime;
  j["x0_err"] = lg.x0_err;
  j["xstar_norm"] = lg.xstar_norm;
  j["mu"] = lg.moreau.mu;
  j["L"] = lg.moreau.L;
  j["l_cs"] = lg.moreau.l_cs;
  j["u_cs"] = lg.moreau.u_cs;
  j["l_cM"] = lg.moreau.l_cM();
  j["u_cM"] = lg.moreau.u_cM();
  j["condition"] = condition_to_json(lg.condition);
  return j;
}

json add_ledger_json(const AddLedger& lg) {
  json j;
  j["regime"] = "additive_subgaussian";
  j["gamma_c"] = lg.gamma_c;
  j["sigma_bar"] = lg.sigma_bar;
  j["c_d"] = lg.c_d;
  j["gamma_tilde"] = lg.gamma_tilde;
  j["Db0"] = lg.Db0;
  j["Db1"] = lg.Db1;
  j["Db2"] = lg.Db2;
  j["Db3"] = lg.Db3;
  j["Db4"] = lg.Db4;
  j["Db5"] = lg.Db5;
  j["theta_bar"] = lg.theta_bar;
  j["cb1"] = lg.cb1;
  j["cb2"] = lg.cb2;
  j["cb3"] = lg.cb3;
  j["cb4"] = lg.cb4;
  j["cb5"] = lg.cb5;
  j["u_cM_star"] = lg.u_cM_star;
  j["x0_err"] = lg.x0_err;
  j["mu"] = lg.moreau.mu;
  j["L"] = lg.moreau.L;
  j["l_cs"] = lg.moreau.l_cs;
  j["u_cs"] = lg.moreau.u_cs;
  j["condition"] = condition_to_json(lg.condition);
  return j;
}

// mu resolution: explicit number, or "auto" (max-norm problems get the
// smoothing recipe, identical norms keep mu = 1, otherwise choose_mu).
double resolve_mu(const json& cfg, const NormSpec& norm_c, const NormSpec& norm_s, double gamma_c) {
  const json moreau_cfg = cfg.value("moreau", json::object());
  if (moreau_cfg.contains("mu") && moreau_cfg["mu"].is_number())
    return moreau_cfg["mu"].get<double>();
  const std::string mode = moreau_cfg.contains("mu") ? moreau_cfg["mu"].get<std::string>() : "auto";
  if (mode != "auto") throw ConfigError("moreau.mu must be a number or \"auto\"");
  if (norm_c.kind() == NormKind::max_norm) return q_learning_recipe_mu(gamma_c);
  if (norm_c.same_as(norm_s)) return 1.0;
  return choose_mu(norm_c, norm_s, gamma_c);
}

NormSpec smoothing_norm_for(const NormSpec& norm_c) {
  if (norm_c.kind() == NormKind::max_norm)
    return NormSpec::P(norm_c.dim(), std::max(2.0, 2.0 * std::log(static_cast<double>(norm_c.dim()))));
  return norm_c;  // identical-norm smoothing elsewhere
}

StepSchedule resolve_schedule(const json& cfg, double auto_alpha,
                              const std::function<double(double)>& auto_h_of_alpha) {
  const json& s = need(cfg, "schedule");
  const double z = opt_num(s, "z", 1.0);
  double alpha;
  if (s.contains("alpha") && s["alpha"].is_string()) {
    if (s["alpha"].get<std::string>() != "auto") throw ConfigError("schedule.alpha: number or \"auto\"");
    alpha = auto_alpha;
  } else {
    alpha = need_num(s, "alpha");
  }
  double h;
  if (!s.contains("h") || (s["h"].is_string() && s["h"].get<std::string>() == "auto")) {
    h = auto_h_of_alpha(alpha);
  } else if (s["h"].is_number()) {
    h = s["h"].get<double>();
  } else {
    throw ConfigError("schedule.h: number or \"auto\"");
  }
  return StepSchedule{alpha, h, z};
}

Eigen::MatrixXd parse_matrix(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix must be a nested array");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j.at(r).size()) != cols) throw ConfigError("ragged matrix rows");
    for (int c = 0; c < cols; ++c) M(r, c) = j.at(r).at(c).get<double>();
  }
  return M;
}

Eigen::VectorXd parse_vector(const json& j) {
  if (!j.is_array()) throw ConfigError("vector must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j.at(i).get<double>();
  return v;
}

TabularMDP resolve_mdp(const json& src) {
  if (src.contains("file")) {
    std::ifstream in(src["file"].get<std::string>());
    if (!in) throw IoError("cannot open MDP file: " + src["file"].get<std::string>());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_mdp_json(ss.str());
  }
  const json& gen = need(src, "generator");
  const std::string kind = need(gen, "kind").get<std::string>();
  if (kind == "constant_reward")
    return constant_reward_mdp(static_cast<int>(need_num(gen, "n_states")),
                               static_cast<int>(need_num(gen, "n_actions")),
                               need_num(gen, "gamma"));
  if (kind == "garnet")
    return garnet_mdp(static_cast<int>(need_num(gen, "n_states")),
                      static_cast<int>(need_num(gen, "n_actions")),
                      static_cast<int>(need_num(gen, "branching")),
                      static_cast<std::uint64_t>(need_num(gen, "seed")));
  throw ConfigError("unknown MDP generator kind: " + kind);
}

Policy resolve_policy(const json& j, const TabularMDP& mdp, const char* key) {
  if (!j.contains(key) || (j[key].is_string() && j[key].get<std::string>() == "uniform"))
    return Policy::Uniform(mdp);
  Policy pi;
  pi.table = parse_matrix(j[key]);
  pi.validate(mdp);
  return pi;
}

Built build_problem(const json& cfg) {
  const json& pj = need(cfg, "problem");
  const std::string type = need(pj, "type").get<std::string>();
  Built built;
  json& man = built.manifest;
  man["type"] = type;

  if (type == "hard_example") {
    HardExampleSpec spec;
    spec.a = opt_num(pj, "a", 0.5);
    spec.N = opt_num(pj, "N", 1.0);
    spec.x0 = opt_num(pj, "x0", 1.0);
    const NormSpec e1 = NormSpec::Euclidean(1);
    const double mu = resolve_mu(cfg, e1, e1, spec.a);
    built.moreau = MoreauConfig::Make(e1, e1, mu);
    spec.schedule = resolve_schedule(cfg, 2.5 / (2.0 * (1.0 - spec.a)) * 2.0, [&](double alpha) {
      return std::max(auto_h_mult(spec.a, spec.N, built.moreau, alpha), alpha / 0.499);
    });
    spec.validate();
    built.schedule = spec.schedule;
    built.problem = hard_example_problem(spec);
    built.mult = build_mult_ledger(spec.a, spec.N, spec.x0, 0.0, built.moreau, spec.schedule);
    man["a"] = spec.a;
    man["N"] = spec.N;
    man["x0"] = spec.x0;
    man["m_e"] = spec.m_e();
  } else if (type == "mult1d") {
    // F(x,y) = gamma x + sigma y (1 + |x|), y = +-1 fair coin; x* = 0.
    const double gamma_c = need_num(pj, "gamma_c");
    const double sigma = need_num(pj, "sigma");
    const double x0 = opt_num(pj, "x0", 1.0);
    const NormSpec e1 = NormSpec::Euclidean(1);
    const double mu = resolve_mu(cfg, e1, e1, gamma_c);
    built.moreau = MoreauConfig::Make(e1, e1, mu);
    built.schedule = resolve_schedule(cfg, 2.5 / (2.0 * (1.0 - gamma_c)) * 2.0, [&](double alpha) {
      return auto_h_mult(gamma_c, sigma, built.moreau, alpha);
    });
    SAProblem p;
    p.dim = 1;
    p.name = "mult1d";
    p.norm_c = e1;
    p.gamma_c = gamma_c;
    p.noise = NoiseSpec::Multiplicative(sigma);
    p.x_star = Eigen::VectorXd::Zero(1);
    p.x0 = Eigen::VectorXd::Constant(1, x0);
    p.sample_op = [gamma_c, sigma](const Eigen::VectorXd& x, Rng& g, Eigen::VectorXd& out) {
      const double y = g.uniform01() < 0.5 ? 1.0 : -1.0;
      out.resize(1);
      out[0] = gamma_c * x[0] + sigma * y * (1.0 + std::abs(x[0]));
    };
    p.expected_op = [gamma_c](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      out.resize(1);
      out[0] = gamma_c * x[0];
    };
    built.problem = p;
    built.mult =
        build_mult_ledger(gamma_c, sigma, std::abs(x0), 0.0, built.moreau, built.schedule);
    man["gamma_c"] = gamma_c;
    man["sigma"] = sigma;
    man["x0"] = x0;
  } else if (type == "affine1d") {
    // F(x,Y) = gamma_c x + b + sigma_bar * N(0,1); x* = b/(1-gamma_c).
    const double gamma_c = need_num(pj, "gamma_c");
    const double b = opt_num(pj, "b", 1.0);
    const double sigma_bar = opt_num(pj, "sigma_bar", 1.0);
    const double x0 = opt_num(pj, "x0", 0.0);
    const NormSpec e1 = NormSpec::Euclidean(1);
    const double mu = resolve_mu(cfg, e1, e1, gamma_c);
    built.moreau = MoreauConfig::Make(e1, e1, mu);
    built.schedule = resolve_schedule(
        cfg,
        [&] {
          const MoreauConstants mc = moreau_constants(built.moreau, gamma_c);
          return 1.25 * 2.0 / (2.0 * (1.0 - mc.gamma_tilde));
        }(),
        [&](double alpha) {
          return auto_h_add(gamma_c, sigma_bar, 1.0, built.moreau, alpha, opt_num(need(cfg, "schedule"), "z", 1.0));
        });
    SAProblem p;
    p.dim = 1;
    p.name = "affine1d";
    p.norm_c = e1;
    p.gamma_c = gamma_c;
    p.noise = NoiseSpec::AdditiveSubGaussian(sigma_bar, 1.0);
    p.x_star = Eigen::VectorXd::Constant(1, b / (1.0 - gamma_c));
    p.x0 = Eigen::VectorXd::Constant(1, x0);
    p.sample_op = [gamma_c, b, sigma_bar](const Eigen::VectorXd& x, Rng& g, Eigen::VectorXd& out) {
      out.resize(1);
      out[0] = gamma_c * x[0] + b + sigma_bar * g.normal();
    };
    p.expected_op = [gamma_c, b](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      out.resize(1);
      out[0] = gamma_c * x[0] + b;
    };
    built.problem = p;
    built.add = build_add_ledger(gamma_c, sigma_bar, 1.0, std::abs(x0 - b / (1.0 - gamma_c)),
                                 built.moreau, built.schedule);
    man["gamma_c"] = gamma_c;
    man["b"] = b;
    man["sigma_bar"] = sigma_bar;
    man["x0"] = x0;
  } else if (type == "linear_sa") {
    // Either exact deterministic (A, b) or an atom distribution over (A_i, b_i).
    RemodelInputs in;
    if (pj.contains("atoms")) {
      struct Atom {
        Eigen::MatrixXd A;
        Eigen::VectorXd b;
        double prob;
      };
      auto atoms = std::make_shared<std::vector<Atom>>();
      double total = 0.0;
      for (const auto& aj : pj["atoms"]) {
        Atom atom{parse_matrix(need(aj, "A")), parse_vector(need(aj, "b")),
                  need_num(aj, "prob")};
        total += atom.prob;
        atoms->push_back(std::move(atom));
      }
      if (std::abs(total - 1.0) > 1e-12) throw ConfigError("linear_sa atom probs must sum to 1");
      const int d = static_cast<int>(atoms->front().A.rows());
      Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(d, d);
      Eigen::VectorXd bbar = Eigen::VectorXd::Zero(d);
      double amax = 0.0, bmax = 0.0;
      for (const auto& a : *atoms) {
        Abar += a.prob * a.A;
        bbar += a.prob * a.b;
        amax = std::max(amax, a.A.jacobiSvd().singularValues()[0]);
        bmax = std::max(bmax, a.b.norm());
      }
      in.A_bar = Abar;
      in.b_bar = bbar;
      in.A_max = amax;
      in.b_max = bmax;
      in.sampler = [atoms](Rng& g, Eigen::MatrixXd& A, Eigen::VectorXd& b) {
        double u = g.uniform01();
        for (const auto& a : *atoms) {
          if (u < a.prob || &a == &atoms->back()) {
            A = a.A;
            b = a.b;
            return;
          }
          u -= a.prob;
        }
      };
    } else {
      in.A_bar = parse_matrix(need(pj, "A"));
      in.b_bar = parse_vector(need(pj, "b"));
      in.A_max = in.A_bar.jacobiSvd().singularValues()[0];
      in.b_max = in.b_bar.norm();
    }
    auto [spec, p] = remodel(in);
    if (pj.contains("x0")) p.x0 = parse_vector(pj["x0"]);
    built.problem = p;
    built.moreau = MoreauConfig::Make(p.norm_c, p.norm_c,
                                      resolve_mu(cfg, p.norm_c, p.norm_c, p.gamma_c));
    built.schedule = resolve_schedule(
        cfg,
        [&] {
          const double D0 = 2.0 * (1.0 - p.gamma_c);
          return 1.25 * 2.0 / D0;
        }(),
        [&](double alpha) { return auto_h_mult(p.gamma_c, spec.sigma_hat, built.moreau, alpha); });
    const double x0e = p.norm_c.eval(p.x0 - p.x_star);
    built.mult = build_mult_ledger(p.gamma_c, spec.sigma_hat, x0e,
                                   p.norm_c.eval(p.x_star), built.moreau, built.schedule);
    man["beta"] = spec.beta;
    man["gamma_bar_exact"] = spec.gamma_bar_exact;
    man["gamma_bar_paper_bound"] = spec.gamma_bar_paper_bound;
    man["gamma_bar_analytic"] = spec.gamma_bar_analytic;
    man["sigma_hat"] = spec.sigma_hat;
    man["dim"] = spec.dim;
  } else if (type == "mdp") {
    const TabularMDP mdp = resolve_mdp(need(pj, "source"));
    const std::string algo = opt_str(pj, "algorithm", "q_learning");
    man["algorithm"] = algo;
    man["n_states"] = mdp.n_states;
    man["n_actions"] = mdp.n_actions;
    man["gamma"] = mdp.gamma;
    if (algo == "q_learning") {
      const Policy pi_b = resolve_policy(pj, mdp, "behavior");
      QLearningModel model = qlearning_build(mdp, pi_b);
      const int nsa = mdp.n_states * mdp.n_actions;
      Eigen::VectorXd q0 = Eigen::VectorXd::Zero(nsa);
      if (pj.contains("q0") && pj["q0"].is_array()) q0 = parse_vector(pj["q0"]);
      SAProblem p = qlearning_problem(model, q0);
      const NormSpec norm_c = p.norm_c;
      const NormSpec norm_s = smoothing_norm_for(norm_c);
      const double mu = resolve_mu(cfg, norm_c, norm_s, model.gamma_hat);
      built.moreau = MoreauConfig::Make(norm_c, norm_s, mu);
      built.schedule = resolve_schedule(cfg, 1.025 * 2.0 / (1.0 - model.gamma_hat), [&](double alpha) {
        return auto_h_add(model.gamma_hat, 4.0 / (1.0 - mdp.gamma), 1.0, built.moreau, alpha, 1.0);
      });
      built.problem = p;
      built.add = build_add_ledger(model.gamma_hat, 4.0 / (1.0 - mdp.gamma), 1.0,
                                   p.norm_c.eval(q0 - model.q_opt), built.moreau, built.schedule);
      built.gamma_hat = model.gamma_hat;
      built.c_q = std::log(static_cast<double>(nsa)) /
                  (std::pow(model.D_b_min, 3.0) * std::pow(1.0 - mdp.gamma, 5.0));
      built.iterate_cap = 1.0 / (1.0 - mdp.gamma);
      man["D_b_min"] = model.D_b_min;
      man["gamma_hat"] = model.gamma_hat;
      man["c_q"] = *built.c_q;
    } else if (algo == "offpolicy_td") {
      const Policy pi_b = resolve_policy(pj, mdp, "behavior");
      const Policy pi_t = resolve_policy(pj, mdp, "target");
      const int n_step = static_cast<int>(opt_num(pj, "n_step", 1.0));
      ISFactors f;
      if (pj.contains("c") && pj.contains("rho")) {
        f.c = parse_matrix(pj["c"]);
        f.rho = parse_matrix(pj["rho"]);
        f.n_step = n_step;
      } else {
        f = is_factors_from_policies(mdp, pi_t, pi_b, n_step);
      }
      OffPolicyTdModel model = offpolicy_td_build(mdp, pi_b, pi_t, f);
      const double sigma = offpolicy_td_noise_constant(model, 200, 50, 1234);
      const int nsa = mdp.n_states * mdp.n_actions;
      Eigen::VectorXd q0 = Eigen::VectorXd::Zero(nsa);
      if (pj.contains("q0") && pj["q0"].is_array()) q0 = parse_vector(pj["q0"]);
      SAProblem p = offpolicy_td_problem(model, q0, sigma);
      const NormSpec norm_s = smoothing_norm_for(p.norm_c);
      const double mu = resolve_mu(cfg, p.norm_c, norm_s, p.gamma_c);
      built.moreau = MoreauConfig::Make(p.norm_c, norm_s, mu);
      built.schedule = resolve_schedule(
          cfg,
          [&] {
            const MoreauConstants mc = moreau_constants(built.moreau, p.gamma_c);
            return 1.25 * 2.0 / (2.0 * (1.0 - mc.gamma_tilde));
          }(),
          [&](double alpha) { return auto_h_mult(p.gamma_c, sigma, built.moreau, alpha); });
      built.problem = p;
      built.mult = build_mult_ledger(p.gamma_c, sigma, p.norm_c.eval(q0 - model.q_limit),
                                     p.norm_c.eval(model.q_limit), built.moreau, built.schedule);
      man["gamma_o_certified"] = model.gamma_o_certified;
      man["L_o_audited"] = sigma;
      man["n_step"] = n_step;
    } else if (algo == "tdlfa") {
      const Policy pi = resolve_policy(pj, mdp, "target");
      Eigen::MatrixXd Phi;
      if (!pj.contains("features") ||
          (pj["features"].is_string() && pj["features"].get<std::string>() == "identity"))
        Phi = Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states);
      else
        Phi = parse_matrix(pj["features"]);
      TdlfaModel model = tdlfa_build(mdp, pi, Phi);
      auto [spec, p] = tdlfa_remodel(model);
      if (pj.contains("x0")) p.x0 = parse_vector(pj["x0"]);
      built.problem = p;
      built.moreau = MoreauConfig::Make(p.norm_c, p.norm_c,
                                        resolve_mu(cfg, p.norm_c, p.norm_c, p.gamma_c));
      built.schedule = resolve_schedule(
          cfg, [&] { return 1.25 * 2.0 / (2.0 * (1.0 - p.gamma_c)); }(),
          [&](double alpha) { return auto_h_mult(p.gamma_c, spec.sigma_hat, built.moreau, alpha); });
      built.mult = build_mult_ledger(p.gamma_c, spec.sigma_hat,
                                     p.norm_c.eval(p.x0 - p.x_star), p.norm_c.eval(p.x_star),
                                     built.moreau, built.schedule);
      man["beta"] = spec.beta;
      man["gamma_bar_exact"] = spec.gamma_bar_exact;
      man["gamma_bar_paper_bound"] = spec.gamma_bar_paper_bound;
      man["sigma_hat"] = spec.sigma_hat;
      man["features_rescaled"] = model.rescaled;
    } else {
      throw ConfigError("unknown mdp algorithm: " + algo);
    }
  } else {
    throw ConfigError("unknown problem type: " + type);
  }

  man["schedule"] = {{"alpha", built.schedule.alpha}, {"h", built.schedule.h}, {"z", built.schedule.z}};
  return built;
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

struct RunParams {
  int n = 1000;
  int k_max = 1000;
  long long K = 0;
  double delta = 0.05;
  std::uint64_t master_seed = 1;
};

RunParams parse_run(const json& cfg, const RunOverrides& ov) {
  const json r = cfg.value("run", json::object());
  RunParams rp;
  rp.n = static_cast<int>(opt_num(r, "n", 1000));
  rp.k_max = static_cast<int>(opt_num(r, "k_max", 1000));
  rp.K = static_cast<long long>(opt_num(r, "K", 0));
  rp.delta = opt_num(r, "delta", 0.05);
  rp.master_seed = static_cast<std::uint64_t>(opt_num(r, "master_seed", 1));
  if (ov.master_seed) rp.master_seed = *ov.master_seed;
  if (rp.n < 1 || rp.k_max < 0 || rp.K < 0) throw ConfigError("run block: n>=1, k_max>=0, K>=0");
  return rp;
}

std::vector<double> contiguous_grid(long long K, long long k_max) {
  std::vector<double> ks;
  ks.reserve(static_cast<std::size_t>(k_max - K + 1));
  for (long long k = K; k <= k_max; ++k) ks.push_back(static_cast<double>(k));
  return ks;
}

std::vector<double> log_grid(double K, double k_hi, int points) {
  std::vector<double> ks;
  ks.push_back(K);
  const double lo = std::max(K + 1.0, 1.0);
  if (k_hi <= lo) return ks;
  for (int i = 0; i <= points; ++i) {
    const double t = lo * std::pow(k_hi / lo, static_cast<double>(i) / points);
    const double k = (t < 1e15) ? std::floor(t) : t;
    if (k > ks.back()) ks.push_back(k);
  }
  return ks;
}

/// The curve the audit gate uses for this problem (theorem curve per regime).
BoundCurve theorem_curve(const Built& built, const RunParams& rp, const std::vector<double>& ks,
                         bool force) {
  if (built.c_q) {
    return qlearning_bound_curve(*built.c_q, *built.gamma_hat, built.schedule, rp.delta, rp.K, ks);
  }
  if (built.add) return add_bound_curve(*built.add, rp.delta, rp.K, ks, !force);
  if (built.mult) {
    const BoundVariant v = built.mult->D > 0.0 ? BoundVariant::thm1_Dpos : BoundVariant::thm1_D0;
    return mult_bound_curve(*built.mult, rp.delta, rp.K, v, ks, !force);
  }
  throw ConfigError("no ledger available for theorem curve");
}

void write_envelope_csv(const std::filesystem::path& path, const std::vector<double>& ks,
                        const std::vector<double>& bound_radius, const EnsembleResult* ens) {
  CsvWriter csv(path, {"k", "bound", "q05", "q50", "q95", "max"});
  const double nanv = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double q05 = nanv, q50 = nanv, q95 = nanv, mx = nanv;
    if (ens) {
      std::vector<double> col = ens->column(static_cast<int>(ks[i]));
      std::sort(col.begin(), col.end());
      auto rank = [&](double q) {
        const std::size_t r = static_cast<std::size_t>(std::ceil(q * col.size()));
        return col[std::min(std::max<std::size_t>(r, 1) - 1, col.size() - 1)];
      };
      q05 = rank(0.05);
      q50 = rank(0.50);
      q95 = rank(0.95);
      mx = col.back();
    }
    csv.row({ks[i], bound_radius[i], q05, q50, q95, mx});
  }
}

json audit_to_json(const ViolationAudit& audit, double delta) {
  json j;
  j["n"] = audit.n;
  j["K"] = audit.K;
  j["violations"] = audit.violations;
  j["cp_upper"] = audit.cp_upper;
  j["confidence"] = audit.confidence;
  j["delta"] = delta;
  j["pass"] = audit.cp_upper <= delta;
  return j;
}

json fit_to_json(const TailFit& fit) {
  json j;
  j["beta_hat"] = fit.beta_hat;
  j["k2_hat"] = fit.k2_hat;
  j["log_k1_hat"] = fit.log_k1_hat;
  j["r_squared"] = fit.r_squared;
  j["ci_lo"] = fit.ci_lo;
  j["ci_hi"] = fit.ci_hi;
  j["points_used"] = fit.points_used;
  return j;
}

json machinery_to_json(const MachineryReport& rep) {
  json j;
  j["pass"] = rep.pass;
  j["finite"] = rep.finite;
  j["note"] = rep.note;
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"k", r.k}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"rel_se", r.rel_se}, {"ok", r.ok}});
  }
  j["rows"] = rows;
  return j;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct Ctx {
  json cfg;
  RunOverrides ov;
  std::filesystem::path out;
  json manifest;
};

void check_conditions(const Built& built, Ctx& ctx) {
  // Record the resolved problem and every ledger constant so any table is
  // reproducible from the manifest alone.
  ctx.manifest["problem"] = built.manifest;
  if (built.mult) ctx.manifest["ledger"] = mult_ledger_json(*built.mult);
  if (built.add) ctx.manifest["ledger"] = add_ledger_json(*built.add);
  const ConditionReport* rep = nullptr;
  if (built.mult) rep = &built.mult->condition;
  if (built.add) rep = &built.add->condition;
  if (rep && !rep->pass && !ctx.ov.force)
    throw ConditionError("stepsize condition violated; rerun with --force to proceed");
}

void exp_simulate(Ctx& ctx) {
  Built built = build_problem(ctx.cfg);
  check_conditions(built, ctx);
  const RunParams rp = parse_run(ctx.cfg, ctx.ov);
  EnsembleResult ens =
      run_ensemble(built.problem, built.schedule, rp.k_max, rp.n, rp.master_seed, ctx.ov.workers);
  const std::vector<double> ks = contiguous_grid(0, rp.k_max);
  std::vector<double> radius(ks.size());
  if (built.mult) {
    for (std::size_t i = 0; i < ks.size(); ++i)
      radius[i] = worst_case_bound(*built.mult, ks[i]);
    ctx.manifest["bound_column"] = "worst_case_B_k";
  } else {
    const BoundCurve curve = add_bound_curve(*built.add, rp.delta, 0, ks, !ctx.ov.force);
    for (std::size_t i = 0; i < ks.size(); ++i) radius[i] = std::sqrt(curve.values[i]);
    ctx.manifest["bound_column"] = curve.provenance;
  }
  write_envelope_csv(ctx.out / "envelope.csv", ks, radius, &ens);
  ctx.manifest["faults"] = ens.any_fault();
}

void exp_bounds(Ctx& ctx) {
  Built built = build_problem(ctx.cfg);
  check_conditions(built, ctx);
  const RunParams rp = parse_run(ctx.cfg, ctx.ov);
  const json bj = ctx.cfg.value("bounds", json::object());
  const double k_hi = opt_num(bj, "k_hi", static_cast<double>(rp.k_max));
  const int points = static_cast<int>(opt_num(bj, "k_points", 200));
  const std::vector<double> ks = log_grid(static_cast<double>(rp.K), k_hi, points);

  std::vector<BoundVariant> variants;
  if (bj.contains("variants")) {
    for (const auto& v : bj["variants"]) {
      const std::string name = v.get<std::string>();
      if (name == "thm1_Dpos") variants.push_back(BoundVariant::thm1_Dpos);
      else if (name == "thm1_D0") variants.push_back(BoundVariant::thm1_D0);
      else if (name == "thm1_prime") variants.push_back(BoundVariant::thm1_prime);
      else if (name == "worst_case") variants.push_back(BoundVariant::worst_case);
      else if (name == "fixed_time_mult") variants.push_back(BoundVariant::fixed_time_mult);
      else if (name == "thm2") variants.push_back(BoundVariant::thm2_z1);
      else throw ConfigError("unknown bound variant: " + name);
    }
  } else if (built.mult) {
    variants = {built.mult->D > 0.0 ? BoundVariant::thm1_Dpos : BoundVariant::thm1_D0,
                BoundVariant::thm1_prime, BoundVariant::worst_case};
  } else {
    variants = {BoundVariant::thm2_z1};
  }

  for (BoundVariant v : variants) {
    BoundCurve curve;
    if (built.mult)
      curve = mult_bound_curve(*built.mult, rp.delta, rp.K, v, ks, !ctx.ov.force);
    else
      curve = add_bound_curve(*built.add, rp.delta, rp.K, ks, !ctx.ov.force);
    std::vector<double> radius(curve.values.size());
    for (std::size_t i = 0; i < curve.values.size(); ++i) radius[i] = std::sqrt(curve.values[i]);
    write_envelope_csv(ctx.out / ("curve_" + to_string(v) + ".csv"), ks, radius, nullptr);
    ctx.manifest["curves"].push_back({{"variant", to_string(v)}, {"provenance", curve.provenance}});
  }
}

void exp_audit(Ctx& ctx) {
  Built built = build_problem(ctx.cfg);
  check_conditions(built, ctx);
  const RunParams rp = parse_run(ctx.cfg, ctx.ov);
  EnsembleResult ens =
      run_ensemble(built.problem, built.schedule, rp.k_max, rp.n, rp.master_seed, ctx.ov.workers);
  const std::vector<double> ks = contiguous_grid(rp.K, rp.k_max);
  const BoundCurve curve = theorem_curve(built, rp, ks, ctx.ov.force);
  const ViolationAudit audit = audit_violations(ens, curve);
  std::vector<double> radius(curve.values.size());
  for (std::size_t i = 0; i < curve.values.size(); ++i) radius[i] = std::sqrt(curve.values[i]);
  write_envelope_csv(ctx.out / "envelope.csv", ks, radius, &ens);
  json aj = audit_to_json(audit, rp.delta);
  aj["curve"] = curve.provenance;
  write_text(ctx.out / "audit.json", aj.dump(2) + "\n");
  ctx.manifest["audit"] = aj;
}

void exp_tailfit(Ctx& ctx) {
  Built built = build_problem(ctx.cfg);
  check_conditions(built, ctx);
  const RunParams rp = parse_run(ctx.cfg, ctx.ov);
  EnsembleResult ens =
      run_ensemble(built.problem, built.schedule, rp.k_max, rp.n, rp.master_seed, ctx.ov.workers);
  const double scale = std::sqrt(static_cast<double>(rp.k_max) + built.schedule.h);
  std::vector<double> samples = ens.column(rp.k_max);
  for (double& s : samples) s *= scale;

  const json tj = ctx.cfg.value("tailfit", json::object());
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  auto quant = [&](double q) { return sorted[static_cast<std::size_t>(q * (sorted.size() - 1))]; };
  const double fit_lo = opt_num(tj, "fit_lo", quant(0.80));
  const double fit_hi = opt_num(tj, "fit_hi", quant(0.9995));
  const int n_boot = static_cast<int>(opt_num(tj, "n_boot", 200));

  const TailFit fit = fit_tail_exponent_boot(samples, fit_lo, fit_hi, n_boot, rp.master_seed + 17);
  const CcdfCurve curve = empirical_ccdf(samples);
  CsvWriter csv(ctx.out / "ccdf.csv", {"eps", "survival"});
  for (std::size_t i = 0; i < curve.eps.size(); ++i) csv.row({curve.eps[i], curve.surv[i]});
  json fj = fit_to_json(fit);
  fj["fit_lo"] = fit_lo;
  fj["fit_hi"] = fit_hi;
  fj["k"] = rp.k_max;
  fj["rescale"] = scale;
  write_text(ctx.out / "tailfit.json", fj.dump(2) + "\n");
  ctx.manifest["tailfit"] = fj;
}

void exp_hard_example(Ctx& ctx) {
  Built built = build_problem(ctx.cfg);  // must be hard_example type
  if (need(need(ctx.cfg, "problem"), "type").get<std::string>() != "hard_example")
    throw ConfigError("hard_example experiment requires problem.type == hard_example");
  check_conditions(built, ctx);
  const RunParams rp = parse_run(ctx.cfg, ctx.ov);
  const json& pj = need(ctx.cfg, "problem");
  HardExampleSpec spec;
  spec.a = opt_num(pj, "a", 0.5);
  spec.N = opt_num(pj, "N", 1.0);
  spec.x0 = opt_num(pj, "x0", 1.0);
  spec.schedule = built.schedule;

  const json hj = ctx.cfg.value("hard_example", json::object());
  const int k_dist = static_cast<int>(opt_num(hj, "k_dist", 15));
  const double lambda = opt_num(hj, "lambda", 0.01);
  const double beta_tilde = opt_num(hj, "beta_tilde", 2.0);
  const int mgf_k_lo = static_cast<int>(opt_num(hj, "mgf_k_lo", 5));
  const int mgf_k_hi = static_cast<int>(opt_num(hj, "mgf_k_hi", 20));

  // Exact atoms at k_dist.
  auto atoms = exact_distribution(spec, k_dist);
  {
    CsvWriter csv(ctx.out / "distribution.csv", {"value", "probability"});
    auto sorted = atoms;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [v, p] : sorted) csv.row({v, p});
  }

  // Rescaled MGF sequence and the lower-bound certificate.
  const EpsWitness witness = find_divergence_witness(spec, beta_tilde);
  {
    CsvWriter csv(ctx.out / "mgf.csv", {"k", "exact_rescaled_mgf", "lower_bound_log"});
    for (int k = mgf_k_lo; k <= mgf_k_hi; ++k) {
      const double exact = exact_rescaled_mgf(spec, k, lambda, beta_tilde);
      const double lb = witness.found && static_cast<std::uint64_t>(k) >= witness.k_eps
                            ? mgf_lower_bound_log(spec, k, lambda, beta_tilde, witness.k_eps)
                            : std::numeric_limits<double>::quiet_NaN();
      csv.row({static_cast<double>(k), exact, lb});
    }
  }

  // Monte Carlo ensemble against the exact distribution at k_dist.
  EnsembleResult ens =
      run_ensemble(built.problem, built.schedule, k_dist, rp.n, rp.master_seed, ctx.ov.workers);
  const double ks_dist = ks_distance_to_atoms(ens.column(k_dist), atoms);

  json rj;
  rj["k_dist"] = k_dist;
  rj["ks_distance"] = ks_dist;
  rj["exact_mean"] = exact_mean(spec, k_dist);
  rj["witness_found"] = witness.found;
  if (witness.found) {
    rj["witness_eps"] = witness.eps;
    rj["witness_k_eps"] = witness.k_eps;
    const std::uint64_t k_exceed = mgf_lower_bound_first_exceed(
        spec, lambda, beta_tilde, witness.k_eps, 100.0, 1000000);
    rj["lower_bound_exceeds_100_at_k"] = k_exceed;
  }
  write_text(ctx.out / "hard_example.json", rj.dump(2) + "\n");
  ctx.manifest["hard_example"] = rj;
}

void exp_verify_machinery(Ctx& ctx) {
  Built built = build_problem(ctx.cfg);
  check_conditions(built, ctx);
  const RunParams rp = parse_run(ctx.cfg, ctx.ov);
  const json mj = ctx.cfg.value("machinery", json::object());
  MachineryOptions opts;
  opts.k_lo = static_cast<int>(opt_num(mj, "k_lo", 0));
  opts.k_hi = static_cast<int>(opt_num(mj, "k_hi", 50));
  opts.n = rp.n;
  opts.master_seed = rp.master_seed;
  opts.workers = ctx.ov.workers;
  const double corrupt_lambda = opt_num(mj, "corrupt_lambda", 10.0);
  const double corrupt_drift = opt_num(mj, "corrupt_drift", 0.01);

  json out;
  if (built.mult) {
    out["mgf_recursion"] = machinery_to_json(check_mgf_recursion_mult(built.problem, *built.mult, opts));
    out["supermartingale"] =
        machinery_to_json(check_supermartingale_mult(built.problem, *built.mult, opts));
    MachineryOptions bad = opts;
    bad.lambda_scale = corrupt_lambda;
    out["mgf_recursion_negative_control"] =
        machinery_to_json(check_mgf_recursion_mult(built.problem, *built.mult, bad));
    MachineryOptions bad2 = opts;
    bad2.drift_scale = corrupt_drift;
    out["supermartingale_negative_control"] =
        machinery_to_json(check_supermartingale_mult(built.problem, *built.mult, bad2));
  } else {
    out["mgf_recursion"] = machinery_to_json(check_mgf_recursion_add(built.problem, *built.add, opts));
    out["supermartingale"] =
        machinery_to_json(check_supermartingale_add(built.problem, *built.add, opts));
    MachineryOptions bad = opts;
    bad.lambda_scale = corrupt_lambda;
    out["mgf_recursion_negative_control"] =
        machinery_to_json(check_mgf_recursion_add(built.problem, *built.add, bad));
    MachineryOptions bad2 = opts;
    bad2.drift_scale = corrupt_drift;
    out["supermartingale_negative_control"] =
        machinery_to_json(check_supermartingale_add(built.problem, *built.add, bad2));
  }
  write_text(ctx.out / "machinery.json", out.dump(2) + "\n");
  ctx.manifest["machinery"] = out;
}

void exp_rl_demo(Ctx& ctx) {
  // Defaults to Q-learning on the 2x2 constant-reward MDP when no problem
  // block is given.
  if (!ctx.cfg.contains("problem")) {
    ctx.cfg["problem"] = {
        {"type", "mdp"},
        {"algorithm", "q_learning"},
        {"source", {{"generator", {{"kind", "constant_reward"}, {"n_states", 2}, {"n_actions", 2}, {"gamma", 0.9}}}}},
    };
  }
  Built built = build_problem(ctx.cfg);
  check_conditions(built, ctx);
  const RunParams rp = parse_run(ctx.cfg, ctx.ov);
  EnsembleResult ens =
      run_ensemble(built.problem, built.schedule, rp.k_max, rp.n, rp.master_seed, ctx.ov.workers);
  const std::vector<double> ks = contiguous_grid(rp.K, rp.k_max);
  const BoundCurve curve = theorem_curve(built, rp, ks, ctx.ov.force);
  const ViolationAudit audit = audit_violations(ens, curve);
  std::vector<double> radius(curve.values.size());
  for (std::size_t i = 0; i < curve.values.size(); ++i) radius[i] = std::sqrt(curve.values[i]);
  write_envelope_csv(ctx.out / "envelope.csv", ks, radius, &ens);

  json aj = audit_to_json(audit, rp.delta);
  aj["curve"] = curve.provenance;

  if (built.iterate_cap > 0.0) {
    // Deterministic invariant ||Q_k||_inf <= 1/(1-gamma), checked on the
    // same seeds via an iterate-norm sweep.
    auto stat = [](int, const Eigen::VectorXd& x) { return x.cwiseAbs().maxCoeff(); };
    const std::vector<double> norms = run_ensemble_stat(
        built.problem, built.schedule, rp.k_max, rp.n, rp.master_seed, ctx.ov.workers, stat);
    const double worst = *std::max_element(norms.begin(), norms.end());
    aj["iterate_cap"] = built.iterate_cap;
    aj["max_iterate_norm"] = worst;
    aj["boundedness_ok"] = worst <= built.iterate_cap + 1e-9;
  }
  write_text(ctx.out / "audit.json", aj.dump(2) + "\n");
  ctx.manifest["audit"] = aj;
}

}  // namespace

ExitStatus run_experiment(const std::string& config_text, const RunOverrides& overrides) {
  Ctx ctx;
  ctx.ov = overrides;
  try {
    ctx.cfg = json::parse(config_text);
  } catch (const json::exception& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return ExitStatus::invalid_config;
  }
  try {
    const std::string experiment = need(ctx.cfg, "experiment").get<std::string>();
    std::string out_dir = "out";
    if (ctx.cfg.contains("output")) out_dir = opt_str(ctx.cfg["output"], "dir", "out");
    if (const char* env = std::getenv("OUTPUT_DIR")) out_dir = env;
    if (overrides.out_dir) out_dir = *overrides.out_dir;
    ctx.out = out_dir;
    std::error_code ec;
    std::filesystem::create_directories(ctx.out, ec);
    if (ec) throw IoError("cannot create output directory: " + ctx.out.string());

    ctx.manifest["experiment"] = experiment;
    ctx.manifest["config"] = ctx.cfg;
    ctx.manifest["master_seed"] =
        overrides.master_seed ? *overrides.master_seed
                              : static_cast<std::uint64_t>(opt_num(ctx.cfg.value("run", json::object()),
                                                                   "master_seed", 1));
    ctx.manifest["forced"] = overrides.force;

    if (experiment == "simulate") exp_simulate(ctx);
    else if (experiment == "bounds") exp_bounds(ctx);
    else if (experiment == "audit") exp_audit(ctx);
    else if (experiment == "tailfit") exp_tailfit(ctx);
    else if (experiment == "hard_example") exp_hard_example(ctx);
    else if (experiment == "verify_machinery") exp_verify_machinery(ctx);
    else if (experiment == "rl_demo") exp_rl_demo(ctx);
    else throw ConfigError("unknown experiment: " + experiment);

    write_text(ctx.out / "manifest.json", ctx.manifest.dump(2) + "\n");
    return ExitStatus::ok;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return ExitStatus::invalid_config;
  } catch (const ConditionError& e) {
    std::cerr << "condition violation: " << e.what() << "\n";
    return ExitStatus::condition_violation;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return ExitStatus::io_error;
  } catch (const json::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return ExitStatus::invalid_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitStatus::failure;
  }
}

ExitStatus run_experiment_file(const std::string& config_path, const RunOverrides& overrides) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "io error: cannot open config file " << config_path << "\n";
    return ExitStatus::io_error;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return run_experiment(ss.str(), overrides);
}

}  // namespace csa
