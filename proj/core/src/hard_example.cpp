#include "csa/hard_example.hpp"

#include <cmath>
#include <stdexcept>

namespace csa {
namespace {

constexpr int kEnumerationCap = 24;

}  // namespace

int HardExampleSpec::m_e() const { return static_cast<int>(std::ceil(2.0 * schedule.alpha * D())) + 1; }

void HardExampleSpec::validate() const {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("hard example: a must be in (0,1)");
  if (!(N >= 1.0)) throw std::invalid_argument("hard example: N must be >= 1");
  if (!(x0 > 0.0)) throw std::invalid_argument("hard example: x0 must be > 0");
  if (!(schedule.at(0) < 0.5))
    throw std::invalid_argument("hard example: alpha_0 < 1/2 required for positivity");
}

SAProblem hard_example_problem(const HardExampleSpec& spec, ForcedDraw forced) {
  spec.validate();
  SAProblem p;
  p.dim = 1;
  p.name = "hard_example";
  p.norm_c = NormSpec::Euclidean(1);
  p.gamma_c = spec.a;
  p.noise = NoiseSpec::Multiplicative(spec.N);
  p.x_star = Eigen::VectorXd::Zero(1);
  p.x0 = Eigen::VectorXd::Constant(1, spec.x0);
  const double a = spec.a, N = spec.N;
  const double p_up = 1.0 / (N + 1.0);
  p.sample_op = [a, N, p_up, forced](const Eigen::VectorXd& x, Rng& g, Eigen::VectorXd& out) {
    double y;
    switch (forced) {
      case ForcedDraw::all_max: y = a + N; break;
      case ForcedDraw::all_min: y = a - 1.0; break;
      default: y = (g.uniform01() < p_up) ? a + N : a - 1.0;
    }
    out.resize(1);
    out[0] = y * x[0];
  };
  p.expected_op = [a](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out.resize(1);
    out[0] = a * x[0];
  };
  return p;
}

std::vector<std::pair<double, double>> exact_distribution(const HardExampleSpec& spec, int k) {
  spec.validate();
  if (k < 0 || k > kEnumerationCap)
    throw std::invalid_argument("exact_distribution: k beyond the 2^24 enumeration cap");
  const double p_up = 1.0 / (spec.N + 1.0);
  const double p_dn = spec.N / (spec.N + 1.0);
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(std::size_t{1} << k);
  // Depth-first with running value and probability; multipliers are
  // 1 + alpha_i (Y_i - 1) for the two branches.
  struct Frame {
    double value, prob;
    int depth;
  };
  std::vector<Frame> stack;
  stack.push_back({spec.x0, 1.0, 0});
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.depth == k) {
      atoms.emplace_back(f.value, f.prob);
      continue;
    }
    const double ai = spec.schedule.at(f.depth);
    stack.push_back({f.value * (1.0 + ai * (spec.a + spec.N - 1.0)), f.prob * p_up, f.depth + 1});
    stack.push_back({f.value * (1.0 + ai * (spec.a - 2.0)), f.prob * p_dn, f.depth + 1});
  }
  return atoms;
}

double exact_mean(const HardExampleSpec& spec, int k) {
  double m = spec.x0;
  for (int i = 0; i < k; ++i) m *= 1.0 + spec.schedule.at(i) * (spec.a - 1.0);
  return m;
}

double exact_rescaled_mgf(const HardExampleSpec& spec, int k, double lambda, double beta_tilde) {
  if (!(lambda > 0.0)) throw std::invalid_argument("exact_rescaled_mgf: lambda must be > 0");
  if (!(beta_tilde > 0.0)) throw std::invalid_argument("exact_rescaled_mgf: beta_tilde must be > 0");
  const auto atoms = exact_distribution(spec, k);
  const double scale = std::sqrt(static_cast<double>(k) + spec.schedule.h);
  double total = 0.0;
  for (const auto& [value, prob] : atoms) {
    const double expo = lambda * std::pow(scale * value, beta_tilde);
    if (expo > 700.0) return std::numeric_limits<double>::infinity();
    total += prob * std::exp(expo);
  }
  return total;
}

double mgf_lower_bound_log_general(const HardExampleSpec& spec, std::uint64_t k, double lambda,
                                   double beta_tilde, double beta_prime, std::uint64_t k_eps) {
  if (k < k_eps) throw std::invalid_argument("mgf_lower_bound: k must be >= k_eps");
  const double D = spec.D();
  double log_prod = 0.0;  // sum over i in [k_eps, k) of log(1 + alpha_i D)
  for (std::uint64_t i = k_eps; i < k; ++i)
    log_prod += std::log1p(spec.schedule.at(static_cast<long long>(i)) * D);
  const double kph = static_cast<double>(k) + spec.schedule.h;
  // log of lambda x0^bt (k+h)^{beta'} prod^bt  minus  k log(N+1).
  const double inner_log = std::log(lambda) + beta_tilde * std::log(spec.x0) +
                           beta_prime * std::log(kph) + beta_tilde * log_prod;
  const double inner = (inner_log > 700.0) ? std::numeric_limits<double>::infinity() : std::exp(inner_log);
  return inner - static_cast<double>(k) * std::log(spec.N + 1.0);
}

double mgf_lower_bound_log(const HardExampleSpec& spec, std::uint64_t k, double lambda,
                           double beta_tilde, std::uint64_t k_eps) {
  return mgf_lower_bound_log_general(spec, k, lambda, beta_tilde, beta_tilde / 2.0, k_eps);
}

std::uint64_t mgf_lower_bound_first_exceed(const HardExampleSpec& spec, double lambda,
                                           double beta_tilde, std::uint64_t k_eps,
                                           double threshold, std::uint64_t k_cap) {
  const double D = spec.D();
  const double log_n1 = std::log(spec.N + 1.0);
  const double base = std::log(lambda) + beta_tilde * std::log(spec.x0);
  double log_prod = 0.0;
  for (std::uint64_t k = k_eps + 1; k <= k_cap; ++k) {
    log_prod += std::log1p(spec.schedule.at(static_cast<long long>(k - 1)) * D);
    const double kph = static_cast<double>(k) + spec.schedule.h;
    const double inner_log = base + 0.5 * beta_tilde * std::log(kph) + beta_tilde * log_prod;
    const double inner = (inner_log > 700.0) ? std::numeric_limits<double>::infinity() : std::exp(inner_log);
    if (inner - static_cast<double>(k) * log_n1 > threshold) return k;
  }
  return 0;
}

EpsWitness find_divergence_witness(const HardExampleSpec& spec, double beta_tilde) {
  const double D = spec.D();
  const double alpha = spec.schedule.alpha;
  EpsWitness w;
  for (int j = 0; j <= 40; ++j) {
    const double eps = std::ldexp(1.0, -j);
    if (!(beta_tilde > 2.0 / (1.0 + 2.0 * alpha * D / (1.0 + eps)))) continue;
    // First k with exp(alpha_k D / (1+eps)) <= 1 + alpha_k D; alpha_k is
    // decreasing and the inequality holds for all small alpha_k, so scan
    // with doubling then walk back.
    auto holds = [&](std::uint64_t k) {
      const double x = spec.schedule.at(static_cast<long long>(k)) * D;
      return std::exp(x / (1.0 + eps)) <= 1.0 + x;
    };
    std::uint64_t hi = 0;
    if (!holds(0)) {
      hi = 1;
      while (hi < (std::uint64_t{1} << 62) && !holds(hi)) hi *= 2;
      if (!holds(hi)) continue;
      std::uint64_t lo = hi / 2;  // !holds(lo)
      while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (holds(mid))
          hi = mid;
        else
          lo = mid;
      }
    }
    w.found = true;
    w.eps = eps;
    w.k_eps = hi;
    return w;
  }
  return w;
}

}  // namespace csa
