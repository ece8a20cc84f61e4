#include "csa/norms.hpp"

#include <cmath>
#include <stdexcept>

#include "csa/rng.hpp"

namespace csa {
namespace {

// Exponent used for closed-form lp comparisons; max-norm maps to infinity.
double lp_exponent(const NormSpec& n) {
  switch (n.kind()) {
    case NormKind::euclidean: return 2.0;
    case NormKind::p_norm: return n.p();
    case NormKind::max_norm: return std::numeric_limits<double>::infinity();
    default: throw std::logic_error("not an lp-type norm");
  }
}

double inv_or_zero(double p) { return std::isinf(p) ? 0.0 : 1.0 / p; }

double scaled_p_sum(const Eigen::VectorXd& x, double p) {
  const double m = x.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]) / m, p);
  return m * std::pow(s, 1.0 / p);
}

}  // namespace

NormSpec NormSpec::Euclidean(int dim) {
  if (dim <= 0) throw std::invalid_argument("NormSpec: dim must be positive");
  return NormSpec(NormKind::euclidean, dim, 2.0);
}

NormSpec NormSpec::Max(int dim) {
  if (dim <= 0) throw std::invalid_argument("NormSpec: dim must be positive");
  return NormSpec(NormKind::max_norm, dim, std::numeric_limits<double>::infinity());
}

NormSpec NormSpec::P(int dim, double p) {
  if (dim <= 0) throw std::invalid_argument("NormSpec: dim must be positive");
  if (!(p >= 2.0)) throw std::invalid_argument("NormSpec: p_norm requires p >= 2");
  return NormSpec(NormKind::p_norm, dim, p);
}

NormSpec NormSpec::Weighted(const Eigen::MatrixXd& P) {
  if (P.rows() != P.cols() || P.rows() == 0)
    throw std::invalid_argument("NormSpec: weight matrix must be square");
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + P.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("NormSpec: weight matrix must be symmetric");
  NormSpec n(NormKind::weighted_quadratic, static_cast<int>(P.rows()), 2.0);
  Eigen::MatrixXd sym = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  n.lambda_min_ = es.eigenvalues().minCoeff();
  n.lambda_max_ = es.eigenvalues().maxCoeff();
  if (!(n.lambda_min_ > 0.0))
    throw std::invalid_argument("NormSpec: weight matrix must be positive definite");
  n.weight_ = std::make_shared<const Eigen::MatrixXd>(std::move(sym));
  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(*n.weight_);
  if (llt->info() != Eigen::Success)
    throw std::invalid_argument("NormSpec: Cholesky factorization failed");
  n.llt_ = std::move(llt);
  return n;
}

const Eigen::MatrixXd& NormSpec::weight() const {
  if (!weight_) throw std::logic_error("NormSpec: not a weighted norm");
  return *weight_;
}

bool NormSpec::same_as(const NormSpec& other) const {
  if (kind_ != other.kind_ || dim_ != other.dim_) return false;
  switch (kind_) {
    case NormKind::p_norm: return std::abs(p_ - other.p_) < 1e-12;
    case NormKind::weighted_quadratic:
      return (weight() - other.weight()).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + weight().cwiseAbs().maxCoeff());
    default: return true;
  }
}

double NormSpec::eval(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::invalid_argument("norm_eval: dimension mismatch");
  switch (kind_) {
    case NormKind::euclidean: return x.norm();
    case NormKind::max_norm: return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
    case NormKind::p_norm: return scaled_p_sum(x, p_);
    case NormKind::weighted_quadratic:
      return (llt_->matrixU() * x).norm();
  }
  return 0.0;
}

double NormSpec::dual_eval(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::invalid_argument("dual_norm_eval: dimension mismatch");
  switch (kind_) {
    case NormKind::euclidean: return x.norm();
    case NormKind::max_norm: return x.cwiseAbs().sum();  // dual of l_inf is l_1
    case NormKind::p_norm: {
      const double q = p_ / (p_ - 1.0);
      return scaled_p_sum(x, q);
    }
    case NormKind::weighted_quadratic: {
      // ||x||_{P^{-1}} = ||L^{-1} x||_2 with P = L L^T.
      Eigen::VectorXd y = llt_->matrixL().solve(x);
      return y.norm();
    }
  }
  return 0.0;
}

double norm_eval(const NormSpec& norm, const Eigen::VectorXd& x) { return norm.eval(x); }
double dual_norm_eval(const NormSpec& norm, const Eigen::VectorXd& x) { return norm.dual_eval(x); }

EquivConstants norm_equiv_constants(const NormSpec& c, const NormSpec& s,
                                    int sample_budget, std::uint64_t seed) {
  if (c.dim() != s.dim())
    throw std::invalid_argument("norm_equiv_constants: dimension mismatch");
  const int d = c.dim();
  if (c.same_as(s)) return {1.0, 1.0, true};

  const bool c_lp = c.kind() != NormKind::weighted_quadratic;
  const bool s_lp = s.kind() != NormKind::weighted_quadratic;

  if (c_lp && s_lp) {
    const double pc = lp_exponent(c);
    const double ps = lp_exponent(s);
    const double r = inv_or_zero(pc) - inv_or_zero(ps);
    if (pc <= ps) return {1.0, std::pow(static_cast<double>(d), r), true};
    return {std::pow(static_cast<double>(d), r), 1.0, true};
  }

  if (!c_lp && !s_lp) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(c.weight(), s.weight());
    return {std::sqrt(ges.eigenvalues().minCoeff()), std::sqrt(ges.eigenvalues().maxCoeff()), true};
  }

  // Weighted against euclidean has a closed form through the spectrum.
  if (!c_lp && s.kind() == NormKind::euclidean)
    return {std::sqrt(c.lambda_min()), std::sqrt(c.lambda_max()), true};
  if (c.kind() == NormKind::euclidean && !s_lp)
    return {1.0 / std::sqrt(s.lambda_max()), 1.0 / std::sqrt(s.lambda_min()), true};

  // Remaining mixed pairs: estimate the ratio over the sphere and widen.
  if (sample_budget <= 0)
    throw std::invalid_argument("norm_equiv_constants: unsupported pair without sample budget");
  Rng rng(SeedSpec{seed, 0});
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  Eigen::VectorXd x(d);
  auto probe = [&](const Eigen::VectorXd& v) {
    const double den = s.eval(v);
    if (den <= 0.0) return;
    const double r = c.eval(v) / den;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  };
  for (int i = 0; i < d; ++i) {
    x.setZero();
    x[i] = 1.0;
    probe(x);
  }
  probe(Eigen::VectorXd::Ones(d));
  for (int it = 0; it < sample_budget; ++it) {
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    probe(x);
    for (int i = 0; i < d; ++i) x[i] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    probe(x);
  }
  return {lo / 1.01, hi * 1.01, false};
}

EquivConstants dual_pair_constants(const NormSpec& c) {
  const int d = c.dim();
  switch (c.kind()) {
    case NormKind::euclidean: return {1.0, 1.0, true};
    case NormKind::max_norm: return {1.0 / d, 1.0, true};  // vs l_1
    case NormKind::p_norm: {
      const double q = c.p() / (c.p() - 1.0);
      return {std::pow(static_cast<double>(d), 1.0 / c.p() - 1.0 / q), 1.0, true};
    }
    case NormKind::weighted_quadratic:
      return {c.lambda_min(), c.lambda_max(), true};
  }
  return {1.0, 1.0, true};
}

}  // namespace csa
