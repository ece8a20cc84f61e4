#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>

namespace csa {

enum class NormKind { euclidean, max_norm, p_norm, weighted_quadratic };

/// One of the four supported norms on R^d. Immutable after construction;
/// weighted_quadratic precomputes a Cholesky factor so evaluation stays cheap
/// in trajectory loops.
class NormSpec {
 public:
  static NormSpec Euclidean(int dim);
  static NormSpec Max(int dim);
  static NormSpec P(int dim, double p);  // requires p >= 2
  static NormSpec Weighted(const Eigen::MatrixXd& P);  // requires P SPD

  NormKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double p() const { return p_; }
  const Eigen::MatrixXd& weight() const;

  double lambda_min() const { return lambda_min_; }  // weighted only
  double lambda_max() const { return lambda_max_; }  // weighted only

  bool same_as(const NormSpec& other) const;

  double eval(const Eigen::VectorXd& x) const;
  double dual_eval(const Eigen::VectorXd& x) const;

 private:
  NormSpec(NormKind k, int dim, double p) : kind_(k), dim_(dim), p_(p) {}

  NormKind kind_;
  int dim_;
  double p_ = 2.0;
  std::shared_ptr<const Eigen::MatrixXd> weight_;
  std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> llt_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

double norm_eval(const NormSpec& norm, const Eigen::VectorXd& x);
double dual_norm_eval(const NormSpec& norm, const Eigen::VectorXd& x);

/// Constants l, u with l*||x||_s <= ||x||_c <= u*||x||_s for all x.
/// `exact` marks closed forms; numeric estimates are widened by 1.01 so the
/// sandwich stays valid downstream.
struct EquivConstants {
  double lower = 1.0;
  double upper = 1.0;
  bool exact = true;
};

EquivConstants norm_equiv_constants(const NormSpec& c, const NormSpec& s,
                                    int sample_budget = 200000,
                                    std::uint64_t seed = 0x5eed);

/// Constants relating ||.||_c to its own dual: l*||x||_{c,*} <= ||x||_c <= u*||x||_{c,*}.
EquivConstants dual_pair_constants(const NormSpec& c);

}  // namespace csa
