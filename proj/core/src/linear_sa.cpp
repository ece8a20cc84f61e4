#include "csa/linear_sa.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>

namespace csa {

bool hurwitz_check(const Eigen::MatrixXd& A_bar) {
  if (A_bar.rows() != A_bar.cols()) throw std::invalid_argument("hurwitz_check: square matrix required");
  Eigen::EigenSolver<Eigen::MatrixXd> es(A_bar, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("hurwitz_check: eigen solver failed");
  return es.eigenvalues().real().maxCoeff() < -1e-12;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A_bar) {
  if (!hurwitz_check(A_bar)) throw std::invalid_argument("solve_lyapunov: matrix is not Hurwitz");
  const int d = static_cast<int>(A_bar.rows());
  // (I (x) A' + A' (x) I) vec(P) = -vec(I), assembled sparse.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(2 * d) * d * d);
  const Eigen::MatrixXd At = A_bar.transpose();
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      const int row = j * d + i;
      for (int k = 0; k < d; ++k) {
        trip.emplace_back(row, j * d + k, At(i, k));  // I (x) A'
        trip.emplace_back(row, k * d + i, At(j, k));  // A' (x) I acting on column blocks
      }
    }
  Eigen::SparseMatrix<double> M(d * d, d * d);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d * d);
  for (int i = 0; i < d; ++i) rhs[i * d + i] = -1.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(M);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("solve_lyapunov: Kronecker system numerically degenerate");
  const Eigen::VectorXd v = lu.solve(rhs);
  Eigen::MatrixXd P(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) P(i, j) = v[j * d + i];
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("solve_lyapunov: solution not positive definite");
  return P;
}

std::pair<LinearSASpec, SAProblem> remodel(const RemodelInputs& in) {
  if (!in.sampler && in.A_bar.size() == 0)
    throw std::invalid_argument("remodel: need a sampler or exact expectations");

  LinearSASpec spec;
  spec.sampler = in.sampler;

  if (in.A_bar.size() != 0) {
    spec.A_bar = in.A_bar;
    spec.b_bar = in.b_bar;
  } else {
    // Estimate expectations from draws; marks the instance approximate so it
    // is excluded from almost-sure audits.
    Rng rng(SeedSpec{in.estimation_seed, 0});
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    in.sampler(rng, A, b);
    Eigen::MatrixXd sumA = A;
    Eigen::VectorXd sumb = b;
    for (int t = 1; t < in.estimation_draws; ++t) {
      in.sampler(rng, A, b);
      sumA += A;
      sumb += b;
    }
    spec.A_bar = sumA / in.estimation_draws;
    spec.b_bar = sumb / in.estimation_draws;
    spec.expectations_estimated = true;
  }
  spec.dim = static_cast<int>(spec.A_bar.rows());

  if (in.A_max >= 0.0) {
    spec.A_max = in.A_max;
    spec.b_max = in.b_max;
  } else {
    if (!in.sampler) throw std::invalid_argument("remodel: A_max/b_max missing");
    Rng rng(SeedSpec{in.estimation_seed, 1});
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double amax = 0.0, bmax = 0.0;
    for (int t = 0; t < 10000; ++t) {
      in.sampler(rng, A, b);
      amax = std::max(amax, A.jacobiSvd().singularValues()[0]);
      bmax = std::max(bmax, b.norm());
    }
    spec.A_max = amax;
    spec.b_max = bmax;
    spec.expectations_estimated = true;
  }

  spec.P_bar = solve_lyapunov(spec.A_bar);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esP(spec.P_bar);
  const double lam_min = esP.eigenvalues().minCoeff();
  const double lam_max = esP.eigenvalues().maxCoeff();

  const Eigen::MatrixXd APA = spec.A_bar.transpose() * spec.P_bar * spec.A_bar;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esAPA(0.5 * (APA + APA.transpose()));
  spec.beta = 1.0 / (2.0 * esAPA.eigenvalues().maxCoeff());

  // Exact contraction factor: largest singular value of P^{1/2}(beta A + I)P^{-1/2}.
  const Eigen::MatrixXd sqrtP = esP.operatorSqrt();
  const Eigen::MatrixXd isqrtP = esP.operatorInverseSqrt();
  const Eigen::MatrixXd G = sqrtP * (spec.beta * spec.A_bar + Eigen::MatrixXd::Identity(spec.dim, spec.dim)) * isqrtP;
  spec.gamma_bar_exact = G.jacobiSvd().singularValues()[0];
  spec.gamma_bar_paper_bound = 1.0 - spec.beta / lam_max;
  spec.gamma_bar_analytic = std::sqrt(std::max(0.0, 1.0 - spec.beta / (2.0 * lam_max)));
  spec.sigma_hat = 2.0 * spec.beta * lam_max * (spec.A_max / lam_min + spec.b_max);

  if (!(spec.gamma_bar_exact < 1.0))
    throw std::runtime_error("remodel: contraction factor >= 1 (numerical breakdown)");

  SAProblem p;
  p.dim = spec.dim;
  p.name = "linear_sa";
  p.norm_c = NormSpec::Weighted(spec.P_bar);
  p.gamma_c = spec.gamma_bar_exact;
  p.noise = NoiseSpec::Multiplicative(spec.sigma_hat);
  p.x_star = spec.A_bar.fullPivLu().solve(spec.b_bar);
  p.x0 = Eigen::VectorXd::Zero(spec.dim);

  const double beta = spec.beta;
  const Eigen::MatrixXd Abar = spec.A_bar;
  const Eigen::VectorXd bbar = spec.b_bar;
  if (in.sampler) {
    auto sampler = in.sampler;
    p.sample_op = [beta, sampler](const Eigen::VectorXd& x, Rng& g, Eigen::VectorXd& out) {
      Eigen::MatrixXd A;
      Eigen::VectorXd b;
      sampler(g, A, b);
      out = beta * (A * x - b) + x;
    };
  } else {
    p.sample_op = [beta, Abar, bbar](const Eigen::VectorXd& x, Rng&, Eigen::VectorXd& out) {
      out = beta * (Abar * x - bbar) + x;
    };
  }
  p.expected_op = [beta, Abar, bbar](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out = beta * (Abar * x - bbar) + x;
  };
  return {spec, p};
}

}  // namespace csa
