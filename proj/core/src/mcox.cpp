#include "mcox/mcox.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "mcox/error.hpp"
#include "mcox/parallel.hpp"

namespace mcox {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::size_t kRowBlock = 1024;

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Deterministic column means and cross-products over rows.
VectorXd column_mean(const MatrixXd& a) {
  const Index c = a.cols();
  VectorXd total = block_reduce(
      static_cast<std::size_t>(a.rows()), kRowBlock, VectorXd(VectorXd::Zero(c)),
      [&](std::size_t i0, std::size_t i1) {
        return VectorXd(a.middleRows(static_cast<Index>(i0), static_cast<Index>(i1 - i0)).colwise().sum().transpose());
      },
      [](VectorXd& x, const VectorXd& y) { x += y; });
  return total / static_cast<double>(a.rows());
}

MatrixXd cross_mean(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd total = block_reduce(
      static_cast<std::size_t>(a.rows()), kRowBlock, MatrixXd(MatrixXd::Zero(a.cols(), b.cols())),
      [&](std::size_t i0, std::size_t i1) {
        const Index s = static_cast<Index>(i0), m = static_cast<Index>(i1 - i0);
        return MatrixXd(a.middleRows(s, m).transpose() * b.middleRows(s, m));
      },
      [](MatrixXd& x, const MatrixXd& y) { x += y; });
  return total / static_cast<double>(a.rows());
}

}  // namespace

VectorXd compute_g2(const Dataset& subsample, const MomentSpec& spec, const WholeDataMoment& mu_hat) {
  if (subsample.n() == 0) throw Error(ErrorKind::EmptySubsample, "subsample is empty");
  const WholeDataMoment sub = whole_data_mean(subsample, spec);
  return sub.mu_hat - mu_hat.mu_hat;
}

OmegaBlocks assemble_omega_blocks(const MatrixXd& psi, const MatrixXd& h, double rate) {
  if (psi.rows() != h.rows() || psi.rows() == 0) {
    throw Error(ErrorKind::InvalidArgument, "score and moment rows must match and be nonempty");
  }
  if (!(rate > 0.0 && rate <= 1.0)) throw Error(ErrorKind::InvalidArgument, "rate must lie in (0, 1]");
  OmegaBlocks out;
  out.realized_r = static_cast<std::size_t>(psi.rows());
  out.finite_pop_factor = 1.0 - rate;
  const MatrixXd hc = h.rowwise() - column_mean(h).transpose();
  out.omega11 = symmetrize(cross_mean(psi, psi));
  out.omega12 = out.finite_pop_factor * cross_mean(psi, hc);
  out.omega22 = out.finite_pop_factor * symmetrize(cross_mean(hc, hc));
  return out;
}

OmegaBlocks compute_omega_blocks(const Dataset& subsample, const VectorXd& beta_uni,
                                 const MomentSpec& spec, double rate) {
  if (subsample.n_events() < subsample.p()) {
    throw Error(ErrorKind::TooFewEvents, "subsample has fewer events than parameters");
  }
  const MatrixXd psi = efficient_score_contributions(subsample, beta_uni);
  const MatrixXd h = spec.evaluate_all(subsample);
  return assemble_omega_blocks(psi, h, rate);
}

MatrixXd symmetric_pseudo_inverse(const MatrixXd& a, double rel_tol, std::size_t* rank) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(a));
  const VectorXd& lambda = eig.eigenvalues();
  const double top = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;
  VectorXd inv = VectorXd::Zero(lambda.size());
  std::size_t kept = 0;
  if (top > 0.0 && std::isfinite(top)) {
    for (Index i = 0; i < lambda.size(); ++i) {
      if (lambda[i] > rel_tol * top) {
        inv[i] = 1.0 / lambda[i];
        ++kept;
      }
    }
  }
  if (rank) *rank = kept;
  const MatrixXd& v = eig.eigenvectors();
  return symmetrize(v * inv.asDiagonal() * v.transpose());
}

double step_size_alpha(const MatrixXd& omega11, const VectorXd& mu) {
  const MatrixXd m = symmetrize(omega11 + mu * mu.transpose());
  const Eigen::LDLT<MatrixXd> ldlt(m);
  double a;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0.0) {
    a = mu.dot(ldlt.solve(mu));
  } else {
    a = mu.dot(symmetric_pseudo_inverse(m) * mu);
  }
  return std::clamp(a, 0.0, 1.0);
}

McoxResult mcox_estimate(const FitResult& subsample_fit, const OmegaBlocks& blocks, const VectorXd& g2,
                         const std::optional<VectorXd>& alpha_moment) {
  const Index p = subsample_fit.beta_hat.size();
  if (blocks.omega11.rows() != p || blocks.omega12.rows() != p ||
      blocks.omega12.cols() != g2.size() || blocks.omega22.rows() != g2.size()) {
    throw Error(ErrorKind::InvalidArgument, "block shapes do not conform");
  }
  if (blocks.realized_r == 0) throw Error(ErrorKind::EmptySubsample, "no subsample records");
  McoxResult out;
  out.beta_uni = subsample_fit.beta_hat;
  out.g2_norm = g2.norm();

  const MatrixXd& sigma = subsample_fit.information;
  const MatrixXd omega22_pinv = symmetric_pseudo_inverse(blocks.omega22, 1e-10, &out.omega22_rank);
  out.fallback = out.omega22_rank == 0;

  MatrixXd middle = blocks.omega11;
  if (out.fallback) {
    out.beta_mcox = out.beta_uni;
  } else {
    const MatrixXd k = blocks.omega12 * omega22_pinv;
    out.beta_mcox = out.beta_uni - solve_information(sigma, k * g2);
    middle -= k * blocks.omega12.transpose();
  }
  const MatrixXd sigma_inv = solve_information(sigma, MatrixXd::Identity(p, p));
  out.variance = symmetrize(sigma_inv * symmetrize(middle) * sigma_inv) /
                 static_cast<double>(blocks.realized_r);

  if (alpha_moment) {
    if (alpha_moment->size() != p) {
      throw Error(ErrorKind::InvalidArgument, "alpha needs a moment of dimension p");
    }
    out.alpha = step_size_alpha(blocks.omega11, *alpha_moment);
  }
  return out;
}

VectorXd oses_estimate(const FitResult& subsample_fit, const WholeDataMoment& mu_hat_psi) {
  if (mu_hat_psi.mu_hat.size() != subsample_fit.beta_hat.size()) {
    throw Error(ErrorKind::InvalidArgument, "efficient-score mean must have dimension p");
  }
  return subsample_fit.beta_hat + solve_information(subsample_fit.information, mu_hat_psi.mu_hat);
}

std::vector<WaldInterval> wald_intervals(const VectorXd& estimate, const MatrixXd& variance, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
  const Index p = estimate.size();
  if (variance.rows() != p || variance.cols() != p) {
    throw Error(ErrorKind::InvalidArgument, "variance shape does not match the estimate");
  }
  if (!variance.allFinite()) throw Error(ErrorKind::DegenerateVariance, "variance has non-finite entries");
  const double scale = std::max(variance.diagonal().cwiseAbs().maxCoeff(), 0.0);
  const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
  std::vector<WaldInterval> out(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    double v = variance(j, j);
    if (v < 0.0) {
      if (v < -1e-12 * scale) {
        throw Error(ErrorKind::DegenerateVariance, "negative variance for coefficient " + std::to_string(j));
      }
      v = 0.0;
    }
    auto& w = out[static_cast<std::size_t>(j)];
    w.estimate = estimate[j];
    w.se = std::sqrt(v);
    w.lower = w.estimate - z * w.se;
    w.upper = w.estimate + z * w.se;
  }
  return out;
}

std::vector<WaldInterval> wald_intervals(const McoxResult& result, double level) {
  return wald_intervals(result.beta_mcox, result.variance, level);
}

}  // namespace mcox
