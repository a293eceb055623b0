#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mcox/coxph.hpp"
#include "mcox/data.hpp"
#include "mcox/moments.hpp"

namespace mcox {

// Covariance blocks of the stacked (score, centered moment) vector estimated
// on the subsample. omega12 and omega22 carry the finite-population factor.
struct OmegaBlocks {
  Eigen::MatrixXd omega11;  // p x p
  Eigen::MatrixXd omega12;  // p x q
  Eigen::MatrixXd omega22;  // q x q
  double finite_pop_factor = 0.0;
  std::size_t realized_r = 0;
};

struct McoxResult {
  Eigen::VectorXd beta_mcox;
  Eigen::VectorXd beta_uni;
  Eigen::MatrixXd variance;
  std::optional<double> alpha;
  double g2_norm = 0.0;
  bool fallback = false;
  // Number of Omega22 eigen-directions kept by the pseudo-inverse.
  std::size_t omega22_rank = 0;
};

// r^-1 sum_k {h(Z_k) - mu_hat}, r = realized subsample size.
Eigen::VectorXd compute_g2(const Dataset& subsample, const MomentSpec& spec,
                           const WholeDataMoment& mu_hat);

// psi: r x p score residuals, h: r x q moment values, rate: sampling fraction.
OmegaBlocks assemble_omega_blocks(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& h, double rate);

// Score residuals come from the subsample's own Breslow fit at beta_uni.
OmegaBlocks compute_omega_blocks(const Dataset& subsample, const Eigen::VectorXd& beta_uni,
                                 const MomentSpec& spec, double rate);

// Symmetric pseudo-inverse dropping eigenvalues below rel_tol * max |eigenvalue|.
// rank receives the number of kept directions.
Eigen::MatrixXd symmetric_pseudo_inverse(const Eigen::MatrixXd& a, double rel_tol = 1e-10,
                                         std::size_t* rank = nullptr);

// beta_uni - Sigma^-1 Omega12 Omega22^+ g2, with Sigma the subsample information
// at beta_uni. When alpha_moment is given (whole-data mean of the estimated
// efficient score) the step-size diagnostic alpha is filled in.
McoxResult mcox_estimate(const FitResult& subsample_fit, const OmegaBlocks& blocks,
                         const Eigen::VectorXd& g2,
                         const std::optional<Eigen::VectorXd>& alpha_moment = std::nullopt);

// mu' (Omega11 + mu mu')^-1 mu.
double step_size_alpha(const Eigen::MatrixXd& omega11, const Eigen::VectorXd& mu);

// One-step update beta_uni + Sigma^-1 mu_hat.
Eigen::VectorXd oses_estimate(const FitResult& subsample_fit, const WholeDataMoment& mu_hat_psi);

struct WaldInterval {
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

std::vector<WaldInterval> wald_intervals(const Eigen::VectorXd& estimate,
                                         const Eigen::MatrixXd& variance, double level);
std::vector<WaldInterval> wald_intervals(const McoxResult& result, double level);

}  // namespace mcox
