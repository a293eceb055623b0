#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "mcox/data.hpp"

namespace mcox {

// Weibull accelerated failure time model
//   log T = a + gamma'x + sigma W,  W ~ standard minimum extreme value,
// fitted by maximum likelihood with right censoring. Parameters are packed as
// theta = (a, gamma, log sigma).
struct WeibullAftFit {
  double intercept = 0.0;
  Eigen::VectorXd slopes;
  double log_scale = 0.0;
  double loglik = 0.0;  // per-subject average, without the -log y Jacobian
  int n_iter = 0;
  bool converged = false;

  Eigen::VectorXd theta() const;
};

struct AftOptions {
  double tol = 1e-9;  // sup-norm of the averaged gradient
  int max_iter = 100;
  int max_halving = 30;
};

// Log-likelihood contribution of one subject and its gradient / Hessian in
// theta. Times are floored at 1e-300 before taking logs.
double weibull_subject_loglik(const Eigen::VectorXd& theta, std::span<const double> x, double y,
                              bool event, Eigen::VectorXd* gradient = nullptr,
                              Eigen::MatrixXd* hessian = nullptr);

// Throws Error(NotConverged) when Newton iterations fail to reach tol.
WeibullAftFit fit_weibull_aft(const RowMatrix& x, std::span<const double> y,
                              std::span<const std::uint8_t> delta, const AftOptions& options = {});

// Score of the slope block gamma for one subject at the fitted parameters:
// (exp(z) - delta) x / sigma with z = (log y - a - gamma'x) / sigma.
Eigen::VectorXd weibull_slope_score(const WeibullAftFit& fit, std::span<const double> x, double y,
                                    bool event);

}  // namespace mcox
