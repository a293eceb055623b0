#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mcox/data.hpp"

namespace mcox {

// Risk-set averages at time t, normalized by the dataset's own n:
//   s0 = n^-1 sum_j I(Y_j >= t) exp(b'X_j(t)),
//   s1 = n^-1 sum_j I(Y_j >= t) exp(b'X_j(t)) X_j(t),
//   s2 = n^-1 sum_j I(Y_j >= t) exp(b'X_j(t)) X_j(t) X_j(t)'.
struct RiskSums {
  double s0 = 0.0;
  Eigen::VectorXd s1;
  Eigen::MatrixXd s2;
  double t = 0.0;
  Eigen::VectorXd beta;

  // s1 / s0; throws Error(EmptyRiskSet) when nobody is at risk.
  Eigen::VectorXd mean() const;
};

// order selects how many of s0, s1, s2 are filled (0, 1 or 2).
RiskSums risk_sums(const Dataset& dataset, const Eigen::VectorXd& beta, double t, int order = 2);

// Per-distinct-event-time summaries of the risk set, the common ingredient of
// the partial likelihood, its derivatives, the Breslow estimator and the
// efficient score. Sums are unnormalized; linear predictors are centered before
// exponentiation so log_denominator stays finite for large |b'X|.
struct RiskSetSweep {
  std::vector<double> time;             // distinct event times, increasing
  std::vector<double> events;           // number of events at each time
  std::vector<double> log_denominator;  // log sum_{at risk} exp(b'X_j(t))
  std::vector<double> event_eta_sum;    // sum over events at t of b'X_i(t)
  Eigen::MatrixXd mean;                 // K x p, risk-set weighted mean of X(t)
  Eigen::MatrixXd event_x_sum;          // K x p, sum over events at t of X_i(t)
  Eigen::MatrixXd information;          // p x p, sum_k d_k Cov_k(X), when requested

  std::size_t size() const noexcept { return time.size(); }
  // Breslow increment at the k-th event time.
  double hazard_increment(std::size_t k) const;
};

RiskSetSweep sweep_event_times(const Dataset& dataset, const Eigen::VectorXd& beta,
                               bool with_information);

struct PartialLikelihood {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

// Log-partial likelihood, score and information, each carrying the 1/n factor.
PartialLikelihood evaluate_partial_likelihood(const Dataset& dataset, const Eigen::VectorXd& beta);
double log_partial_likelihood(const Dataset& dataset, const Eigen::VectorXd& beta);
Eigen::VectorXd score(const Dataset& dataset, const Eigen::VectorXd& beta);
Eigen::MatrixXd information(const Dataset& dataset, const Eigen::VectorXd& beta);

struct FitOptions {
  double tol = 1e-8;      // on the sup-norm of the score
  int max_iter = 50;
  int max_halving = 20;
};

struct FitResult {
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd information;  // at beta_hat, 1/n normalized
  Eigen::MatrixXd variance;     // (n * information)^-1
  int n_iter = 0;
  bool converged = false;
  double final_score_norm = 0.0;
  double loglik = 0.0;
  std::size_t n = 0;
  std::size_t n_events = 0;
};

// Newton-Raphson with step halving. A run that hits max_iter is returned with
// converged == false rather than thrown. Throws Error(SingularInformation) when
// an LDL' pivot falls below 1e-12 times the largest diagonal entry.
FitResult newton_raphson_fit(const Dataset& dataset, const Eigen::VectorXd& init = {},
                             const FitOptions& options = {});

// Solves information * x = rhs, with the singularity rule above.
Eigen::MatrixXd solve_information(const Eigen::MatrixXd& information, const Eigen::MatrixXd& rhs);

struct BaselineHazard {
  std::vector<double> times;
  std::vector<double> increments;

  // Cumulative hazard at t (right-continuous step function).
  double cumulative(double t) const;
};

// Breslow estimator: increment d_k / sum_{at risk} exp(b'X_j(t_k)).
BaselineHazard breslow_baseline(const Dataset& dataset, const Eigen::VectorXd& beta);

// M_i = Delta_i - sum_{t_k <= Y_i} exp(b'X_i(t_k)) dLambda(t_k).
Eigen::VectorXd martingale_residuals(const Dataset& dataset, const Eigen::VectorXd& beta,
                                     const BaselineHazard& baseline);

// Row i is int {X_i(t) - Xbar(t)} dM_i(t) with the dataset itself supplying the
// risk-set means and the Breslow increments. Column sums equal n * score.
Eigen::MatrixXd efficient_score_contributions(const Dataset& dataset, const Eigen::VectorXd& beta);
Eigen::MatrixXd efficient_score_contributions(const Dataset& dataset, const Eigen::VectorXd& beta,
                                              const RiskSetSweep& sweep);

}  // namespace mcox
