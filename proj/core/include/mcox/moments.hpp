#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcox/data.hpp"
#include "mcox/weibull_aft.hpp"

namespace mcox {

enum class MomentKind { UserLinear, EstimatedOptimal, AftScore };

std::string_view to_string(MomentKind kind) noexcept;

// Summaries frozen from a pilot sample for the estimated efficient score
//   h(Z) = Delta {X(Y) - Xbar(Y)}
//          - sum_{pilot events t_j <= Y} {X(t_j) - Xbar(t_j)} exp(b'X(t_j)) dLambda(t_j),
// where Xbar is the pilot risk-set mean and dLambda the pilot Breslow increment,
// both at b = beta.
struct OptimalMomentState {
  Eigen::VectorXd beta;
  std::vector<double> event_times;   // distinct pilot event times
  Eigen::MatrixXd event_mean;        // K x p, pilot Xbar(t_j)
  std::vector<double> increments;    // dLambda(t_j)
  std::vector<double> cum_hazard;    // running sum of increments
  Eigen::MatrixXd cum_mean_hazard;   // K x p, running sum of Xbar(t_j) dLambda(t_j)
  Dataset pilot;                     // for Xbar at off-grid times
  // Constant paths: suffix sums of centered weights along the pilot sort order.
  std::vector<double> suffix_s0;
  Eigen::MatrixXd suffix_s1;         // r0 x p
};

class MomentFunction;

// Immutable moment function h: record -> R^q. Copies share the frozen state.
class MomentSpec {
 public:
  MomentSpec() = default;

  MomentKind kind() const;
  std::size_t q() const;

  // h(Z_i) for record i of dataset.
  void evaluate(const Dataset& dataset, std::size_t i, std::span<double> out) const;
  Eigen::VectorXd evaluate(const Dataset& dataset, std::size_t i) const;
  // n x q matrix of h over a whole dataset.
  Eigen::MatrixXd evaluate_all(const Dataset& dataset) const;

  const OptimalMomentState* optimal_state() const;
  const WeibullAftFit* aft_fit() const;
  const Eigen::MatrixXd* linear_matrix() const;

  explicit operator bool() const noexcept { return impl_ != nullptr; }

 private:
  friend MomentSpec build_optimal_moment(const Dataset&, const Eigen::VectorXd&);
  friend MomentSpec build_aft_moment(const Dataset&, const AftOptions&);
  friend MomentSpec build_user_linear_moment(Eigen::MatrixXd);
  explicit MomentSpec(std::shared_ptr<const MomentFunction> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<const MomentFunction> impl_;
};

// Estimated optimal moment from a pilot sample at coefficient beta.
// Throws Error(TooFewEvents) when the pilot has fewer than p events.
MomentSpec build_optimal_moment(const Dataset& pilot, const Eigen::VectorXd& beta);

// Slope scores of a Weibull AFT model fitted on the pilot, evaluated at X(0).
MomentSpec build_aft_moment(const Dataset& pilot, const AftOptions& options = {});

// h(Z) = matrix * (Y, Delta, features'); matrix is q x (2 + feature_dim).
MomentSpec build_user_linear_moment(Eigen::MatrixXd matrix);

struct WholeDataMoment {
  Eigen::VectorXd mu_hat;
  std::size_t n_used = 0;
};

// One streaming pass with a fixed-block tree reduction.
WholeDataMoment whole_data_mean(const Dataset& dataset, const MomentSpec& spec);

}  // namespace mcox
