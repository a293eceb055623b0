#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcox/coxph.hpp"
#include "mcox/data.hpp"
#include "mcox/mcox.hpp"
#include "mcox/moments.hpp"
#include "mcox/subsampling.hpp"

namespace mcox {

struct MomentChoice {
  MomentKind kind = MomentKind::EstimatedOptimal;
  Eigen::MatrixXd linear;  // used when kind == UserLinear

  static MomentChoice optimal() { return {}; }
  static MomentChoice aft() { return {MomentKind::AftScore, {}}; }
  static MomentChoice user_linear(Eigen::MatrixXd m) { return {MomentKind::UserLinear, std::move(m)}; }
};

struct PipelineOptions {
  double r = 1000.0;
  std::optional<std::size_t> r0;
  std::uint64_t seed = 1;
  MomentChoice moment;
  bool with_oses = false;
  FitOptions fit;
};

struct PhaseTimings {
  double pilot = 0.0;          // pilot draw and moment build
  double moment_pass = 0.0;    // whole-data mean of the moment(s)
  double subsample_fit = 0.0;  // subsample draw and Newton-Raphson
  double correction = 0.0;     // g2, Omega blocks and the closed-form update

  double total() const noexcept { return pilot + moment_pass + subsample_fit + correction; }
};

struct PipelineResult {
  McoxResult result;
  std::optional<Eigen::VectorXd> beta_oses;
  FitResult uni_fit;
  OmegaBlocks blocks;
  Eigen::VectorXd g2;
  Eigen::VectorXd mu_hat;
  std::size_t n = 0;
  std::size_t realized_r = 0;
  std::size_t pilot_r = 0;
  MomentKind moment = MomentKind::EstimatedOptimal;
  PhaseTimings timings_ms;
  std::vector<std::string> warnings;
};

// Subsample fit, pilot moment, whole-data moment pass and the closed-form
// correction. Throws Error(NotConverged) when the subsample fit does not
// converge.
PipelineResult run_mcox(const Dataset& dataset, const PipelineOptions& options);

}  // namespace mcox
