#include "mcox/pipeline.hpp"

#include <chrono>

#include "mcox/error.hpp"

namespace mcox {
namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

PipelineResult run_mcox(const Dataset& dataset, const PipelineOptions& options) {
  PipelineResult out;
  out.n = dataset.n();
  out.moment = options.moment.kind;
  const SubsamplePlan plan = SubsamplePlan::make(dataset.n(), options.r, options.seed, options.r0);
  if (options.r >= static_cast<double>(dataset.n())) {
    out.warnings.push_back("r >= n: the subsample is the whole dataset and MCox reduces to the full fit");
  }

  Stopwatch fit_clock;
  UniformFit uni = fit_uniform(dataset, plan, options.fit);
  out.timings_ms.subsample_fit = fit_clock.elapsed_ms();
  if (!uni.fit.converged) {
    throw Error(ErrorKind::NotConverged, "subsample fit stopped after " + std::to_string(uni.fit.n_iter) +
                                             " iterations, score norm " +
                                             std::to_string(uni.fit.final_score_norm));
  }
  out.uni_fit = uni.fit;
  out.realized_r = uni.subsample.n();
  const Eigen::VectorXd& beta_uni = uni.fit.beta_hat;

  Stopwatch pilot_clock;
  MomentSpec spec;
  MomentSpec optimal;
  const bool need_pilot = options.moment.kind != MomentKind::UserLinear || options.with_oses;
  if (need_pilot) {
    const SubsamplePlan pilot_plan = plan.pilot(dataset.n());
    const Dataset pilot = subset(dataset, poisson_subsample(dataset.n(), pilot_plan));
    out.pilot_r = pilot.n();
    if (options.moment.kind == MomentKind::EstimatedOptimal || options.with_oses) {
      optimal = build_optimal_moment(pilot, beta_uni);
    }
    if (options.moment.kind == MomentKind::AftScore) spec = build_aft_moment(pilot);
  }
  if (options.moment.kind == MomentKind::EstimatedOptimal) spec = optimal;
  if (options.moment.kind == MomentKind::UserLinear) spec = build_user_linear_moment(options.moment.linear);
  out.timings_ms.pilot = pilot_clock.elapsed_ms();

  Stopwatch pass_clock;
  const WholeDataMoment mu = whole_data_mean(dataset, spec);
  std::optional<WholeDataMoment> mu_psi;
  if (optimal) mu_psi = spec.kind() == MomentKind::EstimatedOptimal ? mu : whole_data_mean(dataset, optimal);
  out.timings_ms.moment_pass = pass_clock.elapsed_ms();
  out.mu_hat = mu.mu_hat;

  Stopwatch correction_clock;
  const double rate = static_cast<double>(out.realized_r) / static_cast<double>(dataset.n());
  out.g2 = compute_g2(uni.subsample, spec, mu);
  out.blocks = compute_omega_blocks(uni.subsample, beta_uni, spec, rate);
  std::optional<Eigen::VectorXd> alpha_moment;
  if (spec.kind() == MomentKind::EstimatedOptimal) alpha_moment = mu.mu_hat;
  out.result = mcox_estimate(uni.fit, out.blocks, out.g2, alpha_moment);
  if (options.with_oses) out.beta_oses = oses_estimate(uni.fit, *mu_psi);
  out.timings_ms.correction = correction_clock.elapsed_ms();

  if (out.result.fallback) {
    out.warnings.push_back("moment covariance is degenerate; MCox estimate equals the subsample fit");
  }
  return out;
}

}  // namespace mcox
