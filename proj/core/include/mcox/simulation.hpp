#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mcox/coxph.hpp"
#include "mcox/data.hpp"
#include "mcox/pipeline.hpp"

namespace mcox {

enum class CovariateKind { TimeIndependent, TimeDependent };

std::string_view to_string(CovariateKind kind) noexcept;
CovariateKind parse_covariate_kind(std::string_view text);

Eigen::VectorXd default_beta0();

// Cox model with unit baseline hazard. X_ind is multivariate t with AR(rho)
// scale matrix; the time-dependent design adds t * eps with eps ~ N(0, eps_var I).
// Censoring is Uniform(0, c0).
struct DgpConfig {
  std::size_t n = 10000;
  std::size_t p = 5;
  Eigen::VectorXd beta0 = default_beta0();
  CovariateKind covariate = CovariateKind::TimeIndependent;
  double t_df = 10.0;
  double ar_rho = 0.5;
  double eps_var = 0.4;
  double c0 = 3.275;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimulatedData {
  Dataset dataset;
  std::vector<double> failure_times;  // before censoring; +inf when the hazard integrates to less than E
  std::vector<double> censor_times;
};

SimulatedData simulate(const DgpConfig& config);
Dataset generate_dataset(const DgpConfig& config);

// Solves int_0^T exp(a + b u) du = e for T by bisection on a bracket grown
// geometrically from [0, 1]. Returns +inf when b < 0 and the integral stays
// below e for all T.
double time_dependent_failure_time(double a, double b, double e);

enum class EstimatorKind { Uni, MCoxOpt, MCoxApp, Oses, Whole };

std::string_view to_string(EstimatorKind kind) noexcept;
EstimatorKind parse_estimator(std::string_view text);

struct ReplicationSettings {
  double r = 1000.0;
  std::size_t n_reps = 200;
  std::optional<std::size_t> r0;
  double level = 0.95;
  FitOptions fit;
};

struct ReplicationReport {
  std::string name;
  double r = 0.0;
  std::size_t n = 0;
  double nb = 0.0;
  double nse = 0.0;
  double mse = 0.0;
  double mse_se = 0.0;          // Monte Carlo standard error of mse
  double mean_time_ms = 0.0;
  std::size_t n_reps = 0;       // successful replications
  std::size_t n_failed = 0;
  Eigen::VectorXd bias;
  Eigen::VectorXd sd;           // population (1/R) standard deviation per coordinate
  std::optional<double> coverage;   // pooled over coordinates
  Eigen::VectorXd coverage_by_coef;
  std::optional<double> ase;        // mean of sqrt(diag variance)
};

// One estimator in one replication.
struct EstimateRecord {
  bool ok = false;
  std::string error;
  Eigen::VectorXd beta;
  Eigen::MatrixXd variance;     // empty when the estimator has none
  std::optional<double> alpha;
  bool fallback = false;
  PhaseTimings timings_ms;
};

struct ReplicationRun {
  std::vector<EstimatorKind> estimators;
  std::vector<ReplicationReport> reports;
  // estimates[e][rep] for estimators[e].
  std::vector<std::vector<EstimateRecord>> estimates;
  double censoring_rate = 0.0;  // mean over replications
};

// Replication k uses seed config.seed + k for its dataset.
ReplicationRun run_replications(const DgpConfig& config, const std::vector<EstimatorKind>& estimators,
                                const ReplicationSettings& settings);

ReplicationReport summarize(std::string name, double r, std::size_t n, const Eigen::VectorXd& beta0,
                            const std::vector<EstimateRecord>& records, double level);

// Runs the requested estimators once on a dataset; the subsample draw uses
// subsample_seed. Errors are captured per estimator.
std::vector<EstimateRecord> run_estimators(const Dataset& dataset, const std::vector<EstimatorKind>& estimators,
                                           double r, std::optional<std::size_t> r0,
                                           std::uint64_t subsample_seed, const FitOptions& fit = {});

struct BenchPoint {
  DgpConfig config;
  double r = 500.0;
};

struct BenchRow {
  std::string estimator;
  std::string covariate;
  std::size_t n = 0;
  double r = 0.0;
  double median_ms = 0.0;
  PhaseTimings median_phases_ms;
};

struct BenchSlope {
  std::string estimator;
  std::string axis;    // "n" or "r"
  std::string phase;   // "total" or "subsample_fit"
  double slope = 0.0;
};

struct BenchTable {
  std::vector<BenchRow> rows;
  std::vector<BenchSlope> slopes;
};

// Median of `repeats` timed runs per estimator per point, then log-log slopes
// of time against whichever of n or r varies across the points.
BenchTable timing_benchmark(const std::vector<BenchPoint>& points, const std::vector<EstimatorKind>& estimators,
                            std::size_t repeats = 5);

// Least-squares slope of log y on log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mcox
