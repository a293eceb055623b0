#include "mcox/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "mcox/error.hpp"
#include "mcox/mcox.hpp"
#include "mcox/moments.hpp"
#include "mcox/parallel.hpp"
#include "mcox/subsampling.hpp"

namespace mcox {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::uint64_t kCovariateStream = 0x1f83d9abfb41bd6bULL;
constexpr std::uint64_t kEventStream = 0x5be0cd19137e2179ULL;
constexpr std::uint64_t kCensorStream = 0x9b05688c2b3e6c1fULL;
constexpr std::uint64_t kSlopeStream = 0x510e527fade682d1ULL;
constexpr std::uint64_t kSubsampleStream = 0x6a09e667f3bcc908ULL;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(splitmix64(seed ^ tag));
}

// int_0^t exp(a + b u) du, stable as b -> 0.
double cumulative_hazard(double a, double b, double t) {
  const double x = b * t;
  const double ratio = std::abs(x) < 1e-12 ? 1.0 + 0.5 * x : std::expm1(x) / x;
  return std::exp(a) * t * ratio;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::string_view to_string(CovariateKind kind) noexcept {
  return kind == CovariateKind::TimeIndependent ? "time-independent" : "time-dependent";
}

CovariateKind parse_covariate_kind(std::string_view text) {
  if (text == "time-independent" || text == "ind") return CovariateKind::TimeIndependent;
  if (text == "time-dependent" || text == "dep") return CovariateKind::TimeDependent;
  throw Error(ErrorKind::InvalidArgument, "unknown covariate design '" + std::string(text) + "'");
}

VectorXd default_beta0() {
  VectorXd b(5);
  b << 0.2, 0.2, 0.1, 0.1, 0.1;
  return b;
}

void DgpConfig::validate() const {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "n must be positive");
  if (p == 0 || static_cast<std::size_t>(beta0.size()) != p) {
    throw Error(ErrorKind::InvalidArgument, "beta0 must have p entries");
  }
  if (!(c0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "c0 must be positive");
  if (!(t_df > 2.0)) throw Error(ErrorKind::InvalidArgument, "t_df must exceed 2");
  if (!(ar_rho >= 0.0 && ar_rho < 1.0)) throw Error(ErrorKind::InvalidArgument, "ar_rho must lie in [0, 1)");
  if (!(eps_var >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps_var must be nonnegative");
  if (!beta0.allFinite()) throw Error(ErrorKind::InvalidArgument, "beta0 must be finite");
}

double time_dependent_failure_time(double a, double b, double e) {
  if (!(e > 0.0)) return 0.0;
  if (b < 0.0 && std::exp(a) / -b <= e) return std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 1.0;
  while (cumulative_hazard(a, b, hi) < e) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (cumulative_hazard(a, b, mid) < e) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SimulatedData simulate(const DgpConfig& config) {
  config.validate();
  const std::size_t n = config.n, p = config.p;
  const bool dependent = config.covariate == CovariateKind::TimeDependent;

  MatrixXd scale(static_cast<Index>(p), static_cast<Index>(p));
  for (Index i = 0; i < scale.rows(); ++i) {
    for (Index j = 0; j < scale.cols(); ++j) scale(i, j) = std::pow(config.ar_rho, std::abs(i - j));
  }
  const MatrixXd chol = scale.llt().matrixL();

  auto x_rng = stream(config.seed, kCovariateStream);
  auto e_rng = stream(config.seed, kEventStream);
  auto c_rng = stream(config.seed, kCensorStream);
  auto s_rng = stream(config.seed, kSlopeStream);
  std::normal_distribution<double> normal, slope_normal;
  std::chi_squared_distribution<double> chi2(config.t_df);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, config.c0);
  const double eps_sd = std::sqrt(config.eps_var);

  const std::size_t d = dependent ? 2 * p : p;
  RowMatrix features(static_cast<Index>(n), static_cast<Index>(d));
  SimulatedData out;
  out.failure_times.resize(n);
  out.censor_times.resize(n);
  std::vector<double> y(n);
  std::vector<std::uint8_t> delta(n);
  VectorXd z(static_cast<Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (Index j = 0; j < z.size(); ++j) z[j] = normal(x_rng);
    const double w = std::sqrt(chi2(x_rng) / config.t_df);
    const VectorXd x = chol * z / w;
    const double e = expo(e_rng);
    const double c = unif(c_rng);
    const double a = config.beta0.dot(x);
    double t;
    if (dependent) {
      VectorXd eps(static_cast<Index>(p));
      for (Index j = 0; j < eps.size(); ++j) eps[j] = eps_sd * slope_normal(s_rng);
      features.row(static_cast<Index>(i)).tail(static_cast<Index>(p)) = eps.transpose();
      t = time_dependent_failure_time(a, config.beta0.dot(eps), e);
    } else {
      t = e / std::exp(a);
    }
    features.row(static_cast<Index>(i)).head(static_cast<Index>(p)) = x.transpose();
    out.failure_times[i] = t;
    out.censor_times[i] = c;
    y[i] = std::min(t, c);
    delta[i] = t < c ? 1 : 0;
  }
  const CovariatePath path = dependent
                                 ? CovariatePath::polynomial({BasisFunction::One, BasisFunction::T},
                                                             CovariatePath::Combine::Sum)
                                 : CovariatePath::constant();
  out.dataset = Dataset(std::move(y), std::move(delta), std::move(features), path);
  return out;
}

Dataset generate_dataset(const DgpConfig& config) { return simulate(config).dataset; }

std::string_view to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::Uni: return "UNI";
    case EstimatorKind::MCoxOpt: return "MCox-OPT";
    case EstimatorKind::MCoxApp: return "MCox-APP";
    case EstimatorKind::Oses: return "OSES";
    case EstimatorKind::Whole: return "FULL";
  }
  return "?";
}

EstimatorKind parse_estimator(std::string_view text) {
  for (EstimatorKind k : {EstimatorKind::Uni, EstimatorKind::MCoxOpt, EstimatorKind::MCoxApp,
                          EstimatorKind::Oses, EstimatorKind::Whole}) {
    if (text == to_string(k)) return k;
  }
  if (text == "uni") return EstimatorKind::Uni;
  if (text == "opt") return EstimatorKind::MCoxOpt;
  if (text == "app" || text == "aft") return EstimatorKind::MCoxApp;
  if (text == "oses") return EstimatorKind::Oses;
  if (text == "full" || text == "whole") return EstimatorKind::Whole;
  throw Error(ErrorKind::InvalidArgument, "unknown estimator '" + std::string(text) + "'");
}

std::vector<EstimateRecord> run_estimators(const Dataset& dataset, const std::vector<EstimatorKind>& estimators,
                                           double r, std::optional<std::size_t> r0,
                                           std::uint64_t subsample_seed, const FitOptions& fit) {
  std::vector<EstimateRecord> out(estimators.size());
  auto wants = [&](EstimatorKind k) {
    return std::find(estimators.begin(), estimators.end(), k) != estimators.end();
  };
  auto fail_all = [&](auto pred, const std::string& msg) {
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      if (pred(estimators[e])) out[e].error = msg;
    }
  };
  auto slot = [&](EstimatorKind k) -> EstimateRecord& {
    return out[static_cast<std::size_t>(std::find(estimators.begin(), estimators.end(), k) - estimators.begin())];
  };

  if (wants(EstimatorKind::Whole)) {
    EstimateRecord& rec = slot(EstimatorKind::Whole);
    try {
      Stopwatch clock;
      const FitResult full = newton_raphson_fit(dataset, {}, fit);
      rec.timings_ms.subsample_fit = clock.elapsed_ms();
      if (!full.converged) throw Error(ErrorKind::NotConverged, "whole-data fit did not converge");
      rec.beta = full.beta_hat;
      rec.variance = full.variance;
      rec.ok = true;
    } catch (const Error& err) {
      rec.error = err.what();
    }
  }

  const bool any_sub = wants(EstimatorKind::Uni) || wants(EstimatorKind::MCoxOpt) ||
                       wants(EstimatorKind::MCoxApp) || wants(EstimatorKind::Oses);
  if (!any_sub) return out;
  auto is_sub = [](EstimatorKind k) { return k != EstimatorKind::Whole; };

  const SubsamplePlan plan = SubsamplePlan::make(dataset.n(), r, subsample_seed, r0);
  UniformFit uni;
  double fit_ms = 0.0;
  try {
    Stopwatch clock;
    uni = fit_uniform(dataset, plan, fit);
    fit_ms = clock.elapsed_ms();
    if (!uni.fit.converged) throw Error(ErrorKind::NotConverged, "subsample fit did not converge");
  } catch (const Error& err) {
    fail_all(is_sub, err.what());
    return out;
  }
  const double rate = static_cast<double>(uni.subsample.n()) / static_cast<double>(dataset.n());
  if (wants(EstimatorKind::Uni)) {
    EstimateRecord& rec = slot(EstimatorKind::Uni);
    rec.beta = uni.fit.beta_hat;
    rec.variance = uni.fit.variance;
    rec.timings_ms.subsample_fit = fit_ms;
    rec.ok = true;
  }

  const bool need_opt = wants(EstimatorKind::MCoxOpt) || wants(EstimatorKind::Oses);
  const bool need_app = wants(EstimatorKind::MCoxApp);
  Dataset pilot;
  double draw_ms = 0.0;
  if (need_opt || need_app) {
    try {
      Stopwatch clock;
      pilot = subset(dataset, poisson_subsample(dataset.n(), plan.pilot(dataset.n())));
      draw_ms = clock.elapsed_ms();
    } catch (const Error& err) {
      fail_all([](EstimatorKind k) { return k == EstimatorKind::MCoxOpt || k == EstimatorKind::Oses ||
                                            k == EstimatorKind::MCoxApp; },
               err.what());
      return out;
    }
  }

  auto run_mcox_with = [&](EstimateRecord& rec, const MomentSpec& spec, double pilot_ms, const WholeDataMoment& mu,
                           double pass_ms, bool alpha) {
    Stopwatch clock;
    const VectorXd g2 = compute_g2(uni.subsample, spec, mu);
    const OmegaBlocks blocks = compute_omega_blocks(uni.subsample, uni.fit.beta_hat, spec, rate);
    const McoxResult res =
        mcox_estimate(uni.fit, blocks, g2, alpha ? std::optional<VectorXd>(mu.mu_hat) : std::nullopt);
    rec.timings_ms = {pilot_ms, pass_ms, fit_ms, clock.elapsed_ms()};
    rec.beta = res.beta_mcox;
    rec.variance = res.variance;
    rec.alpha = res.alpha;
    rec.fallback = res.fallback;
    rec.ok = true;
  };

  if (need_opt) {
    try {
      Stopwatch build;
      const MomentSpec spec = build_optimal_moment(pilot, uni.fit.beta_hat);
      const double pilot_ms = draw_ms + build.elapsed_ms();
      Stopwatch pass;
      const WholeDataMoment mu = whole_data_mean(dataset, spec);
      const double pass_ms = pass.elapsed_ms();
      if (wants(EstimatorKind::MCoxOpt)) {
        EstimateRecord& rec = slot(EstimatorKind::MCoxOpt);
        try {
          run_mcox_with(rec, spec, pilot_ms, mu, pass_ms, true);
        } catch (const Error& err) {
          rec.error = err.what();
        }
      }
      if (wants(EstimatorKind::Oses)) {
        EstimateRecord& rec = slot(EstimatorKind::Oses);
        try {
          Stopwatch clock;
          rec.beta = oses_estimate(uni.fit, mu);
          rec.timings_ms = {pilot_ms, pass_ms, fit_ms, clock.elapsed_ms()};
          rec.ok = true;
        } catch (const Error& err) {
          rec.error = err.what();
        }
      }
    } catch (const Error& err) {
      fail_all([](EstimatorKind k) { return k == EstimatorKind::MCoxOpt || k == EstimatorKind::Oses; },
               err.what());
    }
  }

  if (need_app) {
    EstimateRecord& rec = slot(EstimatorKind::MCoxApp);
    try {
      Stopwatch build;
      const MomentSpec spec = build_aft_moment(pilot);
      const double pilot_ms = draw_ms + build.elapsed_ms();
      Stopwatch pass;
      const WholeDataMoment mu = whole_data_mean(dataset, spec);
      run_mcox_with(rec, spec, pilot_ms, mu, pass.elapsed_ms(), false);
    } catch (const Error& err) {
      rec.error = err.what();
    }
  }
  return out;
}

ReplicationReport summarize(std::string name, double r, std::size_t n, const VectorXd& beta0,
                            const std::vector<EstimateRecord>& records, double level) {
  ReplicationReport rep;
  rep.name = std::move(name);
  rep.r = r;
  rep.n = n;
  const Index p = beta0.size();
  std::vector<const EstimateRecord*> ok;
  for (const auto& rec : records) {
    if (rec.ok) {
      ok.push_back(&rec);
    } else {
      ++rep.n_failed;
    }
  }
  rep.n_reps = ok.size();
  rep.bias = VectorXd::Zero(p);
  rep.sd = VectorXd::Zero(p);
  if (ok.empty()) return rep;
  const double R = static_cast<double>(ok.size());

  std::vector<CompensatedSum> mean_acc(static_cast<std::size_t>(p));
  CompensatedSum time_acc;
  for (const auto* rec : ok) {
    for (Index j = 0; j < p; ++j) mean_acc[static_cast<std::size_t>(j)].add(rec->beta[j]);
    time_acc.add(rec->timings_ms.total());
  }
  VectorXd mean(p);
  for (Index j = 0; j < p; ++j) mean[j] = mean_acc[static_cast<std::size_t>(j)].value() / R;

  std::vector<CompensatedSum> var_acc(static_cast<std::size_t>(p));
  CompensatedSum se_acc;
  std::vector<double> sq_err;
  sq_err.reserve(ok.size());
  for (const auto* rec : ok) {
    for (Index j = 0; j < p; ++j) {
      const double dev = rec->beta[j] - mean[j];
      var_acc[static_cast<std::size_t>(j)].add(dev * dev);
    }
    sq_err.push_back((rec->beta - beta0).squaredNorm());
    se_acc.add(sq_err.back());
  }
  rep.bias = mean - beta0;
  double var_total = 0.0;
  for (Index j = 0; j < p; ++j) {
    const double v = var_acc[static_cast<std::size_t>(j)].value() / R;
    rep.sd[j] = std::sqrt(v);
    var_total += v;
  }
  rep.nb = rep.bias.norm();
  rep.nse = rep.sd.norm();
  rep.mse = rep.nb * rep.nb + var_total;
  CompensatedSum dev_acc;
  const double mse_direct = se_acc.value() / R;
  for (double s : sq_err) dev_acc.add((s - mse_direct) * (s - mse_direct));
  rep.mse_se = ok.size() > 1 ? std::sqrt(dev_acc.value() / (R - 1.0) / R) : 0.0;
  rep.mean_time_ms = time_acc.value() / R;

  const bool has_var = std::all_of(ok.begin(), ok.end(), [&](const EstimateRecord* rec) {
    return rec->variance.rows() == p;
  });
  if (has_var) {
    VectorXd hits = VectorXd::Zero(p);
    CompensatedSum ase_acc;
    std::size_t usable = 0;
    for (const auto* rec : ok) {
      try {
        const auto iv = wald_intervals(rec->beta, rec->variance, level);
        for (Index j = 0; j < p; ++j) {
          const auto& w = iv[static_cast<std::size_t>(j)];
          if (w.lower <= beta0[j] && beta0[j] <= w.upper) hits[j] += 1.0;
          ase_acc.add(w.se / static_cast<double>(p));
        }
        ++usable;
      } catch (const Error&) {
      }
    }
    if (usable > 0) {
      rep.coverage_by_coef = hits / static_cast<double>(usable);
      rep.coverage = rep.coverage_by_coef.mean();
      rep.ase = ase_acc.value() / static_cast<double>(usable);
    }
  }
  return rep;
}

ReplicationRun run_replications(const DgpConfig& config, const std::vector<EstimatorKind>& estimators,
                                const ReplicationSettings& settings) {
  config.validate();
  if (settings.n_reps < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 replications");
  if (estimators.empty()) throw Error(ErrorKind::InvalidArgument, "no estimator requested");
  const std::size_t R = settings.n_reps;
  std::vector<std::vector<EstimateRecord>> per_rep(R);
  std::vector<double> censored(R, 0.0);
  parallel_for_blocks(R, 1, [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) {
      DgpConfig cfg = config;
      cfg.seed = config.seed + k;
      const Dataset ds = generate_dataset(cfg);
      censored[k] = 1.0 - static_cast<double>(ds.n_events()) / static_cast<double>(ds.n());
      per_rep[k] = run_estimators(ds, estimators, settings.r, settings.r0, splitmix64(cfg.seed ^ kSubsampleStream),
                                  settings.fit);
    }
  });

  ReplicationRun run;
  run.estimators = estimators;
  run.estimates.assign(estimators.size(), std::vector<EstimateRecord>(R));
  for (std::size_t k = 0; k < R; ++k) {
    for (std::size_t e = 0; e < estimators.size(); ++e) run.estimates[e][k] = std::move(per_rep[k][e]);
  }
  CompensatedSum cens;
  for (double c : censored) cens.add(c);
  run.censoring_rate = cens.value() / static_cast<double>(R);
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    run.reports.push_back(summarize(std::string(to_string(estimators[e])), settings.r, config.n, config.beta0,
                                    run.estimates[e], settings.level));
  }
  return run;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "slope needs at least two matching points");
  }
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / m, my = sy / m;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::InvalidArgument, "slope needs distinct x values");
  return sxy / sxx;
}

BenchTable timing_benchmark(const std::vector<BenchPoint>& points, const std::vector<EstimatorKind>& estimators,
                            std::size_t repeats) {
  if (points.empty() || estimators.empty() || repeats == 0) {
    throw Error(ErrorKind::InvalidArgument, "benchmark needs points, estimators and repeats");
  }
  BenchTable table;
  for (const auto& pt : points) {
    const Dataset ds = generate_dataset(pt.config);
    std::vector<std::vector<EstimateRecord>> runs;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      runs.push_back(run_estimators(ds, estimators, pt.r, std::nullopt, splitmix64(pt.config.seed ^ kSubsampleStream)));
    }
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      std::vector<double> total, pilot, pass, fit, corr;
      for (const auto& run : runs) {
        const auto& rec = run[e];
        if (!rec.ok) throw Error(ErrorKind::NotConverged, std::string(to_string(estimators[e])) + ": " + rec.error);
        total.push_back(rec.timings_ms.total());
        pilot.push_back(rec.timings_ms.pilot);
        pass.push_back(rec.timings_ms.moment_pass);
        fit.push_back(rec.timings_ms.subsample_fit);
        corr.push_back(rec.timings_ms.correction);
      }
      BenchRow row;
      row.estimator = std::string(to_string(estimators[e]));
      row.covariate = std::string(to_string(pt.config.covariate));
      row.n = pt.config.n;
      row.r = pt.r;
      row.median_ms = median(total);
      row.median_phases_ms = {median(pilot), median(pass), median(fit), median(corr)};
      table.rows.push_back(row);
    }
  }

  bool n_varies = false, r_varies = false;
  for (const auto& pt : points) {
    n_varies |= pt.config.n != points.front().config.n;
    r_varies |= pt.r != points.front().r;
  }
  if (n_varies == r_varies) return table;
  const std::string axis = n_varies ? "n" : "r";
  for (EstimatorKind k : estimators) {
    const std::string name(to_string(k));
    std::vector<double> x, total, fit;
    for (const auto& row : table.rows) {
      if (row.estimator != name) continue;
      x.push_back(n_varies ? static_cast<double>(row.n) : row.r);
      total.push_back(std::max(row.median_ms, 1e-6));
      fit.push_back(std::max(row.median_phases_ms.subsample_fit, 1e-6));
    }
    table.slopes.push_back({name, axis, "total", log_log_slope(x, total)});
    table.slopes.push_back({name, axis, "subsample_fit", log_log_slope(x, fit)});
  }
  return table;
}

}  // namespace mcox
