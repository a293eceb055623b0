#include "reports.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mcox/error.hpp"
#include "mcox/mcox.hpp"

namespace mcox::cli {

using Eigen::Index;

namespace {

Json interval_json(const std::vector<WaldInterval>& iv, const std::vector<std::string>& names) {
  Json out = Json::array();
  for (std::size_t j = 0; j < iv.size(); ++j) {
    out.push_back({{"name", names[j]},
                   {"estimate", iv[j].estimate},
                   {"se", iv[j].se},
                   {"lower", iv[j].lower},
                   {"upper", iv[j].upper}});
  }
  return out;
}

Json timings_json(const PhaseTimings& t) {
  return {{"pilot", t.pilot},
          {"moment_pass", t.moment_pass},
          {"subsample_fit", t.subsample_fit},
          {"correction", t.correction}};
}

Json config_json(const DgpConfig& c) {
  return {{"n", c.n},
          {"p", c.p},
          {"beta0", to_json(c.beta0)},
          {"covariate", std::string(to_string(c.covariate))},
          {"t_df", c.t_df},
          {"ar_rho", c.ar_rho},
          {"eps_var", c.eps_var},
          {"c0", c.c0},
          {"seed", c.seed}};
}

std::optional<double> find_uni_mse(const ReplicationRun& run) {
  for (const auto& rep : run.reports) {
    if (rep.name == to_string(EstimatorKind::Uni) && rep.n_reps > 0) return rep.mse;
  }
  return std::nullopt;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::string> coefficient_names(const std::vector<std::string>& features, const CovariatePath& path) {
  if (path.kind() == CovariatePath::Kind::Constant) return features;
  std::vector<std::string> out;
  if (path.combine() == CovariatePath::Combine::Stack) {
    for (BasisFunction f : path.basis()) {
      for (const auto& name : features) out.push_back(name + "*" + std::string(to_string(f)));
    }
    return out;
  }
  const std::size_t m = path.output_dim(features.size());
  out.assign(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(m));
  return out;
}

Json fit_json(const FitResult& fit, const Dataset& dataset, const std::vector<std::string>& names, double level,
              double wall_time_ms) {
  Json doc;
  doc["schema"] = kFitSchema;
  doc["command"] = "fit";
  doc["n"] = dataset.n();
  doc["n_events"] = dataset.n_events();
  doc["dropped_rows"] = dataset.dropped_rows();
  doc["path"] = dataset.path().to_string();
  doc["coefficients"] = names;
  doc["beta"] = to_json(fit.beta_hat);
  doc["variance"] = to_json(fit.variance);
  doc["loglik"] = fit.loglik;
  doc["iterations"] = fit.n_iter;
  doc["converged"] = fit.converged;
  doc["final_score_norm"] = fit.final_score_norm;
  doc["level"] = level;
  doc["intervals"] = interval_json(wald_intervals(fit.beta_hat, fit.variance, level), names);
  doc["wall_time_ms"] = wall_time_ms;
  return doc;
}

Json mcox_json(const PipelineResult& run, const Dataset& dataset, const std::vector<std::string>& names,
               const McoxRunInfo& info) {
  const McoxResult& res = run.result;
  Json doc;
  doc["schema"] = kMcoxSchema;
  doc["command"] = "mcox";
  doc["n"] = dataset.n();
  doc["n_events"] = dataset.n_events();
  doc["dropped_rows"] = dataset.dropped_rows();
  doc["path"] = dataset.path().to_string();
  doc["moment"] = info.moment;
  doc["r"] = info.r;
  doc["realized_r"] = run.realized_r;
  doc["r0"] = info.r0;
  doc["pilot_r"] = run.pilot_r;
  doc["seed"] = info.seed;
  doc["coefficients"] = names;
  doc["beta_uni"] = to_json(res.beta_uni);
  doc["beta_mcox"] = to_json(res.beta_mcox);
  if (run.beta_oses) doc["beta_oses"] = to_json(*run.beta_oses);
  doc["variance"] = to_json(res.variance);
  doc["uni_variance"] = to_json(run.uni_fit.variance);
  if (res.alpha) doc["alpha"] = *res.alpha;
  doc["g2_norm"] = res.g2_norm;
  doc["fallback"] = res.fallback;
  doc["level"] = info.level;
  try {
    doc["intervals"] = interval_json(wald_intervals(res, info.level), names);
  } catch (const Error& err) {
    doc["intervals"] = Json::array();
    doc["interval_error"] = err.what();
  }
  doc["warnings"] = run.warnings;
  doc["timings_ms"] = timings_json(run.timings_ms);
  return doc;
}

Json simulation_json(const SimulationSummary& s) {
  Json doc;
  doc["schema"] = kSimulateSchema;
  doc["command"] = "simulate";
  doc["config"] = config_json(s.config);
  doc["n_reps"] = s.n_reps;
  doc["r_values"] = s.r_values;
  Json reports = Json::array();
  for (std::size_t k = 0; k < s.runs.size(); ++k) {
    const auto& run = s.runs[k];
    const auto uni_mse = find_uni_mse(run);
    for (const auto& rep : run.reports) {
      Json row;
      row["estimator"] = rep.name;
      row["r"] = rep.r;
      row["n"] = rep.n;
      row["n_reps"] = rep.n_reps;
      row["n_failed"] = rep.n_failed;
      row["nb"] = rep.nb;
      row["nse"] = rep.nse;
      row["mse"] = rep.mse;
      row["mse_se"] = rep.mse_se;
      if (uni_mse && rep.mse > 0.0) row["log_mse_ratio_uni"] = std::log(*uni_mse / rep.mse);
      row["bias"] = to_json(rep.bias);
      row["sd"] = to_json(rep.sd);
      if (rep.coverage) {
        row["coverage"] = *rep.coverage;
        row["coverage_by_coef"] = to_json(rep.coverage_by_coef);
      }
      if (rep.ase) row["ase"] = *rep.ase;
      row["mean_time_ms"] = rep.mean_time_ms;
      reports.push_back(std::move(row));
    }
    doc["censoring_rate"] = run.censoring_rate;
  }
  doc["reports"] = std::move(reports);
  return doc;
}

void write_simulation_csv(const std::filesystem::path& file, const SimulationSummary& s) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
  out << "estimator,covariate,n,r,n_reps,n_failed,nb,nse,mse,mse_se,log_mse_ratio_uni,coverage,ase,mean_time_ms\n";
  for (const auto& run : s.runs) {
    const auto uni_mse = find_uni_mse(run);
    for (const auto& rep : run.reports) {
      const double ratio = uni_mse && rep.mse > 0.0 ? std::log(*uni_mse / rep.mse) : NAN;
      out << rep.name << ',' << to_string(s.config.covariate) << ',' << rep.n << ',' << rep.r << ','
          << rep.n_reps << ',' << rep.n_failed << ',' << csv_number(rep.nb) << ',' << csv_number(rep.nse) << ','
          << csv_number(rep.mse) << ',' << csv_number(rep.mse_se) << ',' << csv_number(ratio) << ','
          << csv_number(rep.coverage.value_or(NAN)) << ',' << csv_number(rep.ase.value_or(NAN)) << ','
          << csv_number(rep.mean_time_ms) << '\n';
    }
  }
}

std::string simulation_plot_script(const std::string& csv_name) {
  std::ostringstream os;
  os << "# gnuplot -p plots.gp\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set terminal pngcairo size 1500,450\n"
     << "set output 'plots.png'\n"
     << "set multiplot layout 1,3\n"
     << "est = system(\"tail -n +2 " << csv_name << " | cut -d, -f1 | sort -u\")\n"
     << "set xlabel 'r'\n"
     << "set title 'NB'\n"
     << "plot for [e in est] '" << csv_name
     << "' using 4:(strcol(1) eq e ? $7 : NaN) with linespoints title e\n"
     << "set title 'NSE'\n"
     << "plot for [e in est] '" << csv_name
     << "' using 4:(strcol(1) eq e ? $8 : NaN) with linespoints title e\n"
     << "set title 'log MSE ratio (UNI / estimator)'\n"
     << "plot for [e in est] '" << csv_name
     << "' using 4:(strcol(1) eq e ? $11 : NaN) with linespoints title e\n"
     << "unset multiplot\n";
  return os.str();
}

Json bench_json(const BenchTable& table, const std::vector<BenchPoint>& points, std::size_t repeats) {
  Json doc;
  doc["schema"] = kBenchSchema;
  doc["command"] = "bench";
  doc["repeats"] = repeats;
  Json grid = Json::array();
  for (const auto& pt : points) {
    grid.push_back({{"n", pt.config.n}, {"r", pt.r}, {"covariate", std::string(to_string(pt.config.covariate))}});
  }
  doc["grid"] = std::move(grid);
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    rows.push_back({{"estimator", row.estimator},
                    {"covariate", row.covariate},
                    {"n", row.n},
                    {"r", row.r},
                    {"median_ms", row.median_ms},
                    {"median_phases_ms", timings_json(row.median_phases_ms)}});
  }
  doc["rows"] = std::move(rows);
  Json slopes = Json::array();
  for (const auto& s : table.slopes) {
    Json row = {{"estimator", s.estimator}, {"axis", s.axis}, {"phase", s.phase}, {"slope", s.slope}};
    // Expected exponents: linear in n for subsample-based estimators with
    // time-independent covariates, quadratic for the full time-dependent fit,
    // quadratic in r for the time-dependent subsample fit.
    const bool dependent = !table.rows.empty() && table.rows.front().covariate == "time-dependent";
    std::optional<std::pair<double, double>> band;
    if (s.axis == "n" && s.phase == "total") {
      if (s.estimator == "FULL") {
        band = dependent ? std::pair{1.7, 2.5} : std::pair{0.75, 1.5};
      } else if (!dependent) {
        band = std::pair{0.75, 1.25};
      }
    } else if (s.axis == "r" && s.phase == "subsample_fit" && dependent) {
      band = std::pair{1.58, 2.46};
    }
    if (band) {
      row["expected_low"] = band->first;
      row["expected_high"] = band->second;
      row["holds"] = s.slope >= band->first && s.slope <= band->second;
    }
    slopes.push_back(std::move(row));
  }
  doc["slopes"] = std::move(slopes);
  return doc;
}

void write_bench_csv(const std::filesystem::path& file, const BenchTable& table) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
  out << "estimator,covariate,n,r,median_ms,pilot_ms,moment_pass_ms,subsample_fit_ms,correction_ms\n";
  for (const auto& row : table.rows) {
    const auto& ph = row.median_phases_ms;
    out << row.estimator << ',' << row.covariate << ',' << row.n << ',' << row.r << ',' << csv_number(row.median_ms)
        << ',' << csv_number(ph.pilot) << ',' << csv_number(ph.moment_pass) << ','
        << csv_number(ph.subsample_fit) << ',' << csv_number(ph.correction) << '\n';
  }
}

std::string bench_plot_script(const std::string& csv_name, const std::string& axis) {
  const int column = axis == "r" ? 4 : 3;
  std::ostringstream os;
  os << "# gnuplot -p plots.gp\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 800,600\n"
     << "set output 'plots.png'\n"
     << "set logscale xy\n"
     << "set xlabel '" << axis << "'\n"
     << "set ylabel 'median wall time (ms)'\n"
     << "est = system(\"tail -n +2 " << csv_name << " | cut -d, -f1 | sort -u\")\n"
     << "plot for [e in est] '" << csv_name << "' using " << column
     << ":(strcol(1) eq e ? $5 : NaN) with linespoints title e\n";
  return os.str();
}

void write_json(const std::filesystem::path& file, const Json& doc) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
  out << doc.dump(2) << '\n';
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
  out << text;
}

Json strip_timing(const Json& doc) {
  if (doc.is_object()) {
    Json out = Json::object();
    for (const auto& [key, value] : doc.items()) {
      if (key == "timings_ms" || key == "wall_time_ms" || key == "mean_time_ms" || key == "median_ms" ||
          key == "median_phases_ms") {
        continue;
      }
      out[key] = strip_timing(value);
    }
    return out;
  }
  if (doc.is_array()) {
    Json out = Json::array();
    for (const auto& v : doc) out.push_back(strip_timing(v));
    return out;
  }
  return doc;
}

}  // namespace mcox::cli
