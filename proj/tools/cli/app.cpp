#include "app.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mcox/error.hpp"
#include "mcox/parallel.hpp"
#include "reports.hpp"

namespace mcox::cli {
namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;

struct DataArgs {
  std::string data;
  std::string time = "time";
  std::string status = "status";
  std::vector<std::string> features;
  std::string path = "constant";
};

struct CommonArgs {
  std::string out = ".";
  unsigned threads = 0;
  double level = 0.95;
  int max_iter = 50;
};

struct McoxArgs {
  double r = 0.0;
  std::size_t r0 = 0;
  std::uint64_t seed = 1;
  std::string moment = "opt";
  bool with_oses = false;
};

struct SimulateArgs {
  std::size_t n = 10000;
  std::string covariate = "time-independent";
  std::vector<double> r_values{100, 500, 1000};
  std::size_t reps = 200;
  std::size_t r0 = 0;
  std::uint64_t seed = 1;
  std::vector<std::string> estimators{"UNI", "MCox-OPT", "MCox-APP", "OSES"};
  double c0 = 3.275;
  std::string data_out;
};

struct BenchArgs {
  std::string grid = "n:100000,200000,400000,800000";
  double r = 500;
  std::string covariate = "time-independent";
  std::vector<std::string> estimators{"MCox-APP"};
  std::size_t repeats = 5;
  std::uint64_t seed = 1;
};

Dataset load(const DataArgs& a) {
  if (a.data.empty()) throw Error(ErrorKind::InvalidArgument, "--data is required");
  if (a.features.empty()) throw Error(ErrorKind::InvalidArgument, "--features is required");
  CsvSchema schema;
  schema.time_column = a.time;
  schema.status_column = a.status;
  schema.feature_columns = a.features;
  schema.path = CovariatePath::parse(a.path);
  schema.path.output_dim(a.features.size());
  return load_csv(a.data, schema);
}

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) throw Error(ErrorKind::InvalidArgument, "cannot create output directory " + dir);
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Numeric CSV matrix; a leading non-numeric row is taken as a header.
Eigen::MatrixXd read_matrix(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open moment matrix " + file);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    bool numeric = true;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto v = parse_double(cell);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw Error(ErrorKind::InvalidArgument, "non-numeric entry in moment matrix " + file);
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::InvalidArgument, "ragged moment matrix " + file);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "empty moment matrix " + file);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

MomentChoice parse_moment(const std::string& text) {
  if (text == "opt") return MomentChoice::optimal();
  if (text == "aft") return MomentChoice::aft();
  if (text.rfind("linear:", 0) == 0) return MomentChoice::user_linear(read_matrix(text.substr(7)));
  throw Error(ErrorKind::InvalidArgument, "--moment must be opt, aft or linear:FILE");
}

std::vector<EstimatorKind> parse_estimators(const std::vector<std::string>& names) {
  std::vector<EstimatorKind> out;
  for (const auto& name : names) out.push_back(parse_estimator(name));
  return out;
}

int cmd_fit(const DataArgs& data, const CommonArgs& common, std::ostream& out, std::ostream& err) {
  const fs::path dir = prepare_out(common.out);
  const Dataset ds = load(data);
  FitOptions opts;
  opts.max_iter = common.max_iter;
  const auto start = std::chrono::steady_clock::now();
  const FitResult fit = newton_raphson_fit(ds, {}, opts);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  const auto names = coefficient_names(data.features, ds.path());
  write_json(dir / "result.json", fit_json(fit, ds, names, common.level, ms));

  std::ostringstream csv;
  csv << std::setprecision(12) << "coefficient,estimate,se\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    csv << names[j] << ',' << fit.beta_hat[jj] << ',' << std::sqrt(std::max(0.0, fit.variance(jj, jj))) << '\n';
  }
  write_text(dir / "report.csv", csv.str());
  if (ds.dropped_rows() > 0) err << "mcox: dropped " << ds.dropped_rows() << " incomplete rows\n";
  if (!fit.converged) {
    err << "mcox: NotConverged: stopped after " << fit.n_iter << " iterations (score norm "
        << fit.final_score_norm << "); partial result written\n";
    return kExitNotConverged;
  }
  out << "wrote " << (dir / "result.json").string() << '\n';
  return kExitOk;
}

int cmd_mcox(const DataArgs& data, const CommonArgs& common, const McoxArgs& args, std::ostream& out,
             std::ostream& err) {
  if (!(args.r > 0.0)) throw Error(ErrorKind::InvalidArgument, "--r must be positive");
  const fs::path dir = prepare_out(common.out);
  const Dataset ds = load(data);
  PipelineOptions opts;
  opts.r = args.r;
  if (args.r0 > 0) opts.r0 = args.r0;
  opts.seed = args.seed;
  opts.moment = parse_moment(args.moment);
  opts.with_oses = args.with_oses;
  opts.fit.max_iter = common.max_iter;
  const PipelineResult run = run_mcox(ds, opts);
  McoxRunInfo info;
  info.r = args.r;
  info.r0 = opts.r0.value_or(default_pilot_size(args.r));
  info.seed = args.seed;
  info.moment = args.moment.rfind("linear:", 0) == 0 ? "linear" : args.moment;
  info.level = common.level;
  const auto names = coefficient_names(data.features, ds.path());
  write_json(dir / "result.json", mcox_json(run, ds, names, info));

  std::ostringstream csv;
  csv << std::setprecision(12) << "coefficient,beta_uni,beta_mcox,se_mcox";
  if (run.beta_oses) csv << ",beta_oses";
  csv << '\n';
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    csv << names[j] << ',' << run.result.beta_uni[jj] << ',' << run.result.beta_mcox[jj] << ','
        << std::sqrt(std::max(0.0, run.result.variance(jj, jj)));
    if (run.beta_oses) csv << ',' << (*run.beta_oses)[jj];
    csv << '\n';
  }
  write_text(dir / "report.csv", csv.str());
  for (const auto& w : run.warnings) err << "mcox: warning: " << w << '\n';
  out << "wrote " << (dir / "result.json").string() << '\n';
  return kExitOk;
}

int cmd_simulate(const CommonArgs& common, const SimulateArgs& args, std::ostream& out) {
  const fs::path dir = prepare_out(common.out);
  SimulationSummary summary;
  summary.config.n = args.n;
  summary.config.covariate = parse_covariate_kind(args.covariate);
  summary.config.c0 = args.c0;
  summary.config.seed = args.seed;
  summary.config.validate();
  if (!args.data_out.empty()) {
    const Dataset ds = generate_dataset(summary.config);
    CsvSchema schema;
    schema.time_column = "time";
    schema.status_column = "status";
    const std::size_t d = ds.feature_dim();
    for (std::size_t j = 0; j < d; ++j) {
      schema.feature_columns.push_back(j < summary.config.p ? "x" + std::to_string(j + 1)
                                                            : "eps" + std::to_string(j + 1 - summary.config.p));
    }
    write_csv(args.data_out, ds, schema);
    out << "wrote " << args.data_out << '\n';
    if (args.reps == 0) return kExitOk;
  }
  if (args.reps < 2) throw Error(ErrorKind::InvalidArgument, "--reps must be at least 2");
  const auto estimators = parse_estimators(args.estimators);
  summary.r_values = args.r_values;
  summary.n_reps = args.reps;
  for (double r : args.r_values) {
    ReplicationSettings settings;
    settings.r = r;
    settings.n_reps = args.reps;
    if (args.r0 > 0) settings.r0 = args.r0;
    settings.level = common.level;
    settings.fit.max_iter = common.max_iter;
    summary.runs.push_back(run_replications(summary.config, estimators, settings));
  }
  write_json(dir / "result.json", simulation_json(summary));
  write_simulation_csv(dir / "report.csv", summary);
  write_text(dir / "plots.gp", simulation_plot_script("report.csv"));
  out << "wrote " << (dir / "result.json").string() << ", report.csv, plots.gp\n";
  return kExitOk;
}

std::vector<BenchPoint> parse_grid(const BenchArgs& args) {
  std::string axis = "n";
  std::string values = args.grid;
  if (const auto colon = values.find(':'); colon != std::string::npos) {
    axis = values.substr(0, colon);
    values = values.substr(colon + 1);
  }
  if (axis != "n" && axis != "r") throw Error(ErrorKind::InvalidArgument, "--grid axis must be n or r");
  std::vector<BenchPoint> points;
  std::stringstream ss(values);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto v = parse_double(cell);
    if (!v || !(*v > 0.0)) throw Error(ErrorKind::InvalidArgument, "bad --grid entry '" + cell + "'");
    BenchPoint pt;
    pt.config.covariate = parse_covariate_kind(args.covariate);
    pt.config.seed = args.seed;
    pt.r = args.r;
    if (axis == "n") {
      pt.config.n = static_cast<std::size_t>(*v);
    } else {
      pt.r = *v;
      pt.config.n = 100000;
    }
    points.push_back(pt);
  }
  if (points.size() < 2) throw Error(ErrorKind::InvalidArgument, "--grid needs at least two values");
  return points;
}

int cmd_bench(const CommonArgs& common, const BenchArgs& args, std::optional<std::size_t> n_override,
              std::ostream& out) {
  const fs::path dir = prepare_out(common.out);
  auto points = parse_grid(args);
  if (n_override) {
    for (auto& pt : points) {
      if (args.grid.rfind("r:", 0) == 0) pt.config.n = *n_override;
    }
  }
  const BenchTable table = timing_benchmark(points, parse_estimators(args.estimators), args.repeats);
  const std::string axis = args.grid.rfind("r:", 0) == 0 ? "r" : "n";
  write_json(dir / "result.json", bench_json(table, points, args.repeats));
  write_bench_csv(dir / "report.csv", table);
  write_text(dir / "plots.gp", bench_plot_script("report.csv", axis));
  for (const auto& s : table.slopes) {
    out << s.estimator << " log-log slope vs " << s.axis << " (" << s.phase << "): " << s.slope << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment-assisted subsampling for Cox regression", "mcox"};
  app.require_subcommand(1);

  DataArgs data;
  CommonArgs common;
  McoxArgs margs;
  SimulateArgs sargs;
  BenchArgs bargs;
  std::size_t bench_n = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", common.threads, "Worker threads (0 = all cores)");
    sub->add_option("--level", common.level, "Confidence level for Wald intervals")->capture_default_str();
    sub->add_option("--max-iter", common.max_iter, "Newton-Raphson iteration cap")->capture_default_str();
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", data.data, "Input CSV")->required();
    sub->add_option("--time", data.time, "Time column")->capture_default_str();
    sub->add_option("--status", data.status, "Event indicator column (1 = event)")->capture_default_str();
    sub->add_option("--features", data.features, "Covariate columns")->delimiter(',')->required();
    sub->add_option("--path", data.path, "Covariate path: constant | poly:1,2t,4t2-2 | poly:sum:1,t")
        ->capture_default_str();
  };

  CLI::App* fit = app.add_subcommand("fit", "Whole-data partial likelihood fit");
  add_data(fit);
  add_common(fit);

  CLI::App* mc = app.add_subcommand("mcox", "Moment-assisted subsampling estimator");
  add_data(mc);
  add_common(mc);
  mc->add_option("--r", margs.r, "Expected subsample size")->required();
  mc->add_option("--r0", margs.r0, "Pilot size (default ceil(r^(2/3) ln r))");
  mc->add_option("--seed", margs.seed, "Random seed")->capture_default_str();
  mc->add_option("--moment", margs.moment, "opt | aft | linear:FILE")->capture_default_str();
  mc->add_flag("--with-oses", margs.with_oses, "Also report the one-step estimator");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study on the built-in data generator");
  add_common(sim);
  sim->add_option("--n", sargs.n, "Records per dataset")->capture_default_str();
  sim->add_option("--covariate", sargs.covariate, "time-independent | time-dependent")->capture_default_str();
  sim->add_option("--r", sargs.r_values, "Subsample sizes")->delimiter(',');
  sim->add_option("--r0", sargs.r0, "Pilot size");
  sim->add_option("--reps", sargs.reps, "Replications per subsample size")->capture_default_str();
  sim->add_option("--seed", sargs.seed, "Base seed")->capture_default_str();
  sim->add_option("--estimators", sargs.estimators, "UNI,MCox-OPT,MCox-APP,OSES,FULL")->delimiter(',');
  sim->add_option("--c0", sargs.c0, "Censoring upper bound")->capture_default_str();
  sim->add_option("--data-out", sargs.data_out, "Also write the first simulated dataset as CSV");

  CLI::App* bench = app.add_subcommand("bench", "Timing study over a grid of n or r");
  add_common(bench);
  bench->add_option("--grid", bargs.grid, "n:v1,v2,... or r:v1,v2,...")->capture_default_str();
  bench->add_option("--r", bargs.r, "Subsample size for n grids")->capture_default_str();
  bench->add_option("--n", bench_n, "Dataset size for r grids");
  bench->add_option("--covariate", bargs.covariate, "time-independent | time-dependent")->capture_default_str();
  bench->add_option("--estimators", bargs.estimators, "Estimators to time")->delimiter(',');
  bench->add_option("--repeats", bargs.repeats, "Timed runs per point")->capture_default_str();
  bench->add_option("--seed", bargs.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mcox: " << e.what() << "\n\n" << app.help();
    return kExitInput;
  }

  try {
    if (common.threads > 0) set_num_threads(common.threads);
    if (fit->parsed()) return cmd_fit(data, common, out, err);
    if (mc->parsed()) return cmd_mcox(data, common, margs, out, err);
    if (sim->parsed()) return cmd_simulate(common, sargs, out);
    if (bench->parsed()) {
      return cmd_bench(common, bargs, bench_n > 0 ? std::optional<std::size_t>(bench_n) : std::nullopt, out);
    }
  } catch (const Error& e) {
    err << "mcox: " << e.what() << '\n';
    return e.kind() == ErrorKind::NotConverged ? kExitNotConverged : kExitInput;
  } catch (const std::exception& e) {
    err << "mcox: " << e.what() << '\n';
    return kExitInput;
  }
  err << app.help();
  return kExitInput;
}

}  // namespace mcox::cli
