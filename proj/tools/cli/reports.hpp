#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mcox/coxph.hpp"
#include "mcox/data.hpp"
#include "mcox/pipeline.hpp"
#include "mcox/simulation.hpp"

namespace mcox::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFitSchema = "mcox/fit-result/v1";
inline constexpr const char* kMcoxSchema = "mcox/mcox-result/v1";
inline constexpr const char* kSimulateSchema = "mcox/simulate-summary/v1";
inline constexpr const char* kBenchSchema = "mcox/bench-summary/v1";

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);

// Names of the expanded covariates X(t) for a feature list and path.
std::vector<std::string> coefficient_names(const std::vector<std::string>& features, const CovariatePath& path);

Json fit_json(const FitResult& fit, const Dataset& dataset, const std::vector<std::string>& names,
              double level, double wall_time_ms);

struct McoxRunInfo {
  double r = 0.0;
  std::size_t r0 = 0;
  std::uint64_t seed = 0;
  std::string moment;
  double level = 0.95;
};

Json mcox_json(const PipelineResult& run, const Dataset& dataset, const std::vector<std::string>& names,
               const McoxRunInfo& info);

struct SimulationSummary {
  DgpConfig config;
  std::vector<double> r_values;
  std::size_t n_reps = 0;
  std::vector<ReplicationRun> runs;  // one per r value
};

Json simulation_json(const SimulationSummary& summary);
void write_simulation_csv(const std::filesystem::path& file, const SimulationSummary& summary);
std::string simulation_plot_script(const std::string& csv_name);

Json bench_json(const BenchTable& table, const std::vector<BenchPoint>& points, std::size_t repeats);
void write_bench_csv(const std::filesystem::path& file, const BenchTable& table);
std::string bench_plot_script(const std::string& csv_name, const std::string& axis);

void write_json(const std::filesystem::path& file, const Json& doc);
void write_text(const std::filesystem::path& file, const std::string& text);

// Copy of doc with wall-clock fields removed, for reproducibility checks.
Json strip_timing(const Json& doc);

}  // namespace mcox::cli
