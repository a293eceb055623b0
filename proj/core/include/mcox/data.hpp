#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mcox {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Scalar functions of time available to a polynomial covariate path.
enum class BasisFunction { One, T, TwoT, Legendre2 };

double evaluate_basis(BasisFunction f, double t) noexcept;
std::string_view to_string(BasisFunction f) noexcept;

// Deterministic map from a record's static features to X(t).
//
// Constant:           X(t) = x.
// PolynomialBasis with Combine::Stack: X(t) = (f_1(t) x, ..., f_K(t) x), so the
//   output has K * d entries. {1, 2t, 4t^2-2} is the Legendre time-varying
//   coefficient reformulation.
// PolynomialBasis with Combine::Sum: x is split into K equal blocks
//   (x_1, ..., x_K) and X(t) = sum_k f_k(t) x_k, so the output has d / K
//   entries. {1, t} over (x_ind, eps) gives x_ind + t * eps.
class CovariatePath {
 public:
  enum class Kind { Constant, PolynomialBasis };
  enum class Combine { Stack, Sum };

  CovariatePath() = default;

  static CovariatePath constant();
  static CovariatePath polynomial(std::vector<BasisFunction> basis,
                                  Combine combine = Combine::Stack);

  // Accepts "constant", "poly:1,2t,4t2-2" (stacked) and "poly:sum:1,t"
  // (blockwise sum). Throws Error(InvalidArgument) on anything else.
  static CovariatePath parse(std::string_view text);
  std::string to_string() const;

  Kind kind() const noexcept { return kind_; }
  Combine combine() const noexcept { return combine_; }
  const std::vector<BasisFunction>& basis() const noexcept { return basis_; }

  // True when X(t) can differ from X(0).
  bool time_dependent() const noexcept;

  // Output dimension for static feature dimension d; throws when a Sum path
  // cannot split d into equal blocks.
  std::size_t output_dim(std::size_t feature_dim) const;

  void evaluate(std::span<const double> features, double t, std::span<double> out) const;

  // Split form of evaluate for loops over many records at one t: basis values
  // f_k(t) first (basis().size() entries), then the combination per record.
  void basis_values(double t, std::span<double> f) const;
  void combine(std::span<const double> features, std::span<const double> f,
               std::span<double> out) const;

  friend bool operator==(const CovariatePath&, const CovariatePath&) = default;

 private:
  Kind kind_ = Kind::Constant;
  Combine combine_ = Combine::Stack;
  std::vector<BasisFunction> basis_;
};

struct SurvivalRecord {
  double y = 0.0;
  int delta = 0;
  std::vector<double> features;
  CovariatePath path;
};

Eigen::VectorXd evaluate_covariate(const SurvivalRecord& record, double t);

// Column-oriented collection of survival records. Records keep their input
// order; sort_index() lists them by increasing y with events ahead of
// censorings at equal times and input order breaking remaining ties.
// Immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<double> y, std::vector<std::uint8_t> delta, RowMatrix features,
          CovariatePath path = CovariatePath::constant());

  static Dataset from_records(std::span<const SurvivalRecord> records);

  std::size_t n() const noexcept { return y_.size(); }
  // Covariate dimension after path expansion.
  std::size_t p() const noexcept { return p_; }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  std::size_t n_events() const noexcept { return n_events_; }
  // Rows dropped during CSV ingestion.
  std::size_t dropped_rows() const noexcept { return dropped_rows_; }
  void set_dropped_rows(std::size_t count) noexcept { dropped_rows_ = count; }

  double y(std::size_t i) const { return y_[i]; }
  bool event(std::size_t i) const { return delta_[i] != 0; }
  std::span<const double> features(std::size_t i) const {
    return {features_.data() + i * feature_dim(), feature_dim()};
  }
  const std::vector<double>& times() const noexcept { return y_; }
  const std::vector<std::uint8_t>& status() const noexcept { return delta_; }
  const RowMatrix& feature_matrix() const noexcept { return features_; }
  const CovariatePath& path() const noexcept { return path_; }
  bool time_dependent() const noexcept { return path_.time_dependent(); }

  const std::vector<std::size_t>& sort_index() const noexcept { return order_; }
  // y along sort_index().
  const std::vector<double>& sorted_times() const noexcept { return sorted_y_; }

  // X_i(t) written into out (length p()).
  void covariate(std::size_t i, double t, std::span<double> out) const;
  Eigen::VectorXd covariate(std::size_t i, double t) const;

  // X_i(0) for every record; equals X_i(t) at all t for time-independent paths.
  const RowMatrix& baseline_covariates() const noexcept { return x0_; }

  SurvivalRecord record(std::size_t i) const;

  // First position along sort_index() whose time is >= t.
  std::size_t first_at_risk(double t) const noexcept;
  std::vector<std::size_t> at_risk_indices(double t) const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::vector<double> y_;
  std::vector<std::uint8_t> delta_;
  RowMatrix features_;
  CovariatePath path_;
  std::size_t p_ = 0;
  std::size_t n_events_ = 0;
  std::size_t dropped_rows_ = 0;
  std::vector<std::size_t> order_;
  std::vector<double> sorted_y_;
  RowMatrix x0_;
};

std::vector<std::size_t> at_risk_indices(const Dataset& dataset, double t);

struct CsvSchema {
  std::string time_column;
  std::string status_column;
  std::vector<std::string> feature_columns;
  CovariatePath path = CovariatePath::constant();
  char delimiter = ',';
};

// Reads a headed CSV. Rows with a missing or non-numeric value in any mapped
// column are dropped and counted in Dataset::dropped_rows().
Dataset load_csv(const std::filesystem::path& file, const CsvSchema& schema);
Dataset read_csv(std::istream& in, const CsvSchema& schema);

// Writes the mapped columns with round-trip precision, in input order.
void write_csv(std::ostream& out, const Dataset& dataset, const CsvSchema& schema);
void write_csv(const std::filesystem::path& file, const Dataset& dataset,
               const CsvSchema& schema);

}  // namespace mcox
