#include "mcox/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "mcox/error.hpp"

namespace mcox {

double evaluate_basis(BasisFunction f, double t) noexcept {
  switch (f) {
    case BasisFunction::One: return 1.0;
    case BasisFunction::T: return t;
    case BasisFunction::TwoT: return 2.0 * t;
    case BasisFunction::Legendre2: return 4.0 * t * t - 2.0;
  }
  return 0.0;
}

std::string_view to_string(BasisFunction f) noexcept {
  switch (f) {
    case BasisFunction::One: return "1";
    case BasisFunction::T: return "t";
    case BasisFunction::TwoT: return "2t";
    case BasisFunction::Legendre2: return "4t2-2";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

BasisFunction parse_basis(std::string_view token) {
  const std::string t = trim(token);
  if (t == "1") return BasisFunction::One;
  if (t == "t") return BasisFunction::T;
  if (t == "2t") return BasisFunction::TwoT;
  if (t == "4t2-2" || t == "4t^2-2") return BasisFunction::Legendre2;
  throw Error(ErrorKind::InvalidArgument, "unknown basis function '" + t + "'");
}

std::optional<double> parse_number(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

CovariatePath CovariatePath::constant() { return CovariatePath{}; }

CovariatePath CovariatePath::polynomial(std::vector<BasisFunction> basis, Combine combine) {
  if (basis.empty()) {
    throw Error(ErrorKind::InvalidArgument, "polynomial path needs at least one basis function");
  }
  CovariatePath path;
  path.kind_ = Kind::PolynomialBasis;
  path.combine_ = combine;
  path.basis_ = std::move(basis);
  return path;
}

CovariatePath CovariatePath::parse(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty() || s == "constant") return constant();
  if (s.rfind("poly:", 0) != 0) {
    throw Error(ErrorKind::InvalidArgument, "path must be 'constant' or 'poly:SPEC', got '" + s + "'");
  }
  std::string_view spec = std::string_view(s).substr(5);
  Combine combine = Combine::Stack;
  if (spec.rfind("sum:", 0) == 0) {
    combine = Combine::Sum;
    spec.remove_prefix(4);
  }
  std::vector<BasisFunction> basis;
  for (const auto& token : split(spec, ',')) basis.push_back(parse_basis(token));
  return polynomial(std::move(basis), combine);
}

std::string CovariatePath::to_string() const {
  if (kind_ == Kind::Constant) return "constant";
  std::string out = combine_ == Combine::Sum ? "poly:sum:" : "poly:";
  for (std::size_t k = 0; k < basis_.size(); ++k) {
    if (k) out += ',';
    out += mcox::to_string(basis_[k]);
  }
  return out;
}

bool CovariatePath::time_dependent() const noexcept {
  if (kind_ == Kind::Constant) return false;
  return std::any_of(basis_.begin(), basis_.end(),
                     [](BasisFunction f) { return f != BasisFunction::One; });
}

std::size_t CovariatePath::output_dim(std::size_t feature_dim) const {
  if (kind_ == Kind::Constant) return feature_dim;
  const std::size_t k = basis_.size();
  if (combine_ == Combine::Stack) return k * feature_dim;
  if (feature_dim % k != 0) {
    throw Error(ErrorKind::InvalidArgument,
                "feature dimension " + std::to_string(feature_dim) +
                    " does not split into " + std::to_string(k) + " equal blocks");
  }
  return feature_dim / k;
}

void CovariatePath::evaluate(std::span<const double> x, double t, std::span<double> out) const {
  if (kind_ == Kind::Constant) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  double f[8];
  std::vector<double> heap;
  std::span<double> fv(f, basis_.size());
  if (basis_.size() > 8) {
    heap.resize(basis_.size());
    fv = heap;
  }
  basis_values(t, fv);
  combine(x, fv, out);
}

void CovariatePath::basis_values(double t, std::span<double> f) const {
  for (std::size_t k = 0; k < basis_.size(); ++k) f[k] = evaluate_basis(basis_[k], t);
}

void CovariatePath::combine(std::span<const double> x, std::span<const double> f,
                            std::span<double> out) const {
  const std::size_t d = x.size();
  if (kind_ == Kind::Constant) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  if (combine_ == Combine::Stack) {
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      for (std::size_t j = 0; j < d; ++j) out[k * d + j] = f[k] * x[j];
    }
    return;
  }
  const std::size_t m = d / basis_.size();
  for (std::size_t j = 0; j < m; ++j) out[j] = f[0] * x[j];
  for (std::size_t k = 1; k < basis_.size(); ++k) {
    for (std::size_t j = 0; j < m; ++j) out[j] += f[k] * x[k * m + j];
  }
}

Eigen::VectorXd evaluate_covariate(const SurvivalRecord& record, double t) {
  Eigen::VectorXd out(record.path.output_dim(record.features.size()));
  record.path.evaluate(record.features, t, {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Dataset::Dataset(std::vector<double> y, std::vector<std::uint8_t> delta, RowMatrix features,
                 CovariatePath path)
    : y_(std::move(y)), delta_(std::move(delta)), features_(std::move(features)),
      path_(std::move(path)) {
  const std::size_t n = y_.size();
  if (delta_.size() != n || static_cast<std::size_t>(features_.rows()) != n) {
    throw Error(ErrorKind::InvalidArgument, "time, status and feature lengths differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y_[i])) throw Error(ErrorKind::NonFiniteValue, "non-finite time");
    if (y_[i] < 0.0) {
      throw Error(ErrorKind::NegativeTime, "time " + std::to_string(y_[i]) + " at row " +
                                               std::to_string(i));
    }
    if (delta_[i] > 1) throw Error(ErrorKind::InvalidArgument, "status must be 0 or 1");
    n_events_ += delta_[i];
  }
  p_ = path_.output_dim(feature_dim());

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) {
    if (y_[a] != y_[b]) return y_[a] < y_[b];
    return delta_[a] > delta_[b];
  });
  sorted_y_.resize(n);
  for (std::size_t k = 0; k < n; ++k) sorted_y_[k] = y_[order_[k]];

  x0_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p_));
  for (std::size_t i = 0; i < n; ++i) {
    path_.evaluate(this->features(i), 0.0, {x0_.data() + i * p_, p_});
  }
}

Dataset Dataset::from_records(std::span<const SurvivalRecord> records) {
  if (records.empty()) return Dataset({}, {}, RowMatrix(0, 0));
  const std::size_t d = records.front().features.size();
  const CovariatePath& path = records.front().path;
  std::vector<double> y(records.size());
  std::vector<std::uint8_t> delta(records.size());
  RowMatrix x(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.features.size() != d || !(r.path == path)) {
      throw Error(ErrorKind::InvalidArgument, "records do not share one covariate layout");
    }
    if (r.delta != 0 && r.delta != 1) {
      throw Error(ErrorKind::InvalidArgument, "status must be 0 or 1");
    }
    y[i] = r.y;
    delta[i] = static_cast<std::uint8_t>(r.delta);
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.features[j];
  }
  return Dataset(std::move(y), std::move(delta), std::move(x), path);
}

void Dataset::covariate(std::size_t i, double t, std::span<double> out) const {
  if (!path_.time_dependent()) {
    std::copy_n(x0_.data() + i * p_, p_, out.begin());
    return;
  }
  path_.evaluate(features(i), t, out);
}

Eigen::VectorXd Dataset::covariate(std::size_t i, double t) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(p_));
  covariate(i, t, {out.data(), p_});
  return out;
}

SurvivalRecord Dataset::record(std::size_t i) const {
  const auto f = features(i);
  return SurvivalRecord{y_[i], delta_[i], std::vector<double>(f.begin(), f.end()), path_};
}

std::size_t Dataset::first_at_risk(double t) const noexcept {
  return static_cast<std::size_t>(
      std::lower_bound(sorted_y_.begin(), sorted_y_.end(), t) - sorted_y_.begin());
}

std::vector<std::size_t> Dataset::at_risk_indices(double t) const {
  const std::size_t first = first_at_risk(t);
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(first), order_.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.y_ == b.y_ && a.delta_ == b.delta_ && a.path_ == b.path_ &&
         a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_ && a.order_ == b.order_;
}

std::vector<std::size_t> at_risk_indices(const Dataset& dataset, double t) {
  return dataset.at_risk_indices(t);
}

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyDataset, "file has no header row");
  const auto header = split(line, schema.delimiter);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < header.size(); ++c) column.emplace(header[c], c);

  auto locate = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) throw Error(ErrorKind::MissingColumn, "column '" + name + "' not in header");
    return it->second;
  };
  if (schema.feature_columns.empty()) {
    throw Error(ErrorKind::InvalidArgument, "schema needs at least one feature column");
  }
  const std::size_t time_col = locate(schema.time_column);
  const std::size_t status_col = locate(schema.status_column);
  std::vector<std::size_t> feature_cols;
  for (const auto& name : schema.feature_columns) feature_cols.push_back(locate(name));

  std::vector<double> y;
  std::vector<std::uint8_t> delta;
  std::vector<double> x;
  std::size_t dropped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, schema.delimiter);
    auto cell = [&](std::size_t c) -> std::optional<double> {
      if (c >= cells.size()) return std::nullopt;
      return parse_number(cells[c]);
    };
    const auto t = cell(time_col);
    const auto s = cell(status_col);
    bool ok = t && s;
    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (std::size_t c : feature_cols) {
      const auto v = cell(c);
      if (!v) {
        ok = false;
        break;
      }
      row.push_back(*v);
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    if (*t < 0.0) {
      throw Error(ErrorKind::NegativeTime, "negative time on line " + std::to_string(line_no));
    }
    if (*s != 0.0 && *s != 1.0) {
      throw Error(ErrorKind::InvalidArgument,
                  "status must be 0 or 1 on line " + std::to_string(line_no));
    }
    y.push_back(*t);
    delta.push_back(static_cast<std::uint8_t>(*s));
    x.insert(x.end(), row.begin(), row.end());
  }
  if (y.empty()) throw Error(ErrorKind::EmptyDataset, "no usable rows");

  const auto n = static_cast<Eigen::Index>(y.size());
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  RowMatrix features = Eigen::Map<RowMatrix>(x.data(), n, d);
  Dataset dataset(std::move(y), std::move(delta), std::move(features), schema.path);
  dataset.set_dropped_rows(dropped);
  return dataset;
}

Dataset load_csv(const std::filesystem::path& file, const CsvSchema& schema) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open " + file.string());
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& dataset, const CsvSchema& schema) {
  const char d = schema.delimiter;
  out << schema.time_column << d << schema.status_column;
  for (const auto& name : schema.feature_columns) out << d << name;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    out << dataset.y(i) << d << (dataset.event(i) ? 1 : 0);
    for (double v : dataset.features(i)) out << d << v;
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& file, const Dataset& dataset,
               const CsvSchema& schema) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
  write_csv(out, dataset, schema);
}

}  // namespace mcox
