#include "mcox/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcox/coxph.hpp"
#include "mcox/error.hpp"
#include "mcox/parallel.hpp"

namespace mcox {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class MomentFunction {
 public:
  virtual ~MomentFunction() = default;
  virtual MomentKind kind() const = 0;
  virtual std::size_t q() const = 0;
  virtual void evaluate(const Dataset& dataset, std::size_t i, std::span<double> out) const = 0;
};

namespace {

constexpr std::size_t kMomentBlock = 2048;

void require_dim(const Dataset& dataset, std::size_t expected, const char* what) {
  if (dataset.p() != expected) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(what) + " moment expects p=" + std::to_string(expected) +
                    ", dataset has p=" + std::to_string(dataset.p()));
  }
}

class LinearMoment final : public MomentFunction {
 public:
  explicit LinearMoment(MatrixXd matrix) : matrix_(std::move(matrix)) {}

  MomentKind kind() const override { return MomentKind::UserLinear; }
  std::size_t q() const override { return static_cast<std::size_t>(matrix_.rows()); }

  void evaluate(const Dataset& dataset, std::size_t i, std::span<double> out) const override {
    const std::size_t d = dataset.feature_dim();
    if (static_cast<std::size_t>(matrix_.cols()) != d + 2) {
      throw Error(ErrorKind::InvalidArgument, "linear moment matrix needs 2 + feature_dim columns");
    }
    const auto f = dataset.features(i);
    const double y = dataset.y(i);
    const double delta = dataset.event(i) ? 1.0 : 0.0;
    for (Index r = 0; r < matrix_.rows(); ++r) {
      double v = matrix_(r, 0) * y + matrix_(r, 1) * delta;
      for (std::size_t j = 0; j < d; ++j) v += matrix_(r, static_cast<Index>(j + 2)) * f[j];
      out[static_cast<std::size_t>(r)] = v;
    }
  }

  const MatrixXd& matrix() const { return matrix_; }

 private:
  MatrixXd matrix_;
};

class AftMoment final : public MomentFunction {
 public:
  explicit AftMoment(WeibullAftFit fit) : fit_(std::move(fit)) {}

  MomentKind kind() const override { return MomentKind::AftScore; }
  std::size_t q() const override { return static_cast<std::size_t>(fit_.slopes.size()); }

  void evaluate(const Dataset& dataset, std::size_t i, std::span<double> out) const override {
    require_dim(dataset, q(), "AFT");
    const std::size_t p = dataset.p();
    const auto& x0 = dataset.baseline_covariates();
    const VectorXd s = weibull_slope_score(fit_, {x0.data() + i * p, p}, dataset.y(i), dataset.event(i));
    std::copy(s.data(), s.data() + p, out.begin());
  }

  const WeibullAftFit& fit() const { return fit_; }

 private:
  WeibullAftFit fit_;
};

class OptimalMoment final : public MomentFunction {
 public:
  explicit OptimalMoment(OptimalMomentState state) : s_(std::move(state)) {}

  MomentKind kind() const override { return MomentKind::EstimatedOptimal; }
  std::size_t q() const override { return static_cast<std::size_t>(s_.beta.size()); }

  void evaluate(const Dataset& dataset, std::size_t i, std::span<double> out) const override {
    const std::size_t p = q();
    require_dim(dataset, p, "optimal");
    Eigen::Map<VectorXd> h(out.data(), static_cast<Index>(p));
    h.setZero();
    const double y = dataset.y(i);
    const std::size_t upto = static_cast<std::size_t>(
        std::upper_bound(s_.event_times.begin(), s_.event_times.end(), y) - s_.event_times.begin());

    if (!dataset.time_dependent()) {
      const auto x = dataset.baseline_covariates().row(static_cast<Index>(i));
      if (upto > 0) {
        const double w = std::exp(x.dot(s_.beta));
        h = -w * (x.transpose() * s_.cum_hazard[upto - 1] -
                  s_.cum_mean_hazard.row(static_cast<Index>(upto - 1)).transpose());
      }
      if (dataset.event(i)) h += x.transpose() - pilot_mean_constant(y);
      return;
    }

    VectorXd x(static_cast<Index>(p));
    for (std::size_t k = 0; k < upto; ++k) {
      const double t = s_.event_times[k];
      dataset.covariate(i, t, {x.data(), p});
      const double w = std::exp(x.dot(s_.beta)) * s_.increments[k];
      h -= w * (x - s_.event_mean.row(static_cast<Index>(k)).transpose());
    }
    if (dataset.event(i)) {
      dataset.covariate(i, y, {x.data(), p});
      h += x - pilot_mean_time_dependent(y);
    }
  }

  const OptimalMomentState& state() const { return s_; }

 private:
  // Pilot risk set at y, or at the last pilot time when y is beyond it.
  std::size_t pilot_risk_start(double y) const {
    const auto& ys = s_.pilot.sorted_times();
    const double t = std::min(y, ys.back());
    return s_.pilot.first_at_risk(t);
  }

  VectorXd pilot_mean_constant(double y) const {
    const std::size_t k = pilot_risk_start(y);
    return s_.suffix_s1.row(static_cast<Index>(k)).transpose() / s_.suffix_s0[k];
  }

  VectorXd pilot_mean_time_dependent(double y) const {
    const auto& ys = s_.pilot.sorted_times();
    const double t = std::min(y, ys.back());
    const auto& order = s_.pilot.sort_index();
    const std::size_t p = q();
    const std::size_t first = pilot_risk_start(y);
    std::vector<double> eta(s_.pilot.n() - first);
    MatrixXd xs(static_cast<Index>(eta.size()), static_cast<Index>(p));
    VectorXd x(static_cast<Index>(p));
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < eta.size(); ++r) {
      s_.pilot.covariate(order[first + r], t, {x.data(), p});
      xs.row(static_cast<Index>(r)) = x.transpose();
      eta[r] = x.dot(s_.beta);
      shift = std::max(shift, eta[r]);
    }
    double s0 = 0.0;
    VectorXd s1 = VectorXd::Zero(static_cast<Index>(p));
    for (std::size_t r = 0; r < eta.size(); ++r) {
      const double w = std::exp(eta[r] - shift);
      s0 += w;
      s1 += w * xs.row(static_cast<Index>(r)).transpose();
    }
    return s1 / s0;
  }

  OptimalMomentState s_;
};

}  // namespace

std::string_view to_string(MomentKind kind) noexcept {
  switch (kind) {
    case MomentKind::UserLinear: return "linear";
    case MomentKind::EstimatedOptimal: return "opt";
    case MomentKind::AftScore: return "aft";
  }
  return "?";
}

MomentKind MomentSpec::kind() const { return impl_->kind(); }
std::size_t MomentSpec::q() const { return impl_->q(); }

void MomentSpec::evaluate(const Dataset& dataset, std::size_t i, std::span<double> out) const {
  impl_->evaluate(dataset, i, out);
}

VectorXd MomentSpec::evaluate(const Dataset& dataset, std::size_t i) const {
  VectorXd out(static_cast<Index>(q()));
  impl_->evaluate(dataset, i, {out.data(), q()});
  return out;
}

MatrixXd MomentSpec::evaluate_all(const Dataset& dataset) const {
  const std::size_t q_dim = q();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(
      static_cast<Index>(dataset.n()), static_cast<Index>(q_dim));
  parallel_for_blocks(dataset.n(), kMomentBlock, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) impl_->evaluate(dataset, i, {out.data() + i * q_dim, q_dim});
  });
  return out;
}

const OptimalMomentState* MomentSpec::optimal_state() const {
  const auto* m = dynamic_cast<const OptimalMoment*>(impl_.get());
  return m ? &m->state() : nullptr;
}

const WeibullAftFit* MomentSpec::aft_fit() const {
  const auto* m = dynamic_cast<const AftMoment*>(impl_.get());
  return m ? &m->fit() : nullptr;
}

const MatrixXd* MomentSpec::linear_matrix() const {
  const auto* m = dynamic_cast<const LinearMoment*>(impl_.get());
  return m ? &m->matrix() : nullptr;
}

MomentSpec build_optimal_moment(const Dataset& pilot, const VectorXd& beta) {
  const std::size_t p = pilot.p();
  if (static_cast<std::size_t>(beta.size()) != p || !beta.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "pilot coefficient must be finite with p entries");
  }
  if (pilot.n_events() < p) {
    throw Error(ErrorKind::TooFewEvents, "pilot has " + std::to_string(pilot.n_events()) +
                                             " events for " + std::to_string(p) + " parameters");
  }
  const RiskSetSweep sweep = sweep_event_times(pilot, beta, false);
  OptimalMomentState s;
  s.beta = beta;
  s.event_times = sweep.time;
  s.event_mean = sweep.mean;
  const std::size_t K = sweep.size();
  s.increments.resize(K);
  s.cum_hazard.resize(K);
  s.cum_mean_hazard.resize(static_cast<Index>(K), static_cast<Index>(p));
  double run = 0.0;
  VectorXd run_a = VectorXd::Zero(static_cast<Index>(p));
  for (std::size_t k = 0; k < K; ++k) {
    const double dl = sweep.hazard_increment(k);
    s.increments[k] = dl;
    run += dl;
    run_a += dl * sweep.mean.row(static_cast<Index>(k)).transpose();
    s.cum_hazard[k] = run;
    s.cum_mean_hazard.row(static_cast<Index>(k)) = run_a.transpose();
  }
  s.pilot = pilot;

  if (!pilot.time_dependent()) {
    const std::size_t r0 = pilot.n();
    const auto& x = pilot.baseline_covariates();
    const VectorXd eta = x * beta;
    const double shift = eta.maxCoeff();
    s.suffix_s0.assign(r0, 0.0);
    s.suffix_s1 = MatrixXd::Zero(static_cast<Index>(r0), static_cast<Index>(p));
    double s0 = 0.0;
    VectorXd s1 = VectorXd::Zero(static_cast<Index>(p));
    const auto& order = pilot.sort_index();
    for (std::size_t k = r0; k-- > 0;) {
      const std::size_t i = order[k];
      const double w = std::exp(eta[static_cast<Index>(i)] - shift);
      s0 += w;
      s1 += w * x.row(static_cast<Index>(i)).transpose();
      s.suffix_s0[k] = s0;
      s.suffix_s1.row(static_cast<Index>(k)) = s1.transpose();
    }
  }
  return MomentSpec(std::make_shared<OptimalMoment>(std::move(s)));
}

MomentSpec build_aft_moment(const Dataset& pilot, const AftOptions& options) {
  const std::size_t p = pilot.p();
  if (pilot.n_events() < p + 2) {
    throw Error(ErrorKind::TooFewEvents, "AFT moment needs at least p+2 pilot events");
  }
  WeibullAftFit fit = fit_weibull_aft(pilot.baseline_covariates(), pilot.times(), pilot.status(), options);
  return MomentSpec(std::make_shared<AftMoment>(std::move(fit)));
}

MomentSpec build_user_linear_moment(MatrixXd matrix) {
  if (matrix.rows() == 0 || matrix.cols() < 3 || !matrix.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "linear moment matrix must be finite, q x (2 + d)");
  }
  return MomentSpec(std::make_shared<LinearMoment>(std::move(matrix)));
}

WholeDataMoment whole_data_mean(const Dataset& dataset, const MomentSpec& spec) {
  const std::size_t q = spec.q();
  WholeDataMoment out;
  out.n_used = dataset.n();
  VectorXd total = block_reduce(
      dataset.n(), kMomentBlock, VectorXd(VectorXd::Zero(static_cast<Index>(q))),
      [&](std::size_t i0, std::size_t i1) {
        VectorXd sum = VectorXd::Zero(static_cast<Index>(q));
        VectorXd h(static_cast<Index>(q));
        for (std::size_t i = i0; i < i1; ++i) {
          spec.evaluate(dataset, i, {h.data(), q});
          sum += h;
        }
        return sum;
      },
      [](VectorXd& a, const VectorXd& b) { a += b; });
  out.mu_hat = dataset.n() ? VectorXd(total / static_cast<double>(dataset.n())) : total;
  return out;
}

}  // namespace mcox
