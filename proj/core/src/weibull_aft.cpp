#include "mcox/weibull_aft.hpp"

#include <algorithm>
#include <cmath>

#include "mcox/error.hpp"

namespace mcox {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double safe_log(double y) { return std::log(std::max(y, 1e-300)); }

struct Totals {
  double loglik = 0.0;
  VectorXd gradient;
  MatrixXd hessian;
};

Totals accumulate(const VectorXd& theta, const RowMatrix& x, std::span<const double> y,
                  std::span<const std::uint8_t> delta) {
  const Index dim = theta.size();
  const std::size_t d = static_cast<std::size_t>(x.cols());
  Totals t{0.0, VectorXd::Zero(dim), MatrixXd::Zero(dim, dim)};
  VectorXd g(dim);
  MatrixXd h(dim, dim);
  for (std::size_t i = 0; i < y.size(); ++i) {
    t.loglik += weibull_subject_loglik(theta, {x.data() + i * d, d}, y[i], delta[i] != 0, &g, &h);
    t.gradient += g;
    t.hessian += h;
  }
  const double inv = 1.0 / static_cast<double>(y.size());
  t.loglik *= inv;
  t.gradient *= inv;
  t.hessian *= inv;
  return t;
}

}  // namespace

VectorXd WeibullAftFit::theta() const {
  VectorXd th(slopes.size() + 2);
  th[0] = intercept;
  th.segment(1, slopes.size()) = slopes;
  th[th.size() - 1] = log_scale;
  return th;
}

double weibull_subject_loglik(const VectorXd& theta, std::span<const double> x, double y,
                              bool event, VectorXd* gradient, MatrixXd* hessian) {
  const Index d = static_cast<Index>(x.size());
  const double s = theta[d + 1];
  const double inv_sigma = std::exp(-s);
  double lin = theta[0];
  for (Index j = 0; j < d; ++j) lin += theta[j + 1] * x[static_cast<std::size_t>(j)];
  const double z = (safe_log(y) - lin) * inv_sigma;
  const double ez = std::exp(z);
  const double del = event ? 1.0 : 0.0;
  const double ll = del * (z - s) - ez;

  if (gradient || hessian) {
    // v = (1, x) is the design of the location block.
    auto v = [&](Index j) { return j == 0 ? 1.0 : x[static_cast<std::size_t>(j - 1)]; };
    if (gradient) {
      gradient->resize(d + 2);
      const double gw = (ez - del) * inv_sigma;
      for (Index j = 0; j <= d; ++j) (*gradient)[j] = gw * v(j);
      (*gradient)[d + 1] = -del - del * z + z * ez;
    }
    if (hessian) {
      hessian->resize(d + 2, d + 2);
      const double hww = -ez * inv_sigma * inv_sigma;
      const double hws = -(z * ez + ez - del) * inv_sigma;
      for (Index a = 0; a <= d; ++a) {
        for (Index b = 0; b <= d; ++b) (*hessian)(a, b) = hww * v(a) * v(b);
        (*hessian)(a, d + 1) = (*hessian)(d + 1, a) = hws * v(a);
      }
      (*hessian)(d + 1, d + 1) = del * z - z * ez - z * z * ez;
    }
  }
  return ll;
}

WeibullAftFit fit_weibull_aft(const RowMatrix& x, std::span<const double> y,
                              std::span<const std::uint8_t> delta, const AftOptions& options) {
  const std::size_t n = y.size();
  const Index d = x.cols();
  if (n == 0 || static_cast<std::size_t>(x.rows()) != n || delta.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "AFT inputs have inconsistent lengths");
  }
  double events = 0.0, total_time = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    events += delta[i];
    total_time += y[i];
  }
  if (events < static_cast<double>(d + 2)) {
    throw Error(ErrorKind::TooFewEvents, "Weibull AFT fit needs at least p+2 events");
  }

  VectorXd theta = VectorXd::Zero(d + 2);
  theta[0] = std::log(std::max(total_time, 1e-300) / events);
  Totals cur = accumulate(theta, x, y, delta);

  int iter = 0;
  bool stalled_at_optimum = false;
  while (cur.gradient.lpNorm<Eigen::Infinity>() > options.tol && iter < options.max_iter) {
    MatrixXd neg_h = -cur.hessian;
    Eigen::LDLT<MatrixXd> ldlt(neg_h);
    VectorXd step;
    double ridge = 0.0;
    const double base = std::max(1e-8, neg_h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 20; ++attempt) {
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0.0) {
        step = ldlt.solve(cur.gradient);
        break;
      }
      ridge = ridge == 0.0 ? 1e-6 * base : ridge * 10.0;
      ldlt.compute(neg_h + ridge * MatrixXd::Identity(d + 2, d + 2));
    }
    if (step.size() == 0) break;
    // Newton decrement at rounding level: no representable ascent remains.
    if (cur.gradient.dot(step) <= 1e-15 * std::max(1.0, std::abs(cur.loglik))) {
      stalled_at_optimum = true;
      break;
    }

    double scale = 1.0;
    bool improved = false;
    VectorXd candidate;
    Totals next;
    for (int h = 0; h <= options.max_halving; ++h) {
      candidate = theta + scale * step;
      next = accumulate(candidate, x, y, delta);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
    theta = candidate;
    cur = std::move(next);
    ++iter;
  }

  WeibullAftFit fit;
  fit.intercept = theta[0];
  fit.slopes = theta.segment(1, d);
  fit.log_scale = theta[d + 1];
  fit.loglik = cur.loglik;
  fit.n_iter = iter;
  fit.converged = cur.gradient.lpNorm<Eigen::Infinity>() <= options.tol || stalled_at_optimum;
  if (!fit.converged) {
    throw Error(ErrorKind::NotConverged, "Weibull AFT fit stopped with gradient norm " +
                                             std::to_string(cur.gradient.lpNorm<Eigen::Infinity>()));
  }
  return fit;
}

VectorXd weibull_slope_score(const WeibullAftFit& fit, std::span<const double> x, double y,
                             bool event) {
  const double inv_sigma = std::exp(-fit.log_scale);
  double lin = fit.intercept;
  for (Index j = 0; j < fit.slopes.size(); ++j) lin += fit.slopes[j] * x[static_cast<std::size_t>(j)];
  const double z = (safe_log(y) - lin) * inv_sigma;
  const double w = (std::exp(z) - (event ? 1.0 : 0.0)) * inv_sigma;
  VectorXd out(fit.slopes.size());
  for (Index j = 0; j < out.size(); ++j) out[j] = w * x[static_cast<std::size_t>(j)];
  return out;
}

}  // namespace mcox
