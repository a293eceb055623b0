#include "mcox/coxph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcox/error.hpp"
#include "mcox/parallel.hpp"

namespace mcox {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::size_t kEventBlock = 16;
constexpr std::size_t kSubjectBlock = 256;

void require_beta(const Dataset& dataset, const VectorXd& beta) {
  if (static_cast<std::size_t>(beta.size()) != dataset.p()) {
    throw Error(ErrorKind::InvalidArgument,
                "beta has " + std::to_string(beta.size()) + " entries, dataset has p=" +
                    std::to_string(dataset.p()));
  }
}

// Distinct event times along the sort order: (first sorted position of the
// tied group, number of events in it).
struct EventGroup {
  std::size_t first;
  std::size_t count;
};

std::vector<EventGroup> event_groups(const Dataset& dataset) {
  std::vector<EventGroup> groups;
  const auto& order = dataset.sort_index();
  const auto& ys = dataset.sorted_times();
  const std::size_t n = dataset.n();
  std::size_t k = 0;
  while (k < n) {
    std::size_t end = k;
    std::size_t d = 0;
    while (end < n && ys[end] == ys[k]) {
      d += dataset.event(order[end]) ? 1 : 0;
      ++end;
    }
    if (d > 0) groups.push_back({k, d});
    k = end;
  }
  return groups;
}

RiskSetSweep sweep_time_independent(const Dataset& dataset, const VectorXd& beta,
                                    bool with_information) {
  const std::size_t n = dataset.n();
  const std::size_t p = dataset.p();
  const auto& x = dataset.baseline_covariates();
  const auto& order = dataset.sort_index();
  const auto& ys = dataset.sorted_times();

  VectorXd eta = x * beta;
  if (!eta.allFinite()) throw Error(ErrorKind::NonFiniteValue, "non-finite linear predictor");
  // Running maximum of the linear predictor over the risk set built so far.
  double shift = -std::numeric_limits<double>::infinity();

  RiskSetSweep out;
  std::vector<double> s1(p, 0.0), s2(with_information ? p * p : 0, 0.0);
  std::vector<double> ex(p);
  double s0 = 0.0;

  struct Row {
    double time, d, log_den, eta_sum;
    std::vector<double> mean, xsum;
  };
  std::vector<Row> rows;

  std::size_t end = n;  // exclusive, walking backwards over tied groups
  while (end > 0) {
    std::size_t start = end - 1;
    while (start > 0 && ys[start - 1] == ys[end - 1]) --start;
    double d = 0.0, eta_sum = 0.0;
    std::fill(ex.begin(), ex.end(), 0.0);
    for (std::size_t k = start; k < end; ++k) {
      const std::size_t i = order[k];
      if (eta[static_cast<Index>(i)] > shift) {
        const double scale = std::exp(shift - eta[static_cast<Index>(i)]);
        s0 *= scale;
        for (auto& v : s1) v *= scale;
        for (auto& v : s2) v *= scale;
        shift = eta[static_cast<Index>(i)];
      }
      const double w = std::exp(eta[static_cast<Index>(i)] - shift);
      const double* xi = x.data() + i * p;
      s0 += w;
      for (std::size_t a = 0; a < p; ++a) s1[a] += w * xi[a];
      if (with_information) {
        for (std::size_t a = 0; a < p; ++a) {
          const double wa = w * xi[a];
          for (std::size_t b = 0; b <= a; ++b) s2[a * p + b] += wa * xi[b];
        }
      }
      if (dataset.event(i)) {
        d += 1.0;
        eta_sum += eta[static_cast<Index>(i)];
        for (std::size_t a = 0; a < p; ++a) ex[a] += xi[a];
      }
    }
    if (d > 0.0) {
      Row row{ys[start], d, std::log(s0) + shift, eta_sum, std::vector<double>(p), ex};
      for (std::size_t a = 0; a < p; ++a) row.mean[a] = s1[a] / s0;
      if (with_information) {
        if (out.information.size() == 0) out.information = MatrixXd::Zero(static_cast<Index>(p), static_cast<Index>(p));
        for (std::size_t a = 0; a < p; ++a) {
          for (std::size_t b = 0; b <= a; ++b) {
            const double v = d * (s2[a * p + b] / s0 - row.mean[a] * row.mean[b]);
            out.information(static_cast<Index>(a), static_cast<Index>(b)) += v;
          }
        }
      }
      rows.push_back(std::move(row));
    }
    end = start;
  }

  const std::size_t K = rows.size();
  out.time.resize(K);
  out.events.resize(K);
  out.log_denominator.resize(K);
  out.event_eta_sum.resize(K);
  out.mean.resize(static_cast<Index>(K), static_cast<Index>(p));
  out.event_x_sum.resize(static_cast<Index>(K), static_cast<Index>(p));
  for (std::size_t k = 0; k < K; ++k) {
    const Row& row = rows[K - 1 - k];
    out.time[k] = row.time;
    out.events[k] = row.d;
    out.log_denominator[k] = row.log_den;
    out.event_eta_sum[k] = row.eta_sum;
    for (std::size_t a = 0; a < p; ++a) {
      out.mean(static_cast<Index>(k), static_cast<Index>(a)) = row.mean[a];
      out.event_x_sum(static_cast<Index>(k), static_cast<Index>(a)) = row.xsum[a];
    }
  }
  if (with_information) {
    if (out.information.size() == 0) out.information = MatrixXd::Zero(static_cast<Index>(p), static_cast<Index>(p));
    out.information = out.information.selfadjointView<Eigen::Lower>();
  }
  return out;
}

// Each event time revisits every subject at risk: O(n) per event time, O(n^2)
// per sweep. X(t) is linear in the static features for fixed t, X(t) = C(t) f,
// so the inner loop accumulates weighted feature moments and maps them through
// C(t) once per event time.
RiskSetSweep sweep_time_dependent(const Dataset& dataset, const VectorXd& beta,
                                  bool with_information) {
  const std::size_t n = dataset.n();
  const std::size_t p = dataset.p();
  const std::size_t d = dataset.feature_dim();
  const auto& order = dataset.sort_index();
  const auto& ys = dataset.sorted_times();
  const CovariatePath& path = dataset.path();
  const std::size_t nb = path.basis().size();
  const auto groups = event_groups(dataset);
  const std::size_t K = groups.size();

  RowMatrix sorted_features(static_cast<Index>(n), static_cast<Index>(d));
  for (std::size_t k = 0; k < n; ++k) {
    sorted_features.row(static_cast<Index>(k)) = dataset.feature_matrix().row(static_cast<Index>(order[k]));
  }
  // b'X_j(t) = sum_l f_l(t) c_jl; c_jl is b'X_j evaluated with only basis l switched on.
  RowMatrix coef(static_cast<Index>(n), static_cast<Index>(nb));
  {
    std::vector<double> unit(nb), x(p);
    for (std::size_t l = 0; l < nb; ++l) {
      std::fill(unit.begin(), unit.end(), 0.0);
      unit[l] = 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        path.combine({sorted_features.data() + k * d, d}, unit, x);
        double e = 0.0;
        for (std::size_t a = 0; a < p; ++a) e += beta[static_cast<Index>(a)] * x[a];
        coef(static_cast<Index>(k), static_cast<Index>(l)) = e;
      }
    }
  }

  RiskSetSweep out;
  out.time.resize(K);
  out.events.resize(K);
  out.log_denominator.resize(K);
  out.event_eta_sum.resize(K);
  out.mean.resize(static_cast<Index>(K), static_cast<Index>(p));
  out.event_x_sum.resize(static_cast<Index>(K), static_cast<Index>(p));
  std::vector<double> info_terms(with_information ? K * p * p : 0, 0.0);

  // Accumulate second moments either in feature space (then map through C(t))
  // or in covariate space, whichever needs fewer multiply-adds per subject.
  std::size_t nnz = 0;
  {
    std::vector<double> unit(d), col(p), fv(nb, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
      std::fill(unit.begin(), unit.end(), 0.0);
      unit[j] = 1.0;
      path.combine(unit, fv, col);
      for (double v : col) nnz += v != 0.0 ? 1 : 0;
    }
  }
  const bool feature_space = d * (d + 1) / 2 <= nnz + p * (p + 1) / 2;
  const bool stacked = path.combine() == CovariatePath::Combine::Stack;

  parallel_for_blocks(K, kEventBlock, [&](std::size_t k0, std::size_t k1) {
    std::vector<double> etabuf, fv(nb), unit(d), col(p), xr(p), acc1(p), acc2(p * p);
    VectorXd g1(static_cast<Index>(d)), x(static_cast<Index>(p));
    MatrixXd g2(static_cast<Index>(d), static_cast<Index>(d));
    MatrixXd h2(static_cast<Index>(p), static_cast<Index>(p));
    MatrixXd c(static_cast<Index>(p), static_cast<Index>(d));
    for (std::size_t k = k0; k < k1; ++k) {
      const std::size_t first = groups[k].first;
      const double t = ys[first];
      const std::size_t m = n - first;
      path.basis_values(t, fv);
      for (std::size_t j = 0; j < d; ++j) {
        std::fill(unit.begin(), unit.end(), 0.0);
        unit[j] = 1.0;
        path.combine(unit, fv, col);
        for (std::size_t a = 0; a < p; ++a) {
          c(static_cast<Index>(a), static_cast<Index>(j)) = col[a];
        }
      }

      etabuf.resize(m);
      double shift = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m; ++r) {
        const double* cr = coef.data() + (first + r) * nb;
        double e = 0.0;
        for (std::size_t l = 0; l < nb; ++l) e += fv[l] * cr[l];
        etabuf[r] = e;
        shift = std::max(shift, e);
      }
      if (!std::isfinite(shift)) throw Error(ErrorKind::NonFiniteValue, "non-finite linear predictor");

      double s0 = 0.0;
      VectorXd s1;
      MatrixXd s2;
      if (!with_information || feature_space) {
        g1.setZero();
        if (with_information) g2.setZero();
        for (std::size_t r = 0; r < m; ++r) {
          const double w = std::exp(etabuf[r] - shift);
          const double* fr = sorted_features.data() + (first + r) * d;
          s0 += w;
          for (std::size_t a = 0; a < d; ++a) g1[static_cast<Index>(a)] += w * fr[a];
          if (with_information) {
            for (std::size_t a = 0; a < d; ++a) {
              const double wa = w * fr[a];
              double* g2col = g2.data() + a * d;
              for (std::size_t b = a; b < d; ++b) g2col[b] += wa * fr[b];
            }
          }
        }
        s1 = c * g1;
        if (with_information) s2 = c * g2.selfadjointView<Eigen::Lower>() * c.transpose();
      } else {
        std::fill(acc1.begin(), acc1.end(), 0.0);
        std::fill(acc2.begin(), acc2.end(), 0.0);
        double* __restrict a1 = acc1.data();
        double* __restrict a2 = acc2.data();
        double* __restrict xv = xr.data();
        for (std::size_t r = 0; r < m; ++r) {
          const double w = std::exp(etabuf[r] - shift);
          const double* __restrict fr = sorted_features.data() + (first + r) * d;
          if (stacked) {
            for (std::size_t l = 0; l < nb; ++l) {
              for (std::size_t j = 0; j < d; ++j) xv[l * d + j] = fv[l] * fr[j];
            }
          } else {
            for (std::size_t j = 0; j < p; ++j) xv[j] = fv[0] * fr[j];
            for (std::size_t l = 1; l < nb; ++l) {
              for (std::size_t j = 0; j < p; ++j) xv[j] += fv[l] * fr[l * p + j];
            }
          }
          s0 += w;
          for (std::size_t a = 0; a < p; ++a) {
            const double wa = w * xv[a];
            a1[a] += wa;
            for (std::size_t b = a; b < p; ++b) a2[a * p + b] += wa * xv[b];
          }
        }
        s1 = Eigen::Map<const VectorXd>(a1, static_cast<Index>(p));
        h2 = Eigen::Map<const MatrixXd>(a2, static_cast<Index>(p), static_cast<Index>(p));
        s2 = h2.selfadjointView<Eigen::Lower>();
      }

      // Events sit at the front of their tied group.
      double eta_sum = 0.0;
      VectorXd ex = VectorXd::Zero(static_cast<Index>(p));
      for (std::size_t r = 0; r < groups[k].count; ++r) {
        path.combine({sorted_features.data() + (first + r) * d, d}, fv, {x.data(), p});
        ex += x;
        eta_sum += etabuf[r];
      }

      const VectorXd mean = s1 / s0;
      out.time[k] = t;
      out.events[k] = static_cast<double>(groups[k].count);
      out.log_denominator[k] = std::log(s0) + shift;
      out.event_eta_sum[k] = eta_sum;
      out.mean.row(static_cast<Index>(k)) = mean.transpose();
      out.event_x_sum.row(static_cast<Index>(k)) = ex.transpose();
      if (with_information) {
        const MatrixXd cov = s2 / s0 - mean * mean.transpose();
        double* term = info_terms.data() + k * p * p;
        for (std::size_t a = 0; a < p; ++a) {
          for (std::size_t b = 0; b <= a; ++b) {
            term[a * p + b] = out.events[k] * cov(static_cast<Index>(a), static_cast<Index>(b));
          }
        }
      }
    }
  });

  if (with_information) {
    out.information = MatrixXd::Zero(static_cast<Index>(p), static_cast<Index>(p));
    for (std::size_t k = 0; k < K; ++k) {
      const double* term = info_terms.data() + k * p * p;
      for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
          out.information(static_cast<Index>(a), static_cast<Index>(b)) += term[a * p + b];
        }
      }
    }
    out.information = out.information.selfadjointView<Eigen::Lower>();
  }
  return out;
}

}  // namespace

Eigen::VectorXd RiskSums::mean() const {
  if (!(s0 > 0.0)) throw Error(ErrorKind::EmptyRiskSet, "no subject at risk at t=" + std::to_string(t));
  return s1 / s0;
}

RiskSums risk_sums(const Dataset& dataset, const VectorXd& beta, double t, int order) {
  require_beta(dataset, beta);
  const std::size_t n = dataset.n();
  const std::size_t p = dataset.p();
  RiskSums out;
  out.t = t;
  out.beta = beta;
  out.s1 = VectorXd::Zero(static_cast<Index>(p));
  out.s2 = MatrixXd::Zero(static_cast<Index>(p), static_cast<Index>(p));
  VectorXd x(static_cast<Index>(p));
  const auto& idx = dataset.sort_index();
  for (std::size_t k = dataset.first_at_risk(t); k < n; ++k) {
    dataset.covariate(idx[k], t, {x.data(), p});
    const double w = std::exp(beta.dot(x));
    out.s0 += w;
    if (order >= 1) out.s1 += w * x;
    if (order >= 2) out.s2.noalias() += w * x * x.transpose();
  }
  if (n > 0) {
    const double inv = 1.0 / static_cast<double>(n);
    out.s0 *= inv;
    out.s1 *= inv;
    out.s2 *= inv;
  }
  return out;
}

double RiskSetSweep::hazard_increment(std::size_t k) const {
  return events[k] * std::exp(-log_denominator[k]);
}

RiskSetSweep sweep_event_times(const Dataset& dataset, const VectorXd& beta,
                               bool with_information) {
  require_beta(dataset, beta);
  if (!beta.allFinite()) throw Error(ErrorKind::NonFiniteValue, "non-finite coefficient");
  return dataset.time_dependent() ? sweep_time_dependent(dataset, beta, with_information)
                                  : sweep_time_independent(dataset, beta, with_information);
}

PartialLikelihood evaluate_partial_likelihood(const Dataset& dataset, const VectorXd& beta) {
  const RiskSetSweep sweep = sweep_event_times(dataset, beta, true);
  const std::size_t p = dataset.p();
  PartialLikelihood out;
  out.score = VectorXd::Zero(static_cast<Index>(p));
  out.information = sweep.information;
  if (out.information.size() == 0) out.information = MatrixXd::Zero(static_cast<Index>(p), static_cast<Index>(p));
  CompensatedSum ll;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    ll.add(sweep.event_eta_sum[k] - sweep.events[k] * sweep.log_denominator[k]);
    out.score += sweep.event_x_sum.row(static_cast<Index>(k)).transpose() -
                 sweep.events[k] * sweep.mean.row(static_cast<Index>(k)).transpose();
  }
  const double inv_n = dataset.n() ? 1.0 / static_cast<double>(dataset.n()) : 0.0;
  out.loglik = ll.value() * inv_n;
  out.score *= inv_n;
  out.information *= inv_n;
  if (!std::isfinite(out.loglik) || !out.score.allFinite() || !out.information.allFinite()) {
    throw Error(ErrorKind::NonFiniteValue, "partial likelihood overflowed");
  }
  return out;
}

double log_partial_likelihood(const Dataset& dataset, const VectorXd& beta) {
  const RiskSetSweep sweep = sweep_event_times(dataset, beta, false);
  CompensatedSum ll;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    ll.add(sweep.event_eta_sum[k] - sweep.events[k] * sweep.log_denominator[k]);
  }
  const double value = dataset.n() ? ll.value() / static_cast<double>(dataset.n()) : 0.0;
  if (!std::isfinite(value)) throw Error(ErrorKind::NonFiniteValue, "partial likelihood overflowed");
  return value;
}

VectorXd score(const Dataset& dataset, const VectorXd& beta) {
  return evaluate_partial_likelihood(dataset, beta).score;
}

MatrixXd information(const Dataset& dataset, const VectorXd& beta) {
  return evaluate_partial_likelihood(dataset, beta).information;
}

MatrixXd solve_information(const MatrixXd& info, const MatrixXd& rhs) {
  const Eigen::LDLT<MatrixXd> ldlt(info);
  const double max_diag = info.diagonal().cwiseAbs().maxCoeff();
  const VectorXd pivots = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(max_diag > 0.0) ||
      pivots.minCoeff() <= 1e-12 * max_diag) {
    throw Error(ErrorKind::SingularInformation, "information matrix is numerically singular");
  }
  return ldlt.solve(rhs);
}

FitResult newton_raphson_fit(const Dataset& dataset, const VectorXd& init, const FitOptions& options) {
  const std::size_t p = dataset.p();
  if (p == 0) throw Error(ErrorKind::InvalidArgument, "no covariates");
  if (dataset.n_events() == 0) throw Error(ErrorKind::TooFewEvents, "dataset has no events");

  VectorXd beta = init.size() == 0 ? VectorXd::Zero(static_cast<Index>(p)) : init;
  require_beta(dataset, beta);

  PartialLikelihood cur = evaluate_partial_likelihood(dataset, beta);
  FitResult fit;
  fit.n = dataset.n();
  fit.n_events = dataset.n_events();
  int iter = 0;
  while (cur.score.lpNorm<Eigen::Infinity>() > options.tol && iter < options.max_iter) {
    const VectorXd step = solve_information(cur.information, cur.score);
    double scale = 1.0;
    bool improved = false;
    PartialLikelihood next;
    VectorXd candidate;
    for (int h = 0; h <= options.max_halving; ++h) {
      candidate = beta + scale * step;
      try {
        next = evaluate_partial_likelihood(dataset, candidate);
        // Near the optimum the likelihood change drops below rounding noise;
        // a smaller score then decides.
        const double noise = 1e-13 * (1.0 + std::abs(cur.loglik));
        const bool flat = next.loglik >= cur.loglik - noise &&
                          next.score.lpNorm<Eigen::Infinity>() < cur.score.lpNorm<Eigen::Infinity>();
        if (next.loglik >= cur.loglik || flat) {
          improved = true;
          break;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteValue) throw;
      }
      scale *= 0.5;
    }
    if (!improved) break;
    ++iter;
    beta = candidate;
    cur = std::move(next);
  }

  fit.beta_hat = beta;
  fit.information = cur.information;
  fit.loglik = cur.loglik;
  fit.n_iter = iter;
  fit.final_score_norm = cur.score.lpNorm<Eigen::Infinity>();
  fit.converged = fit.final_score_norm <= options.tol;
  const MatrixXd eye = MatrixXd::Identity(static_cast<Index>(p), static_cast<Index>(p));
  fit.variance = solve_information(cur.information, eye) / static_cast<double>(dataset.n());
  fit.variance = 0.5 * (fit.variance + fit.variance.transpose());
  return fit;
}

double BaselineHazard::cumulative(double t) const {
  const auto end = std::upper_bound(times.begin(), times.end(), t);
  double total = 0.0;
  for (auto it = times.begin(); it != end; ++it) {
    total += increments[static_cast<std::size_t>(it - times.begin())];
  }
  return total;
}

BaselineHazard breslow_baseline(const Dataset& dataset, const VectorXd& beta) {
  if (dataset.n_events() == 0) throw Error(ErrorKind::TooFewEvents, "dataset has no events");
  const RiskSetSweep sweep = sweep_event_times(dataset, beta, false);
  BaselineHazard out;
  out.times = sweep.time;
  out.increments.resize(sweep.size());
  for (std::size_t k = 0; k < sweep.size(); ++k) out.increments[k] = sweep.hazard_increment(k);
  return out;
}

VectorXd martingale_residuals(const Dataset& dataset, const VectorXd& beta,
                              const BaselineHazard& baseline) {
  require_beta(dataset, beta);
  const std::size_t n = dataset.n();
  const std::size_t p = dataset.p();
  VectorXd out(static_cast<Index>(n));

  if (!dataset.time_dependent()) {
    std::vector<double> cum(baseline.times.size());
    double run = 0.0;
    for (std::size_t k = 0; k < cum.size(); ++k) cum[k] = (run += baseline.increments[k]);
    const VectorXd eta = dataset.baseline_covariates() * beta;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pos = std::upper_bound(baseline.times.begin(), baseline.times.end(), dataset.y(i)) -
                       baseline.times.begin();
      const double lambda = pos ? cum[static_cast<std::size_t>(pos) - 1] : 0.0;
      out[static_cast<Index>(i)] = (dataset.event(i) ? 1.0 : 0.0) - std::exp(eta[static_cast<Index>(i)]) * lambda;
    }
    return out;
  }

  parallel_for_blocks(n, kSubjectBlock, [&](std::size_t i0, std::size_t i1) {
    VectorXd x(static_cast<Index>(p));
    for (std::size_t i = i0; i < i1; ++i) {
      double comp = 0.0;
      for (std::size_t k = 0; k < baseline.times.size() && baseline.times[k] <= dataset.y(i); ++k) {
        dataset.covariate(i, baseline.times[k], {x.data(), p});
        comp += std::exp(beta.dot(x)) * baseline.increments[k];
      }
      out[static_cast<Index>(i)] = (dataset.event(i) ? 1.0 : 0.0) - comp;
    }
  });
  return out;
}

MatrixXd efficient_score_contributions(const Dataset& dataset, const VectorXd& beta) {
  if (dataset.n_events() == 0) throw Error(ErrorKind::TooFewEvents, "dataset has no events");
  return efficient_score_contributions(dataset, beta, sweep_event_times(dataset, beta, false));
}

MatrixXd efficient_score_contributions(const Dataset& dataset, const VectorXd& beta,
                                       const RiskSetSweep& sweep) {
  require_beta(dataset, beta);
  const std::size_t n = dataset.n();
  const std::size_t p = dataset.p();
  const std::size_t K = sweep.size();
  MatrixXd out = MatrixXd::Zero(static_cast<Index>(n), static_cast<Index>(p));

  auto event_slot = [&](double y) {
    const auto it = std::lower_bound(sweep.time.begin(), sweep.time.end(), y);
    return static_cast<std::size_t>(it - sweep.time.begin());
  };

  if (!dataset.time_dependent()) {
    // Compensator collapses to exp(eta_i) {X_i Lambda(Y_i) - A(Y_i)} with
    // A(t) = sum_{t_k <= t} Xbar_k dLambda_k.
    std::vector<double> cum_lambda(K);
    MatrixXd cum_a(static_cast<Index>(K), static_cast<Index>(p));
    double run = 0.0;
    VectorXd run_a = VectorXd::Zero(static_cast<Index>(p));
    for (std::size_t k = 0; k < K; ++k) {
      const double dl = sweep.hazard_increment(k);
      run += dl;
      run_a += dl * sweep.mean.row(static_cast<Index>(k)).transpose();
      cum_lambda[k] = run;
      cum_a.row(static_cast<Index>(k)) = run_a.transpose();
    }
    const auto& x = dataset.baseline_covariates();
    const VectorXd eta = x * beta;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = dataset.y(i);
      const std::size_t upto = static_cast<std::size_t>(
          std::upper_bound(sweep.time.begin(), sweep.time.end(), y) - sweep.time.begin());
      auto row = out.row(static_cast<Index>(i));
      if (upto > 0) {
        const double w = std::exp(eta[static_cast<Index>(i)]);
        row = -w * (x.row(static_cast<Index>(i)) * cum_lambda[upto - 1] -
                    cum_a.row(static_cast<Index>(upto - 1)));
      }
      if (dataset.event(i)) {
        const std::size_t k = event_slot(y);
        row += x.row(static_cast<Index>(i)) - sweep.mean.row(static_cast<Index>(k));
      }
    }
    return out;
  }

  parallel_for_blocks(n, kSubjectBlock, [&](std::size_t i0, std::size_t i1) {
    VectorXd x(static_cast<Index>(p));
    for (std::size_t i = i0; i < i1; ++i) {
      const double y = dataset.y(i);
      VectorXd acc = VectorXd::Zero(static_cast<Index>(p));
      for (std::size_t k = 0; k < K && sweep.time[k] <= y; ++k) {
        dataset.covariate(i, sweep.time[k], {x.data(), p});
        const double w = std::exp(beta.dot(x) - sweep.log_denominator[k]) * sweep.events[k];
        acc.noalias() -= w * (x - sweep.mean.row(static_cast<Index>(k)).transpose());
      }
      if (dataset.event(i)) {
        const std::size_t k = event_slot(y);
        dataset.covariate(i, y, {x.data(), p});
        acc += x - sweep.mean.row(static_cast<Index>(k)).transpose();
      }
      out.row(static_cast<Index>(i)) = acc.transpose();
    }
  });
  return out;
}

}  // namespace mcox
