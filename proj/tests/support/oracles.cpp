#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace mcox::oracle {
namespace {

double basis_value(BasisFunction f, double t) {
  switch (f) {
    case BasisFunction::One: return 1.0;
    case BasisFunction::T: return t;
    case BasisFunction::TwoT: return 2.0 * t;
    case BasisFunction::Legendre2: return 4.0 * t * t - 2.0;
  }
  return 0.0;
}

VectorXd path_value(const SurvivalRecord& rec, double t) {
  const auto& f = rec.features;
  const auto d = static_cast<Eigen::Index>(f.size());
  if (rec.path.kind() == CovariatePath::Kind::Constant) {
    return Eigen::Map<const VectorXd>(f.data(), d);
  }
  const auto& basis = rec.path.basis();
  const auto k = static_cast<Eigen::Index>(basis.size());
  if (rec.path.combine() == CovariatePath::Combine::Stack) {
    VectorXd out(k * d);
    for (Eigen::Index b = 0; b < k; ++b) {
      for (Eigen::Index j = 0; j < d; ++j) out[b * d + j] = basis_value(basis[b], t) * f[j];
    }
    return out;
  }
  const Eigen::Index block = d / k;
  VectorXd out = VectorXd::Zero(block);
  for (Eigen::Index b = 0; b < k; ++b) {
    for (Eigen::Index j = 0; j < block; ++j) out[j] += basis_value(basis[b], t) * f[b * block + j];
  }
  return out;
}

std::vector<double> event_times(const std::vector<Subject>& s) {
  std::set<double> t;
  for (const auto& x : s) {
    if (x.event) t.insert(x.y);
  }
  return {t.begin(), t.end()};
}

struct RiskTerms {
  double s0 = 0.0;
  VectorXd s1;
  MatrixXd s2;
};

RiskTerms risk_terms(const std::vector<Subject>& s, const VectorXd& beta, double t) {
  const auto p = beta.size();
  RiskTerms r{0.0, VectorXd::Zero(p), MatrixXd::Zero(p, p)};
  for (const auto& x : s) {
    if (x.y < t) continue;
    const VectorXd xt = x.x(t);
    const double w = std::exp(beta.dot(xt));
    r.s0 += w;
    r.s1 += w * xt;
    r.s2 += w * xt * xt.transpose();
  }
  return r;
}

using Objective = std::function<double(const VectorXd&)>;

double gsl_objective(const gsl_vector* v, void* params) {
  const auto& f = *static_cast<const Objective*>(params);
  VectorXd x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) x[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
  return -f(x);
}

struct Quadratic {
  MatrixXd a;  // Hessian / 2 form: value = d' a d + 2 b' d + c
  VectorXd b;
  double c = 0.0;
};

double quad_f(const gsl_vector* v, void* params) {
  const auto& q = *static_cast<const Quadratic*>(params);
  Eigen::Map<const VectorXd> d(v->data, static_cast<Eigen::Index>(v->size));
  return d.dot(q.a * d) + 2.0 * q.b.dot(d) + q.c;
}

void quad_df(const gsl_vector* v, void* params, gsl_vector* g) {
  const auto& q = *static_cast<const Quadratic*>(params);
  Eigen::Map<const VectorXd> d(v->data, static_cast<Eigen::Index>(v->size));
  const VectorXd grad = 2.0 * (q.a * d + q.b);
  for (Eigen::Index i = 0; i < grad.size(); ++i) gsl_vector_set(g, static_cast<std::size_t>(i), grad[i]);
}

void quad_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
  *f = quad_f(v, params);
  quad_df(v, params, g);
}

}  // namespace

std::vector<Subject> subjects_from(const Dataset& dataset) {
  std::vector<Subject> out;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    SurvivalRecord rec = dataset.record(i);
    out.push_back({rec.y, rec.delta != 0, [rec](double t) { return path_value(rec, t); }});
  }
  return out;
}

double loglik(const std::vector<Subject>& s, const VectorXd& beta) {
  double total = 0.0;
  for (const auto& i : s) {
    if (!i.event) continue;
    double s0 = 0.0;
    for (const auto& j : s) {
      if (j.y >= i.y) s0 += std::exp(beta.dot(j.x(i.y)));
    }
    total += beta.dot(i.x(i.y)) - std::log(s0);
  }
  return total / static_cast<double>(s.size());
}

VectorXd score(const std::vector<Subject>& s, const VectorXd& beta) {
  VectorXd u = VectorXd::Zero(beta.size());
  for (const auto& i : s) {
    if (!i.event) continue;
    const RiskTerms r = risk_terms(s, beta, i.y);
    u += i.x(i.y) - r.s1 / r.s0;
  }
  return u / static_cast<double>(s.size());
}

MatrixXd information(const std::vector<Subject>& s, const VectorXd& beta) {
  MatrixXd info = MatrixXd::Zero(beta.size(), beta.size());
  for (const auto& i : s) {
    if (!i.event) continue;
    const RiskTerms r = risk_terms(s, beta, i.y);
    const VectorXd m = r.s1 / r.s0;
    info += r.s2 / r.s0 - m * m.transpose();
  }
  return info / static_cast<double>(s.size());
}

MatrixXd efficient_score(const std::vector<Subject>& s, const VectorXd& beta) {
  const auto times = event_times(s);
  const auto p = beta.size();
  std::vector<VectorXd> mean_at;
  std::vector<double> increment;
  for (double t : times) {
    const RiskTerms r = risk_terms(s, beta, t);
    double d = 0.0;
    for (const auto& x : s) d += (x.event && x.y == t) ? 1.0 : 0.0;
    mean_at.push_back(r.s1 / r.s0);
    increment.push_back(d / r.s0);
  }
  MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(s.size()), p);
  for (std::size_t i = 0; i < s.size(); ++i) {
    VectorXd row = VectorXd::Zero(p);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double t = times[k];
      if (t > s[i].y) break;
      const VectorXd xt = s[i].x(t);
      if (s[i].event && t == s[i].y) row += xt - mean_at[k];
      row -= (xt - mean_at[k]) * std::exp(beta.dot(xt)) * increment[k];
    }
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  const auto p = x.size();
  MatrixXd hess(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      auto at = [&](double di, double dj) {
        VectorXd z = x;
        z[i] += di;
        z[j] += dj;
        return f(z);
      };
      hess(i, j) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    }
  }
  return hess;
}

VectorXd nelder_mead_maximize(const std::function<double(const VectorXd&)>& f, const VectorXd& start,
                              double size_tol) {
  gsl_set_error_handler_off();
  const auto dim = static_cast<std::size_t>(start.size());
  Objective obj = f;
  gsl_multimin_function fn{&gsl_objective, dim, &obj};
  VectorXd x = start;
  double step = 0.5;
  for (int restart = 0; restart < 8; ++restart) {
    gsl_vector* v = gsl_vector_alloc(dim);
    gsl_vector* ss = gsl_vector_alloc(dim);
    for (std::size_t i = 0; i < dim; ++i) gsl_vector_set(v, i, x[static_cast<Eigen::Index>(i)]);
    gsl_vector_set_all(ss, step);
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    gsl_multimin_fminimizer_set(m, &fn, v, ss);
    for (int it = 0; it < 20000; ++it) {
      if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), size_tol) == GSL_SUCCESS) break;
    }
    VectorXd next(x.size());
    for (std::size_t i = 0; i < dim; ++i) next[static_cast<Eigen::Index>(i)] = gsl_vector_get(m->x, i);
    gsl_multimin_fminimizer_free(m);
    gsl_vector_free(v);
    gsl_vector_free(ss);
    const bool settled = restart > 0 && (next - x).lpNorm<Eigen::Infinity>() <= size_tol;
    x = next;
    if (settled) break;
    step = 1e-3;
  }
  return x;
}

VectorXd bfgs_quadratic_minimize(const MatrixXd& g_mat, const VectorXd& g, const MatrixXd& w) {
  gsl_set_error_handler_off();
  Quadratic q{g_mat.transpose() * w * g_mat, g_mat.transpose() * w * g, g.dot(w * g)};
  const auto dim = static_cast<std::size_t>(g_mat.cols());
  gsl_multimin_function_fdf fn{&quad_f, &quad_df, &quad_fdf, dim, &q};
  gsl_vector* v = gsl_vector_calloc(dim);
  gsl_multimin_fdfminimizer* m = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, dim);
  gsl_multimin_fdfminimizer_set(m, &fn, v, 0.01, 0.1);
  const double scale = std::max(1.0, q.b.norm());
  for (int it = 0; it < 1000; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(m) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(m->gradient, 1e-14 * scale) == GSL_SUCCESS) break;
  }
  VectorXd d(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) d[static_cast<Eigen::Index>(i)] = gsl_vector_get(m->x, i);
  gsl_multimin_fdfminimizer_free(m);
  gsl_vector_free(v);
  return d;
}

VectorXd gmm_full_block(const VectorXd& beta_uni, const MatrixXd& sigma, const MatrixXd& omega,
                        const VectorXd& g1, const VectorXd& g2) {
  const auto p = sigma.rows();
  const auto q = g2.size();
  MatrixXd g_mat = MatrixXd::Zero(p + q, p);
  g_mat.topRows(p) = -sigma.transpose();
  VectorXd g(p + q);
  g << g1, g2;
  const MatrixXd w = omega.inverse();
  const MatrixXd a = g_mat.transpose() * w * g_mat;
  return beta_uni - a.inverse() * (g_mat.transpose() * w * g);
}

MatrixXd two_pass_covariance(const MatrixXd& rows) {
  const double n = static_cast<double>(rows.rows());
  VectorXd m = VectorXd::Zero(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) m += rows.row(i).transpose();
  m /= n;
  MatrixXd c = MatrixXd::Zero(rows.cols(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const VectorXd d = rows.row(i).transpose() - m;
    c += d * d.transpose();
  }
  return c / n;
}

double failure_time_closed_form(double a, double b, double e) {
  if (b == 0.0) return e * std::exp(-a);
  const double arg = b * e * std::exp(-a);
  if (arg <= -1.0) return std::numeric_limits<double>::infinity();
  return std::log1p(arg) / b;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace mcox::oracle
