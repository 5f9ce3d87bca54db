#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace jpg {

struct CurveFit {
  std::vector<double> params;
  std::vector<double> stderrs;   // 1-sigma, from (J^T J)^-1 * s^2
  double residual_norm = 0.0;    // ||r||_2
  bool converged = false;
  int iterations = 0;
};

namespace detail {

// Solves A x = b for small symmetric positive-definite A (in-place Cholesky).
// Returns false if A is not positive definite.
inline bool solve_spd(std::vector<double> a, std::vector<double> b,
                      std::size_t n, std::vector<double>& x) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (s <= 0.0) return false;
        a[i * n + i] = std::sqrt(s);
      } else {
        a[i * n + j] = s / a[j * n + j];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * x[k];
    x[ii] = s / a[ii * n + ii];
  }
  return true;
}

}  // namespace detail

// Levenberg-Marquardt with forward-difference Jacobian.
// `model` maps (params, x) -> predicted y.
inline CurveFit fit_least_squares(
    const std::function<double(const std::vector<double>&, double)>& model,
    const std::vector<double>& xs, const std::vector<double>& ys,
    std::vector<double> p0, int max_iter = 200, double ftol = 1e-12,
    double ptol = 1e-12) {
  const std::size_t m = xs.size();
  const std::size_t n = p0.size();
  if (m < n) throw std::invalid_argument("fit: fewer points than parameters");

  auto chi2 = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ys[i] - model(p, xs[i]);
      s += r * r;
    }
    return s;
  };

  CurveFit out;
  std::vector<double> p = std::move(p0);
  double cost = chi2(p);
  double lambda = 1e-3;
  std::vector<double> jac(m * n), r(m), jtj(n * n), jtr(n), step, ptrial(n);

  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    for (std::size_t i = 0; i < m; ++i) r[i] = ys[i] - model(p, xs[i]);
    for (std::size_t j = 0; j < n; ++j) {
      // relative step; absolute fallback only for parameters seeded at zero
      const double dp = std::abs(p[j]) > 1e-30 ? 1e-7 * std::abs(p[j]) : 1e-8;
      auto pj = p;
      pj[j] += dp;
      for (std::size_t i = 0; i < m; ++i)
        jac[i * n + j] = (model(pj, xs[i]) - (ys[i] - r[i])) / dp;
    }
    for (std::size_t a = 0; a < n; ++a) {
      jtr[a] = 0.0;
      for (std::size_t i = 0; i < m; ++i) jtr[a] += jac[i * n + a] * r[i];
      for (std::size_t b = 0; b <= a; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          s += jac[i * n + a] * jac[i * n + b];
        jtj[a * n + b] = jtj[b * n + a] = s;
      }
    }

    bool stepped = false;
    for (int tries = 0; tries < 40; ++tries) {
      auto damped = jtj;
      for (std::size_t a = 0; a < n; ++a)
        damped[a * n + a] = jtj[a * n + a] * (1.0 + lambda) + 1e-300;
      if (!detail::solve_spd(damped, jtr, n, step)) {
        lambda *= 10.0;
        continue;
      }
      double pchange = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        ptrial[a] = p[a] + step[a];
        pchange = std::max(pchange, std::abs(step[a]) /
                                        (std::abs(p[a]) > 1e-30 ? std::abs(p[a]) : 1.0));
      }
      const double trial = chi2(ptrial);
      if (std::isfinite(trial) && trial <= cost) {
        const double drop = cost - trial;
        p = ptrial;
        const bool small_drop = drop <= ftol * std::max(cost, 1e-300);
        cost = trial;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (small_drop || pchange <= ptol) out.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      out.converged = cost < std::numeric_limits<double>::infinity() &&
                      lambda > 1e8;  // stuck at a (local) minimum
      break;
    }
    if (out.converged) break;
  }

  // Parameter covariance from the final Jacobian.
  for (std::size_t i = 0; i < m; ++i) r[i] = ys[i] - model(p, xs[i]);
  for (std::size_t j = 0; j < n; ++j) {
    const double dp = 1e-7 * std::max(1.0, std::abs(p[j]));
    auto pj = p;
    pj[j] += dp;
    for (std::size_t i = 0; i < m; ++i)
      jac[i * n + j] = (model(pj, xs[i]) - (ys[i] - r[i])) / dp;
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += jac[i * n + a] * jac[i * n + b];
      jtj[a * n + b] = s;
    }
  out.params = p;
  out.residual_norm = std::sqrt(cost);
  out.stderrs.assign(n, 0.0);
  const double dof = static_cast<double>(m > n ? m - n : 1);
  const double s2 = cost / dof;
  // invert J^T J column by column
  std::vector<double> e(n), col;
  bool ok = true;
  std::vector<double> cov(n * n, 0.0);
  for (std::size_t j = 0; j < n && ok; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    ok = detail::solve_spd(jtj, e, n, col);
    if (ok)
      for (std::size_t i = 0; i < n; ++i) cov[i * n + j] = col[i];
  }
  if (ok)
    for (std::size_t j = 0; j < n; ++j)
      out.stderrs[j] = std::sqrt(std::max(0.0, cov[j * n + j] * s2));
  return out;
}

// ---------------------------------------------------------------------------
// Two-component 1-D Gaussian mixture, fitted by EM.

struct BimodalFit {
  double mean[2];    // ordered: mean[0] < mean[1]
  double sigma[2];
  double weight[2];  // sums to 1
  double log_likelihood = 0.0;
  int iterations = 0;
};

inline double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * 2.5066282746310002);
}

// Standard normal upper-tail probability.
inline double normal_tail_above(double x, double mu, double sigma) {
  return 0.5 * std::erfc((x - mu) / (sigma * 1.4142135623730951));
}

inline BimodalFit fit_bimodal_gaussian(const std::vector<double>& v,
                                       int max_iter = 500) {
  if (v.size() < 1000)
    throw std::invalid_argument("fit_bimodal: need at least 1000 samples");
  double lo = v[0], hi = v[0], mean = 0.0;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = std::sqrt(var);

  BimodalFit f{};
  f.mean[0] = mean - 0.7 * sd;
  f.mean[1] = mean + 0.7 * sd;
  f.sigma[0] = f.sigma[1] = 0.5 * sd;
  f.weight[0] = f.weight[1] = 0.5;

  const std::size_t n = v.size();
  std::vector<double> resp(n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    f.iterations = iter + 1;
    double ll = 0.0;
    double w0 = 0.0, m0 = 0.0, m1 = 0.0, w1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p0 = f.weight[0] * normal_pdf(v[i], f.mean[0], f.sigma[0]);
      const double p1 = f.weight[1] * normal_pdf(v[i], f.mean[1], f.sigma[1]);
      const double tot = p0 + p1 + 1e-300;
      resp[i] = p1 / tot;
      ll += std::log(tot);
      w1 += resp[i];
      w0 += 1.0 - resp[i];
      m1 += resp[i] * v[i];
      m0 += (1.0 - resp[i]) * v[i];
    }
    f.log_likelihood = ll;
    if (w0 < 1e-6 || w1 < 1e-6)
      throw std::runtime_error("fit_bimodal: degenerate fit (empty component)");
    f.mean[0] = m0 / w0;
    f.mean[1] = m1 / w1;
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s0 += (1.0 - resp[i]) * (v[i] - f.mean[0]) * (v[i] - f.mean[0]);
      s1 += resp[i] * (v[i] - f.mean[1]) * (v[i] - f.mean[1]);
    }
    f.sigma[0] = std::sqrt(std::max(s0 / w0, 1e-12 * var + 1e-300));
    f.sigma[1] = std::sqrt(std::max(s1 / w1, 1e-12 * var + 1e-300));
    f.weight[0] = w0 / static_cast<double>(n);
    f.weight[1] = w1 / static_cast<double>(n);
    if (std::abs(ll - prev_ll) < 1e-10 * std::abs(ll)) break;
    prev_ll = ll;
  }
  if (std::abs(f.mean[1] - f.mean[0]) <
      0.2 * std::min(f.sigma[0], f.sigma[1]))
    throw std::runtime_error("fit_bimodal: degenerate fit (components collapsed)");
  if (f.mean[0] > f.mean[1]) {
    std::swap(f.mean[0], f.mean[1]);
    std::swap(f.sigma[0], f.sigma[1]);
    std::swap(f.weight[0], f.weight[1]);
  }
  return f;
}

}  // namespace jpg
