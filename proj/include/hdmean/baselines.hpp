#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>

#include "hdmean/bf.hpp"
#include "hdmean/error.hpp"
#include "hdmean/rng.hpp"
#include "hdmean/summary.hpp"

namespace hdmean {

namespace detail {

// Largest eigenvalue of a symmetric PSD matrix by power iteration with a
// deterministic pseudo-random start vector.
inline double largest_eigenvalue_sym(const Eigen::MatrixXd& a) {
  const Eigen::Index p = a.rows();
  if (p != a.cols()) throw DataError("largest_eigenvalue_sym: matrix must be square");
  if (p == 1) return a(0, 0);

  std::uint64_t state = 0xD1B54A32D192ED03ULL ^ static_cast<std::uint64_t>(p);
  Eigen::VectorXd v(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    v[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 0.5;
  }
  double norm = v.norm();
  if (norm == 0.0) {
    v.setOnes();
    norm = v.norm();
  }
  v /= norm;

  double estimate = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    const Eigen::VectorXd w = a * v;
    const double wnorm = w.norm();
    if (wnorm == 0.0) return 0.0;
    v = w / wnorm;
    if (std::abs(wnorm - estimate) <= 1e-12 * std::max(1.0, wnorm)) {
      return wnorm;
    }
    estimate = wnorm;
  }
  return estimate;
}

// tr(M^2) for a general (not necessarily symmetric) square M.
inline double trace_of_square(const Eigen::MatrixXd& m) {
  const Eigen::Index p = m.rows();
  CompensatedSum acc;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) {
      acc.add(m(i, j) * m(j, i));
    }
  }
  return acc.value();
}

inline double trace(const Eigen::MatrixXd& m) {
  CompensatedSum acc;
  for (Eigen::Index j = 0; j < m.rows(); ++j) acc.add(m(j, j));
  return acc.value();
}

}  // namespace detail

// Unregularized L2 statistic of Bai-Saranadasa type:
//   [n0 D'D - tr(S)] / sqrt(2 n(n+1)/((n-1)(n+2)) (tr(S^2) - (tr S)^2/n)).
inline TestOutcome t_bs(const TwoSampleSummary& s) {
  if (s.n() < 3) throw DataError("t_bs: requires n1 + n2 >= 3");
  const double n = static_cast<double>(s.n());
  const double tr_s = detail::trace(s.pooled_cov);
  const double tr_s2 =
      detail::weighted_sq_trace(s.pooled_cov, Eigen::VectorXd::Ones(s.p));
  const double var_term = tr_s2 - tr_s * tr_s / n;
  if (!(var_term > 0.0)) throw NumericalError("t_bs: nonpositive variance estimate");
  const double scale = 2.0 * n * (n + 1.0) / ((n - 1.0) * (n + 2.0));
  detail::CompensatedSum dd;
  for (Eigen::Index j = 0; j < s.p; ++j) dd.add(s.mean_diff[j] * s.mean_diff[j]);
  const double statistic = (s.n0 * dd.value() - tr_s) / std::sqrt(scale * var_term);
  return detail::make_outcome("BS", statistic, std::numeric_limits<double>::quiet_NaN(),
                              false);
}

namespace detail {

// U-statistic numerator of the Chen-Qin test; cross products exclude i = i'.
inline double cq_numerator(const SampleMatrix& x1, const SampleMatrix& x2) {
  const Eigen::VectorXd s1 = x1.colwise().sum().transpose();
  const Eigen::VectorXd s2 = x2.colwise().sum().transpose();
  const double n1 = static_cast<double>(x1.rows());
  const double n2 = static_cast<double>(x2.rows());
  const double within1 = s1.squaredNorm() - x1.squaredNorm();
  const double within2 = s2.squaredNorm() - x2.squaredNorm();
  const double cross = s1.dot(s2);
  return within1 / (n1 * (n1 - 1.0)) + within2 / (n2 * (n2 - 1.0)) -
         2.0 * cross / (n1 * n2);
}

inline TestOutcome t_cq_impl(const SampleMatrix& x1, const SampleMatrix& x2,
                             const TwoSampleSummary& s) {
  const double n1 = static_cast<double>(s.n1);
  const double n2 = static_cast<double>(s.n2);
  const double numerator = cq_numerator(x1, x2);
  // Null-variance normalization with the plug-in estimator of tr(Sigma^2).
  const double tr_s = detail::trace(s.pooled_cov);
  const double tr_s2 =
      detail::weighted_sq_trace(s.pooled_cov, Eigen::VectorXd::Ones(s.p));
  const double est =
      tr_s2 - tr_s * tr_s / static_cast<double>(s.n() - 2);
  const double coef =
      2.0 / (n1 * (n1 - 1.0)) + 2.0 / (n2 * (n2 - 1.0)) + 4.0 / (n1 * n2);
  const double variance = coef * std::max(est, std::numeric_limits<double>::min());
  const double statistic = numerator / std::sqrt(variance);
  return detail::make_outcome("CQ", statistic, std::numeric_limits<double>::quiet_NaN(),
                              false);
}

}  // namespace detail

inline TestOutcome t_cq(const SampleMatrix& x1, const SampleMatrix& x2) {
  if (x1.rows() < 2 || x2.rows() < 2) {
    throw DataError("t_cq: each sample needs at least 2 observations");
  }
  const TwoSampleSummary s = pooled_summary(x1, x2);
  return detail::t_cq_impl(x1, x2, s);
}

// Diagonally standardized statistic of Srivastava-Du type; invariant under
// coordinatewise positive rescaling of the data.
inline TestOutcome t_sd(const TwoSampleSummary& s) {
  if (s.n() < 3) throw DataError("t_sd: requires n1 + n2 >= 3");
  if (!((s.pooled_diag.array() > 0.0).all())) {
    throw NumericalError("t_sd: zero diagonal entry in pooled covariance");
  }
  const double n = static_cast<double>(s.n());
  const double p = static_cast<double>(s.p);
  // tr(R^2) = sum_ij S_ij^2 / (S_ii S_jj) for the sample correlation matrix R.
  const Eigen::VectorXd inv_diag = s.pooled_diag.cwiseInverse();
  const double tr_r2 = detail::weighted_sq_trace(s.pooled_cov, inv_diag);
  const double c_pn = 1.0 + tr_r2 * std::pow(p, -1.5);
  const double var_term = (tr_r2 - p * p / n) * c_pn;
  if (!(var_term > 0.0)) throw NumericalError("t_sd: nonpositive variance term");
  detail::CompensatedSum quad;
  for (Eigen::Index j = 0; j < s.p; ++j) {
    quad.add(s.mean_diff[j] * s.mean_diff[j] * inv_diag[j]);
  }
  const double numerator = s.n0 * quad.value() - n * p / (n - 2.0);
  const double statistic = numerator / std::sqrt(2.0 * var_term);
  return detail::make_outcome("SD", statistic, std::numeric_limits<double>::quiet_NaN(),
                              false);
}

// Posterior-Bayes-factor test configuration. When explicit_k is unset the
// regularizer follows the rule k = n log(n) p lambda_max((n-2) S_n).
struct PbConfig {
  double m = 0.0;
  std::optional<double> explicit_k;
};

inline TestOutcome t_pb(const TwoSampleSummary& s, const PbConfig& cfg = {}) {
  if (s.n() < 3) throw DataError("t_pb: requires n1 + n2 >= 3");
  const double n = static_cast<double>(s.n());
  const double p = static_cast<double>(s.p);
  double k;
  if (cfg.explicit_k) {
    k = *cfg.explicit_k;
  } else {
    const double lambda_max = (n - 2.0) * detail::largest_eigenvalue_sym(s.pooled_cov);
    k = n * std::log(n) * p * lambda_max;
  }
  if (!(k > 0.0)) throw NumericalError("t_pb: regularizer k must be positive");

  Eigen::MatrixXd a1 = 2.0 * s.pooled_cov;
  a1.diagonal().array() += k;
  Eigen::MatrixXd a2 = s.pooled_cov;
  a2.diagonal().array() += k;
  const Eigen::LLT<Eigen::MatrixXd> llt1(a1);
  const Eigen::LLT<Eigen::MatrixXd> llt2(a2);
  if (llt1.info() != Eigen::Success || llt2.info() != Eigen::Success) {
    throw NumericalError("t_pb: factorization failed");
  }

  const double c1 = 2.0 * (cfg.m + 2.0 * n);
  const double c2 = cfg.m + n;
  // B S_n and B D without forming B = c1 (2S+kI)^{-1} - c2 (S+kI)^{-1} itself.
  const Eigen::MatrixXd bs = c1 * llt1.solve(s.pooled_cov) - c2 * llt2.solve(s.pooled_cov);
  const Eigen::VectorXd bd = c1 * llt1.solve(s.mean_diff) - c2 * llt2.solve(s.mean_diff);

  const double tr_bs = detail::trace(bs);
  const double tr_bs2 = detail::trace_of_square(bs);
  const double var_term = tr_bs2 - tr_bs * tr_bs / (n - 2.0);
  if (!(var_term > 0.0)) throw NumericalError("t_pb: degenerate variance estimate");
  const double statistic =
      (s.n0 * s.mean_diff.dot(bd) - tr_bs) / std::sqrt(2.0 * var_term);
  return detail::make_outcome("PB", statistic, k, false);
}

}  // namespace hdmean
