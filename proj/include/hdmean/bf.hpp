#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "hdmean/error.hpp"
#include "hdmean/normal.hpp"
#include "hdmean/quadrature.hpp"
#include "hdmean/summary.hpp"

namespace hdmean {

// One evaluated test: the standardized statistic and its one-sided upper-tail
// p-value under N(0, 1). Rejection region is {statistic >= u_{1-alpha}},
// equivalently {p_value <= alpha}.
struct TestOutcome {
  std::string name;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double log_p = std::numeric_limits<double>::quiet_NaN();
  double k_used = std::numeric_limits<double>::quiet_NaN();
  bool corrected = false;
};

namespace detail {

inline TestOutcome make_outcome(const char* name, double statistic, double k_used,
                                bool corrected) {
  if (!std::isfinite(statistic)) {
    throw NumericalError(std::string(name) + ": non-finite statistic");
  }
  TestOutcome o;
  o.name = name;
  o.statistic = statistic;
  o.p_value = normal_sf(statistic);
  o.log_p = log_normal_sf(statistic);
  o.k_used = k_used;
  o.corrected = corrected;
  return o;
}

}  // namespace detail

// Diagonally regularized mean test:
//   T = (n0 D' Lambda_n D - tr(U_n)) / sqrt(2 (tr(U_n^2) - (tr U_n)^2/(n-2))).
inline TestOutcome t_bf1(const TwoSampleSummary& s, double k = 1.0) {
  if (s.n() < 4) throw DataError("t_bf1: requires n1 + n2 >= 4");
  const RegularizedDiag reg = regularize_diag(s, k);
  const double var_hat = trace_u2_hat(s, reg);
  if (!(var_hat > 0.0)) {
    throw NumericalError("t_bf1: degenerate variance estimate (tr(U^2) estimate <= 0)");
  }
  const double statistic =
      (quadratic_form(s, reg) - trace_u(s, reg)) / std::sqrt(2.0 * var_hat);
  return detail::make_outcome("BF1", statistic, k, false);
}

// Per-coordinate small-sample bias corrections. r1 recenters the quadratic
// form, r2 recenters tr(U_n), r3 rescales the squared-diagonal terms of the
// variance estimator; all tend to 1 as n grows.
struct CorrectionSet {
  Eigen::VectorXd r1;
  Eigen::VectorXd r2;
  Eigen::VectorXd r3;
  double quadrature_tol = 1e-8;
  Eigen::Index n_used = 0;
};

// Coefficients are chi-square ratio expectations at a_hat_j = k (n-2) h / S_jj,
// h = (n-4)/(n-2); h/S_jj is the unbiased estimator of 1/Sigma_jj.
inline CorrectionSet correction_coefficients(const TwoSampleSummary& s, double k,
                                             double tol = 1e-8) {
  if (s.n() < 5) throw DataError("correction_coefficients: requires n1 + n2 >= 5");
  if (!(k > 0.0)) throw DataError("correction_coefficients: k must be positive");
  const Eigen::Index n = s.n();
  const int df = static_cast<int>(n) - 2;
  const double dfd = static_cast<double>(df);
  const double h = static_cast<double>(n - 4) / dfd;

  CorrectionSet cs;
  cs.r1.resize(s.p);
  cs.r2.resize(s.p);
  cs.r3.resize(s.p);
  cs.quadrature_tol = tol;
  cs.n_used = n;
  for (Eigen::Index j = 0; j < s.p; ++j) {
    const double sjj = s.pooled_diag[j];
    if (!(sjj > 0.0)) {
      throw NumericalError("correction_coefficients: zero sample variance in coordinate " +
                           std::to_string(j));
    }
    const double a_hat = k * dfd * h / sjj;
    const ChiSqRatioExpectations e = chi2_ratio_expectations(a_hat, df, tol);
    cs.r1[j] = e.inv_shift;
    cs.r2[j] = (dfd + a_hat) / dfd * e.ratio;
    const double shrink = dfd / (dfd + a_hat);
    cs.r3[j] = dfd / static_cast<double>(n - 3) * shrink * shrink / e.ratio_sq;
  }
  return cs;
}

// Small-sample corrected statistic. The corrected variance estimator applies
// sqrt(r3) symmetrically: tr(U*^2) = sum_ij sqrt(r3_i r3_j) lam_i lam_j S_ij^2
// and tr(U*) = sum_j sqrt(r3_j) lam_j S_jj, which reduces to the uncorrected
// estimator when r3 = 1.
inline TestOutcome t_bf2(const TwoSampleSummary& s, double k, const CorrectionSet& cs) {
  if (s.n() < 5) throw DataError("t_bf2: requires n1 + n2 >= 5");
  if (cs.r1.size() != s.p || cs.r2.size() != s.p || cs.r3.size() != s.p) {
    throw DataError("t_bf2: correction set dimension mismatch");
  }
  if (cs.n_used != s.n()) throw DataError("t_bf2: correction set built for a different n");
  const RegularizedDiag reg = regularize_diag(s, k);

  detail::CompensatedSum qf;
  detail::CompensatedSum tr;
  for (Eigen::Index j = 0; j < s.p; ++j) {
    const double d = s.mean_diff[j];
    qf.add(reg.lambda[j] / cs.r1[j] * d * d);
    tr.add(s.pooled_diag[j] * reg.lambda[j] / cs.r2[j]);
  }
  const double numerator = s.n0 * qf.value() - tr.value();

  const Eigen::VectorXd w = cs.r3.cwiseSqrt().cwiseProduct(reg.lambda);
  const double tr_star = detail::weighted_diag_trace(s.pooled_diag, w);
  const double tr2_star = detail::weighted_sq_trace(s.pooled_cov, w);
  const double var_hat = tr2_star - tr_star * tr_star / static_cast<double>(s.n() - 2);
  if (!(var_hat > 0.0)) {
    throw NumericalError("t_bf2: degenerate corrected variance estimate");
  }
  return detail::make_outcome("BF2", numerator / std::sqrt(2.0 * var_hat), k, true);
}

// log Gamma_p(x) = (p(p-1)/4) log pi + sum_{j=1..p} lgamma(x + (1-j)/2).
inline double log_multigamma(int p, double x) {
  if (p < 1) throw DataError("log_multigamma: p must be >= 1");
  if (!(x + 0.5 * (1.0 - static_cast<double>(p)) > 0.0)) {
    throw NumericalError("log_multigamma: argument hits a gamma pole");
  }
  detail::CompensatedSum acc;
  for (int j = 1; j <= p; ++j) {
    acc.add(std::lgamma(x + 0.5 * (1.0 - static_cast<double>(j))));
  }
  return 0.25 * static_cast<double>(p) * static_cast<double>(p - 1) * std::log(kPi) +
         acc.value();
}

// Priors for the exact Bayes factor: Sigma ~ W^{-1}(m0, k' I) under H0 and
// W^{-1}(m1, k' I) under H1; flat priors on the means. The exponent parameter
// m defaults to m1.
struct BayesFactorInputs {
  double m0;
  double m1;
  double k_prime;
  double m;

  BayesFactorInputs(double m0_in, double m1_in, double k_prime_in)
      : m0(m0_in), m1(m1_in), k_prime(k_prime_in), m(m1_in) {}
  BayesFactorInputs(double m0_in, double m1_in, double k_prime_in, double m_in)
      : m0(m0_in), m1(m1_in), k_prime(k_prime_in), m(m_in) {}
};

// log BF_10 = (p/2) log(pi/n0) + p log k' + log Gamma_p(m0/2) - log Gamma_p(m1/2)
//           + ((m+n)/2) log(1 + n0 D'(A_n + k' I)^{-1} D),  A_n = (n-2) S_n.
// The quadratic form uses a symmetric positive-definite solve, never an
// explicit inverse.
inline double log_bayes_factor(const TwoSampleSummary& s, const BayesFactorInputs& in) {
  const double p = static_cast<double>(s.p);
  if (!(in.k_prime > 0.0)) throw DataError("log_bayes_factor: k' must be positive");
  if (!(in.m0 > p - 1.0) || !(in.m1 > p - 1.0)) {
    throw DataError("log_bayes_factor: inverse Wishart dof must exceed p - 1");
  }
  Eigen::MatrixXd shifted = static_cast<double>(s.n() - 2) * s.pooled_cov;
  shifted.diagonal().array() += in.k_prime;
  const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("log_bayes_factor: A_n + k' I is not positive definite");
  }
  const double quad = s.n0 * s.mean_diff.dot(llt.solve(s.mean_diff));
  return 0.5 * p * std::log(kPi / s.n0) + p * std::log(in.k_prime) +
         log_multigamma(static_cast<int>(s.p), 0.5 * in.m0) -
         log_multigamma(static_cast<int>(s.p), 0.5 * in.m1) +
         0.5 * (in.m + static_cast<double>(s.n())) * std::log1p(quad);
}

// Asymptotic power Phi(-u_{1-alpha} + n0 delta' Lambda delta / sqrt(2 tr(U^2)))
// for known covariance; Lambda = (diag Sigma + k I)^{-1}, U = Lambda Sigma.
inline double asymptotic_power(const Eigen::VectorXd& delta, const Eigen::MatrixXd& sigma,
                               double k, double n0, double alpha) {
  if (sigma.rows() != sigma.cols()) throw DataError("asymptotic_power: sigma must be square");
  if (delta.size() != sigma.rows()) throw DataError("asymptotic_power: dimension mismatch");
  if (!(k > 0.0)) throw DataError("asymptotic_power: k must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("asymptotic_power: alpha must be in (0, 1)");
  if (!((sigma.diagonal().array() > 0.0).all())) {
    throw DataError("asymptotic_power: sigma diagonal must be positive");
  }
  const Eigen::VectorXd lambda = (sigma.diagonal().array() + k).inverse();
  const double tr_u2 = detail::weighted_sq_trace(sigma, lambda);
  detail::CompensatedSum shift;
  for (Eigen::Index j = 0; j < delta.size(); ++j) {
    shift.add(lambda[j] * delta[j] * delta[j]);
  }
  return normal_cdf(-normal_quantile(1.0 - alpha) +
                    n0 * shift.value() / std::sqrt(2.0 * tr_u2));
}

}  // namespace hdmean
