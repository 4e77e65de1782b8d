#pragma once

#include <Eigen/Dense>
#include <string>

#include "hdmean/detail/sum.hpp"
#include "hdmean/error.hpp"

namespace hdmean {

// Rows are observations, columns are variables.
using SampleMatrix = Eigen::MatrixXd;

// Sufficient statistics shared by all two-sample tests: the mean difference
// and the pooled covariance with divisor n - 2.
struct TwoSampleSummary {
  Eigen::Index n1 = 0;
  Eigen::Index n2 = 0;
  Eigen::Index p = 0;
  double n0 = 0.0;              // n1 * n2 / n
  Eigen::VectorXd mean_diff;    // D = col-mean(x1) - col-mean(x2)
  Eigen::MatrixXd pooled_cov;   // S, symmetric by construction
  Eigen::VectorXd pooled_diag;  // diag(S)

  Eigen::Index n() const { return n1 + n2; }
};

inline void validate_sample(const SampleMatrix& x, const char* which) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw DataError(std::string(which) + ": sample must have at least one row and one column");
  }
  if (!x.allFinite()) {
    throw DataError(std::string(which) + ": sample contains non-finite values");
  }
}

inline TwoSampleSummary pooled_summary(const SampleMatrix& x1, const SampleMatrix& x2) {
  validate_sample(x1, "pooled_summary: x1");
  validate_sample(x2, "pooled_summary: x2");
  if (x1.cols() != x2.cols()) {
    throw DataError("pooled_summary: samples have different dimensions (" +
                    std::to_string(x1.cols()) + " vs " + std::to_string(x2.cols()) + ")");
  }
  if (x1.rows() < 2 || x2.rows() < 2) {
    throw DataError("pooled_summary: each sample needs at least 2 observations");
  }

  TwoSampleSummary s;
  s.n1 = x1.rows();
  s.n2 = x2.rows();
  s.p = x1.cols();
  const double n = static_cast<double>(s.n());
  s.n0 = static_cast<double>(s.n1) * static_cast<double>(s.n2) / n;

  const Eigen::RowVectorXd m1 = x1.colwise().mean();
  const Eigen::RowVectorXd m2 = x2.colwise().mean();
  s.mean_diff = (m1 - m2).transpose();

  const Eigen::MatrixXd c1 = x1.rowwise() - m1;
  const Eigen::MatrixXd c2 = x2.rowwise() - m2;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(s.p, s.p);
  scatter.selfadjointView<Eigen::Lower>().rankUpdate(c1.transpose());
  scatter.selfadjointView<Eigen::Lower>().rankUpdate(c2.transpose());
  scatter /= n - 2.0;
  scatter.triangularView<Eigen::StrictlyUpper>() = scatter.transpose();
  s.pooled_cov = std::move(scatter);
  s.pooled_diag = s.pooled_cov.diagonal();
  return s;
}

// Diagonal regularization Lambda = (diag(S) + k I)^{-1}. Keeps per-coordinate
// variance information without inverting the (typically singular) full S.
struct RegularizedDiag {
  double k = 0.0;
  Eigen::VectorXd lambda;  // lambda_j = 1 / (S_jj + k)
};

inline RegularizedDiag regularize_diag(const TwoSampleSummary& s, double k) {
  if (!(k > 0.0)) throw DataError("regularize_diag: k must be positive");
  RegularizedDiag reg;
  reg.k = k;
  reg.lambda = (s.pooled_diag.array() + k).inverse();
  return reg;
}

namespace detail {

// sum_j w_j * diag_j
inline double weighted_diag_trace(const Eigen::VectorXd& diag, const Eigen::VectorXd& w) {
  CompensatedSum acc;
  for (Eigen::Index j = 0; j < diag.size(); ++j) acc.add(w[j] * diag[j]);
  return acc.value();
}

// sum_{i,j} w_i w_j S_ij^2 = tr((W S)^2) for diagonal W and symmetric S.
inline double weighted_sq_trace(const Eigen::MatrixXd& S, const Eigen::VectorXd& w) {
  const Eigen::Index p = S.rows();
  CompensatedSum diag_acc;
  CompensatedSum off_acc;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double wj = w[j];
    const double sjj = S(j, j);
    diag_acc.add(wj * wj * sjj * sjj);
    for (Eigen::Index i = j + 1; i < p; ++i) {
      const double sij = S(i, j);
      off_acc.add(w[i] * wj * sij * sij);
    }
  }
  return diag_acc.value() + 2.0 * off_acc.value();
}

}  // namespace detail

// tr(U_n) with U_n = Lambda_n S_n; each summand S_jj / (S_jj + k) < 1, so the
// result never exceeds p.
inline double trace_u(const TwoSampleSummary& s, const RegularizedDiag& reg) {
  if (reg.lambda.size() != s.p) throw DataError("trace_u: dimension mismatch");
  return detail::weighted_diag_trace(s.pooled_diag, reg.lambda);
}

// Estimator of tr(U^2): tr(U_n^2) - (tr U_n)^2 / (n - 2). A degenerate input
// can push it to zero or (through rounding) slightly negative; callers guard.
inline double trace_u2_hat(const TwoSampleSummary& s, const RegularizedDiag& reg) {
  if (reg.lambda.size() != s.p) throw DataError("trace_u2_hat: dimension mismatch");
  if (s.n() < 3) throw DataError("trace_u2_hat: requires n1 + n2 >= 3");
  const double tr_u = trace_u(s, reg);
  const double tr_u2 = detail::weighted_sq_trace(s.pooled_cov, reg.lambda);
  return tr_u2 - tr_u * tr_u / static_cast<double>(s.n() - 2);
}

// n0 * D' Lambda D
inline double quadratic_form(const TwoSampleSummary& s, const RegularizedDiag& reg) {
  if (reg.lambda.size() != s.p) throw DataError("quadratic_form: dimension mismatch");
  detail::CompensatedSum acc;
  for (Eigen::Index j = 0; j < s.p; ++j) {
    acc.add(reg.lambda[j] * s.mean_diff[j] * s.mean_diff[j]);
  }
  return s.n0 * acc.value();
}

}  // namespace hdmean
