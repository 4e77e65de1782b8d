#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <string>
#include <vector>

#include "hdmean/error.hpp"

namespace hdmean {

// Expectations of ratio functionals of Y ~ chi^2_df used by the small-sample
// bias corrections:
//   InvShift: E[(df + a) / (Y + a)]
//   Ratio:    E[Y / (Y + a)]
//   RatioSq:  E[(Y / (Y + a))^2]
enum class ChiSqRatioForm { InvShift, Ratio, RatioSq };

struct ChiSqRatioExpectations {
  double inv_shift = 0.0;
  double ratio = 0.0;
  double ratio_sq = 0.0;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kGk15Nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kGk15Weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr std::array<double, 4> kGauss7Weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct ChiSqRatioIntegrand {
  double a;
  double df;
  double log_norm;  // lgamma(df/2) + (df/2) log 2

  // Vector integrand on t in (0, 1) after the substitution y = df t / (1 - t).
  std::array<double, 3> operator()(double t) const {
    const double one_minus = 1.0 - t;
    if (!(one_minus > 0.0) || !(t > 0.0)) return {0.0, 0.0, 0.0};
    const double y = df * t / one_minus;
    const double log_density =
        (0.5 * df - 1.0) * std::log(y) - 0.5 * y - log_norm;
    const double jacobian = df / (one_minus * one_minus);
    const double weight = std::exp(log_density) * jacobian;
    if (weight == 0.0 || !std::isfinite(weight)) return {0.0, 0.0, 0.0};
    const double denom = y + a;
    const double ratio = y / denom;
    return {weight * (df + a) / denom, weight * ratio, weight * ratio * ratio};
  }
};

struct QuadCell {
  double lo, hi;
  std::array<double, 3> integral;
  std::array<double, 3> error;
  double priority;  // max component error

  bool operator<(const QuadCell& other) const { return priority < other.priority; }
};

inline QuadCell gk15_cell(const ChiSqRatioIntegrand& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  std::array<double, 3> kronrod{0.0, 0.0, 0.0};
  std::array<double, 3> gauss{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < kGk15Nodes.size(); ++i) {
    const double x = kGk15Nodes[i];
    std::array<double, 3> v;
    if (i + 1 == kGk15Nodes.size()) {
      v = f(center);  // central node
    } else {
      const auto lo_v = f(center - half * x);
      const auto hi_v = f(center + half * x);
      for (int c = 0; c < 3; ++c) v[c] = lo_v[c] + hi_v[c];
    }
    for (int c = 0; c < 3; ++c) kronrod[c] += kGk15Weights[i] * v[c];
    if (i % 2 == 1 || i + 1 == kGk15Nodes.size()) {
      const double wg = kGauss7Weights[i / 2];
      for (int c = 0; c < 3; ++c) gauss[c] += wg * v[c];
    }
  }
  QuadCell cell;
  cell.lo = lo;
  cell.hi = hi;
  cell.priority = 0.0;
  for (int c = 0; c < 3; ++c) {
    cell.integral[c] = kronrod[c] * half;
    cell.error[c] = std::abs((kronrod[c] - gauss[c]) * half);
    cell.priority = std::max(cell.priority, cell.error[c]);
  }
  return cell;
}

}  // namespace detail

// All three ratio expectations in one adaptive pass; the forms share every
// density evaluation.
inline ChiSqRatioExpectations chi2_ratio_expectations(double a, int df, double tol = 1e-8) {
  if (!(a >= 0.0) || !std::isfinite(a)) {
    throw DataError("chi2_ratio_expectations: a must be finite and >= 0");
  }
  if (df < 1) throw DataError("chi2_ratio_expectations: df must be >= 1");
  if (!(tol > 0.0)) throw DataError("chi2_ratio_expectations: tolerance must be positive");

  const double dfd = static_cast<double>(df);
  detail::ChiSqRatioIntegrand f{a, dfd,
                                std::lgamma(0.5 * dfd) + 0.5 * dfd * std::log(2.0)};

  constexpr std::size_t kMaxEvaluations = 200000;
  constexpr std::size_t kEvalsPerCell = 15;
  std::size_t evaluations = kEvalsPerCell;

  std::priority_queue<detail::QuadCell> cells;
  std::array<double, 3> total{0.0, 0.0, 0.0};
  std::array<double, 3> err{0.0, 0.0, 0.0};

  auto push = [&](const detail::QuadCell& cell) {
    for (int c = 0; c < 3; ++c) {
      total[c] += cell.integral[c];
      err[c] += cell.error[c];
    }
    cells.push(cell);
  };
  auto converged = [&]() {
    for (int c = 0; c < 3; ++c) {
      if (err[c] > std::max(tol, tol * std::abs(total[c]))) return false;
    }
    return true;
  };

  push(detail::gk15_cell(f, 0.0, 1.0));
  while (!converged()) {
    if (evaluations + 2 * kEvalsPerCell > kMaxEvaluations || cells.empty()) {
      throw NumericalError(
          "chi2_ratio_expectations: quadrature failed to converge (a = " +
          std::to_string(a) + ", df = " + std::to_string(df) + ")");
    }
    const detail::QuadCell worst = cells.top();
    cells.pop();
    for (int c = 0; c < 3; ++c) {
      total[c] -= worst.integral[c];
      err[c] -= worst.error[c];
    }
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      throw NumericalError("chi2_ratio_expectations: interval too small to split");
    }
    push(detail::gk15_cell(f, worst.lo, mid));
    push(detail::gk15_cell(f, mid, worst.hi));
    evaluations += 2 * kEvalsPerCell;
  }

  return {total[0], total[1], total[2]};
}

inline double chi2_ratio_expectation(double a, int df, ChiSqRatioForm form, double tol = 1e-8) {
  const ChiSqRatioExpectations e = chi2_ratio_expectations(a, df, tol);
  switch (form) {
    case ChiSqRatioForm::InvShift:
      return e.inv_shift;
    case ChiSqRatioForm::Ratio:
      return e.ratio;
    case ChiSqRatioForm::RatioSq:
      return e.ratio_sq;
  }
  throw DataError("chi2_ratio_expectation: unknown form");
}

}  // namespace hdmean
