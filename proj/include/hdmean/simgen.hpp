#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hdmean/error.hpp"
#include "hdmean/rng.hpp"
#include "hdmean/summary.hpp"

namespace hdmean {

// Covariance configurations used by the simulation study.
//   Identity     : I_p
//   Ar04         : sigma_ij = 0.4^{|i-j|}
//   Block        : diag 12/j for j <= 12 then 1; 0.3 on the first off-diagonal,
//                  0.1^{|i-j|} beyond it
//   SpikedDiag   : diag(20/j for j <= 20, then 1)
//   RandomScale  : D^{1/2} Omega D^{1/2}, D_jj ~ U(1,3) iid from `seed`,
//                  Omega_ij = 0.6^{|i-j|}
enum class SigmaKind { Identity, Ar04, Block, SpikedDiag, RandomScale };

struct SigmaSpec {
  SigmaKind kind = SigmaKind::Identity;
  Eigen::Index p = 1;
  std::uint64_t seed = 0;  // consumed by RandomScale only
};

namespace detail {

inline double min_eigenvalue_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

inline Eigen::MatrixXd build_sigma(const SigmaSpec& spec) {
  if (spec.p < 1) throw DataError("build_sigma: dimension must be >= 1");
  const Eigen::Index p = spec.p;
  Eigen::MatrixXd sigma;
  switch (spec.kind) {
    case SigmaKind::Identity:
      return Eigen::MatrixXd::Identity(p, p);
    case SigmaKind::Ar04: {
      sigma.resize(p, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) {
          sigma(i, j) = std::pow(0.4, std::abs(double(i - j)));
        }
      }
      break;
    }
    case SigmaKind::Block: {
      if (p < 13) throw DataError("build_sigma: block covariance needs p >= 13");
      sigma.setZero(p, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        sigma(j, j) = j < 12 ? 12.0 / double(j + 1) : 1.0;
        for (Eigen::Index i = j + 1; i < p; ++i) {
          const double v = (i - j == 1) ? 0.3 : std::pow(0.1, double(i - j));
          sigma(i, j) = v;
          sigma(j, i) = v;
        }
      }
      break;
    }
    case SigmaKind::SpikedDiag: {
      sigma.setZero(p, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        sigma(j, j) = j < 20 ? 20.0 / double(j + 1) : 1.0;
      }
      break;
    }
    case SigmaKind::RandomScale: {
      StreamRng rng(spec.seed, 0, StreamRole::SigmaBuild, 0);
      Eigen::VectorXd d(p);
      for (Eigen::Index j = 0; j < p; ++j) d[j] = 1.0 + 2.0 * rng.uniform01();
      const Eigen::VectorXd root = d.cwiseSqrt();
      sigma.resize(p, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) {
          sigma(i, j) = root[i] * root[j] * std::pow(0.6, std::abs(double(i - j)));
        }
      }
      break;
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("build_sigma: matrix not positive definite; min eigenvalue = " +
                         std::to_string(detail::min_eigenvalue_sym(sigma)));
  }
  return sigma;
}

// Mean-difference constructions (mu1 is always 0):
//   NullZero : mu2 = 0
//   Alt1     : mu2 ~ N(1, I) with floor(p0 p) coordinates zeroed, scaled so
//              that delta' Sigma^{-1} delta = 2
//   Alt2     : same support, scaled so that delta' delta = 0.1 sqrt(tr Sigma^2)
//   BlockPm  : first 25% of coordinates +0.5, last 25% -0.5
//   SparsePm : first 10% +0.4, last 10% -0.4
//   Fixed    : explicit vector
enum class MeanKind { NullZero, Alt1, Alt2, BlockPm, SparsePm, Fixed };

struct MeanSpec {
  MeanKind kind = MeanKind::NullZero;
  double p0 = 0.0;    // sparsity fraction, Alt1/Alt2 only
  double frac = 0.0;  // pattern fraction, BlockPm/SparsePm
  double mag = 0.0;   // pattern magnitude, BlockPm/SparsePm
  Eigen::VectorXd fixed;

  static MeanSpec null_zero() { return MeanSpec{}; }
  static MeanSpec alt1(double p0) { return MeanSpec{MeanKind::Alt1, p0, 0.0, 0.0, {}}; }
  static MeanSpec alt2(double p0) { return MeanSpec{MeanKind::Alt2, p0, 0.0, 0.0, {}}; }
  static MeanSpec block_pm() { return MeanSpec{MeanKind::BlockPm, 0.0, 0.25, 0.5, {}}; }
  static MeanSpec sparse_pm() { return MeanSpec{MeanKind::SparsePm, 0.0, 0.10, 0.4, {}}; }
  static MeanSpec fixed_vector(Eigen::VectorXd v) {
    return MeanSpec{MeanKind::Fixed, 0.0, 0.0, 0.0, std::move(v)};
  }

  bool random() const { return kind == MeanKind::Alt1 || kind == MeanKind::Alt2; }
};

namespace detail {

inline Eigen::VectorXd build_mean_impl(const MeanSpec& spec, const Eigen::MatrixXd& sigma,
                                       const Eigen::LLT<Eigen::MatrixXd>* sigma_llt,
                                       const double* tr_sigma2, StreamRng& rng) {
  const Eigen::Index p = sigma.rows();
  switch (spec.kind) {
    case MeanKind::NullZero:
      return Eigen::VectorXd::Zero(p);
    case MeanKind::Fixed:
      if (spec.fixed.size() != p) throw DataError("build_mean: fixed vector has wrong size");
      return spec.fixed;
    case MeanKind::BlockPm:
    case MeanKind::SparsePm: {
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
      const Eigen::Index nb = static_cast<Eigen::Index>(std::floor(spec.frac * double(p)));
      mu.head(nb).setConstant(spec.mag);
      mu.tail(nb).setConstant(-spec.mag);
      return mu;
    }
    case MeanKind::Alt1:
    case MeanKind::Alt2: {
      if (!(spec.p0 >= 0.0 && spec.p0 < 1.0)) {
        throw DataError("build_mean: sparsity p0 must lie in [0, 1)");
      }
      Eigen::VectorXd mu(p);
      for (Eigen::Index j = 0; j < p; ++j) mu[j] = 1.0 + rng.normal();
      // zero out floor(p0 p) uniformly chosen coordinates
      const Eigen::Index zeros = static_cast<Eigen::Index>(std::floor(spec.p0 * double(p)));
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      for (Eigen::Index t = 0; t < zeros; ++t) {
        const auto pick = t + static_cast<Eigen::Index>(
                                  rng.next_below(static_cast<std::uint64_t>(p - t)));
        std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(pick)]);
        mu[idx[static_cast<std::size_t>(t)]] = 0.0;
      }
      double scale_sq;
      if (spec.kind == MeanKind::Alt1) {
        double quad;
        if (sigma_llt != nullptr) {
          quad = mu.dot(sigma_llt->solve(mu));
        } else {
          const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
          if (llt.info() != Eigen::Success) {
            throw NumericalError("build_mean: sigma factorization failed");
          }
          quad = mu.dot(llt.solve(mu));
        }
        if (!(quad > 0.0)) throw NumericalError("build_mean: degenerate alternative draw");
        scale_sq = 2.0 / quad;
      } else {
        const double tr2 = tr_sigma2 != nullptr
                               ? *tr_sigma2
                               : weighted_sq_trace(sigma, Eigen::VectorXd::Ones(p));
        const double ss = mu.squaredNorm();
        if (!(ss > 0.0)) throw NumericalError("build_mean: degenerate alternative draw");
        scale_sq = 0.1 * std::sqrt(tr2) / ss;
      }
      return mu * std::sqrt(scale_sq);
    }
  }
  throw DataError("build_mean: unknown mean kind");
}

}  // namespace detail

inline Eigen::VectorXd build_mean(const MeanSpec& spec, const Eigen::MatrixXd& sigma,
                                  StreamRng& rng) {
  return detail::build_mean_impl(spec, sigma, nullptr, nullptr, rng);
}

// Symmetric PSD square root via eigendecomposition.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) throw DataError("sqrt_psd: matrix must be square");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DataError("sqrt_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success) throw NumericalError("sqrt_psd: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
    throw NumericalError("sqrt_psd: negative eigenvalue " + std::to_string(ev.minCoeff()));
  }
  const Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd result =
      es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  result = 0.5 * (result + result.transpose()).eval();
  return result;
}

enum class InnovationKind { Gaussian, CenteredChi2 };

namespace detail {

inline bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace detail

// Draws the two samples X_g = mu_g + Sigma^{1/2} Z row by row. Each row owns
// the stream keyed by (seed, replication, group, row), so output is identical
// whatever order rows are generated in.
inline std::pair<SampleMatrix, SampleMatrix> sample_pair(
    const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
    const Eigen::MatrixXd& sigma_root, Eigen::Index n1, Eigen::Index n2,
    InnovationKind innov, std::uint64_t seed, std::uint64_t replication) {
  const Eigen::Index p = sigma_root.rows();
  if (sigma_root.cols() != p) throw DataError("sample_pair: sigma_root must be square");
  if (mu1.size() != p || mu2.size() != p) throw DataError("sample_pair: mean dimension mismatch");
  if (n1 < 1 || n2 < 1) throw DataError("sample_pair: sample sizes must be >= 1");

  const bool diag_root = detail::is_diagonal(sigma_root);
  const Eigen::VectorXd root_diag = sigma_root.diagonal();

  auto fill = [&](SampleMatrix& x, const Eigen::VectorXd& mu, int group) {
    Eigen::VectorXd z(p);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      StreamRng rng(seed, replication, group_role(group), static_cast<std::uint64_t>(i));
      if (innov == InnovationKind::Gaussian) {
        for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
      } else {
        for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.centered_chi2_unit();
      }
      if (diag_root) {
        x.row(i) = (mu + root_diag.cwiseProduct(z)).transpose();
      } else {
        x.row(i) = (mu + sigma_root * z).transpose();
      }
    }
  };

  SampleMatrix x1(n1, p);
  SampleMatrix x2(n2, p);
  fill(x1, mu1, 0);
  fill(x2, mu2, 1);
  return {std::move(x1), std::move(x2)};
}

}  // namespace hdmean
