#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hdmean/baselines.hpp"
#include "hdmean/bf.hpp"
#include "hdmean/normal.hpp"
#include "hdmean/simgen.hpp"
#include "hdmean/summary.hpp"

namespace hdmean {

enum class TestId { Bf1, Bf2, Bs, Cq, Sd, Pb };

inline const char* to_string(TestId id) {
  switch (id) {
    case TestId::Bf1: return "BF1";
    case TestId::Bf2: return "BF2";
    case TestId::Bs: return "BS";
    case TestId::Cq: return "CQ";
    case TestId::Sd: return "SD";
    case TestId::Pb: return "PB";
  }
  return "?";
}

inline std::optional<TestId> parse_test_id(std::string token) {
  for (auto& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (token == "bf1") return TestId::Bf1;
  if (token == "bf2") return TestId::Bf2;
  if (token == "bs") return TestId::Bs;
  if (token == "cq") return TestId::Cq;
  if (token == "sd") return TestId::Sd;
  if (token == "pb") return TestId::Pb;
  return std::nullopt;
}

inline std::vector<TestId> all_test_ids() {
  return {TestId::Bf1, TestId::Bf2, TestId::Bs, TestId::Cq, TestId::Sd, TestId::Pb};
}

// One simulation cell. mu1 is always zero; mu2 comes from `mean`.
struct ScenarioSpec {
  SigmaKind sigma_kind = SigmaKind::Identity;
  std::uint64_t sigma_seed = 0;
  MeanSpec mean;
  Eigen::Index n1 = 0;
  Eigen::Index n2 = 0;
  Eigen::Index p = 0;
  InnovationKind innov = InnovationKind::Gaussian;
  double alpha = 0.05;
  long reps = 5000;
  std::uint64_t seed = 1;
  std::vector<TestId> tests;
  double k_bf = 1.0;
  PbConfig pb;
  bool strict = true;      // abort on a per-replication test failure
  bool alt_redraw = true;  // redraw the Alt1/Alt2 support every replication
};

struct TestAggregate {
  long rejections = 0;
  long failures = 0;
  long successes = 0;
  double rate = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double mean_statistic = std::numeric_limits<double>::quiet_NaN();
};

struct McReport {
  ScenarioSpec spec;
  std::vector<std::pair<TestId, TestAggregate>> results;  // ordered as spec.tests
  double wall_seconds = 0.0;
};

using ProgressFn = std::function<void(long done, long total)>;

namespace detail {

struct RepOutcome {
  double statistic = std::numeric_limits<double>::quiet_NaN();
  std::uint8_t rejected = 0;
  std::uint8_t failed = 0;
};

inline void validate_scenario(const ScenarioSpec& spec) {
  if (spec.reps < 1) throw DataError("scenario: reps must be >= 1");
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw DataError("scenario: alpha must be in (0, 1)");
  if (spec.n1 < 2 || spec.n2 < 2) throw DataError("scenario: n1 and n2 must be >= 2");
  if (spec.p < 1) throw DataError("scenario: p must be >= 1");
  if (spec.tests.empty()) throw DataError("scenario: no tests requested");
  const Eigen::Index n = spec.n1 + spec.n2;
  for (TestId id : spec.tests) {
    if ((id == TestId::Bf1 || id == TestId::Bf2) && !(spec.k_bf > 0.0)) {
      throw DataError("scenario: k must be positive for the BF tests");
    }
    if (id == TestId::Bf1 && n < 4) throw DataError("scenario: BF1 requires n1 + n2 >= 4");
    if (id == TestId::Bf2 && n < 5) throw DataError("scenario: BF2 requires n1 + n2 >= 5");
  }
  if (spec.mean.kind == MeanKind::Fixed && spec.mean.fixed.size() != spec.p) {
    throw DataError("scenario: fixed mean vector does not match p");
  }
}

inline TestOutcome evaluate_test(TestId id, const SampleMatrix& x1, const SampleMatrix& x2,
                                 const TwoSampleSummary& s, const ScenarioSpec& spec,
                                 const CorrectionSet* cs, const std::string& cs_error) {
  switch (id) {
    case TestId::Bf1:
      return t_bf1(s, spec.k_bf);
    case TestId::Bf2:
      if (cs == nullptr) throw NumericalError(cs_error);
      return t_bf2(s, spec.k_bf, *cs);
    case TestId::Bs:
      return t_bs(s);
    case TestId::Cq:
      return t_cq_impl(x1, x2, s);
    case TestId::Sd:
      return t_sd(s);
    case TestId::Pb:
      return t_pb(s, spec.pb);
  }
  throw DataError("evaluate_test: unknown test id");
}

// Runs every replication and returns the per-replication outcome table,
// laid out as cells[r * T + t]. Replications are keyed by their index, so
// the table is bitwise identical for any worker count.
inline std::vector<RepOutcome> run_cells(const ScenarioSpec& spec, int threads,
                                         const ProgressFn& progress) {
  validate_scenario(spec);

  const SigmaSpec sigma_spec{spec.sigma_kind, spec.p, spec.sigma_seed};
  const Eigen::MatrixXd sigma = build_sigma(sigma_spec);
  const Eigen::MatrixXd root = sqrt_psd(sigma);
  const Eigen::VectorXd mu1 = Eigen::VectorXd::Zero(spec.p);

  std::optional<Eigen::LLT<Eigen::MatrixXd>> sigma_llt;
  double tr_sigma2 = 0.0;
  if (spec.mean.kind == MeanKind::Alt1) {
    sigma_llt.emplace(sigma);
    if (sigma_llt->info() != Eigen::Success) {
      throw NumericalError("scenario: sigma factorization failed");
    }
  } else if (spec.mean.kind == MeanKind::Alt2) {
    tr_sigma2 = weighted_sq_trace(sigma, Eigen::VectorXd::Ones(spec.p));
  }

  const bool per_rep_mean = spec.mean.random() && spec.alt_redraw;
  Eigen::VectorXd fixed_mu2;
  if (!per_rep_mean) {
    StreamRng rng(spec.seed, 0, StreamRole::MeanDraw, 0);
    fixed_mu2 = build_mean_impl(spec.mean, sigma, sigma_llt ? &*sigma_llt : nullptr,
                                spec.mean.kind == MeanKind::Alt2 ? &tr_sigma2 : nullptr, rng);
  }

  const bool need_corrections =
      std::find(spec.tests.begin(), spec.tests.end(), TestId::Bf2) != spec.tests.end();

  const long total = spec.reps;
  const std::size_t n_tests = spec.tests.size();
  std::vector<RepOutcome> cells(static_cast<std::size_t>(total) * n_tests);

  std::atomic<long> done{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::mutex progress_mutex;
  const long progress_step = std::max<long>(1, total / 50);

  auto worker = [&](long lo, long hi) {
    try {
      for (long r = lo; r < hi; ++r) {
        if (stop.load(std::memory_order_relaxed)) return;

        Eigen::VectorXd mu2;
        if (per_rep_mean) {
          StreamRng rng(spec.seed, static_cast<std::uint64_t>(r), StreamRole::MeanDraw, 0);
          mu2 = build_mean_impl(spec.mean, sigma, sigma_llt ? &*sigma_llt : nullptr,
                                spec.mean.kind == MeanKind::Alt2 ? &tr_sigma2 : nullptr, rng);
        } else {
          mu2 = fixed_mu2;
        }
        const auto [x1, x2] = sample_pair(mu1, mu2, root, spec.n1, spec.n2, spec.innov,
                                          spec.seed, static_cast<std::uint64_t>(r));
        const TwoSampleSummary summary = pooled_summary(x1, x2);

        CorrectionSet corrections;
        const CorrectionSet* cs = nullptr;
        std::string cs_error;
        if (need_corrections) {
          try {
            corrections = correction_coefficients(summary, spec.k_bf);
            cs = &corrections;
          } catch (const std::exception& e) {
            cs_error = e.what();
          }
        }

        for (std::size_t t = 0; t < n_tests; ++t) {
          RepOutcome& cell = cells[static_cast<std::size_t>(r) * n_tests + t];
          try {
            const TestOutcome o =
                evaluate_test(spec.tests[t], x1, x2, summary, spec, cs, cs_error);
            cell.statistic = o.statistic;
            cell.rejected = o.p_value <= spec.alpha ? 1 : 0;
          } catch (const std::exception& e) {
            if (spec.strict) {
              throw NumericalError("replication " + std::to_string(r) + ", test " +
                                   to_string(spec.tests[t]) + ": " + e.what());
            }
            cell.failed = 1;
          }
        }

        const long d = done.fetch_add(1, std::memory_order_relaxed) + 1;
        if (progress && (d % progress_step == 0 || d == total)) {
          std::lock_guard<std::mutex> lock(progress_mutex);
          progress(d, total);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      stop.store(true, std::memory_order_relaxed);
    }
  };

  const int workers = std::max(1, threads);
  if (workers == 1 || total == 1) {
    worker(0, total);
  } else {
    const long chunk = (total + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      const long lo = std::min<long>(total, static_cast<long>(w) * chunk);
      const long hi = std::min<long>(total, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return cells;
}

}  // namespace detail

inline McReport run_scenario(const ScenarioSpec& spec, int threads = 1,
                             const ProgressFn& progress = {}) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<detail::RepOutcome> cells = detail::run_cells(spec, threads, progress);

  McReport report;
  report.spec = spec;
  const std::size_t n_tests = spec.tests.size();
  for (std::size_t t = 0; t < n_tests; ++t) {
    TestAggregate agg;
    detail::CompensatedSum stat_sum;
    for (long r = 0; r < spec.reps; ++r) {
      const detail::RepOutcome& cell = cells[static_cast<std::size_t>(r) * n_tests + t];
      if (cell.failed) {
        ++agg.failures;
      } else {
        ++agg.successes;
        agg.rejections += cell.rejected;
        stat_sum.add(cell.statistic);
      }
    }
    if (agg.successes > 0) {
      agg.rate = static_cast<double>(agg.rejections) / static_cast<double>(agg.successes);
      agg.se = std::sqrt(agg.rate * (1.0 - agg.rate) / static_cast<double>(agg.successes));
      agg.mean_statistic = stat_sum.value() / static_cast<double>(agg.successes);
    }
    report.results.emplace_back(spec.tests[t], agg);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// Distribution summary of null statistics: sorted values plus a
// Kolmogorov-Smirnov comparison against N(0, 1).
struct TestNullDiagnostics {
  TestId id;
  std::vector<double> sorted_statistics;
  double ks_distance = 0.0;
  double ks_p_value = 0.0;
};

namespace detail {

inline std::pair<double, double> ks_against_std_normal(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf(sorted[i]);
    d = std::max(d, f - static_cast<double>(i) / static_cast<double>(n));
    d = std::max(d, static_cast<double>(i + 1) / static_cast<double>(n) - f);
  }
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  return {d, kolmogorov_sf(lambda)};
}

}  // namespace detail

inline std::vector<TestNullDiagnostics> null_statistic_diagnostics(const ScenarioSpec& spec,
                                                                   int threads = 1) {
  if (spec.mean.kind != MeanKind::NullZero) {
    throw DataError("null_statistic_diagnostics: scenario mean must be the null (zero)");
  }
  if (spec.reps < 50) {
    throw DataError("null_statistic_diagnostics: insufficient replications (< 50)");
  }
  const std::vector<detail::RepOutcome> cells = detail::run_cells(spec, threads, {});
  std::vector<TestNullDiagnostics> out;
  const std::size_t n_tests = spec.tests.size();
  for (std::size_t t = 0; t < n_tests; ++t) {
    TestNullDiagnostics diag;
    diag.id = spec.tests[t];
    diag.sorted_statistics.reserve(static_cast<std::size_t>(spec.reps));
    for (long r = 0; r < spec.reps; ++r) {
      const detail::RepOutcome& cell = cells[static_cast<std::size_t>(r) * n_tests + t];
      if (!cell.failed) diag.sorted_statistics.push_back(cell.statistic);
    }
    std::sort(diag.sorted_statistics.begin(), diag.sorted_statistics.end());
    if (diag.sorted_statistics.size() < 50) {
      throw NumericalError("null_statistic_diagnostics: fewer than 50 usable statistics");
    }
    std::tie(diag.ks_distance, diag.ks_p_value) =
        detail::ks_against_std_normal(diag.sorted_statistics);
    out.push_back(std::move(diag));
  }
  return out;
}

enum class SweepAxis { P0, N, P };

inline std::vector<McReport> power_curve(const ScenarioSpec& base, SweepAxis axis,
                                         const std::vector<double>& values, int threads = 1,
                                         const ProgressFn& progress = {}) {
  if (values.empty()) throw DataError("power_curve: sweep values must be non-empty");
  std::vector<McReport> out;
  out.reserve(values.size());
  for (const double v : values) {
    ScenarioSpec spec = base;
    switch (axis) {
      case SweepAxis::P0:
        if (!spec.mean.random()) {
          throw DataError("power_curve: p0 sweep needs an alt1/alt2 mean");
        }
        spec.mean.p0 = v;
        break;
      case SweepAxis::N: {
        const auto n = static_cast<Eigen::Index>(v);
        if (static_cast<double>(n) != v || n < 2) {
          throw DataError("power_curve: n values must be integers >= 2");
        }
        spec.n1 = n;
        spec.n2 = n;
        break;
      }
      case SweepAxis::P: {
        const auto p = static_cast<Eigen::Index>(v);
        if (static_cast<double>(p) != v || p < 1) {
          throw DataError("power_curve: p values must be integers >= 1");
        }
        spec.p = p;
        break;
      }
    }
    out.push_back(run_scenario(spec, threads, progress));
  }
  return out;
}

// (asymptotic power, empirical power) for a fixed mean difference; the
// empirical side reruns the scenario with mu2 = delta.
inline std::pair<double, double> theoretical_vs_empirical(const ScenarioSpec& spec,
                                                          const Eigen::VectorXd& delta,
                                                          int threads = 1) {
  const SigmaSpec sigma_spec{spec.sigma_kind, spec.p, spec.sigma_seed};
  const Eigen::MatrixXd sigma = build_sigma(sigma_spec);
  const double n0 = static_cast<double>(spec.n1) * static_cast<double>(spec.n2) /
                    static_cast<double>(spec.n1 + spec.n2);
  const double theoretical = asymptotic_power(delta, sigma, spec.k_bf, n0, spec.alpha);

  ScenarioSpec empirical_spec = spec;
  empirical_spec.mean = MeanSpec::fixed_vector(delta);
  const bool prefer_bf2 =
      std::find(spec.tests.begin(), spec.tests.end(), TestId::Bf2) != spec.tests.end() &&
      std::find(spec.tests.begin(), spec.tests.end(), TestId::Bf1) == spec.tests.end();
  empirical_spec.tests = {prefer_bf2 ? TestId::Bf2 : TestId::Bf1};
  const McReport report = run_scenario(empirical_spec, threads);
  return {theoretical, report.results.front().second.rate};
}

}  // namespace hdmean
