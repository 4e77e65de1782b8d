#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hdmean/error.hpp"
#include "hdmean/mc.hpp"
#include "hdmean/scenario_io.hpp"

namespace hdmean {

// Grouped observation table: one row per observation, a group label per row.
struct DatasetTable {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;
  std::vector<std::string> variable_names;  // empty when the file had no header

  // Group names in order of first appearance; this fixes pair enumeration.
  std::vector<std::string> group_names() const {
    std::vector<std::string> out;
    for (const auto& label : labels) {
      if (std::find(out.begin(), out.end(), label) == out.end()) out.push_back(label);
    }
    return out;
  }

  std::vector<Eigen::Index> rows_of(const std::string& group) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(labels.size()); ++i) {
      if (labels[static_cast<std::size_t>(i)] == group) out.push_back(i);
    }
    return out;
  }

  Eigen::MatrixXd submatrix(const std::string& group) const {
    const auto rows = rows_of(group);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
    }
    return out;
  }
};

struct CsvOptions {
  char delimiter = ',';
  bool has_header = true;
  std::string label_column;  // header name, or 0-based column index
  std::string label_file;    // alternative: one label per observation row
};

namespace detail {

inline bool is_missing_token(const std::string& token) {
  return token.empty() || token == "NA" || token == "na" || token == "NaN" ||
         token == "nan" || token == "NAN" || token == "NULL" || token == "null" ||
         token == "?";
}

inline std::vector<std::string> split_row(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string token;
  std::stringstream ss(line);
  while (std::getline(ss, token, delimiter)) out.push_back(trim(token));
  if (!line.empty() && line.back() == delimiter) out.emplace_back();
  return out;
}

inline double parse_cell(const std::string& token, std::size_t row, std::size_t col) {
  if (is_missing_token(token)) {
    throw DataError("missing value at row " + std::to_string(row) + ", column " +
                    std::to_string(col));
  }
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw DataError("cannot parse '" + token + "' at row " + std::to_string(row) +
                    ", column " + std::to_string(col));
  }
  return v;
}

}  // namespace detail

inline DatasetTable load_csv(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(detail::split_row(line, options.delimiter));
  }
  if (rows.empty()) throw DataError("'" + path + "' contains no data");

  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (options.has_header) {
    header = rows[0];
    first_data = 1;
    if (rows.size() < 2) throw DataError("'" + path + "' has a header but no data rows");
  }
  const std::size_t n_cols = rows[first_data].size();
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    if (rows[r].size() != n_cols) {
      throw DataError("ragged row " + std::to_string(r + 1) + " in '" + path + "': expected " +
                      std::to_string(n_cols) + " fields, got " + std::to_string(rows[r].size()));
    }
  }

  // Resolve the label source: companion file, or a column by name/index.
  std::optional<std::size_t> label_col;
  std::vector<std::string> file_labels;
  if (!options.label_file.empty()) {
    std::ifstream lin(options.label_file);
    if (!lin) throw DataError("cannot open label file '" + options.label_file + "'");
    std::string label_line;
    while (std::getline(lin, label_line)) {
      if (!label_line.empty() && label_line.back() == '\r') label_line.pop_back();
      const std::string trimmed = detail::trim(label_line);
      if (!trimmed.empty()) file_labels.push_back(trimmed);
    }
    if (file_labels.size() != rows.size() - first_data) {
      throw DataError("label file '" + options.label_file + "' has " +
                      std::to_string(file_labels.size()) + " labels for " +
                      std::to_string(rows.size() - first_data) + " observations");
    }
  } else {
    if (options.label_column.empty()) {
      throw DataError("no label column or label file given");
    }
    if (options.has_header) {
      for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == options.label_column) {
          label_col = c;
          break;
        }
      }
    }
    if (!label_col) {
      char* end = nullptr;
      const long idx = std::strtol(options.label_column.c_str(), &end, 10);
      if (end != options.label_column.c_str() && *end == '\0' && idx >= 0 &&
          static_cast<std::size_t>(idx) < n_cols) {
        label_col = static_cast<std::size_t>(idx);
      }
    }
    if (!label_col) {
      throw DataError("unknown label column '" + options.label_column + "'");
    }
  }

  const std::size_t n_obs = rows.size() - first_data;
  const std::size_t n_vars = label_col ? n_cols - 1 : n_cols;
  if (n_vars < 1) throw DataError("'" + path + "' has no variable columns");

  DatasetTable table;
  table.values.resize(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(n_vars));
  table.labels.reserve(n_obs);
  if (options.has_header) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (label_col && c == *label_col) continue;
      table.variable_names.push_back(header[c]);
    }
  }
  for (std::size_t r = 0; r < n_obs; ++r) {
    const auto& row = rows[r + first_data];
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (label_col && c == *label_col) continue;
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(out_c)) =
          detail::parse_cell(row[c], r + first_data + 1, c + 1);
      ++out_c;
    }
    table.labels.push_back(label_col ? row[*label_col] : file_labels[r]);
  }

  const auto groups = table.group_names();
  if (groups.size() < 2) {
    throw DataError("'" + path + "' has fewer than 2 groups");
  }
  for (const auto& g : groups) {
    if (table.rows_of(g).size() < 2) {
      throw DataError("group '" + g + "' has fewer than 2 observations");
    }
  }
  return table;
}

// Writes values + label column; load_csv(write_csv(t)) reproduces t exactly.
inline void write_csv(const DatasetTable& table, const std::string& path,
                      char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "label";
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    out << delimiter;
    if (static_cast<std::size_t>(c) < table.variable_names.size()) {
      out << table.variable_names[static_cast<std::size_t>(c)];
    } else {
      out << "v" << c;
    }
  }
  out << '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    out << table.labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << delimiter << format_double(table.values(r, c));
    }
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

struct PairwiseResult {
  std::string group_a;
  std::string group_b;
  std::string test;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double log_p = std::numeric_limits<double>::quiet_NaN();
  bool rejected = false;
  std::string note;  // failure or skip reason; empty on success
};

// Evaluates the requested tests on every unordered group pair. One summary is
// built per pair and shared by all tests; per-test failures are recorded in
// the result rather than aborting the run. Pairs are independent, so they are
// distributed over `threads` workers; output order is fixed by enumeration.
inline std::vector<PairwiseResult> run_pairwise(const DatasetTable& table,
                                                const std::vector<TestId>& tests,
                                                double k = 1.0, double alpha = 0.05,
                                                int threads = 1) {
  if (tests.empty()) throw DataError("run_pairwise: no tests requested");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("run_pairwise: alpha must be in (0, 1)");
  const auto groups = table.group_names();
  if (groups.size() < 2) throw DataError("run_pairwise: need at least 2 groups");

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) pairs.emplace_back(i, j);
  }

  std::vector<std::vector<PairwiseResult>> per_pair(pairs.size());
  auto evaluate_pair = [&](std::size_t pair_idx) {
    const auto& [gi, gj] = pairs[pair_idx];
    const Eigen::MatrixXd x1 = table.submatrix(groups[gi]);
    const Eigen::MatrixXd x2 = table.submatrix(groups[gj]);
    const TwoSampleSummary summary = pooled_summary(x1, x2);

    CorrectionSet corrections;
    const CorrectionSet* cs = nullptr;
    std::string cs_note;
    if (std::find(tests.begin(), tests.end(), TestId::Bf2) != tests.end()) {
      if (summary.n() < 5) {
        cs_note = "skipped: pair has n1 + n2 < 5";
      } else {
        try {
          corrections = correction_coefficients(summary, k);
          cs = &corrections;
        } catch (const std::exception& e) {
          cs_note = e.what();
        }
      }
    }

    for (const TestId id : tests) {
      PairwiseResult res;
      res.group_a = groups[gi];
      res.group_b = groups[gj];
      res.test = to_string(id);
      try {
        TestOutcome o;
        switch (id) {
          case TestId::Bf1: o = t_bf1(summary, k); break;
          case TestId::Bf2:
            if (cs == nullptr) throw NumericalError(cs_note);
            o = t_bf2(summary, k, corrections);
            break;
          case TestId::Bs: o = t_bs(summary); break;
          case TestId::Cq: o = detail::t_cq_impl(x1, x2, summary); break;
          case TestId::Sd: o = t_sd(summary); break;
          case TestId::Pb: o = t_pb(summary); break;
        }
        res.statistic = o.statistic;
        res.p_value = o.p_value;
        res.log_p = o.log_p;
        res.rejected = o.p_value <= alpha;
      } catch (const std::exception& e) {
        res.note = e.what();
      }
      per_pair[pair_idx].push_back(std::move(res));
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(pairs.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < pairs.size(); ++i) evaluate_pair(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= pairs.size()) return;
          evaluate_pair(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<PairwiseResult> out;
  for (auto& chunk : per_pair) {
    for (auto& res : chunk) out.push_back(std::move(res));
  }
  return out;
}

}  // namespace hdmean
