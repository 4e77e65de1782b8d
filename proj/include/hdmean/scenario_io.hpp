#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hdmean/error.hpp"
#include "hdmean/mc.hpp"

namespace hdmean {

// Shortest round-trip decimal representation; keeps report files byte-stable
// across runs and worker counts.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline const char* to_string(SigmaKind kind) {
  switch (kind) {
    case SigmaKind::Identity: return "S1";
    case SigmaKind::Ar04: return "S2";
    case SigmaKind::Block: return "S3";
    case SigmaKind::SpikedDiag: return "S4";
    case SigmaKind::RandomScale: return "S5";
  }
  return "?";
}

inline const char* to_string(MeanKind kind) {
  switch (kind) {
    case MeanKind::NullZero: return "null";
    case MeanKind::Alt1: return "alt1";
    case MeanKind::Alt2: return "alt2";
    case MeanKind::BlockPm: return "block_pm";
    case MeanKind::SparsePm: return "sparse_pm";
    case MeanKind::Fixed: return "fixed";
  }
  return "?";
}

inline const char* to_string(InnovationKind kind) {
  return kind == InnovationKind::Gaussian ? "gaussian" : "chi2";
}

inline SigmaKind parse_sigma_kind(std::string_view token) {
  if (token == "S1" || token == "s1") return SigmaKind::Identity;
  if (token == "S2" || token == "s2") return SigmaKind::Ar04;
  if (token == "S3" || token == "s3") return SigmaKind::Block;
  if (token == "S4" || token == "s4") return SigmaKind::SpikedDiag;
  if (token == "S5" || token == "s5") return SigmaKind::RandomScale;
  throw DataError("unknown covariance kind '" + std::string(token) +
                  "' (expected S1..S5)");
}

inline MeanSpec parse_mean_kind(std::string_view token, double p0) {
  if (token == "null") return MeanSpec::null_zero();
  if (token == "alt1") return MeanSpec::alt1(p0);
  if (token == "alt2") return MeanSpec::alt2(p0);
  if (token == "block_pm") return MeanSpec::block_pm();
  if (token == "sparse_pm") return MeanSpec::sparse_pm();
  throw DataError("unknown mean kind '" + std::string(token) +
                  "' (expected null, alt1, alt2, block_pm, sparse_pm)");
}

inline InnovationKind parse_innovation(std::string_view token) {
  if (token == "gaussian") return InnovationKind::Gaussian;
  if (token == "chi2") return InnovationKind::CenteredChi2;
  throw DataError("unknown innovation kind '" + std::string(token) +
                  "' (expected gaussian or chi2)");
}

inline std::vector<TestId> parse_test_list(std::string_view csv) {
  std::vector<TestId> out;
  std::string token;
  std::stringstream ss{std::string(csv)};
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    const auto id = parse_test_id(token);
    if (!id) {
      if (token == "rm" || token == "RM") {
        throw DataError("the RM (random projection) test is not implemented");
      }
      throw DataError("unknown test '" + token + "' (expected bf1,bf2,bs,cq,sd,pb)");
    }
    out.push_back(*id);
  }
  if (out.empty()) throw DataError("empty test list");
  return out;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

inline std::string report_csv_header() {
  return "sigma,sigma_seed,mean,p0,n1,n2,p,innov,alpha,reps,seed,k,test,rate,se,"
         "mean_statistic,failures\n";
}

inline void append_report_csv(std::string& out, const McReport& report) {
  const ScenarioSpec& s = report.spec;
  std::string prefix;
  prefix += to_string(s.sigma_kind);
  prefix += ',';
  prefix += std::to_string(s.sigma_seed);
  prefix += ',';
  prefix += to_string(s.mean.kind);
  prefix += ',';
  prefix += format_double(s.mean.p0);
  prefix += ',';
  prefix += std::to_string(s.n1);
  prefix += ',';
  prefix += std::to_string(s.n2);
  prefix += ',';
  prefix += std::to_string(s.p);
  prefix += ',';
  prefix += to_string(s.innov);
  prefix += ',';
  prefix += format_double(s.alpha);
  prefix += ',';
  prefix += std::to_string(s.reps);
  prefix += ',';
  prefix += std::to_string(s.seed);
  prefix += ',';
  prefix += format_double(s.k_bf);
  for (const auto& [id, agg] : report.results) {
    out += prefix;
    out += ',';
    out += to_string(id);
    out += ',';
    out += format_double(agg.rate);
    out += ',';
    out += format_double(agg.se);
    out += ',';
    out += format_double(agg.mean_statistic);
    out += ',';
    out += std::to_string(agg.failures);
    out += '\n';
  }
}

inline std::string reports_to_csv(const std::vector<McReport>& reports) {
  std::string out = report_csv_header();
  for (const auto& r : reports) append_report_csv(out, r);
  return out;
}

// Structured-document variant of the same fields (plus wall time).
inline nlohmann::json report_to_json(const McReport& report) {
  const ScenarioSpec& s = report.spec;
  nlohmann::json scenario{
      {"sigma", to_string(s.sigma_kind)}, {"sigma_seed", s.sigma_seed},
      {"mean", to_string(s.mean.kind)},   {"p0", s.mean.p0},
      {"n1", s.n1},                       {"n2", s.n2},
      {"p", s.p},                         {"innov", to_string(s.innov)},
      {"alpha", s.alpha},                 {"reps", s.reps},
      {"seed", s.seed},                   {"k", s.k_bf}};
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& [id, agg] : report.results) {
    tests.push_back({{"test", to_string(id)},
                     {"rate", agg.rate},
                     {"se", agg.se},
                     {"mean_statistic", agg.mean_statistic},
                     {"rejections", agg.rejections},
                     {"successes", agg.successes},
                     {"failures", agg.failures}});
  }
  return nlohmann::json{
      {"scenario", scenario}, {"results", tests}, {"wall_seconds", report.wall_seconds}};
}

inline nlohmann::json reports_to_json(const std::vector<McReport>& reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) out.push_back(report_to_json(r));
  return out;
}

// ---------------------------------------------------------------------------
// key=value scenario configuration
//
// A config file describes a grid of scenarios. sigma, mean, p, n and p0 accept
// comma lists and expand as a cartesian product in the order
// sigma -> mean -> p -> n -> p0. '#' starts a comment.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view sv) {
  const auto begin = sv.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = sv.find_last_not_of(" \t\r");
  return std::string(sv.substr(begin, end - begin + 1));
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

inline double parse_number(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DataError("config: invalid number '" + value + "' for key '" + key + "'");
  }
}

inline long parse_integer(const std::string& value, const std::string& key) {
  const double v = parse_number(value, key);
  const long i = static_cast<long>(v);
  if (static_cast<double>(i) != v) {
    throw DataError("config: key '" + key + "' must be an integer, got '" + value + "'");
  }
  return i;
}

inline bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw DataError("config: key '" + key + "' must be a boolean, got '" + value + "'");
}

}  // namespace detail

inline std::vector<ScenarioSpec> parse_scenario_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw DataError("config: line " + std::to_string(line_no) + " is not key=value");
    }
    const std::string key = detail::trim(trimmed.substr(0, eq));
    const std::string value = detail::trim(trimmed.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw DataError("config: line " + std::to_string(line_no) + " has an empty key or value");
    }
    if (!kv.emplace(key, value).second) {
      throw DataError("config: duplicate key '" + key + "'");
    }
  }

  static const std::vector<std::string> known = {
      "sigma", "sigma_seed", "mean",  "p0",   "p",     "n",    "n1",
      "n2",    "innov",      "alpha", "reps", "seed",  "k",    "tests",
      "pb_m",  "pb_k",       "strict", "alt_redraw"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) throw DataError("config: unknown key '" + key + "'");
  }

  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (!get("sigma")) throw DataError("config: missing required key 'sigma'");
  if (!get("p")) throw DataError("config: missing required key 'p'");
  if (get("n") && (get("n1") || get("n2"))) {
    throw DataError("config: give either n or n1/n2, not both");
  }
  if (!get("n") && !(get("n1") && get("n2"))) {
    throw DataError("config: missing sample sizes (n, or n1 and n2)");
  }

  ScenarioSpec base;
  if (const auto* v = get("sigma_seed")) base.sigma_seed = detail::parse_integer(*v, "sigma_seed");
  if (const auto* v = get("innov")) base.innov = parse_innovation(*v);
  if (const auto* v = get("alpha")) base.alpha = detail::parse_number(*v, "alpha");
  if (const auto* v = get("reps")) base.reps = detail::parse_integer(*v, "reps");
  if (const auto* v = get("seed")) base.seed = detail::parse_integer(*v, "seed");
  if (const auto* v = get("k")) base.k_bf = detail::parse_number(*v, "k");
  if (const auto* v = get("pb_m")) base.pb.m = detail::parse_number(*v, "pb_m");
  if (const auto* v = get("pb_k")) base.pb.explicit_k = detail::parse_number(*v, "pb_k");
  if (const auto* v = get("strict")) base.strict = detail::parse_bool(*v, "strict");
  if (const auto* v = get("alt_redraw")) base.alt_redraw = detail::parse_bool(*v, "alt_redraw");
  base.tests = get("tests") ? parse_test_list(*get("tests")) : all_test_ids();

  const std::vector<std::string> sigmas = detail::split_list(*get("sigma"));
  const std::vector<std::string> means =
      get("mean") ? detail::split_list(*get("mean")) : std::vector<std::string>{"null"};
  const std::vector<std::string> ps = detail::split_list(*get("p"));
  std::vector<std::pair<long, long>> sizes;
  if (const auto* v = get("n")) {
    for (const auto& token : detail::split_list(*v)) {
      const long n = detail::parse_integer(token, "n");
      sizes.emplace_back(n, n);
    }
  } else {
    sizes.emplace_back(detail::parse_integer(*get("n1"), "n1"),
                       detail::parse_integer(*get("n2"), "n2"));
  }
  const std::vector<std::string> p0s =
      get("p0") ? detail::split_list(*get("p0")) : std::vector<std::string>{"0.5"};
  if (sigmas.empty() || means.empty() || ps.empty() || sizes.empty() || p0s.empty()) {
    throw DataError("config: empty value list");
  }

  std::vector<ScenarioSpec> out;
  for (const auto& sigma : sigmas) {
    for (const auto& mean : means) {
      for (const auto& p : ps) {
        for (const auto& [n1, n2] : sizes) {
          // p0 only varies the alt means; other kinds get a single cell
          const bool alt = mean == "alt1" || mean == "alt2";
          const std::size_t p0_count = alt ? p0s.size() : 1;
          for (std::size_t i = 0; i < p0_count; ++i) {
            ScenarioSpec spec = base;
            spec.sigma_kind = parse_sigma_kind(sigma);
            spec.mean = parse_mean_kind(mean, detail::parse_number(p0s[i], "p0"));
            spec.p = detail::parse_integer(p, "p");
            spec.n1 = n1;
            spec.n2 = n2;
            out.push_back(std::move(spec));
          }
        }
      }
    }
  }
  return out;
}

}  // namespace hdmean
