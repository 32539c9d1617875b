#include "sipi/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

namespace sipi::io {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_field(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": non-finite value");
  }
  return v;
}

ordered_json finite_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string variance_name(const VarianceMode& v) { return v.known ? "known" : "unknown"; }

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> keys, const char* where) {
  for (const auto& [k, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw Error(ErrorCode::ConfigError, std::string("unknown key '") + k + "' in " + where);
    }
  }
}

}  // namespace

Matrix read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_field(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected " + std::to_string(width) +
                                             " fields, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

Matrix read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  try {
    return read_csv(in);
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + std::string(e.what()).substr(std::string("ParseError: ").size()));
  }
}

Vector read_csv_column(const std::string& path) {
  const Matrix m = read_csv_file(path);
  if (m.cols() != 1) throw Error(ErrorCode::ParseError, path + ": expected a single column");
  return m.col(0);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

ordered_json to_json(const TestResult& r) {
  ordered_json j;
  j["test_id"] = std::string(test_name(r.test_id));
  j["statistic"] = finite_or_null(r.statistic);
  j["p_value"] = r.p_value;

  ordered_json ref;
  ref["kind"] = std::string(reference_name(r.reference.kind));
  switch (r.reference.kind) {
    case ReferenceKind::MonteCarlo:
      ref["n_samples"] = r.reference.n_samples;
      ref["acceptance_rate"] = r.reference.acceptance_rate;
      ref["mc_standard_error"] = r.reference.mc_standard_error;
      break;
    case ReferenceKind::TruncNormal:
      ref["lower"] = finite_or_null(r.reference.lower);
      ref["upper"] = finite_or_null(r.reference.upper);
      break;
    case ReferenceKind::TruncF: {
      ordered_json set = ordered_json::array();
      for (const Interval& iv : r.reference.intervals) set.push_back({iv.lo, finite_or_null(iv.hi)});
      ref["intervals"] = set;
      ref["scale"] = r.reference.scale;
      ref["df1"] = r.reference.df1;
      ref["df2"] = r.reference.df2;
      break;
    }
    case ReferenceKind::ClassicalT: ref["df"] = r.reference.df1; break;
    case ReferenceKind::ClassicalF:
      ref["df1"] = r.reference.df1;
      ref["df2"] = r.reference.df2;
      break;
    case ReferenceKind::Degenerate: break;
  }
  j["reference"] = ref;

  ordered_json null_spec;
  null_spec["theta0"] = r.theta0;
  null_spec["beta0"] = std::vector<double>(r.beta0.data(), r.beta0.data() + r.beta0.size());
  j["null"] = null_spec;
  j["selected"] = r.selected;
  j["lambda"] = r.lambda;
  ordered_json diag = ordered_json::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = finite_or_null(v);
  j["diagnostics"] = diag;
  j["flags"] = r.flags;
  return j;
}

ordered_json to_json(const ChainConfig& c) {
  return {{"n_samples", c.n_samples},
          {"burn_in", c.burn_in},
          {"thin", c.thin},
          {"method", c.method == SamplerMethod::HitAndRun ? "hit_and_run" : "accept_reject"}};
}

ordered_json to_json(const SimConfig& c) {
  ordered_json j;
  j["n"] = c.n;
  j["p_x"] = c.p_x;
  j["p_z"] = c.p_z;
  j["p_real"] = c.p_real;
  j["b_x"] = c.b_x;
  j["b_z"] = c.b_z;
  j["n_reps"] = c.n_reps;
  j["alpha"] = c.alpha;
  if (c.lambda_policy.kind == LambdaPolicy::Kind::Fixed) {
    j["lambda"] = c.lambda_policy.value;
  } else {
    j["auto_lambda"] = {c.lambda_policy.low, c.lambda_policy.high};
  }
  std::vector<std::string> methods;
  for (TestId id : c.methods) methods.emplace_back(test_name(id));
  j["methods"] = methods;
  j["seed"] = c.seed;
  j["chain"] = to_json(c.chain);
  j["variance"] = variance_name(c.variance);
  if (c.variance.known) j["sigma2"] = c.variance.sigma2;
  j["folds"] = c.folds;
  j["split_frac"] = c.split_frac;
  j["intercept"] = c.intercept;
  return j;
}

ordered_json to_json(const SimSummary& s) {
  ordered_json j;
  j["lambdas"] = {{"full", s.lambdas.full}, {"half", s.lambdas.half}, {"prevalidation", s.lambdas.prevalidation}};
  ordered_json methods = ordered_json::array();
  for (const MethodSummary& m : s.methods) {
    ordered_json mj;
    mj["method"] = std::string(test_name(m.method));
    mj["valid_replicates"] = m.p_values.size();
    mj["rejections"] = m.rejections;
    mj["rejection_rate"] = m.rejection_rate;
    mj["mean_true_positives"] = m.mean_true_positives;
    mj["ks_statistic"] = m.ks_statistic;
    mj["failures"] = m.failures;
    mj["failure_codes"] = m.failure_codes;
    mj["p_values"] = m.p_values;
    methods.push_back(mj);
  }
  j["methods"] = methods;
  return j;
}

ordered_json to_json(const std::vector<SizeRow>& rows) {
  ordered_json out = ordered_json::array();
  for (const SizeRow& r : rows) {
    out.push_back({{"size", r.size}, {"ks_statistic", r.ks_statistic}, {"p_values", r.p_values}});
  }
  return out;
}

void from_json(const json& j, ChainConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "chain must be an object");
  reject_unknown(j, {"n_samples", "burn_in", "thin", "method"}, "chain");
  try {
    take(j, "n_samples", c.n_samples);
    take(j, "burn_in", c.burn_in);
    take(j, "thin", c.thin);
    if (j.contains("method")) {
      const auto m = j.at("method").get<std::string>();
      if (m == "hit_and_run") {
        c.method = SamplerMethod::HitAndRun;
      } else if (m == "accept_reject") {
        c.method = SamplerMethod::AcceptReject;
      } else {
        throw Error(ErrorCode::ConfigError, "unknown sampler '" + m + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("chain: ") + e.what());
  }
}

void from_json(const json& j, SimConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  reject_unknown(j,
                 {"n", "p_x", "p_z", "p_real", "b_x", "b_z", "n_reps", "alpha", "lambda", "auto_lambda", "methods",
                  "seed", "chain", "variance", "sigma2", "folds", "split_frac", "intercept", "threads"},
                 "config");
  try {
    take(j, "n", c.n);
    take(j, "p_x", c.p_x);
    take(j, "p_z", c.p_z);
    take(j, "p_real", c.p_real);
    take(j, "b_x", c.b_x);
    take(j, "b_z", c.b_z);
    take(j, "n_reps", c.n_reps);
    take(j, "alpha", c.alpha);
    take(j, "seed", c.seed);
    take(j, "folds", c.folds);
    take(j, "split_frac", c.split_frac);
    take(j, "intercept", c.intercept);
    take(j, "threads", c.threads);
    if (j.contains("lambda") && j.contains("auto_lambda")) {
      throw Error(ErrorCode::ConfigError, "give either lambda or auto_lambda");
    }
    if (j.contains("lambda")) c.lambda_policy = LambdaPolicy::fixed(j.at("lambda").get<double>());
    if (j.contains("auto_lambda")) {
      const auto range = j.at("auto_lambda").get<std::vector<int>>();
      if (range.size() != 2) throw Error(ErrorCode::ConfigError, "auto_lambda needs [low, high]");
      c.lambda_policy = LambdaPolicy::auto_sparsity(range[0], range[1]);
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& name : j.at("methods").get<std::vector<std::string>>()) {
        const auto id = parse_test_id(name);
        if (!id) throw Error(ErrorCode::ConfigError, "unknown method '" + name + "'");
        c.methods.push_back(*id);
      }
    }
    if (j.contains("chain")) from_json(j.at("chain"), c.chain);
    if (j.contains("variance")) {
      const auto v = j.at("variance").get<std::string>();
      if (v == "known") {
        c.variance = VarianceMode::known_value(j.value("sigma2", 1.0));
      } else if (v == "unknown") {
        c.variance = VarianceMode::unknown();
      } else {
        throw Error(ErrorCode::ConfigError, "variance must be 'known' or 'unknown'");
      }
    } else if (j.contains("sigma2")) {
      c.variance = VarianceMode::known_value(j.at("sigma2").get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
}

void write_pvalue_table(std::ostream& out, const SimSummary& s) {
  out << "replicate,method,p_value,n_true_positives\n";
  struct Row {
    int rep;
    std::size_t method;
    double p;
    int tp;
  };
  std::vector<Row> rows;
  for (std::size_t k = 0; k < s.methods.size(); ++k) {
    const MethodSummary& m = s.methods[k];
    for (std::size_t i = 0; i < m.p_values.size(); ++i) rows.push_back({m.replicates[i], k, m.p_values[i], m.true_positives[i]});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.rep != b.rep ? a.rep < b.rep : a.method < b.method;
  });
  for (const Row& r : rows) {
    out << r.rep << ',' << test_name(s.methods[r.method].method) << ',' << format_double(r.p) << ',' << r.tp << '\n';
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
}

}  // namespace sipi::io
